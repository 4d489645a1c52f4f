//! Metric rows, event traces and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::trainer::Evaluation;
use crate::version::VersionVector;

pub const METRICS_HEADER: [&str; 8] = [
    "virtual_time",
    "event_index",
    "master_loss",
    "master_accuracy",
    "min_version",
    "max_version",
    "mean_version",
    "comm_count",
];

/// The master model's state at one evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub virtual_time: f64,
    /// Completed local trainings so far.
    pub event_index: u64,
    pub master_loss: f64,
    pub master_accuracy: f64,
    pub min_version: u64,
    pub max_version: u64,
    pub mean_version: f64,
    /// Model transfers so far (one per dispatch, one per upload).
    pub comm_count: u64,
}

/// One completed local training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub sequence_no: u64,
    pub branch_id: usize,
    pub client_id: usize,
    pub dispatch_time: f64,
    pub completion_time: f64,
}

/// One synchronous round (FedAvg only).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    pub start: f64,
    pub end: f64,
    pub clients: Vec<usize>,
}

impl RoundTrace {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub rows: Vec<MetricRow>,
    /// Completions in processing order.
    pub trace: Vec<TraceEntry>,
    pub rounds: Vec<RoundTrace>,
    /// Final master (GitFL) or global model.
    pub final_params: ParamVector,
    pub final_eval: Evaluation,
    /// Branch versions at shutdown; a single global update count for the
    /// baselines.
    pub final_versions: VersionVector,
    /// Completed trainings per client.
    pub client_counts: Vec<u64>,
    pub comm_count: u64,
}

impl RunReport {
    pub fn completions(&self) -> usize {
        self.trace.len()
    }

    /// Writes the metric series as CSV with [`METRICS_HEADER`].
    pub fn write_metrics<W: Write>(&self, out: W) -> Result<()> {
        write_metrics(&self.rows, out)
    }
}

pub fn write_metrics<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.write_record([
            r.virtual_time.to_string(),
            r.event_index.to_string(),
            r.master_loss.to_string(),
            r.master_accuracy.to_string(),
            r.min_version.to_string(),
            r.max_version.to_string(),
            r.mean_version.to_string(),
            r.comm_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().ne(METRICS_HEADER.iter().copied()) {
        return Err(Error::Data(format!("unexpected metrics header {:?}", headers)));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let field = |i: usize| -> &str { &record[i] };
        let bad = |i: usize| Error::Data(format!("line {}: bad `{}` value `{}`", line + 2, METRICS_HEADER[i], &record[i]));
        let float = |i: usize| field(i).parse::<f64>().map_err(|_| bad(i));
        let int = |i: usize| field(i).parse::<u64>().map_err(|_| bad(i));
        rows.push(MetricRow {
            virtual_time: float(0)?,
            event_index: int(1)?,
            master_loss: float(2)?,
            master_accuracy: float(3)?,
            min_version: int(4)?,
            max_version: int(5)?,
            mean_version: float(6)?,
            comm_count: int(7)?,
        });
    }
    Ok(rows)
}

/// Times `0, I, 2I, …, ⌊T/I⌋·I` at which the master is evaluated.
#[derive(Debug, Clone)]
pub(crate) struct EvalSchedule {
    interval: f64,
    next: u64,
    last: u64,
}

impl EvalSchedule {
    pub fn new(interval: f64, budget: f64) -> Self {
        Self {
            interval,
            next: 0,
            last: (budget / interval).floor() as u64,
        }
    }

    /// Next evaluation time still pending.
    pub fn peek(&self) -> Option<f64> {
        (self.next <= self.last).then_some(self.next as f64 * self.interval)
    }

    pub fn advance(&mut self) {
        self.next += 1;
    }
}

pub(crate) fn metric_row(
    time: f64,
    event_index: u64,
    eval: Evaluation,
    versions: &VersionVector,
    comm_count: u64,
) -> MetricRow {
    MetricRow {
        virtual_time: time,
        event_index,
        master_loss: eval.loss,
        master_accuracy: eval.accuracy,
        min_version: versions.min(),
        max_version: versions.max(),
        mean_version: versions.mean(),
        comm_count,
    }
}

/// First evaluation time whose accuracy reaches `target`, with the
/// communication count at that row.
pub fn time_to_accuracy(rows: &[MetricRow], target: f64) -> Option<(f64, u64)> {
    rows.iter()
        .find(|r| r.master_accuracy >= target)
        .map(|r| (r.virtual_time, r.comm_count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(t: f64, acc: f64) -> MetricRow {
        MetricRow {
            virtual_time: t,
            event_index: t as u64,
            master_loss: 1.0 - acc,
            master_accuracy: acc,
            min_version: 0,
            max_version: 1,
            mean_version: 0.5,
            comm_count: 2 * t as u64,
        }
    }

    #[test]
    fn schedule_row_count() {
        for (interval, budget) in [(100.0, 10_000.0), (300.0, 1000.0), (7.0, 6.0), (0.1, 1.0)] {
            let mut s = EvalSchedule::new(interval, budget);
            let mut n = 0u64;
            let mut prev = -1.0;
            while let Some(t) = s.peek() {
                assert!(t > prev && t <= budget + 1e-9);
                prev = t;
                n += 1;
                s.advance();
            }
            assert_eq!(n, (budget / interval).floor() as u64 + 1);
        }
    }

    #[test]
    fn time_to_accuracy_examples() {
        let rows: Vec<MetricRow> = (0..12).map(|i| row(100.0 * i as f64, 0.1 + 0.07 * i as f64)).collect();
        assert_eq!(time_to_accuracy(&rows, 0.05), Some((0.0, 0)));
        assert_eq!(time_to_accuracy(&rows, 1.01), None);
        // linear scan oracle
        let target = 0.6;
        let oracle = (0..rows.len()).find(|&i| rows[i].master_accuracy >= target).unwrap();
        assert_eq!(oracle, 8);
        assert_eq!(time_to_accuracy(&rows, target), Some((rows[oracle].virtual_time, rows[oracle].comm_count)));
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_metrics("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn metrics_csv_round_trips(raw in prop::collection::vec((0.0f64..1e6, 0u64..1000, -1e3f64..1e3, 0.0f64..=1.0, 0u64..50, 0.0f64..1e3), 0..20)) {
            let rows: Vec<MetricRow> = raw.iter().map(|&(t, e, l, a, v, m)| MetricRow {
                virtual_time: t, event_index: e, master_loss: l, master_accuracy: a,
                min_version: v, max_version: v + 3, mean_version: m, comm_count: 2 * e,
            }).collect();
            let mut buf = Vec::new();
            write_metrics(&rows, &mut buf).unwrap();
            prop_assert_eq!(read_metrics(buf.as_slice()).unwrap(), rows);
        }
    }
}
