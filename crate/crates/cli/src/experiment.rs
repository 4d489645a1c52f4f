//! Sweep execution, per-run output files and cross-seed summaries.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gitfl::sim::{read_metrics, run_with_env, time_to_accuracy, Environment, MetricRow, RunReport, TraceEntry};

use crate::config::{ExperimentSpec, RunSpec};
use crate::error::{CliError, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_SUFFIX: &str = ".trace.csv";

pub const SUMMARY_HEADER: [&str; 10] = [
    "cell",
    "runs",
    "final_accuracy_mean",
    "final_accuracy_stdev",
    "target",
    "reached",
    "time_to_target_mean",
    "time_to_target_stdev",
    "comm_to_target_mean",
    "comm_to_target_stdev",
];

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_stdev(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// One summary line: a grid cell aggregated over its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: String,
    pub runs: usize,
    pub final_accuracy: (f64, f64),
    pub target: Option<f64>,
    /// Runs whose master reached `target`.
    pub reached: usize,
    pub time_to_target: Option<(f64, f64)>,
    pub comm_to_target: Option<(f64, f64)>,
}

/// Aggregates the metric series of one cell. The final accuracy of a run is
/// that of its last evaluation row; time/communication to target average
/// over the runs that reached it.
pub fn summarize_cell(cell: &str, series: &[Vec<MetricRow>], target: Option<f64>) -> CellSummary {
    let finals: Vec<f64> = series
        .iter()
        .filter_map(|rows| rows.last().map(|r| r.master_accuracy))
        .collect();
    let hits: Vec<(f64, u64)> = match target {
        Some(t) => series.iter().filter_map(|rows| time_to_accuracy(rows, t)).collect(),
        None => Vec::new(),
    };
    let times: Vec<f64> = hits.iter().map(|h| h.0).collect();
    let comms: Vec<f64> = hits.iter().map(|h| h.1 as f64).collect();
    CellSummary {
        cell: cell.to_string(),
        runs: series.len(),
        final_accuracy: mean_stdev(&finals).unwrap_or((f64::NAN, f64::NAN)),
        target,
        reached: hits.len(),
        time_to_target: mean_stdev(&times),
        comm_to_target: mean_stdev(&comms),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_summary<W: Write>(lines: &[CellSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Sim(e.into());
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for s in lines {
        w.write_record([
            s.cell.clone(),
            s.runs.to_string(),
            s.final_accuracy.0.to_string(),
            s.final_accuracy.1.to_string(),
            opt(s.target),
            s.reached.to_string(),
            opt(s.time_to_target.map(|t| t.0)),
            opt(s.time_to_target.map(|t| t.1)),
            opt(s.comm_to_target.map(|t| t.0)),
            opt(s.comm_to_target.map(|t| t.1)),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Sim(e.into()))?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_trace<W: Write>(trace: &[TraceEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::Sim(e.into());
    w.write_record(["sequence_no", "branch_id", "client_id", "dispatch_time", "completion_time"])
        .map_err(csv_err)?;
    for e in trace {
        w.write_record([
            e.sequence_no.to_string(),
            e.branch_id.to_string(),
            e.client_id.to_string(),
            e.dispatch_time.to_string(),
            e.completion_time.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| CliError::Sim(e.into()))?;
    Ok(())
}

/// Runs one grid point and writes its output files.
pub fn execute_run(run: &RunSpec, dir: &Path, write_trace_file: bool) -> Result<RunReport> {
    let env = Environment::build(&run.config)?;
    let report = run_with_env(&run.config, &env)?;
    let path = dir.join(run.metrics_file());
    report.write_metrics(create(&path)?)?;
    if write_trace_file {
        write_trace(&report.trace, create(&dir.join(run.trace_file()))?)?;
    }
    Ok(report)
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub metrics_files: Vec<PathBuf>,
    pub summary_file: PathBuf,
    /// Runs that failed, by metrics file name.
    pub failures: Vec<(String, CliError)>,
    pub summary: Vec<CellSummary>,
}

impl ExperimentOutcome {
    /// 0 iff every run completed.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }
}

/// Executes every run of `spec`, continuing past failures, then writes the
/// summary of the runs that completed.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let dir = &spec.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut metrics_files = Vec::new();
    let mut failures = Vec::new();
    let mut by_cell: Vec<(String, Vec<Vec<MetricRow>>)> = Vec::new();
    for run in &spec.runs {
        if by_cell.last().is_none_or(|(c, _)| *c != run.cell) {
            by_cell.push((run.cell.clone(), Vec::new()));
        }
        match execute_run(run, dir, spec.write_trace) {
            Ok(report) => {
                metrics_files.push(dir.join(run.metrics_file()));
                by_cell.last_mut().unwrap().1.push(report.rows);
            }
            Err(e) => failures.push((run.metrics_file(), e)),
        }
    }
    let summary: Vec<CellSummary> = by_cell
        .iter()
        .filter(|(_, series)| !series.is_empty())
        .map(|(cell, series)| summarize_cell(cell, series, spec.target))
        .collect();
    let summary_file = dir.join(SUMMARY_FILE);
    write_summary(&summary, create(&summary_file)?)?;
    Ok(ExperimentOutcome {
        metrics_files,
        summary_file,
        failures,
        summary,
    })
}

/// Groups the metrics files in `dir` (named `<cell>-seed<n>.csv`) by cell
/// and summarizes them against `target`.
pub fn summarize_dir(dir: &Path, target: Option<f64>) -> Result<Vec<CellSummary>> {
    let mut cells: BTreeMap<String, BTreeMap<u64, Vec<MetricRow>>> = BTreeMap::new();
    let listing = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in listing {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if name == SUMMARY_FILE || name.ends_with(TRACE_SUFFIX) {
            continue;
        }
        let Some(stem) = name.strip_suffix(".csv") else {
            continue;
        };
        let Some((cell, seed)) = stem.rsplit_once("-seed").and_then(|(c, s)| Some((c, s.parse::<u64>().ok()?))) else {
            continue;
        };
        let file = File::open(&path).map_err(|e| CliError::io(&path, e))?;
        let rows = read_metrics(file).map_err(|e| CliError::Key {
            key: name.to_string(),
            message: e.to_string(),
        })?;
        cells.entry(cell.to_string()).or_default().insert(seed, rows);
    }
    Ok(cells
        .into_iter()
        .map(|(cell, seeds)| summarize_cell(&cell, &seeds.into_values().collect::<Vec<_>>(), target))
        .collect())
}

/// Writes per-client shard sizes and label histograms for every distinct
/// (split, seed) of the grid.
pub fn partition_stats<W: Write>(spec: &ExperimentSpec, mut out: W) -> Result<()> {
    let mut seen = Vec::new();
    let io = |e: std::io::Error| CliError::io("<output>", e);
    for run in &spec.runs {
        let cfg = &run.config;
        let key = (cfg.split.to_string(), cfg.seed);
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let Some(classes) = cfg.task.classes() else {
            return Err(CliError::key("task.kind", "partition statistics need a classification task"));
        };
        let env = Environment::build(cfg)?;
        writeln!(out, "# split {} seed {}", cfg.split, cfg.seed).map_err(io)?;
        let header: Vec<String> = (0..classes).map(|c| format!("class_{c}")).collect();
        writeln!(out, "client,samples,{}", header.join(",")).map_err(io)?;
        for client in 0..cfg.clients {
            let shard = env.shard_of(client);
            let hist: Vec<String> = shard.class_histogram().iter().map(|n| n.to_string()).collect();
            writeln!(out, "{client},{},{}", shard.len(), hist.join(",")).map_err(io)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_stdev_matches_hand_values() {
        assert_eq!(mean_stdev(&[]), None);
        assert_eq!(mean_stdev(&[3.0]), Some((3.0, 0.0)));
        let (m, s) = mean_stdev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!(m, 5.0);
        // sample variance 32 / 7
        assert!((s - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
    }

    fn row(t: f64, acc: f64, comm: u64) -> MetricRow {
        MetricRow {
            virtual_time: t,
            event_index: comm / 2,
            master_loss: 1.0 - acc,
            master_accuracy: acc,
            min_version: 0,
            max_version: 0,
            mean_version: 0.0,
            comm_count: comm,
        }
    }

    #[test]
    fn cell_summary_counts_reaching_runs() {
        let a = vec![row(0.0, 0.1, 0), row(100.0, 0.7, 20), row(200.0, 0.9, 40)];
        let b = vec![row(0.0, 0.1, 0), row(100.0, 0.5, 18), row(200.0, 0.6, 36)];
        let s = summarize_cell("x", &[a, b], Some(0.65));
        assert_eq!(s.runs, 2);
        assert_eq!(s.reached, 1);
        assert_eq!(s.final_accuracy.0, 0.75);
        assert_eq!(s.time_to_target, Some((100.0, 0.0)));
        assert_eq!(s.comm_to_target, Some((20.0, 0.0)));
        let none = summarize_cell("x", &[vec![row(0.0, 0.1, 0)]], None);
        assert_eq!(none.reached, 0);
        assert_eq!(none.time_to_target, None);
    }
}
