//! Synchronous FedAvg: each round waits for the slowest of its K clients.

use rand::seq::index;

use crate::device::round_trip_time;
use crate::error::Result;
use crate::params::{axpy_combine, ParamVector};
use crate::version::VersionVector;

use super::config::RunConfig;
use super::env::Environment;
use super::pool::TrainingPool;
use super::report::{metric_row, EvalSchedule, MetricRow, RoundTrace, RunReport, TraceEntry};
use super::streams;

pub fn run_fedavg(cfg: &RunConfig, env: &Environment) -> Result<RunReport> {
    cfg.validate()?;
    let k = cfg.branches;
    let mut rng = streams::rng(cfg.seed, streams::SCHEDULE);
    let mut pool = TrainingPool::new(env.model, cfg.train, cfg.seed, cfg.threads)?;
    let mut schedule = EvalSchedule::new(cfg.eval_interval, cfg.time_budget);

    let mut global = env.init.clone();
    let mut rounds_done = 0u64;
    let mut comm = 0u64;
    let mut next_seq = 0u64;
    let mut counts = vec![0u64; cfg.clients];
    let mut rows: Vec<MetricRow> = Vec::new();
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut rounds = Vec::new();
    let mut now = 0.0;

    let mut evaluate_before = |until: f64, global: &ParamVector, rounds_done: u64, comm: u64, completed: usize, rows: &mut Vec<MetricRow>| -> Result<()> {
        while let Some(t) = schedule.peek().filter(|&t| t < until) {
            let eval = env.evaluate(global)?;
            rows.push(metric_row(t, completed as u64, eval, &VersionVector::new(vec![rounds_done]), comm));
            schedule.advance();
        }
        Ok(())
    };

    while now < cfg.time_budget {
        let chosen = index::sample(&mut rng, cfg.clients, k).into_vec();
        let mut entries = Vec::with_capacity(k);
        for (slot, &client) in chosen.iter().enumerate() {
            let rtt = round_trip_time(&env.profiles[client], &mut rng);
            pool.submit(next_seq, global.clone(), env.shard_of(client));
            entries.push(TraceEntry {
                sequence_no: next_seq,
                branch_id: slot,
                client_id: client,
                dispatch_time: now,
                completion_time: now + rtt,
            });
            next_seq += 1;
        }
        let end = entries.iter().map(|e| e.completion_time).fold(now, f64::max);
        let locals = entries
            .iter()
            .map(|e| pool.take(e.sequence_no))
            .collect::<Result<Vec<_>>>()?;

        evaluate_before(end, &global, rounds_done, comm, trace.len(), &mut rows)?;

        let refs: Vec<&ParamVector> = locals.iter().collect();
        global = axpy_combine(&vec![1.0; k], &refs)?;
        rounds_done += 1;
        comm += 2 * k as u64;
        for &c in &chosen {
            counts[c] += 1;
        }
        trace.extend(entries);
        rounds.push(RoundTrace {
            start: now,
            end,
            clients: chosen,
        });
        now = end;
    }
    evaluate_before(f64::INFINITY, &global, rounds_done, comm, trace.len(), &mut rows)?;

    let final_eval = env.evaluate(&global)?;
    Ok(RunReport {
        rows,
        trace,
        rounds,
        final_params: global,
        final_eval,
        final_versions: VersionVector::new(vec![rounds_done]),
        client_counts: counts,
        comm_count: comm,
    })
}
