//! Asynchronous baseline: every returning local model is mixed straight
//! into the global model with a staleness-discounted weight.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::device::round_trip_time;
use crate::error::{Error, Result};
use crate::params::{axpy_combine, ParamVector};
use crate::version::VersionVector;

use super::config::RunConfig;
use super::env::Environment;
use super::event::{Event, EventQueue};
use super::pool::TrainingPool;
use super::report::{metric_row, EvalSchedule, MetricRow, RunReport, TraceEntry};
use super::streams;

struct FedAsync<'a> {
    cfg: &'a RunConfig,
    env: &'a Environment,
    global: ParamVector,
    updates: u64,
    /// Global update count at dispatch, indexed by sequence number.
    base_version: Vec<u64>,
    busy: Vec<bool>,
    counts: Vec<u64>,
    queue: EventQueue,
    pool: TrainingPool,
    rng: ChaCha8Rng,
    comm: u64,
    trace: Vec<TraceEntry>,
    schedule: EvalSchedule,
    rows: Vec<MetricRow>,
}

impl FedAsync<'_> {
    fn dispatch(&mut self, slot: usize, now: f64) -> Result<()> {
        let idle: Vec<usize> = (0..self.busy.len()).filter(|&c| !self.busy[c]).collect();
        if idle.is_empty() {
            return Err(Error::NoEligibleClient { branch: slot });
        }
        let client = idle[self.rng.random_range(0..idle.len())];
        self.busy[client] = true;
        let rtt = round_trip_time(&self.env.profiles[client], &mut self.rng);
        let seq = self.base_version.len() as u64;
        self.base_version.push(self.updates);
        self.pool.submit(seq, self.global.clone(), self.env.shard_of(client));
        self.queue.push(Event {
            completion_time: now + rtt,
            dispatch_time: now,
            branch_id: slot,
            client_id: client,
            sequence_no: seq,
        });
        Ok(())
    }

    fn evaluate_before(&mut self, until: f64) -> Result<()> {
        while let Some(t) = self.schedule.peek() {
            if t >= until {
                break;
            }
            let eval = self.env.evaluate(&self.global)?;
            let versions = VersionVector::new(vec![self.updates]);
            self.rows.push(metric_row(t, self.trace.len() as u64, eval, &versions, self.comm));
            self.schedule.advance();
        }
        Ok(())
    }

    fn complete(&mut self, event: Event) -> Result<()> {
        let local = self.pool.take(event.sequence_no)?;
        let staleness = self.updates - self.base_version[event.sequence_no as usize];
        let beta = self.cfg.fedasync.mixing_weight(staleness);
        self.global = axpy_combine(&[1.0 - beta, beta], &[&self.global, &local])?;
        self.updates += 1;
        self.comm += 2;
        self.busy[event.client_id] = false;
        self.counts[event.client_id] += 1;
        self.trace.push(TraceEntry {
            sequence_no: event.sequence_no,
            branch_id: event.branch_id,
            client_id: event.client_id,
            dispatch_time: event.dispatch_time,
            completion_time: event.completion_time,
        });
        if event.completion_time < self.cfg.time_budget {
            self.dispatch(event.branch_id, event.completion_time)?;
        }
        Ok(())
    }
}

pub fn run_fedasync(cfg: &RunConfig, env: &Environment) -> Result<RunReport> {
    cfg.validate()?;
    let mut sim = FedAsync {
        cfg,
        env,
        global: env.init.clone(),
        updates: 0,
        base_version: Vec::new(),
        busy: vec![false; cfg.clients],
        counts: vec![0; cfg.clients],
        queue: EventQueue::new(),
        pool: TrainingPool::new(env.model, cfg.train, cfg.seed, cfg.threads)?,
        rng: streams::rng(cfg.seed, streams::SCHEDULE),
        comm: 0,
        trace: Vec::new(),
        schedule: EvalSchedule::new(cfg.eval_interval, cfg.time_budget),
        rows: Vec::new(),
    };
    for slot in 0..cfg.branches {
        sim.dispatch(slot, 0.0)?;
    }
    while let Some(event) = sim.queue.pop() {
        sim.evaluate_before(event.completion_time)?;
        sim.complete(event)?;
    }
    sim.evaluate_before(f64::INFINITY)?;

    let final_eval = env.evaluate(&sim.global)?;
    Ok(RunReport {
        rows: sim.rows,
        trace: sim.trace,
        rounds: Vec::new(),
        final_versions: VersionVector::new(vec![sim.updates]),
        final_params: sim.global,
        final_eval,
        client_counts: sim.counts,
        comm_count: sim.comm,
    })
}
