//! Event-driven GitFL: K branches circulate among clients. On every
//! completion the branch is pushed, the client tables are updated, and the
//! branch is merged/pulled and sent to a newly selected client.

use crate::device::round_trip_time;
use crate::error::Result;
use crate::params::Repository;
use crate::selector::{ClientStats, Selector};
use crate::version::{merge_master, model_pull, model_push};

use super::config::RunConfig;
use super::env::Environment;
use super::event::{Event, EventQueue};
use super::pool::TrainingPool;
use super::report::{metric_row, EvalSchedule, MetricRow, RunReport, TraceEntry};
use super::streams;

struct GitFl<'a> {
    cfg: &'a RunConfig,
    env: &'a Environment,
    repo: Repository,
    stats: ClientStats,
    selector: Selector,
    queue: EventQueue,
    pool: TrainingPool,
    rng: rand_chacha::ChaCha8Rng,
    next_seq: u64,
    completed: u64,
    comm: u64,
    trace: Vec<TraceEntry>,
    schedule: EvalSchedule,
    rows: Vec<MetricRow>,
}

impl GitFl<'_> {
    /// Merge, pull, select, then schedule the branch's completion.
    fn dispatch(&mut self, branch_id: usize, now: f64) -> Result<()> {
        let versions = self.repo.versions();
        let master = merge_master(&self.repo)?;
        let pulled = model_pull(
            branch_id,
            &versions,
            &master,
            &self.repo.branch(branch_id).params,
            self.cfg.pull_base_weight,
        )?;
        let client = self.selector.select(branch_id, &versions, &self.stats, &mut self.rng)?;
        self.stats.mark_busy(client)?;
        let rtt = round_trip_time(&self.env.profiles[client], &mut self.rng);
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pool.submit(seq, pulled, self.env.shard_of(client));
        self.queue.push(Event {
            completion_time: now + rtt,
            dispatch_time: now,
            branch_id,
            client_id: client,
            sequence_no: seq,
        });
        Ok(())
    }

    /// Records every pending evaluation strictly before `until`.
    fn evaluate_before(&mut self, until: f64) -> Result<()> {
        while let Some(t) = self.schedule.peek() {
            if t >= until {
                break;
            }
            let master = merge_master(&self.repo)?;
            let eval = self.env.evaluate(&master)?;
            self.rows.push(metric_row(t, self.completed, eval, &self.repo.versions(), self.comm));
            self.schedule.advance();
        }
        Ok(())
    }

    fn complete(&mut self, event: Event) -> Result<()> {
        let trained = self.pool.take(event.sequence_no)?;
        model_push(&mut self.repo, event.branch_id, trained)?;
        self.stats.record_completion(event.client_id, event.duration())?;
        self.completed += 1;
        self.comm += 2;
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

pub fn run_gitfl(cfg: &RunConfig, env: &Environment) -> Result<RunReport> {
    cfg.validate()?;
    let mut sim = GitFl {
        cfg,
        env,
        repo: Repository::new(cfg.branches, &env.init)?,
        stats: ClientStats::new(cfg.clients),
        selector: Selector::new(cfg.selector),
        queue: EventQueue::new(),
        pool: TrainingPool::new(env.model, cfg.train, cfg.seed, cfg.threads)?,
        rng: streams::rng(cfg.seed, streams::SCHEDULE),
        next_seq: 0,
        completed: 0,
        comm: 0,
        trace: Vec::new(),
        schedule: EvalSchedule::new(cfg.eval_interval, cfg.time_budget),
        rows: Vec::new(),
    };

    for branch in 0..cfg.branches {
        sim.dispatch(branch, 0.0)?;
    }
    while let Some(event) = sim.queue.pop() {
        sim.evaluate_before(event.completion_time)?;
        sim.complete(event)?;
        debug_assert_eq!(sim.queue.len(), sim.stats.busy_count());
    }
    sim.evaluate_before(f64::INFINITY)?;

    let final_params = merge_master(&sim.repo)?;
    let final_eval = env.evaluate(&final_params)?;
    Ok(RunReport {
        rows: sim.rows,
        trace: sim.trace,
        rounds: Vec::new(),
        final_params,
        final_eval,
        final_versions: sim.repo.versions(),
        client_counts: sim.stats.counts().to_vec(),
        comm_count: sim.comm,
    })
}
