//! Local training jobs keyed by dispatch sequence number.
//!
//! Each job trains with its own random stream derived from the run seed and
//! its key, so the result does not depend on which worker runs it or when.

use std::collections::HashMap;
use std::sync::mpsc::{self, Receiver};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::trainer::{local_train, ModelSpec, Shard, TrainConfig};

use super::streams;

enum Job {
    Deferred { params: ParamVector, shard: Arc<Shard> },
    Spawned(Receiver<Result<ParamVector>>),
}

pub(crate) struct TrainingPool {
    model: ModelSpec,
    cfg: TrainConfig,
    seed: u64,
    workers: Option<rayon::ThreadPool>,
    jobs: HashMap<u64, Job>,
}

impl TrainingPool {
    /// `threads <= 1` trains inline when a result is first needed.
    pub fn new(model: ModelSpec, cfg: TrainConfig, seed: u64, threads: usize) -> Result<Self> {
        let workers = if threads > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start {threads} training threads: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self {
            model,
            cfg,
            seed,
            workers,
            jobs: HashMap::new(),
        })
    }

    pub fn submit(&mut self, key: u64, params: ParamVector, shard: Arc<Shard>) {
        let job = match &self.workers {
            None => Job::Deferred { params, shard },
            Some(workers) => {
                let (tx, rx) = mpsc::channel();
                let (model, cfg, seed) = (self.model, self.cfg, self.seed);
                workers.spawn(move || {
                    let mut rng = streams::training(seed, key);
                    let _ = tx.send(local_train(&model, &params, &shard, &cfg, &mut rng));
                });
                Job::Spawned(rx)
            }
        };
        let previous = self.jobs.insert(key, job);
        debug_assert!(previous.is_none(), "training key {key} reused");
    }

    pub fn take(&mut self, key: u64) -> Result<ParamVector> {
        match self.jobs.remove(&key) {
            Some(Job::Deferred { params, shard }) => {
                let mut rng = streams::training(self.seed, key);
                local_train(&self.model, &params, &shard, &self.cfg, &mut rng)
            }
            Some(Job::Spawned(rx)) => rx
                .recv()
                .map_err(|_| Error::Diverged(format!("training worker for job {key} panicked")))?,
            None => panic!("no training job {key}"),
        }
    }
}
