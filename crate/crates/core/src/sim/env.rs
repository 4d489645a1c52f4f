use std::sync::Arc;

use crate::device::{build_population, ClientProfile};
use crate::error::Result;
use crate::params::ParamVector;
use crate::trainer::{dirichlet_partition, evaluate, iid_partition, make_synthetic_task, Evaluation, ModelSpec, Shard};

use super::config::{DataSplit, RunConfig};
use super::streams;

/// Data, devices and initial model of one run, derived from its config
/// and seed alone.
#[derive(Debug, Clone)]
pub struct Environment {
    pub model: ModelSpec,
    /// Client `c` trains on `shards[profiles[c].shard_id]`.
    pub shards: Vec<Arc<Shard>>,
    pub train: Shard,
    pub test: Shard,
    pub profiles: Vec<ClientProfile>,
    /// Shared starting point of every branch / the global model.
    pub init: ParamVector,
    /// Least-squares optimum of the pooled training data (regression only).
    pub optimum: Option<ParamVector>,
}

impl Environment {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let model = cfg.model_spec()?;
        let task = make_synthetic_task(&cfg.task, &mut streams::rng(cfg.seed, streams::DATA))?;
        Self::from_data(cfg, model, task.train, task.test, task.optimum)
    }

    /// Builds an environment around an externally supplied dataset.
    pub fn from_data(
        cfg: &RunConfig,
        model: ModelSpec,
        train: Shard,
        test: Shard,
        optimum: Option<ParamVector>,
    ) -> Result<Self> {
        let mut part_rng = streams::rng(cfg.seed, streams::PARTITION);
        let shards = match cfg.split {
            DataSplit::Iid => iid_partition(&train, cfg.clients, &mut part_rng)?,
            DataSplit::Dirichlet(alpha) => dirichlet_partition(&train, cfg.clients, alpha, &mut part_rng)?,
        };
        let profiles = build_population(
            &cfg.population,
            cfg.clients,
            cfg.latency,
            &mut streams::rng(cfg.seed, streams::POPULATION),
        )?;
        let init = model.init(&mut streams::rng(cfg.seed, streams::INIT));
        Ok(Self {
            model,
            shards: shards.into_iter().map(Arc::new).collect(),
            train,
            test,
            profiles,
            init,
            optimum,
        })
    }

    pub fn shard_of(&self, client: usize) -> Arc<Shard> {
        Arc::clone(&self.shards[self.profiles[client].shard_id])
    }

    pub fn evaluate(&self, params: &ParamVector) -> Result<Evaluation> {
        evaluate(&self.model, params, &self.test)
    }
}
