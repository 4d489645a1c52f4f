//! Discrete-event simulation of GitFL and the FedAvg / FedAsync baselines
//! over a heterogeneous client population.

pub mod config;
pub mod env;
pub mod event;
pub mod report;

mod fedasync;
mod fedavg;
mod gitfl;
mod pool;

pub use config::{Algorithm, DataSplit, FedAsyncConfig, RunConfig};
pub use env::Environment;
pub use event::{Event, EventQueue};
pub use fedasync::run_fedasync;
pub use fedavg::run_fedavg;
pub use gitfl::run_gitfl;
pub use report::{read_metrics, time_to_accuracy, write_metrics, MetricRow, RoundTrace, RunReport, TraceEntry, METRICS_HEADER};

use crate::error::Result;

/// Independent random streams of one run.
pub(crate) mod streams {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub const DATA: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const POPULATION: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SCHEDULE: u64 = 5;
    const TRAIN_BASE: u64 = 1 << 32;

    pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }

    /// Stream for the local training job with dispatch number `key`.
    pub fn training(seed: u64, key: u64) -> ChaCha8Rng {
        rng(seed, TRAIN_BASE + key)
    }
}

/// Builds the environment for `cfg` and runs its algorithm.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let env = Environment::build(cfg)?;
    run_with_env(cfg, &env)
}

/// Runs `cfg.algorithm` on a prepared environment.
pub fn run_with_env(cfg: &RunConfig, env: &Environment) -> Result<RunReport> {
    match cfg.algorithm {
        Algorithm::GitFl => run_gitfl(cfg, env),
        Algorithm::FedAvg => run_fedavg(cfg, env),
        Algorithm::FedAsync => run_fedasync(cfg, env),
    }
}
