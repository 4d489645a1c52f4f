use std::fmt;
use std::str::FromStr;

use crate::device::{CompositionPreset, LatencyOptions, Population};
use crate::error::{Error, Result};
use crate::selector::SelectorVariant;
use crate::trainer::{ModelKind, ModelSpec, TaskSpec, TrainConfig};
use crate::version::DEFAULT_PULL_BASE_WEIGHT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    GitFl,
    FedAvg,
    FedAsync,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::GitFl => "gitfl",
            Algorithm::FedAvg => "fedavg",
            Algorithm::FedAsync => "fedasync",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gitfl" => Ok(Algorithm::GitFl),
            "fedavg" => Ok(Algorithm::FedAvg),
            "fedasync" => Ok(Algorithm::FedAsync),
            other => Err(Error::Config(format!(
                "unknown algorithm `{other}` (expected gitfl, fedavg or fedasync)"
            ))),
        }
    }
}

/// How training data is spread over clients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataSplit {
    Iid,
    Dirichlet(f64),
}

impl fmt::Display for DataSplit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSplit::Iid => f.write_str("iid"),
            DataSplit::Dirichlet(a) => write!(f, "alpha{a}"),
        }
    }
}

/// Staleness-discounted mixing for the asynchronous baseline:
/// `β_s = beta · (1 + s)^(−a)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FedAsyncConfig {
    pub beta: f64,
    pub staleness_exponent: f64,
}

impl Default for FedAsyncConfig {
    fn default() -> Self {
        Self {
            beta: 0.6,
            staleness_exponent: 0.5,
        }
    }
}

impl FedAsyncConfig {
    pub fn mixing_weight(&self, staleness: u64) -> f64 {
        self.beta * (1.0 + staleness as f64).powf(-self.staleness_exponent)
    }
}

/// Everything that determines one simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub selector: SelectorVariant,
    /// Branch models (GitFL), clients per round (FedAvg) or in-flight
    /// clients (FedAsync).
    pub branches: usize,
    pub clients: usize,
    pub time_budget: f64,
    pub split: DataSplit,
    pub eval_interval: f64,
    pub seed: u64,
    pub model: ModelKind,
    /// Hidden width for the MLP.
    pub hidden: usize,
    pub train: TrainConfig,
    pub task: TaskSpec,
    pub population: Population,
    pub latency: LatencyOptions,
    pub pull_base_weight: f64,
    pub fedasync: FedAsyncConfig,
    /// Worker threads for local training; results do not depend on it.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::GitFl,
            selector: SelectorVariant::Cv,
            branches: 10,
            clients: 100,
            time_budget: 10_000.0,
            split: DataSplit::Dirichlet(0.5),
            eval_interval: 500.0,
            seed: 1,
            model: ModelKind::Logistic,
            hidden: 16,
            train: TrainConfig::default(),
            task: TaskSpec::Blobs {
                dims: 10,
                classes: 10,
                train: 5000,
                test: 2000,
                margin: 1.5,
            },
            population: Population::Preset(CompositionPreset::uniform()),
            latency: LatencyOptions::default(),
            pull_base_weight: DEFAULT_PULL_BASE_WEIGHT,
            fedasync: FedAsyncConfig::default(),
            threads: 1,
        }
    }
}

impl RunConfig {
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let dims = self.task.dims();
        match (self.model, self.task.classes()) {
            (ModelKind::Linear, None) => Ok(ModelSpec::Linear { dims }),
            (ModelKind::Logistic, Some(classes)) => Ok(ModelSpec::Logistic { dims, classes }),
            (ModelKind::Mlp, Some(classes)) => Ok(ModelSpec::Mlp {
                dims,
                hidden: self.hidden,
                classes,
            }),
            (kind, _) => Err(Error::Config(format!("trainer `{kind}` does not fit task {:?}", self.task))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches == 0 || self.branches > self.clients {
            return Err(Error::Config(format!(
                "K must satisfy 1 <= K <= clients, got K = {} with {} clients",
                self.branches, self.clients
            )));
        }
        if !(self.time_budget > 0.0 && self.time_budget.is_finite()) {
            return Err(Error::Config(format!("time_budget must be positive, got {}", self.time_budget)));
        }
        if !(self.eval_interval > 0.0 && self.eval_interval.is_finite()) {
            return Err(Error::Config(format!("eval_interval must be positive, got {}", self.eval_interval)));
        }
        if let DataSplit::Dirichlet(a) = self.split {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("alpha must be positive, got {a}")));
            }
            if self.task.classes().is_none() {
                return Err(Error::Config("Dirichlet split needs a classification task".into()));
            }
        }
        if !(self.pull_base_weight.is_finite()) {
            return Err(Error::Config("pull_base_weight must be finite".into()));
        }
        let fa = self.fedasync;
        if !(fa.beta > 0.0 && fa.beta <= 1.0) || !(fa.staleness_exponent >= 0.0 && fa.staleness_exponent.is_finite()) {
            return Err(Error::Config(format!(
                "fedasync needs 0 < beta <= 1 and a >= 0, got beta = {}, a = {}",
                fa.beta, fa.staleness_exponent
            )));
        }
        if self.model == ModelKind::Mlp && self.hidden == 0 {
            return Err(Error::Config("MLP hidden width must be positive".into()));
        }
        self.train.validate()?;
        self.model_spec()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fedasync_mixing_examples() {
        let fa = FedAsyncConfig::default();
        assert_eq!(fa.mixing_weight(0), 0.6);
        assert!((fa.mixing_weight(3) - 0.3).abs() < 1e-15);
        let replace = FedAsyncConfig { beta: 1.0, staleness_exponent: 0.0 };
        assert_eq!(replace.mixing_weight(17), 1.0);
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { branches: 101, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { branches: 0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { time_budget: 0.0, ..RunConfig::default() }.validate().is_err());
        assert!(RunConfig { model: ModelKind::Linear, ..RunConfig::default() }.validate().is_err());
        let linreg = TaskSpec::LinReg { dims: 3, train: 100, test: 10, noise: 0.1 };
        assert!(RunConfig { model: ModelKind::Linear, task: linreg, split: DataSplit::Iid, ..RunConfig::default() }.validate().is_ok());
        assert!(RunConfig { model: ModelKind::Linear, task: linreg, ..RunConfig::default() }.validate().is_err());
    }

    #[test]
    fn algorithm_names() {
        for a in [Algorithm::GitFl, Algorithm::FedAvg, Algorithm::FedAsync] {
            assert_eq!(a.as_str().parse::<Algorithm>().unwrap(), a);
        }
        assert!("safa".parse::<Algorithm>().is_err());
    }
}
