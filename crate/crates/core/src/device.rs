//! Simulated device population.
//!
//! Every client has a compute latency and a network latency, each a
//! Gaussian picked from one of five quality tiers. Latencies are sampled
//! fresh for every dispatch, in abstract virtual-time units.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Resampling attempts before a truncated draw is clamped.
const MAX_RESAMPLES: usize = 100;

/// Draws below `TRUNCATION_FRACTION · mu` are rejected.
const TRUNCATION_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyDist {
    pub mu: f64,
    pub sigma: f64,
}

impl LatencyDist {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) || !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!(
                "latency needs mu > 0 and sigma >= 0, got N({mu}, {sigma})"
            )));
        }
        Ok(Self { mu, sigma })
    }

    /// Same mean, standard deviation multiplied by `factor`.
    pub fn with_sigma_scale(self, factor: f64) -> Self {
        Self {
            mu: self.mu,
            sigma: self.sigma * factor,
        }
    }

    /// Both moments multiplied by `factor` (the law of `factor · X`).
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            mu: self.mu * factor,
            sigma: self.sigma * factor,
        }
    }

    pub fn variance(&self) -> f64 {
        self.sigma * self.sigma
    }
}

/// Samples `N(mu, sigma²)` truncated below at `0.01·mu`.
pub fn sample_latency<R: Rng + ?Sized>(dist: &LatencyDist, rng: &mut R) -> f64 {
    let floor = TRUNCATION_FRACTION * dist.mu;
    if dist.sigma == 0.0 {
        return dist.mu;
    }
    let normal = Normal::new(dist.mu, dist.sigma).expect("validated latency parameters");
    for _ in 0..MAX_RESAMPLES {
        let x = normal.sample(rng);
        if x >= floor {
            return x;
        }
    }
    floor
}

/// Device and channel quality levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Excellent,
    High,
    Medium,
    Low,
    Critical,
}

impl Tier {
    pub const ALL: [Tier; 5] = [Tier::Excellent, Tier::High, Tier::Medium, Tier::Low, Tier::Critical];

    pub fn compute(self) -> LatencyDist {
        let (mu, sigma) = match self {
            Tier::Excellent => (100.0, 5.0),
            Tier::High => (150.0, 10.0),
            Tier::Medium => (200.0, 20.0),
            Tier::Low => (300.0, 30.0),
            Tier::Critical => (500.0, 50.0),
        };
        LatencyDist { mu, sigma }
    }

    pub fn network(self) -> LatencyDist {
        let (mu, sigma) = match self {
            Tier::Excellent => (10.0, 1.0),
            Tier::High => (15.0, 2.0),
            Tier::Medium => (20.0, 3.0),
            Tier::Low => (30.0, 5.0),
            Tier::Critical => (80.0, 10.0),
        };
        LatencyDist { mu, sigma }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Excellent => "excellent",
            Tier::High => "high",
            Tier::Medium => "medium",
            Tier::Low => "low",
            Tier::Critical => "critical",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tier::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown device tier `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientProfile {
    pub client_id: usize,
    /// `None` for custom latencies.
    pub compute_tier: Option<Tier>,
    pub network_tier: Option<Tier>,
    pub compute: LatencyDist,
    pub network: LatencyDist,
    pub shard_id: usize,
}

impl ClientProfile {
    pub fn mean_round_trip(&self) -> f64 {
        self.compute.mu + self.network.mu
    }
}

/// One dispatch-to-upload duration: a network draw followed by a compute
/// draw from the same stream.
pub fn round_trip_time<R: Rng + ?Sized>(profile: &ClientProfile, rng: &mut R) -> f64 {
    let network = sample_latency(&profile.network, rng);
    let compute = sample_latency(&profile.compute, rng);
    compute + network
}

/// Number of clients per tier (in [`Tier::ALL`] order) for compute
/// ("training") and for communication.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionPreset {
    pub training: [usize; 5],
    pub comm: [usize; 5],
}

impl CompositionPreset {
    pub fn new(training: [usize; 5], comm: [usize; 5]) -> Self {
        Self { training, comm }
    }

    /// A preset with the same counts for both rows.
    pub fn symmetric(counts: [usize; 5]) -> Self {
        Self::new(counts, counts)
    }

    pub fn config1() -> Self {
        Self::symmetric([40, 30, 10, 10, 10])
    }

    pub fn config2() -> Self {
        Self::symmetric([10, 20, 40, 20, 10])
    }

    pub fn config3() -> Self {
        Self::symmetric([10, 10, 10, 30, 40])
    }

    pub fn config4() -> Self {
        Self::symmetric([40, 10, 0, 10, 40])
    }

    pub fn uniform() -> Self {
        Self::symmetric([20; 5])
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "config1" => Ok(Self::config1()),
            "config2" => Ok(Self::config2()),
            "config3" => Ok(Self::config3()),
            "config4" => Ok(Self::config4()),
            "uniform" => Ok(Self::uniform()),
            other => Err(Error::Config(format!(
                "unknown device preset `{other}` (expected config1..config4 or uniform)"
            ))),
        }
    }

    pub fn training_total(&self) -> usize {
        self.training.iter().sum()
    }

    pub fn comm_total(&self) -> usize {
        self.comm.iter().sum()
    }
}

/// How to populate client devices.
#[derive(Debug, Clone, PartialEq)]
pub enum Population {
    Preset(CompositionPreset),
    /// `(compute tier, network tier)` per client, in client order.
    Explicit(Vec<(Tier, Tier)>),
}

/// Latency knobs applied on top of the tier table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyOptions {
    /// Multiplies every tier's sigma; 0 gives deterministic latencies.
    pub sigma_scale: f64,
    /// Multiplies the single network sample charged per round trip.
    pub network_multiplier: f64,
}

impl Default for LatencyOptions {
    fn default() -> Self {
        Self {
            sigma_scale: 1.0,
            network_multiplier: 1.0,
        }
    }
}

fn expand(counts: &[usize; 5]) -> Vec<Tier> {
    Tier::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&t, &n)| std::iter::repeat_n(t, n))
        .collect()
}

/// Builds `total` client profiles. Compute tiers follow the training row in
/// tier order; network tiers are paired by an independent shuffle of the
/// comm row.
pub fn build_population<R: Rng + ?Sized>(
    population: &Population,
    total: usize,
    options: LatencyOptions,
    rng: &mut R,
) -> Result<Vec<ClientProfile>> {
    if !(options.sigma_scale >= 0.0 && options.sigma_scale.is_finite()) {
        return Err(Error::Config(format!("sigma scale must be >= 0, got {}", options.sigma_scale)));
    }
    if !(options.network_multiplier > 0.0 && options.network_multiplier.is_finite()) {
        return Err(Error::Config(format!(
            "network multiplier must be > 0, got {}",
            options.network_multiplier
        )));
    }
    let pairs: Vec<(Tier, Tier)> = match population {
        Population::Preset(preset) => {
            if preset.training_total() != total || preset.comm_total() != total {
                return Err(Error::Config(format!(
                    "device preset covers {} training / {} comm clients, expected {total}",
                    preset.training_total(),
                    preset.comm_total()
                )));
            }
            let compute = expand(&preset.training);
            let mut network = expand(&preset.comm);
            network.shuffle(rng);
            compute.into_iter().zip(network).collect()
        }
        Population::Explicit(pairs) => {
            if pairs.len() != total {
                return Err(Error::Config(format!(
                    "explicit device list has {} entries, expected {total}",
                    pairs.len()
                )));
            }
            pairs.clone()
        }
    };
    Ok(pairs
        .into_iter()
        .enumerate()
        .map(|(client_id, (c, n))| ClientProfile {
            client_id,
            compute_tier: Some(c),
            network_tier: Some(n),
            compute: c.compute().with_sigma_scale(options.sigma_scale),
            network: n
                .network()
                .with_sigma_scale(options.sigma_scale)
                .scaled(options.network_multiplier),
            shard_id: client_id,
        })
        .collect())
}
