//! Reward-driven client selection.
//!
//! Each idle client gets a reward for carrying branch `i`:
//!
//! ```text
//! R_v(c, i) = v_ctrl(i) · (T_t[c] − mean(T_t)) / max(T_t)     version reward
//! R_c(c)    = 1 / sqrt(max(T_c[c], 1))                        curiosity reward
//! R(c, i)   = max(0, R_v + R_c)
//! P(c, i)   = R(c, i) / Σ_j R(j, i)
//! ```
//!
//! Branches ahead of the mean version lean towards slow clients and lagging
//! branches towards fast ones; the curiosity term spreads work over rarely
//! picked clients. Means and the max over `T_t` cover every client, busy or
//! not, including never-selected ones (whose entry is 0).

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::version::{version_ctrl, VersionVector};

/// Which reward terms drive selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectorVariant {
    /// Version and curiosity rewards combined.
    Cv,
    /// Uniform over idle clients.
    Random,
    /// Curiosity reward only.
    Curiosity,
    /// Clamped version reward only.
    Version,
}

impl SelectorVariant {
    pub const ALL: [SelectorVariant; 4] = [Self::Cv, Self::Random, Self::Curiosity, Self::Version];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Cv => "CV",
            Self::Random => "R",
            Self::Curiosity => "C",
            Self::Version => "V",
        }
    }
}

impl fmt::Display for SelectorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CV" => Ok(Self::Cv),
            "R" => Ok(Self::Random),
            "C" => Ok(Self::Curiosity),
            "V" => Ok(Self::Version),
            other => Err(Error::Config(format!(
                "unknown selector variant `{other}` (expected CV, R, C or V)"
            ))),
        }
    }
}

/// Per-client selection counts, mean round-trip times and the set of
/// clients currently holding a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientStats {
    counts: Vec<u64>,
    times: Vec<f64>,
    busy: Vec<bool>,
    busy_count: usize,
}

impl ClientStats {
    pub fn new(num_clients: usize) -> Self {
        Self {
            counts: vec![0; num_clients],
            times: vec![0.0; num_clients],
            busy: vec![false; num_clients],
            busy_count: 0,
        }
    }

    /// Builds stats from explicit tables, with no busy clients.
    pub fn from_tables(counts: Vec<u64>, times: Vec<f64>) -> Self {
        assert_eq!(counts.len(), times.len(), "count and time tables differ in length");
        let n = counts.len();
        Self {
            counts,
            times,
            busy: vec![false; n],
            busy_count: 0,
        }
    }

    pub fn num_clients(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, client: usize) -> u64 {
        self.counts[client]
    }

    pub fn mean_time(&self, client: usize) -> f64 {
        self.times[client]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn is_busy(&self, client: usize) -> bool {
        self.busy[client]
    }

    pub fn busy_count(&self) -> usize {
        self.busy_count
    }

    pub fn eligible(&self) -> impl Iterator<Item = usize> + '_ {
        self.busy.iter().enumerate().filter(|(_, b)| !**b).map(|(c, _)| c)
    }

    pub fn mark_busy(&mut self, client: usize) -> Result<()> {
        if self.busy[client] {
            return Err(Error::ClientBusy(client));
        }
        self.busy[client] = true;
        self.busy_count += 1;
        Ok(())
    }

    /// Folds one observed round trip into the tables and frees the client.
    pub fn record_completion(&mut self, client: usize, duration: f64) -> Result<()> {
        if !self.busy[client] {
            return Err(Error::ClientNotBusy(client));
        }
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::NonFinite(format!("round-trip duration {duration}")));
        }
        self.counts[client] += 1;
        let n = self.counts[client] as f64;
        self.times[client] = ((n - 1.0) * self.times[client] + duration) / n;
        self.busy[client] = false;
        self.busy_count -= 1;
        Ok(())
    }

    fn time_summary(&self) -> TimeSummary {
        let n = self.times.len() as f64;
        TimeSummary {
            mean: self.times.iter().sum::<f64>() / n,
            max: self.times.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct TimeSummary {
    mean: f64,
    max: f64,
}

impl TimeSummary {
    fn version_reward(&self, v_ctrl: f64, time: f64) -> f64 {
        // no timing information yet
        if self.max <= 0.0 {
            return 0.0;
        }
        v_ctrl * (time - self.mean) / self.max
    }
}

pub fn version_reward(
    client: usize,
    branch_id: usize,
    versions: &VersionVector,
    stats: &ClientStats,
) -> f64 {
    stats
        .time_summary()
        .version_reward(version_ctrl(branch_id, versions), stats.times[client])
}

pub fn curiosity_reward(client: usize, stats: &ClientStats) -> f64 {
    let n = stats.counts[client].max(1) as f64;
    1.0 / n.sqrt()
}

pub fn combined_reward(
    client: usize,
    branch_id: usize,
    versions: &VersionVector,
    stats: &ClientStats,
) -> f64 {
    (version_reward(client, branch_id, versions, stats) + curiosity_reward(client, stats)).max(0.0)
}

/// Normalizes non-negative rewards into a distribution. All-zero rewards
/// yield the uniform distribution over the given entries.
pub fn normalize_rewards(rewards: &[f64]) -> Vec<f64> {
    let total: f64 = rewards.iter().sum();
    if total > 0.0 {
        rewards.iter().map(|r| r / total).collect()
    } else {
        let p = 1.0 / rewards.len() as f64;
        vec![p; rewards.len()]
    }
}

/// Client-selection policy for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selector {
    pub variant: SelectorVariant,
}

impl Selector {
    pub fn new(variant: SelectorVariant) -> Self {
        Self { variant }
    }

    /// Unnormalized reward of every idle client for `branch_id`, as
    /// `(client, reward)` pairs in ascending client order.
    pub fn rewards(
        &self,
        branch_id: usize,
        versions: &VersionVector,
        stats: &ClientStats,
    ) -> Vec<(usize, f64)> {
        let summary = stats.time_summary();
        let v_ctrl = version_ctrl(branch_id, versions);
        stats
            .eligible()
            .map(|c| {
                let r = match self.variant {
                    SelectorVariant::Random => 1.0,
                    SelectorVariant::Curiosity => curiosity_reward(c, stats),
                    SelectorVariant::Version => summary.version_reward(v_ctrl, stats.times[c]).max(0.0),
                    SelectorVariant::Cv => {
                        (summary.version_reward(v_ctrl, stats.times[c]) + curiosity_reward(c, stats))
                            .max(0.0)
                    }
                };
                (c, r)
            })
            .collect()
    }

    /// Selection probability of every client (busy clients get 0).
    pub fn probabilities(
        &self,
        branch_id: usize,
        versions: &VersionVector,
        stats: &ClientStats,
    ) -> Result<Vec<f64>> {
        let rewards = self.rewards(branch_id, versions, stats);
        if rewards.is_empty() {
            return Err(Error::NoEligibleClient { branch: branch_id });
        }
        let values: Vec<f64> = rewards.iter().map(|&(_, r)| r).collect();
        let mut probs = vec![0.0; stats.num_clients()];
        for ((c, _), p) in rewards.iter().zip(normalize_rewards(&values)) {
            probs[*c] = p;
        }
        Ok(probs)
    }

    /// Draws a client for `branch_id` from [`Selector::probabilities`].
    pub fn select<R: Rng + ?Sized>(
        &self,
        branch_id: usize,
        versions: &VersionVector,
        stats: &ClientStats,
        rng: &mut R,
    ) -> Result<usize> {
        let probs = self.probabilities(branch_id, versions, stats)?;
        let dist = WeightedIndex::new(&probs)
            .map_err(|e| Error::NonFinite(format!("selection distribution: {e}")))?;
        Ok(dist.sample(rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stats_with_times(times: &[f64]) -> ClientStats {
        ClientStats::from_tables(vec![1; times.len()], times.to_vec())
    }

    #[test]
    fn version_reward_hand_evaluated() {
        let v = VersionVector::new(vec![2, 4]);
        let s = stats_with_times(&[100.0, 300.0]);
        // (+1) * (300 - 200) / 300
        assert!((version_reward(1, 1, &v, &s) - 1.0 / 3.0).abs() < 1e-15);
        assert!((version_reward(1, 0, &v, &s) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn version_reward_zero_at_mean_version() {
        let v = VersionVector::new(vec![3, 3, 3]);
        let s = stats_with_times(&[50.0, 400.0, 120.0]);
        for c in 0..3 {
            assert_eq!(version_reward(c, 1, &v, &s), 0.0);
        }
    }

    #[test]
    fn version_reward_cold_start_is_zero() {
        let v = VersionVector::new(vec![0, 5]);
        let s = ClientStats::new(4);
        for c in 0..4 {
            assert_eq!(version_reward(c, 1, &v, &s), 0.0);
        }
    }

    #[test]
    fn curiosity_examples() {
        let s = ClientStats::from_tables(vec![0, 4, 100], vec![0.0; 3]);
        assert_eq!(curiosity_reward(0, &s), 1.0);
        assert_eq!(curiosity_reward(1, &s), 0.5);
        assert!((curiosity_reward(2, &s) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn combined_reward_clamps_at_zero() {
        // v_ctrl = -3, client 1 is the slowest -> strongly negative version reward
        let v = VersionVector::new(vec![0, 6]);
        let s = ClientStats::from_tables(vec![4, 4], vec![10.0, 1000.0]);
        let rv = version_reward(1, 0, &v, &s);
        assert!(rv + curiosity_reward(1, &s) < 0.0);
        assert_eq!(combined_reward(1, 0, &v, &s), 0.0);

        let v = VersionVector::new(vec![2, 4]);
        let s = ClientStats::from_tables(vec![4, 4], vec![100.0, 300.0]);
        let r = combined_reward(1, 1, &v, &s);
        assert!((r - (1.0 / 3.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn normalization_examples() {
        assert_eq!(normalize_rewards(&[1.0, 3.0]), vec![0.25, 0.75]);
        assert_eq!(normalize_rewards(&[0.0; 4]), vec![0.25; 4]);
        assert_eq!(normalize_rewards(&[0.0]), vec![1.0]);
        assert_eq!(normalize_rewards(&[0.3]), vec![1.0]);
    }

    #[test]
    fn busy_clients_get_zero_probability() {
        let mut s = ClientStats::new(3);
        s.mark_busy(1).unwrap();
        let v = VersionVector::zeros(2);
        let p = Selector::new(SelectorVariant::Cv).probabilities(0, &v, &s).unwrap();
        assert_eq!(p, vec![0.5, 0.0, 0.5]);

        s.mark_busy(0).unwrap();
        s.mark_busy(2).unwrap();
        assert!(matches!(
            Selector::new(SelectorVariant::Cv).probabilities(0, &v, &s),
            Err(Error::NoEligibleClient { branch: 0 })
        ));
        assert!(matches!(s.mark_busy(2), Err(Error::ClientBusy(2))));
    }

    #[test]
    fn degenerate_distribution_always_picks_the_one_client() {
        // only client 1 idle
        let mut s = ClientStats::new(3);
        s.mark_busy(0).unwrap();
        s.mark_busy(2).unwrap();
        let v = VersionVector::zeros(1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for variant in SelectorVariant::ALL {
            for _ in 0..100 {
                assert_eq!(Selector::new(variant).select(0, &v, &s, &mut rng).unwrap(), 1);
            }
        }
    }

    /// Counts of `draws` samples; checks each frequency is within 3 sigma of
    /// the multinomial expectation.
    fn assert_frequencies(variant: SelectorVariant, stats: &ClientStats, v: &VersionVector, expected: &[f64]) {
        let draws = 100_000;
        let sel = Selector::new(variant);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hits = vec![0usize; expected.len()];
        for _ in 0..draws {
            hits[sel.select(0, v, stats, &mut rng).unwrap()] += 1;
        }
        for (h, p) in hits.iter().zip(expected) {
            let f = *h as f64 / draws as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((f - p).abs() <= 3.0 * sigma, "frequency {f} vs {p} (sigma {sigma})");
        }
    }

    #[test]
    fn random_variant_is_uniform() {
        let s = ClientStats::from_tables((0..10).map(|c| c as u64).collect(), (0..10).map(|c| 50.0 * c as f64).collect());
        assert_frequencies(SelectorVariant::Random, &s, &VersionVector::new(vec![1, 9]), &[0.1; 10]);
    }

    #[test]
    fn cv_variant_follows_rewards() {
        // equal versions -> rewards are 1/sqrt(count): counts 9 and 1 -> [1/3, 1] -> [0.25, 0.75]
        let s = ClientStats::from_tables(vec![9, 1], vec![100.0, 300.0]);
        let v = VersionVector::new(vec![2, 2]);
        let sel = Selector::new(SelectorVariant::Cv);
        let p = sel.probabilities(0, &v, &s).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        assert_frequencies(SelectorVariant::Cv, &s, &v, &[0.25, 0.75]);
    }

    #[test]
    fn variant_terms() {
        let v = VersionVector::new(vec![2, 4]);
        let s = ClientStats::from_tables(vec![4, 1], vec![100.0, 300.0]);
        let rewards = |variant| Selector::new(variant).rewards(1, &v, &s);
        assert_eq!(rewards(SelectorVariant::Curiosity), vec![(0, 0.5), (1, 1.0)]);
        let rv = rewards(SelectorVariant::Version);
        assert_eq!(rv[0].1, 0.0);
        assert!((rv[1].1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rewards(SelectorVariant::Random), vec![(0, 1.0), (1, 1.0)]);
    }

    #[test]
    fn record_completion_running_mean() {
        let mut s = ClientStats::new(2);
        s.mark_busy(0).unwrap();
        s.record_completion(0, 100.0).unwrap();
        assert_eq!(s.mean_time(0), 100.0);
        s.mark_busy(0).unwrap();
        s.record_completion(0, 200.0).unwrap();
        assert_eq!(s.mean_time(0), 150.0);
        assert_eq!(s.count(0), 2);

        let mut s = ClientStats::new(1);
        for d in [50.0, 150.0, 250.0] {
            s.mark_busy(0).unwrap();
            s.record_completion(0, d).unwrap();
        }
        assert_eq!(s.mean_time(0), 150.0);
        assert!(!s.is_busy(0));
        assert!(matches!(s.record_completion(0, 1.0), Err(Error::ClientNotBusy(0))));
    }

    #[test]
    fn variant_parsing() {
        for v in SelectorVariant::ALL {
            assert_eq!(v.as_str().parse::<SelectorVariant>().unwrap(), v);
        }
        assert_eq!("cv".parse::<SelectorVariant>().unwrap(), SelectorVariant::Cv);
        assert!("X".parse::<SelectorVariant>().is_err());
    }

    proptest! {
        #[test]
        fn probabilities_form_a_distribution(
            counts in prop::collection::vec(0u64..50, 2..20),
            seed in any::<u64>(),
            versions in prop::collection::vec(0u64..30, 1..8),
        ) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let times: Vec<f64> = counts.iter().map(|&c| if c == 0 { 0.0 } else { rng.random_range(10.0..600.0) }).collect();
            let s = ClientStats::from_tables(counts, times);
            let v = VersionVector::new(versions);
            for variant in SelectorVariant::ALL {
                for b in 0..v.len() {
                    let p = Selector::new(variant).probabilities(b, &v, &s).unwrap();
                    prop_assert!(p.iter().all(|&x| x >= 0.0));
                    prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
