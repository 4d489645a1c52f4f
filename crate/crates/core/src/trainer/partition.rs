//! Splitting a dataset across clients.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::data::Shard;
use crate::error::{Error, Result};

/// Shuffles the dataset and deals it into `num_clients` shards whose sizes
/// differ by at most one.
pub fn iid_partition<R: Rng + ?Sized>(dataset: &Shard, num_clients: usize, rng: &mut R) -> Result<Vec<Shard>> {
    check_sizes(dataset, num_clients)?;
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(rng);
    let base = dataset.len() / num_clients;
    let extra = dataset.len() % num_clients;
    let mut out = Vec::with_capacity(num_clients);
    let mut start = 0;
    for c in 0..num_clients {
        let len = base + usize::from(c < extra);
        out.push(dataset.subset(&idx[start..start + len]));
        start += len;
    }
    Ok(out)
}

fn check_sizes(dataset: &Shard, num_clients: usize) -> Result<()> {
    if num_clients == 0 {
        return Err(Error::Config("cannot partition across zero clients".into()));
    }
    if dataset.len() < num_clients {
        return Err(Error::Config(format!(
            "{} samples cannot cover {num_clients} clients",
            dataset.len()
        )));
    }
    Ok(())
}

/// Draws one `Dir(alpha)` vector over `k` entries via normalized gammas.
fn dirichlet<R: Rng + ?Sized>(alpha: f64, k: usize, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("alpha validated positive");
    let mut draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        for d in &mut draws {
            *d /= total;
        }
    } else {
        // every gamma underflowed (tiny alpha): all mass on one entry
        draws.fill(0.0);
        draws[rng.random_range(0..k)] = 1.0;
    }
    draws
}

/// Label-skewed split: for every class, its samples are shuffled and cut
/// among clients in proportions drawn from `Dir(alpha)`. Clients left empty
/// then take one sample each from the currently largest shard.
pub fn dirichlet_partition<R: Rng + ?Sized>(
    dataset: &Shard,
    num_clients: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<Shard>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("Dirichlet alpha must be positive, got {alpha}")));
    }
    check_sizes(dataset, num_clients)?;
    let labels = dataset
        .labels()
        .ok_or_else(|| Error::Config("Dirichlet partitioning needs class labels".into()))?;
    let classes = dataset.num_classes().unwrap_or(0);

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); num_clients];
    for members in &mut by_class {
        members.shuffle(rng);
        let props = dirichlet(alpha, num_clients, rng);
        let n = members.len();
        let mut cum = 0.0;
        let mut start = 0;
        for (c, p) in props.iter().enumerate() {
            cum += p;
            let end = if c + 1 == num_clients {
                n
            } else {
                ((cum * n as f64).floor() as usize).clamp(start, n)
            };
            assigned[c].extend_from_slice(&members[start..end]);
            start = end;
        }
    }

    for c in 0..num_clients {
        if assigned[c].is_empty() {
            let donor = (0..num_clients)
                .max_by(|&a, &b| assigned[a].len().cmp(&assigned[b].len()).then(b.cmp(&a)))
                .expect("at least one client");
            let sample = assigned[donor].pop().expect("donor holds at least two samples");
            assigned[c].push(sample);
        }
    }

    Ok(assigned.iter().map(|idx| dataset.subset(idx)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::Targets;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn labelled(per_class: usize, classes: usize) -> Shard {
        let n = per_class * classes;
        let features: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels = (0..n).map(|i| i % classes).collect();
        Shard::new(features, 1, Targets::Class { labels, classes }).unwrap()
    }

    /// Sample ids are stored as the single feature value.
    fn ids(shard: &Shard) -> Vec<usize> {
        (0..shard.len()).map(|i| shard.row(i)[0] as usize).collect()
    }

    fn assert_exact_cover(shards: &[Shard], n: usize) {
        let mut all: Vec<usize> = shards.iter().flat_map(ids).collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    fn entropy(h: &[usize]) -> f64 {
        let n: usize = h.iter().sum();
        h.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.ln()
            })
            .sum()
    }

    #[test]
    fn partitions_are_disjoint_and_exhaustive() {
        let data = labelled(50, 10);
        for alpha in [0.05, 0.5, 10.0] {
            let shards = dirichlet_partition(&data, 20, alpha, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert_eq!(shards.len(), 20);
            assert!(shards.iter().all(|s| !s.is_empty()));
            assert_exact_cover(&shards, 500);
        }
        let shards = iid_partition(&data, 7, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_exact_cover(&shards, 500);
        assert!(shards.iter().all(|s| s.len() == 71 || s.len() == 72));
    }

    #[test]
    fn huge_alpha_matches_global_distribution() {
        let data = labelled(1000, 10);
        let shards = dirichlet_partition(&data, 10, 1e6, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for s in &shards {
            let h = s.class_histogram();
            let n = s.len() as f64;
            let tv: f64 = 0.5 * h.iter().map(|&c| (c as f64 / n - 0.1).abs()).sum::<f64>();
            assert!(tv < 0.02, "total variation {tv}");
        }
    }

    #[test]
    fn small_alpha_is_more_skewed() {
        let data = labelled(200, 10);
        let mean_entropy = |alpha| {
            let shards = dirichlet_partition(&data, 20, alpha, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
            shards.iter().map(|s| entropy(&s.class_histogram())).sum::<f64>() / shards.len() as f64
        };
        assert!(mean_entropy(0.1) < mean_entropy(1e6));
    }

    #[test]
    fn empty_clients_are_repaired() {
        // far more clients than a tiny alpha can populate
        let data = labelled(3, 4);
        let shards = dirichlet_partition(&data, 12, 0.01, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(shards.iter().all(|s| s.len() == 1));
        assert_exact_cover(&shards, 12);
    }

    #[test]
    fn configuration_errors() {
        let data = labelled(1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(dirichlet_partition(&data, 4, 1.0, &mut rng).is_err());
        assert!(dirichlet_partition(&data, 2, 0.0, &mut rng).is_err());
        assert!(iid_partition(&data, 0, &mut rng).is_err());
        let reg = Shard::new(vec![1.0, 2.0], 1, Targets::Real(vec![0.0, 1.0])).unwrap();
        assert!(dirichlet_partition(&reg, 2, 1.0, &mut rng).is_err());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let data = labelled(30, 5);
        let a = dirichlet_partition(&data, 6, 0.3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = dirichlet_partition(&data, 6, 0.3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
