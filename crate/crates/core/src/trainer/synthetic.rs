//! Desk-scale synthetic tasks with known structure.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::data::{Shard, Targets};
use super::model::ModelSpec;
use crate::error::{Error, Result};
use crate::params::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskSpec {
    /// `y = a·x + b + ε`, `x ~ N(0, I)`, `ε ~ N(0, noise²)`.
    LinReg {
        dims: usize,
        train: usize,
        test: usize,
        noise: f64,
    },
    /// Unit-variance Gaussian clusters, one per class, balanced labels.
    /// `margin` is the distance from each center to the bisecting
    /// hyperplane of any other pair, in standard deviations (exact when
    /// `classes <= dims`).
    Blobs {
        dims: usize,
        classes: usize,
        train: usize,
        test: usize,
        margin: f64,
    },
}

impl TaskSpec {
    pub fn dims(&self) -> usize {
        match *self {
            TaskSpec::LinReg { dims, .. } | TaskSpec::Blobs { dims, .. } => dims,
        }
    }

    pub fn classes(&self) -> Option<usize> {
        match *self {
            TaskSpec::LinReg { .. } => None,
            TaskSpec::Blobs { classes, .. } => Some(classes),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub train: Shard,
    pub test: Shard,
    /// Least-squares solution on the training set, in the linear model's
    /// layout (regression tasks only).
    pub optimum: Option<ParamVector>,
}

fn gaussian_rows<R: Rng + ?Sized>(n: usize, dims: usize, rng: &mut R) -> Vec<f64> {
    (0..n * dims).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn make_synthetic_task<R: Rng + ?Sized>(spec: &TaskSpec, rng: &mut R) -> Result<SyntheticTask> {
    match *spec {
        TaskSpec::LinReg { dims, train, test, noise } => {
            if dims == 0 || train == 0 || test == 0 || noise.is_nan() || noise < 0.0 {
                return Err(Error::Config(format!("invalid regression task {spec:?}")));
            }
            let weights: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(rng)).collect();
            let bias: f64 = StandardNormal.sample(rng);
            let mut make = |n: usize| -> Result<Shard> {
                let x = gaussian_rows(n, dims, rng);
                let y = (0..n)
                    .map(|i| {
                        let row = &x[i * dims..(i + 1) * dims];
                        let eps: f64 = StandardNormal.sample(rng);
                        row.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>() + bias + noise * eps
                    })
                    .collect();
                Shard::new(x, dims, Targets::Real(y))
            };
            let train = make(train)?;
            let test = make(test)?;
            let optimum = least_squares(&train)?;
            Ok(SyntheticTask {
                train,
                test,
                optimum: Some(optimum),
            })
        }
        TaskSpec::Blobs { dims, classes, train, test, margin } => {
            if dims == 0 || classes < 2 || train < classes || test == 0 || margin.is_nan() || margin < 0.0 {
                return Err(Error::Config(format!("invalid blobs task {spec:?}")));
            }
            // pairwise center distance is 2·margin
            let centers: Vec<Vec<f64>> = if classes <= dims {
                let scale = std::f64::consts::SQRT_2 * margin;
                (0..classes)
                    .map(|c| (0..dims).map(|j| if j == c { scale } else { 0.0 }).collect())
                    .collect()
            } else {
                (0..classes)
                    .map(|_| {
                        let v: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(rng)).collect();
                        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                        v.iter().map(|a| a / norm * margin).collect()
                    })
                    .collect()
            };
            let mut make = |n: usize| -> Result<Shard> {
                let mut x = gaussian_rows(n, dims, rng);
                let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
                for (i, &l) in labels.iter().enumerate() {
                    for (v, c) in x[i * dims..(i + 1) * dims].iter_mut().zip(&centers[l]) {
                        *v += c;
                    }
                }
                Shard::new(x, dims, Targets::Class { labels, classes })
            };
            let train = make(train)?;
            let test = make(test)?;
            Ok(SyntheticTask {
                train,
                test,
                optimum: None,
            })
        }
    }
}

/// Ordinary least squares with an intercept, as `[w_1 .. w_d, b]`.
pub fn least_squares(shard: &Shard) -> Result<ParamVector> {
    let Targets::Real(y) = shard.targets() else {
        return Err(Error::Data("least squares needs real targets".into()));
    };
    let d = shard.dims();
    let n = shard.len();
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j < d { shard.row(i)[j] } else { 1.0 });
    let y = DVector::from_column_slice(y);
    let solution = x
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::Data(format!("least squares failed: {e}")))?;
    let out = ParamVector::new(solution.iter().copied().collect());
    debug_assert_eq!(out.dim(), ModelSpec::Linear { dims: d }.param_count());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{evaluate, local_train, mean_loss, TrainConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_regression_optimum_is_exact() {
        let spec = TaskSpec::LinReg { dims: 5, train: 200, test: 50, noise: 0.0 };
        let task = make_synthetic_task(&spec, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let opt = task.optimum.unwrap();
        let loss = mean_loss(&ModelSpec::Linear { dims: 5 }, &opt, &task.train).unwrap();
        assert!(loss < 1e-10, "loss {loss}");
    }

    #[test]
    fn noisy_optimum_beats_perturbations() {
        let spec = TaskSpec::LinReg { dims: 3, train: 300, test: 50, noise: 0.5 };
        let task = make_synthetic_task(&spec, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let model = ModelSpec::Linear { dims: 3 };
        let opt = task.optimum.unwrap();
        let best = mean_loss(&model, &opt, &task.train).unwrap();
        for j in 0..opt.dim() {
            let mut p = opt.clone().into_inner();
            p[j] += 1e-3;
            assert!(mean_loss(&model, &p.into(), &task.train).unwrap() > best);
        }
    }

    #[test]
    fn separated_blobs_are_learnable() {
        let spec = TaskSpec::Blobs { dims: 6, classes: 4, train: 800, test: 2000, margin: 5.0 };
        let task = make_synthetic_task(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let model = ModelSpec::Logistic { dims: 6, classes: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = model.init(&mut rng);
        let cfg = TrainConfig { learning_rate: 0.05, momentum: 0.5, batch_size: 50, epochs: 30 };
        let trained = local_train(&model, &p, &task.train, &cfg, &mut rng).unwrap();
        let acc = evaluate(&model, &trained, &task.test).unwrap().accuracy;
        assert!(acc > 0.99, "accuracy {acc}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        for spec in [
            TaskSpec::LinReg { dims: 2, train: 20, test: 5, noise: 0.1 },
            TaskSpec::Blobs { dims: 2, classes: 3, train: 30, test: 6, margin: 1.0 },
        ] {
            let a = make_synthetic_task(&spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            let b = make_synthetic_task(&spec, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn blobs_are_balanced() {
        let spec = TaskSpec::Blobs { dims: 12, classes: 10, train: 1000, test: 100, margin: 1.0 };
        let task = make_synthetic_task(&spec, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_eq!(task.train.class_histogram(), vec![100; 10]);
        assert!(make_synthetic_task(&TaskSpec::Blobs { dims: 2, classes: 3, train: 2, test: 1, margin: 1.0 }, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
