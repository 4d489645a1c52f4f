//! Reference model families over flat parameter vectors.
//!
//! Layouts (row-major, weights before bias):
//! - linear: `[w_1 .. w_d, b]`
//! - logistic: `classes` rows of `[w_1 .. w_d, b]`
//! - MLP: hidden rows `[w_1 .. w_d, b]`, then output rows `[u_1 .. u_h, c]`

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::data::{Shard, Targets};
use crate::error::{Error, Result};
use crate::params::ParamVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSpec {
    /// Scalar least-squares regression.
    Linear { dims: usize },
    /// Multinomial logistic regression.
    Logistic { dims: usize, classes: usize },
    /// One tanh hidden layer followed by a softmax output.
    Mlp { dims: usize, hidden: usize, classes: usize },
}

/// Model family name as used in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Linear,
    Logistic,
    Mlp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(ModelKind::Linear),
            "logistic" => Ok(ModelKind::Logistic),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(Error::Config(format!(
                "unknown trainer kind `{other}` (expected linear, logistic or mlp)"
            ))),
        }
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ModelSpec {
    pub fn dims(&self) -> usize {
        match *self {
            ModelSpec::Linear { dims } | ModelSpec::Logistic { dims, .. } | ModelSpec::Mlp { dims, .. } => dims,
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            ModelSpec::Linear { dims } => dims + 1,
            ModelSpec::Logistic { dims, classes } => classes * (dims + 1),
            ModelSpec::Mlp { dims, hidden, classes } => hidden * (dims + 1) + classes * (hidden + 1),
        }
    }

    pub fn is_classifier(&self) -> bool {
        !matches!(self, ModelSpec::Linear { .. })
    }

    /// Small random initialization: N(0, 0.01²) for linear and logistic
    /// models, scaled N(0, 1/fan_in) for the MLP.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let values = match *self {
            ModelSpec::Linear { .. } | ModelSpec::Logistic { .. } => {
                let n = Normal::new(0.0, 0.01).unwrap();
                (0..self.param_count()).map(|_| n.sample(rng)).collect()
            }
            ModelSpec::Mlp { dims, hidden, classes } => {
                let first = Normal::new(0.0, (1.0 / dims as f64).sqrt()).unwrap();
                let second = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).unwrap();
                let mut v = Vec::with_capacity(self.param_count());
                for _ in 0..hidden {
                    v.extend((0..dims).map(|_| first.sample(rng)));
                    v.push(0.0);
                }
                for _ in 0..classes {
                    v.extend((0..hidden).map(|_| second.sample(rng)));
                    v.push(0.0);
                }
                v
            }
        };
        ParamVector::new(values)
    }

    pub(crate) fn check(&self, params: &ParamVector, shard: &Shard) -> Result<()> {
        if params.dim() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: params.dim(),
            });
        }
        if shard.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: shard.dims(),
            });
        }
        match (self, shard.targets()) {
            (ModelSpec::Linear { .. }, Targets::Real(_)) => Ok(()),
            (ModelSpec::Logistic { classes, .. } | ModelSpec::Mlp { classes, .. }, Targets::Class { classes: k, .. })
                if classes == k =>
            {
                Ok(())
            }
            _ => Err(Error::Data(format!("shard targets do not fit model {self:?}"))),
        }
    }

    /// Mean loss over rows `idx`. When `grad` is given it is overwritten
    /// with the gradient of that mean loss.
    pub fn loss_grad(&self, params: &[f64], shard: &Shard, idx: &[usize], mut grad: Option<&mut [f64]>) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let n = idx.len() as f64;
        let mut loss = 0.0;
        match (*self, shard.targets()) {
            (ModelSpec::Linear { dims }, Targets::Real(y)) => {
                let (w, b) = params.split_at(dims);
                for &i in idx {
                    let x = shard.row(i);
                    let r = dot(w, x) + b[0] - y[i];
                    loss += r * r;
                    if let Some(g) = grad.as_deref_mut() {
                        let s = 2.0 * r / n;
                        for (gj, xj) in g[..dims].iter_mut().zip(x) {
                            *gj += s * xj;
                        }
                        g[dims] += s;
                    }
                }
            }
            (ModelSpec::Logistic { dims, classes }, Targets::Class { labels, .. }) => {
                let mut z = vec![0.0; classes];
                for &i in idx {
                    let x = shard.row(i);
                    for (c, zc) in z.iter_mut().enumerate() {
                        let row = &params[c * (dims + 1)..(c + 1) * (dims + 1)];
                        *zc = dot(&row[..dims], x) + row[dims];
                    }
                    softmax_in_place(&mut z);
                    let y = labels[i];
                    loss -= z[y].max(f64::MIN_POSITIVE).ln();
                    if let Some(g) = grad.as_deref_mut() {
                        for (c, &p) in z.iter().enumerate() {
                            let d = (p - if c == y { 1.0 } else { 0.0 }) / n;
                            let grow = &mut g[c * (dims + 1)..(c + 1) * (dims + 1)];
                            for (gj, xj) in grow[..dims].iter_mut().zip(x) {
                                *gj += d * xj;
                            }
                            grow[dims] += d;
                        }
                    }
                }
            }
            (ModelSpec::Mlp { dims, hidden, classes }, Targets::Class { labels, .. }) => {
                let out_base = hidden * (dims + 1);
                let mut h = vec![0.0; hidden];
                let mut z = vec![0.0; classes];
                let mut dh = vec![0.0; hidden];
                for &i in idx {
                    let x = shard.row(i);
                    for (k, hk) in h.iter_mut().enumerate() {
                        let row = &params[k * (dims + 1)..(k + 1) * (dims + 1)];
                        *hk = (dot(&row[..dims], x) + row[dims]).tanh();
                    }
                    for (c, zc) in z.iter_mut().enumerate() {
                        let row = &params[out_base + c * (hidden + 1)..out_base + (c + 1) * (hidden + 1)];
                        *zc = dot(&row[..hidden], &h) + row[hidden];
                    }
                    softmax_in_place(&mut z);
                    let y = labels[i];
                    loss -= z[y].max(f64::MIN_POSITIVE).ln();
                    if let Some(g) = grad.as_deref_mut() {
                        dh.fill(0.0);
                        for (c, &p) in z.iter().enumerate() {
                            let d = (p - if c == y { 1.0 } else { 0.0 }) / n;
                            let base = out_base + c * (hidden + 1);
                            for k in 0..hidden {
                                g[base + k] += d * h[k];
                                dh[k] += d * params[base + k];
                            }
                            g[base + hidden] += d;
                        }
                        for k in 0..hidden {
                            let pre = dh[k] * (1.0 - h[k] * h[k]);
                            let grow = &mut g[k * (dims + 1)..(k + 1) * (dims + 1)];
                            for (gj, xj) in grow[..dims].iter_mut().zip(x) {
                                *gj += pre * xj;
                            }
                            grow[dims] += pre;
                        }
                    }
                }
            }
            _ => unreachable!("model/target pairing is validated before use"),
        }
        loss / n
    }

    /// Predicted value (regression) or class index (classification) for one row.
    pub fn predict(&self, params: &[f64], x: &[f64]) -> f64 {
        match *self {
            ModelSpec::Linear { dims } => dot(&params[..dims], x) + params[dims],
            ModelSpec::Logistic { dims, classes } => argmax((0..classes).map(|c| {
                let row = &params[c * (dims + 1)..(c + 1) * (dims + 1)];
                dot(&row[..dims], x) + row[dims]
            })) as f64,
            ModelSpec::Mlp { dims, hidden, classes } => {
                let h: Vec<f64> = (0..hidden)
                    .map(|k| {
                        let row = &params[k * (dims + 1)..(k + 1) * (dims + 1)];
                        (dot(&row[..dims], x) + row[dims]).tanh()
                    })
                    .collect();
                let out_base = hidden * (dims + 1);
                argmax((0..classes).map(|c| {
                    let row = &params[out_base + c * (hidden + 1)..out_base + (c + 1) * (hidden + 1)];
                    dot(&row[..hidden], &h) + row[hidden]
                })) as f64
            }
        }
    }
}

/// Index of the first maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_shard(spec: ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> Shard {
        let d = spec.dims();
        let features: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let targets = match spec {
            ModelSpec::Linear { .. } => Targets::Real((0..n).map(|_| rng.random_range(-3.0..3.0)).collect()),
            ModelSpec::Logistic { classes, .. } | ModelSpec::Mlp { classes, .. } => Targets::Class {
                labels: (0..n).map(|_| rng.random_range(0..classes)).collect(),
                classes,
            },
        };
        Shard::new(features, d, targets).unwrap()
    }

    /// Central finite differences against the analytic gradient at 100
    /// random points per model family.
    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let specs = [
            ModelSpec::Linear { dims: 4 },
            ModelSpec::Logistic { dims: 3, classes: 4 },
            ModelSpec::Mlp { dims: 3, hidden: 5, classes: 3 },
        ];
        for spec in specs {
            let shard = random_shard(spec, 12, &mut rng);
            let idx: Vec<usize> = (0..shard.len()).collect();
            for _ in 0..100 {
                let p: Vec<f64> = (0..spec.param_count()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mut g = vec![0.0; p.len()];
                spec.loss_grad(&p, &shard, &idx, Some(&mut g));
                let h = 1e-5;
                let mut worst: f64 = 0.0;
                let mut num = vec![0.0; p.len()];
                for j in 0..p.len() {
                    let mut plus = p.clone();
                    let mut minus = p.clone();
                    plus[j] += h;
                    minus[j] -= h;
                    num[j] = (spec.loss_grad(&plus, &shard, &idx, None) - spec.loss_grad(&minus, &shard, &idx, None)) / (2.0 * h);
                }
                let diff: f64 = g.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let scale: f64 = num.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-8);
                worst = worst.max(diff / scale);
                assert!(worst < 1e-5, "{spec:?}: relative gradient error {worst}");
            }
        }
    }

    #[test]
    fn param_counts() {
        assert_eq!(ModelSpec::Linear { dims: 3 }.param_count(), 4);
        assert_eq!(ModelSpec::Logistic { dims: 3, classes: 10 }.param_count(), 40);
        assert_eq!(ModelSpec::Mlp { dims: 3, hidden: 8, classes: 10 }.param_count(), 32 + 90);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = ModelSpec::Mlp { dims: 3, hidden: 8, classes: 10 };
        assert_eq!(s.init(&mut rng).dim(), s.param_count());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("MLP".parse::<ModelKind>().unwrap(), ModelKind::Mlp);
        assert!("cnn".parse::<ModelKind>().is_err());
    }
}
