//! Flat parameter vectors and the branch-model repository.
//!
//! Models are opaque `f64` vectors. Every aggregation in the simulator
//! (master merging, pulling, FedAvg averaging) reduces to [`axpy_combine`].

use std::ops::Index;

use crate::error::{Error, Result};

/// Dense model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Bit pattern of every coordinate, for exact reproducibility checks.
    pub fn to_bits(&self) -> Vec<u64> {
        self.0.iter().map(|v| v.to_bits()).collect()
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Weighted mean `Σ wᵢ·mᵢ / Σ wᵢ`, coordinate-wise.
///
/// Accumulates in a single pass in the given order and divides once at the
/// end, so the result is bit-reproducible for a fixed input order.
pub fn axpy_combine(weights: &[f64], models: &[&ParamVector]) -> Result<ParamVector> {
    if weights.len() != models.len() {
        return Err(Error::LengthMismatch {
            weights: weights.len(),
            models: models.len(),
        });
    }
    let first = models.first().ok_or(Error::Empty)?;
    let dim = first.dim();
    for m in models {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: m.dim(),
            });
        }
    }
    if let Some(&w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidWeight(w));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeightSum(total));
    }

    let mut acc = vec![0.0; dim];
    for (&w, m) in weights.iter().zip(models) {
        if w == 0.0 {
            continue;
        }
        for (a, &v) in acc.iter_mut().zip(m.as_slice()) {
            *a += w * v;
        }
    }
    for a in &mut acc {
        *a /= total;
    }
    let out = ParamVector(acc);
    if !out.is_finite() {
        return Err(Error::NonFinite("weighted combination".into()));
    }
    Ok(out)
}

/// One branch of the repository: its latest pushed parameters and the
/// number of pushes it has received.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchModel {
    pub branch_id: usize,
    pub params: ParamVector,
    pub version: u64,
}

/// Exactly `K` branch models, indexed by branch id. Only the latest version
/// of each branch is kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Repository {
    branches: Vec<BranchModel>,
}

impl Repository {
    /// `k` branches, all starting from `init` at version 0.
    pub fn new(k: usize, init: &ParamVector) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("repository needs at least one branch".into()));
        }
        let branches = (0..k)
            .map(|branch_id| BranchModel {
                branch_id,
                params: init.clone(),
                version: 0,
            })
            .collect();
        Ok(Self { branches })
    }

    /// Builds a repository from explicit branch parameters and versions.
    pub fn from_parts(params: Vec<ParamVector>, versions: &[u64]) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Empty);
        }
        if params.len() != versions.len() {
            return Err(Error::LengthMismatch {
                weights: versions.len(),
                models: params.len(),
            });
        }
        let dim = params[0].dim();
        if let Some(p) = params.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: p.dim(),
            });
        }
        let branches = params
            .into_iter()
            .zip(versions)
            .enumerate()
            .map(|(branch_id, (params, &version))| BranchModel {
                branch_id,
                params,
                version,
            })
            .collect();
        Ok(Self { branches })
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.branches[0].params.dim()
    }

    pub fn branch(&self, branch_id: usize) -> &BranchModel {
        &self.branches[branch_id]
    }

    pub fn branches(&self) -> &[BranchModel] {
        &self.branches
    }

    pub(crate) fn branch_mut(&mut self, branch_id: usize) -> &mut BranchModel {
        &mut self.branches[branch_id]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ParamVector {
        ParamVector::new(v.to_vec())
    }

    #[test]
    fn single_model_is_identity() {
        let m = pv(&[3.5]);
        assert_eq!(axpy_combine(&[1.0], &[&m]).unwrap(), pv(&[3.5]));
    }

    #[test]
    fn weighted_scalar_mean() {
        // (2*1 + 6*3) / 4
        let expected = (2.0 * 1.0 + 6.0 * 3.0) / 4.0;
        let out = axpy_combine(&[1.0, 3.0], &[&pv(&[2.0]), &pv(&[6.0])]).unwrap();
        assert_eq!(out[0], expected);
        assert_eq!(out[0], 5.0);
    }

    #[test]
    fn symmetric_weights() {
        let out = axpy_combine(&[2.0, 2.0], &[&pv(&[1.0, 0.0]), &pv(&[0.0, 1.0])]).unwrap();
        assert_eq!(out, pv(&[0.5, 0.5]));
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = pv(&[1.0, 2.0]);
        let b = pv(&[1.0]);
        assert!(matches!(
            axpy_combine(&[1.0, 1.0], &[&a, &b]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            axpy_combine(&[0.0, 0.0], &[&a, &a]),
            Err(Error::ZeroWeightSum(_))
        ));
        assert!(matches!(axpy_combine(&[], &[]), Err(Error::Empty)));
        assert!(matches!(
            axpy_combine(&[1.0], &[&a, &a]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            axpy_combine(&[-1.0, 2.0], &[&a, &a]),
            Err(Error::InvalidWeight(_))
        ));
    }

    #[test]
    fn repository_starts_identical_at_version_zero() {
        let repo = Repository::new(4, &pv(&[1.0, 2.0])).unwrap();
        assert_eq!(repo.len(), 4);
        for (i, b) in repo.branches().iter().enumerate() {
            assert_eq!(b.branch_id, i);
            assert_eq!(b.version, 0);
            assert_eq!(b.params, pv(&[1.0, 2.0]));
        }
        assert!(Repository::new(0, &pv(&[1.0])).is_err());
    }

    fn weighted_models() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
        (1usize..8, 1usize..6).prop_flat_map(|(n, dim)| {
            (
                prop::collection::vec(0.01f64..100.0, n),
                prop::collection::vec(prop::collection::vec(-50.0f64..50.0, dim), n),
            )
        })
    }

    proptest! {
        #[test]
        fn output_is_convex((weights, raw) in weighted_models()) {
            let models: Vec<ParamVector> = raw.iter().map(|v| pv(v)).collect();
            let refs: Vec<&ParamVector> = models.iter().collect();
            let out = axpy_combine(&weights, &refs).unwrap();
            for j in 0..out.dim() {
                let lo = raw.iter().map(|m| m[j]).fold(f64::INFINITY, f64::min);
                let hi = raw.iter().map(|m| m[j]).fold(f64::NEG_INFINITY, f64::max);
                let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
                prop_assert!(out[j] >= lo - slack && out[j] <= hi + slack);
            }
        }

        #[test]
        fn weight_scale_invariant((weights, raw) in weighted_models(), c in 0.001f64..1000.0) {
            let models: Vec<ParamVector> = raw.iter().map(|v| pv(v)).collect();
            let refs: Vec<&ParamVector> = models.iter().collect();
            let scaled: Vec<f64> = weights.iter().map(|w| w * c).collect();
            let a = axpy_combine(&weights, &refs).unwrap();
            let b = axpy_combine(&scaled, &refs).unwrap();
            for j in 0..a.dim() {
                let tol = 1e-12 * a[j].abs().max(1.0);
                prop_assert!((a[j] - b[j]).abs() <= tol * 10.0);
            }
        }

        #[test]
        fn permutation_invariant((weights, raw) in weighted_models(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let models: Vec<ParamVector> = raw.iter().map(|v| pv(v)).collect();
            let mut order: Vec<usize> = (0..weights.len()).collect();
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let pw: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
            let pm: Vec<&ParamVector> = order.iter().map(|&i| &models[i]).collect();
            let refs: Vec<&ParamVector> = models.iter().collect();
            let a = axpy_combine(&weights, &refs).unwrap();
            let b = axpy_combine(&pw, &pm).unwrap();
            for j in 0..a.dim() {
                prop_assert!((a[j] - b[j]).abs() <= 1e-10 * a[j].abs().max(1.0));
            }
        }
    }
}
