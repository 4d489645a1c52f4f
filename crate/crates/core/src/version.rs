//! Version control over the branch repository: merging branches into the
//! master, pulling the master into a branch before dispatch, and pushing a
//! trained branch back.

use crate::error::{Error, Result};
use crate::params::{axpy_combine, ParamVector, Repository};

/// Default branch weight offset used by [`model_pull`].
pub const DEFAULT_PULL_BASE_WEIGHT: f64 = 10.0;

/// Lower bound on the branch weight in [`model_pull`]. Keeps the master's
/// share of a pulled model at or below one third.
pub const MIN_PULL_WEIGHT: f64 = 2.0;

/// Push counts of every branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionVector(Vec<u64>);

impl VersionVector {
    pub fn new(versions: Vec<u64>) -> Self {
        Self(versions)
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, branch_id: usize) -> u64 {
        self.0[branch_id]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() as f64 / self.0.len() as f64
    }

    pub fn min(&self) -> u64 {
        self.0.iter().copied().min().unwrap_or(0)
    }

    pub fn max(&self) -> u64 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// `max − min`.
    pub fn spread(&self) -> u64 {
        self.max() - self.min()
    }
}

impl Repository {
    pub fn versions(&self) -> VersionVector {
        VersionVector(self.branches().iter().map(|b| b.version).collect())
    }
}

/// Version-weighted mean of all branches. When every version is zero the
/// branches are weighted uniformly.
pub fn merge_master(repo: &Repository) -> Result<ParamVector> {
    let models: Vec<&ParamVector> = repo.branches().iter().map(|b| &b.params).collect();
    let mut weights: Vec<f64> = repo.branches().iter().map(|b| b.version as f64).collect();
    if weights.iter().all(|&w| w == 0.0) {
        weights.fill(1.0);
    }
    axpy_combine(&weights, &models)
}

/// Branch version minus the mean version over all branches.
pub fn version_ctrl(branch_id: usize, versions: &VersionVector) -> f64 {
    versions.get(branch_id) as f64 - versions.mean()
}

/// Weight given to the branch side when pulling the master into it.
pub fn pull_weight(v_ctrl: f64, base_weight: f64) -> f64 {
    (base_weight + v_ctrl).max(MIN_PULL_WEIGHT)
}

/// Blends the master into a branch: `(w·branch + master) / (w + 1)` with
/// `w = max(base_weight + v_ctrl, 2)`.
pub fn model_pull(
    branch_id: usize,
    versions: &VersionVector,
    master: &ParamVector,
    branch: &ParamVector,
    base_weight: f64,
) -> Result<ParamVector> {
    let w = pull_weight(version_ctrl(branch_id, versions), base_weight);
    if branch == master {
        return Ok(master.clone());
    }
    axpy_combine(&[w, 1.0], &[branch, master])
}

/// Replaces a branch with its trained successor and bumps its version.
pub fn model_push(repo: &mut Repository, branch_id: usize, trained: ParamVector) -> Result<()> {
    if trained.dim() != repo.dim() {
        return Err(Error::DimensionMismatch {
            expected: repo.dim(),
            actual: trained.dim(),
        });
    }
    if !trained.is_finite() {
        return Err(Error::NonFinite(format!("model pushed to branch {branch_id}")));
    }
    let branch = repo.branch_mut(branch_id);
    branch.params = trained;
    branch.version += 1;
    Ok(())
}
