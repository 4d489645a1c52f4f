use std::path::Path;

use crate::error::{Error, Result};

/// Regression targets or class labels.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Real(Vec<f64>),
    Class { labels: Vec<usize>, classes: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(y) => y.len(),
            Targets::Class { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Real(y) => Targets::Real(idx.iter().map(|&i| y[i]).collect()),
            Targets::Class { labels, classes } => Targets::Class {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
        }
    }
}

/// A block of samples: row-major features plus targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Shard {
    features: Vec<f64>,
    dims: usize,
    targets: Targets,
}

impl Shard {
    pub fn new(features: Vec<f64>, dims: usize, targets: Targets) -> Result<Self> {
        if dims == 0 {
            return Err(Error::Data("feature dimension must be positive".into()));
        }
        if features.len() != dims * targets.len() {
            return Err(Error::Data(format!(
                "{} feature values do not form {} rows of width {dims}",
                features.len(),
                targets.len()
            )));
        }
        if let Targets::Class { labels, classes } = &targets {
            if let Some(&bad) = labels.iter().find(|&&l| l >= *classes) {
                return Err(Error::Data(format!("label {bad} out of range for {classes} classes")));
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(Self {
            features,
            dims,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dims..(i + 1) * self.dims]
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    /// Class labels, if this is a classification shard.
    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Class { labels, .. } => Some(labels),
            Targets::Real(_) => None,
        }
    }

    pub fn num_classes(&self) -> Option<usize> {
        match &self.targets {
            Targets::Class { classes, .. } => Some(*classes),
            Targets::Real(_) => None,
        }
    }

    /// Rows `idx`, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Shard {
        let mut features = Vec::with_capacity(idx.len() * self.dims);
        for &i in idx {
            features.extend_from_slice(self.row(i));
        }
        Shard {
            features,
            dims: self.dims,
            targets: self.targets.select(idx),
        }
    }

    /// Stacks shards row-wise. All shards must share dims and target kind.
    pub fn concat(shards: &[Shard]) -> Result<Shard> {
        let first = shards.first().ok_or(Error::Empty)?;
        let mut features = Vec::new();
        let mut real = Vec::new();
        let mut labels = Vec::new();
        for s in shards {
            if s.dims != first.dims {
                return Err(Error::DimensionMismatch {
                    expected: first.dims,
                    actual: s.dims,
                });
            }
            features.extend_from_slice(&s.features);
            match (&s.targets, &first.targets) {
                (Targets::Real(y), Targets::Real(_)) => real.extend_from_slice(y),
                (Targets::Class { labels: l, classes }, Targets::Class { classes: c0, .. }) if classes == c0 => {
                    labels.extend_from_slice(l)
                }
                _ => return Err(Error::Data("cannot concatenate shards of different target kinds".into())),
            }
        }
        let targets = match first.targets {
            Targets::Real(_) => Targets::Real(real),
            Targets::Class { classes, .. } => Targets::Class { labels, classes },
        };
        Ok(Shard {
            features,
            dims: first.dims,
            targets,
        })
    }

    /// Per-class sample counts (empty for regression shards).
    pub fn class_histogram(&self) -> Vec<usize> {
        match &self.targets {
            Targets::Class { labels, classes } => {
                let mut h = vec![0; *classes];
                for &l in labels {
                    h[l] += 1;
                }
                h
            }
            Targets::Real(_) => Vec::new(),
        }
    }
}

/// Reads a comma-separated table with a header row. The column named
/// `label_column` becomes the target; every other column is a feature.
/// With `classes = Some(k)` the target column must hold integers in `[0, k)`.
pub fn load_table(path: &Path, label_column: &str, classes: Option<usize>) -> Result<Shard> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Data(format!("no `{label_column}` column in {}", path.display())))?;
    let dims = headers.len() - 1;

    let mut features = Vec::new();
    let mut real = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                Error::Data(format!("row {}: `{field}` is not a number", row + 2))
            })?;
            if col == label_idx {
                match classes {
                    Some(k) => {
                        if value < 0.0 || value.fract() != 0.0 || value as usize >= k {
                            return Err(Error::Data(format!("row {}: invalid class label {field}", row + 2)));
                        }
                        labels.push(value as usize);
                    }
                    None => real.push(value),
                }
            } else {
                features.push(value);
            }
        }
    }
    let targets = match classes {
        Some(k) => Targets::Class { labels, classes: k },
        None => Targets::Real(real),
    };
    if targets.is_empty() {
        return Err(Error::Data(format!("{} has no rows", path.display())));
    }
    Shard::new(features, dims, targets)
}
