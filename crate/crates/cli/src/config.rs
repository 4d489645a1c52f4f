//! Experiment configuration files.
//!
//! The format is line based: `key = value`, optional `[section]` headers
//! (a key `lr` under `[trainer]` is the same as a top-level `trainer.lr`),
//! and `#` comments. Keys are case-insensitive. The axis keys `algorithm`,
//! `selector`, `alpha` and `preset` accept comma-separated lists and are
//! expanded into a grid; every cell is run for `repeats` consecutive seeds
//! starting at `seed`.
//!
//! ```text
//! algorithm = gitfl, fedasync
//! selector = CV, R
//! K = 10
//! clients = 100
//! time_budget = 10000
//! alpha = 0.1, 0.5
//! preset = config3
//! seed = 7
//! repeats = 5
//!
//! [trainer]
//! lr = 0.01
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gitfl::device::{CompositionPreset, Population};
use gitfl::sim::{Algorithm, DataSplit, RunConfig};
use gitfl::trainer::{ModelKind, TaskSpec};
use gitfl::SelectorVariant;

use crate::error::{CliError, Result};

/// Every accepted key, in canonical (lower-case, dotted) form.
pub const KNOWN_KEYS: &[&str] = &[
    "algorithm",
    "selector",
    "k",
    "clients",
    "time_budget",
    "alpha",
    "iid",
    "preset",
    "seed",
    "repeats",
    "eval_interval",
    "pull_base_weight",
    "output",
    "threads",
    "target",
    "trace",
    "trainer.kind",
    "trainer.lr",
    "trainer.momentum",
    "trainer.batch",
    "trainer.epochs",
    "trainer.hidden",
    "fedasync.beta",
    "fedasync.a",
    "task.kind",
    "task.dims",
    "task.classes",
    "task.train",
    "task.test",
    "task.margin",
    "task.noise",
    "devices.training",
    "devices.comm",
    "devices.sigma_scale",
    "devices.network_multiplier",
];

/// One run of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    /// Grid cell label, shared by all seeds of the cell.
    pub cell: String,
    pub config: RunConfig,
}

impl RunSpec {
    pub fn metrics_file(&self) -> String {
        format!("{}-seed{}.csv", self.cell, self.config.seed)
    }

    pub fn trace_file(&self) -> String {
        format!("{}-seed{}.trace.csv", self.cell, self.config.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Cells in grid order, each expanded over its seeds.
    pub runs: Vec<RunSpec>,
    pub output_dir: PathBuf,
    pub base_seed: u64,
    pub repeats: u64,
    /// Accuracy target for the time/communication-to-target columns.
    pub target: Option<f64>,
    /// Also write each run's completion trace.
    pub write_trace: bool,
}

impl ExperimentSpec {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats).map(|i| self.base_seed + i).collect()
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

struct Table<'a> {
    path: &'a str,
    entries: HashMap<String, Entry>,
}

fn tokenize(text: &str, path: &str) -> Result<HashMap<String, Entry>> {
    let mut entries: HashMap<String, Entry> = HashMap::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| CliError::Parse {
            path: path.to_string(),
            line,
            message,
        };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(format!("unterminated section header `{content}`")))?
                .trim()
                .to_ascii_lowercase();
            if name.is_empty() || !KNOWN_KEYS.iter().any(|k| k.starts_with(&format!("{name}."))) {
                return Err(err(format!("unknown section `[{name}]`")));
            }
            section = name;
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        if key.is_empty() {
            return Err(err("missing key before `=`".into()));
        }
        if value.is_empty() {
            return Err(err(format!("missing value for `{key}`")));
        }
        let full = if section.is_empty() || key.contains('.') {
            key
        } else {
            format!("{section}.{key}")
        };
        if !KNOWN_KEYS.contains(&full.as_str()) {
            return Err(err(format!("unknown key `{full}`")));
        }
        if let Some(prev) = entries.get(&full) {
            return Err(err(format!("duplicate key `{full}` (first set on line {})", prev.line)));
        }
        entries.insert(
            full,
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(entries)
}

impl Table<'_> {
    fn parse_err(&self, e: &Entry, key: &str, message: impl std::fmt::Display) -> CliError {
        CliError::Parse {
            path: self.path.to_string(),
            line: e.line,
            message: format!("`{key}`: {message}"),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|err| self.parse_err(e, key, format!("`{}`: {err}", e.value))),
        }
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for item in e.value.split(',') {
            let item = item.trim();
            if item.is_empty() {
                return Err(self.parse_err(e, key, "empty list item"));
            }
            out.push(item.parse().map_err(|err| self.parse_err(e, key, format!("`{item}`: {err}")))?);
        }
        Ok(Some(out))
    }

    fn counts(&self, key: &str) -> Result<Option<[usize; 5]>> {
        match self.list::<usize>(key)? {
            None => Ok(None),
            Some(v) => v
                .try_into()
                .map(Some)
                .map_err(|_| self.parse_err(&self.entries[key], key, "expected 5 counts (Excellent, High, Medium, Low, Critical)")),
        }
    }
}

#[derive(Debug, Clone)]
struct PresetChoice {
    label: String,
    preset: CompositionPreset,
}

/// Reads and expands an experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, &path.display().to_string())
}

/// Parses experiment text; `origin` names the source in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentSpec> {
    let table = Table {
        path: origin,
        entries: tokenize(text, origin)?,
    };
    let mut base = RunConfig::default();

    let algorithms: Vec<Algorithm> = table.list("algorithm")?.unwrap_or_else(|| vec![Algorithm::GitFl]);
    let selectors: Vec<SelectorVariant> = table.list("selector")?.unwrap_or_else(|| vec![SelectorVariant::Cv]);
    if let Some(k) = table.get("k")? {
        base.branches = k;
    }
    if let Some(c) = table.get("clients")? {
        base.clients = c;
    }
    if let Some(t) = table.get("time_budget")? {
        base.time_budget = t;
    }
    if let Some(i) = table.get("eval_interval")? {
        base.eval_interval = i;
    }
    if let Some(w) = table.get("pull_base_weight")? {
        base.pull_base_weight = w;
    }
    if let Some(t) = table.get("threads")? {
        base.threads = t;
    }
    let base_seed: u64 = table.get("seed")?.unwrap_or(1);
    let repeats: u64 = table.get("repeats")?.unwrap_or(1);
    let target: Option<f64> = table.get("target")?;
    let write_trace: bool = table.get("trace")?.unwrap_or(false);
    let output_dir = PathBuf::from(table.get::<String>("output")?.unwrap_or_else(|| "results".into()));

    let task_kind: String = table.get::<String>("task.kind")?.unwrap_or_else(|| "blobs".into()).to_ascii_lowercase();
    let dims: Option<usize> = table.get("task.dims")?;
    let train: Option<usize> = table.get("task.train")?;
    let test: Option<usize> = table.get("task.test")?;
    base.task = match task_kind.as_str() {
        "blobs" => {
            if table.entries.contains_key("task.noise") {
                return Err(CliError::key("task.noise", "only applies to task.kind = linreg"));
            }
            TaskSpec::Blobs {
                dims: dims.unwrap_or(10),
                classes: table.get("task.classes")?.unwrap_or(10),
                train: train.unwrap_or(5000),
                test: test.unwrap_or(2000),
                margin: table.get("task.margin")?.unwrap_or(1.5),
            }
        }
        "linreg" => {
            for key in ["task.classes", "task.margin"] {
                if table.entries.contains_key(key) {
                    return Err(CliError::key(key, "only applies to task.kind = blobs"));
                }
            }
            TaskSpec::LinReg {
                dims: dims.unwrap_or(10),
                train: train.unwrap_or(5000),
                test: test.unwrap_or(2000),
                noise: table.get("task.noise")?.unwrap_or(0.1),
            }
        }
        other => return Err(CliError::key("task.kind", format!("unknown task `{other}` (expected blobs or linreg)"))),
    };
    let regression = base.task.classes().is_none();

    base.model = match table.get::<ModelKind>("trainer.kind")? {
        Some(kind) => kind,
        None if regression => ModelKind::Linear,
        None => ModelKind::Logistic,
    };
    if let Some(h) = table.get("trainer.hidden")? {
        base.hidden = h;
    }
    if let Some(lr) = table.get("trainer.lr")? {
        base.train.learning_rate = lr;
    }
    if let Some(m) = table.get("trainer.momentum")? {
        base.train.momentum = m;
    }
    if let Some(b) = table.get("trainer.batch")? {
        base.train.batch_size = b;
    }
    if let Some(e) = table.get("trainer.epochs")? {
        base.train.epochs = e;
    }
    if let Some(b) = table.get("fedasync.beta")? {
        base.fedasync.beta = b;
    }
    if let Some(a) = table.get("fedasync.a")? {
        base.fedasync.staleness_exponent = a;
    }
    if let Some(s) = table.get("devices.sigma_scale")? {
        base.latency.sigma_scale = s;
    }
    if let Some(m) = table.get("devices.network_multiplier")? {
        base.latency.network_multiplier = m;
    }

    let iid: Option<bool> = table.get("iid")?;
    let alphas: Option<Vec<f64>> = table.list("alpha")?;
    let splits: Vec<DataSplit> = match (alphas, iid) {
        (Some(_), Some(_)) => return Err(CliError::key("alpha", "`alpha` and `iid` are mutually exclusive")),
        (Some(a), None) => a.into_iter().map(DataSplit::Dirichlet).collect(),
        (None, Some(true)) => vec![DataSplit::Iid],
        (None, Some(false)) if regression => {
            return Err(CliError::key("iid", "regression tasks need iid = true"));
        }
        (None, Some(false)) => vec![DataSplit::Dirichlet(0.5)],
        (None, None) if regression => vec![DataSplit::Iid],
        (None, None) => vec![DataSplit::Dirichlet(0.5)],
    };
    for split in &splits {
        if let DataSplit::Dirichlet(a) = *split {
            if !(a > 0.0 && a.is_finite()) {
                return Err(CliError::key("alpha", format!("must be positive, got {a}")));
            }
            if regression {
                return Err(CliError::key("alpha", "Dirichlet splits need a classification task"));
            }
        }
    }

    let training = table.counts("devices.training")?;
    let comm = table.counts("devices.comm")?;
    let presets: Vec<PresetChoice> = match (table.list::<String>("preset")?, training, comm) {
        (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
            return Err(CliError::key("preset", "`preset` and explicit `devices.training`/`devices.comm` counts are mutually exclusive"));
        }
        (Some(names), None, None) => names
            .into_iter()
            .map(|n| {
                let label = n.to_ascii_lowercase();
                CompositionPreset::by_name(&label)
                    .map(|preset| PresetChoice { label, preset })
                    .map_err(|e| CliError::key("preset", e.to_string()))
            })
            .collect::<Result<_>>()?,
        (None, None, None) => vec![PresetChoice {
            label: "uniform".into(),
            preset: CompositionPreset::uniform(),
        }],
        (None, training, comm) => {
            let training = training.or(comm).unwrap();
            let comm = comm.unwrap_or(training);
            vec![PresetChoice {
                label: "custom".into(),
                preset: CompositionPreset::new(training, comm),
            }]
        }
    };
    for p in &presets {
        if p.preset.training_total() != base.clients || p.preset.comm_total() != base.clients {
            let key = if p.label == "custom" { "devices.training" } else { "preset" };
            return Err(CliError::key(
                key,
                format!(
                    "`{}` covers {} compute / {} network devices but clients = {}",
                    p.label,
                    p.preset.training_total(),
                    p.preset.comm_total(),
                    base.clients
                ),
            ));
        }
    }

    if base.branches == 0 || base.branches > base.clients {
        return Err(CliError::key(
            "K",
            format!("must satisfy 1 <= K <= clients, got K = {} with clients = {}", base.branches, base.clients),
        ));
    }
    if !(base.time_budget > 0.0 && base.time_budget.is_finite()) {
        return Err(CliError::key("time_budget", "must be positive"));
    }
    if !(base.eval_interval > 0.0 && base.eval_interval.is_finite()) {
        return Err(CliError::key("eval_interval", "must be positive"));
    }
    if repeats == 0 {
        return Err(CliError::key("repeats", "must be at least 1"));
    }
    if base_seed.checked_add(repeats - 1).is_none() {
        return Err(CliError::key("seed", "seed + repeats overflows"));
    }
    if let Some(t) = target {
        if !(t > 0.0 && t < 1.0) {
            return Err(CliError::key("target", format!("must lie in (0, 1), got {t}")));
        }
    }
    base.train.validate().map_err(|e| CliError::key("trainer", e.to_string()))?;

    let mut runs = Vec::new();
    let mut cells: Vec<String> = Vec::new();
    for &algorithm in &algorithms {
        for &selector in &selectors {
            for &split in &splits {
                for p in &presets {
                    let cell = match algorithm {
                        Algorithm::GitFl => format!("{algorithm}-{selector}-{split}-{}", p.label),
                        _ => format!("{algorithm}-{split}-{}", p.label),
                    };
                    if cells.contains(&cell) {
                        continue;
                    }
                    cells.push(cell.clone());
                    for seed in base_seed..=base_seed + (repeats - 1) {
                        let config = RunConfig {
                            algorithm,
                            selector,
                            split,
                            seed,
                            population: Population::Preset(p.preset.clone()),
                            ..base.clone()
                        };
                        config.validate().map_err(|e| CliError::key("config", e.to_string()))?;
                        runs.push(RunSpec {
                            cell: cell.clone(),
                            config,
                        });
                    }
                }
            }
        }
    }

    Ok(ExperimentSpec {
        runs,
        output_dir,
        base_seed,
        repeats,
        target,
        write_trace,
    })
}
