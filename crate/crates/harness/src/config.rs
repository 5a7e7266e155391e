//! Experiment configuration files.
//!
//! Flat UTF-8 `key = value` lines; `#` starts a comment; lists are
//! comma-separated. Unknown and repeated keys are rejected.
//!
//! ```text
//! d = 100
//! r = 5
//! sweep_var = num_tasks
//! sweep_values = 5, 10, 20, 40
//! fixed_n_per_task = 25
//! n2 = 25
//! master_seed = 7
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use sharedrep_core::model::Sampling;

pub const DEFAULT_REPS: usize = 30;
pub const DEFAULT_FIXED_T: usize = 20;
pub const DEFAULT_FIXED_N_PER_TASK: usize = 25;
pub const DEFAULT_OUT_DIR: &str = "results";

const KEYS: &[&str] = &[
    "d",
    "r",
    "noise",
    "sweep_var",
    "sweep_values",
    "fixed_t",
    "fixed_n_per_task",
    "n2",
    "estimators",
    "sampling",
    "reps",
    "master_seed",
    "out_dir",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, key: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            key: key.map(str::to_owned),
            message: message.into(),
        }
    }

    fn field(key: &str, line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            line,
            key: Some(key.to_owned()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "`{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SweepVar {
    NumTasks,
    NPerTask,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::NumTasks => "num_tasks",
            SweepVar::NPerTask => "n_per_task",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "num_tasks" => Some(SweepVar::NumTasks),
            "n_per_task" => Some(SweepVar::NPerTask),
            _ => None,
        }
    }
}

/// Ordered so that sorting rows by estimator is stable across runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Estimator {
    Mom,
    Fo,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Mom => "mom",
            Estimator::Fo => "fo",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mom" => Some(Estimator::Mom),
            "fo" => Some(Estimator::Fo),
            _ => None,
        }
    }
}

pub fn sampling_str(s: Sampling) -> &'static str {
    match s {
        Sampling::RoundRobin => "round_robin",
        Sampling::Uniform => "uniform",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub r: usize,
    /// Noise standard deviation; only 1 is accepted.
    pub noise: f64,
    pub sweep_var: SweepVar,
    pub sweep_values: Vec<usize>,
    pub fixed_t: usize,
    pub fixed_n_per_task: usize,
    pub n2: usize,
    /// Deduplicated, in [`Estimator`] order.
    pub estimators: Vec<Estimator>,
    pub sampling: Sampling,
    pub reps: usize,
    pub master_seed: u64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    /// `(t, n_per_task)` at a sweep value.
    pub fn sizes_at(&self, sweep_value: usize) -> (usize, usize) {
        match self.sweep_var {
            SweepVar::NumTasks => (sweep_value, self.fixed_n_per_task),
            SweepVar::NPerTask => (self.fixed_t, sweep_value),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            key: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        parse_config(&text)
    }
}

fn parse_count(key: &str, line: usize, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>()
        .map_err(|_| ConfigError::field(key, Some(line), format!("expected a non-negative integer, got `{v}`")))
}

fn positive(key: &str, line: usize, v: &str) -> Result<usize, ConfigError> {
    let n = parse_count(key, line, v)?;
    if n == 0 {
        return Err(ConfigError::field(key, Some(line), "must be at least 1"));
    }
    Ok(n)
}

/// Parses the text of a config file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::at(lineno, None, "expected `key = value`"));
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(&key) = KEYS.iter().find(|&&known| known == k) else {
            return Err(ConfigError::at(lineno, Some(k), "unknown key"));
        };
        if v.is_empty() {
            return Err(ConfigError::at(lineno, Some(key), "missing value"));
        }
        if let Some((first, _)) = entries.insert(key, (lineno, v)) {
            return Err(ConfigError::at(lineno, Some(key), format!("duplicate key (first set on line {first})")));
        }
    }

    let required = |key: &str| {
        entries
            .get(key)
            .copied()
            .ok_or_else(|| ConfigError::field(key, None, "required key missing"))
    };

    let (l, v) = required("d")?;
    let d = positive("d", l, v)?;
    let (l, v) = required("r")?;
    let r = positive("r", l, v)?;
    if r > d {
        return Err(ConfigError::field("r", Some(l), "must not exceed d"));
    }

    let noise = match entries.get("noise") {
        None => 1.0,
        Some(&(l, v)) => {
            let x: f64 = v
                .parse()
                .map_err(|_| ConfigError::field("noise", Some(l), format!("expected a number, got `{v}`")))?;
            if x != 1.0 {
                return Err(ConfigError::field("noise", Some(l), "noise level is fixed to 1"));
            }
            x
        }
    };

    let (l, v) = required("sweep_var")?;
    let sweep_var = SweepVar::parse(v)
        .ok_or_else(|| ConfigError::field("sweep_var", Some(l), "expected `num_tasks` or `n_per_task`"))?;

    let (l, v) = required("sweep_values")?;
    let sweep_values = v
        .split(',')
        .map(|s| positive("sweep_values", l, s.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    if sweep_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::field("sweep_values", Some(l), "values must be strictly increasing"));
    }

    let fixed = |key: &str, default: usize| match entries.get(key) {
        None => Ok(default),
        Some(&(l, v)) => positive(key, l, v),
    };
    let fixed_t = fixed("fixed_t", DEFAULT_FIXED_T)?;
    let fixed_n_per_task = fixed("fixed_n_per_task", DEFAULT_FIXED_N_PER_TASK)?;

    let (l, v) = required("n2")?;
    let n2 = positive("n2", l, v)?;

    let estimators = match entries.get("estimators") {
        None => vec![Estimator::Mom, Estimator::Fo],
        Some(&(l, v)) => {
            let mut list = v
                .split(',')
                .map(|s| {
                    let s = s.trim();
                    Estimator::parse(s)
                        .ok_or_else(|| ConfigError::field("estimators", Some(l), format!("unknown estimator `{s}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            list.sort();
            list.dedup();
            list
        }
    };

    let sampling = match entries.get("sampling") {
        None => Sampling::RoundRobin,
        Some(&(_, "round_robin")) => Sampling::RoundRobin,
        Some(&(_, "uniform")) => Sampling::Uniform,
        Some(&(l, _)) => {
            return Err(ConfigError::field("sampling", Some(l), "expected `round_robin` or `uniform`"));
        }
    };

    let reps = fixed("reps", DEFAULT_REPS)?;

    let (l, v) = required("master_seed")?;
    let master_seed = v
        .parse::<u64>()
        .map_err(|_| ConfigError::field("master_seed", Some(l), format!("expected an unsigned 64-bit integer, got `{v}`")))?;

    let out_dir = entries
        .get("out_dir")
        .map_or_else(|| PathBuf::from(DEFAULT_OUT_DIR), |&(_, v)| PathBuf::from(v));

    Ok(ExperimentConfig {
        d,
        r,
        noise,
        sweep_var,
        sweep_values,
        fixed_t,
        fixed_n_per_task,
        n2,
        estimators,
        sampling,
        reps,
        master_seed,
        out_dir,
    })
}
