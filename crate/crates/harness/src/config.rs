//! Run configuration as flat `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Keys:
//!
//! | key | value |
//! |-----|-------|
//! | `scenario` | `rare_patterns`, `incremental` or `gradual_drift` |
//! | `input` | path to a sample-record file (instead of `scenario`) |
//! | `strategy` | strategy name, e.g. `memento`, `random`, `fifo`, `qbc` |
//! | `capacity`, `batch_size`, `bandwidth`, `temperature`, `threshold`, `seed` | selection parameters |
//! | `k_pred`, `k_out`, `task` | bin counts and `classification`/`regression`; default from the scenario |
//! | `predictor` | `centroid` (default) or `histogram` |
//! | `bbdr` | `model` (default) or `oracle` |
//! | `retrain` | `strategy` (default) or `every N` |
//! | `output_dir` | where `report.csv` and snapshots go |
//! | `iterations`, `samples_per_iteration`, `feature_dim`, `stationary` | scenario shape |
//! | `noise_fraction` | share of every iteration replaced by noise |
//! | `noise_margin` | class standard deviations added around the class means' box for noise features (3) |
//! | `eval_per_class` | evaluation samples per class (300) |
//! | `record_timing` | write selection wall time into the report (`false`) |
//! | `snapshots` | write the memory at every retrain event (`false`) |
//! | `committee_size` | QBC committee members (5) |
//! | `random_mode` | `reservoir` (default) or `pool` |
//! | `direction` | `discard-high` or `discard-low` for priority strategies |
//! | `priority_temperature` | softmax temperature for priority strategies |
//! | `lars_half_life` | samples per halving of LARS admission |
//! | `qbc_disagreement` | `vote` (default) or `member` |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use memento::baselines::{Disagreement, RandomMode};
use memento::{PredictorKind, StrategyConfig, StrategyKind, StrategyParams, Task};

use crate::workload::ScenarioKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{key}: {message}")]
    Value { key: String, message: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("exactly one of `scenario` and `input` must be set")]
    Source,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Scenario(ScenarioKind),
    Input(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RetrainPolicy {
    /// Retrain when the strategy asks for it.
    Strategy,
    /// Retrain on iterations divisible by N.
    Every(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BbdrMode {
    /// Predictions from the current model.
    Model,
    /// Point masses on the true output bin.
    Oracle,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: Option<ScenarioKind>,
    pub input: Option<PathBuf>,
    pub strategy: StrategyKind,
    pub params: StrategyParams,
    pub selection: StrategyConfig,
    k_pred: Option<usize>,
    k_out: Option<usize>,
    task: Option<Task>,
    pub predictor: PredictorKind,
    pub bbdr: BbdrMode,
    pub retrain: RetrainPolicy,
    pub output_dir: Option<PathBuf>,
    pub iterations: Option<usize>,
    pub samples_per_iteration: Option<usize>,
    pub feature_dim: Option<usize>,
    pub stationary: bool,
    pub noise_margin: Option<f64>,
    pub noise_fraction: f64,
    pub eval_per_class: usize,
    pub record_timing: bool,
    pub snapshots: bool,
    pub committee_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            input: None,
            strategy: StrategyKind::Memento,
            params: StrategyParams::default(),
            selection: StrategyConfig::default(),
            k_pred: None,
            k_out: None,
            task: None,
            predictor: PredictorKind::Centroid,
            bbdr: BbdrMode::Model,
            retrain: RetrainPolicy::Strategy,
            output_dir: None,
            iterations: None,
            samples_per_iteration: None,
            feature_dim: None,
            stationary: false,
            noise_margin: None,
            noise_fraction: 0.0,
            eval_per_class: 300,
            record_timing: false,
            snapshots: false,
            committee_size: 5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        message: format!("{value:?}: {e}"),
    })
}

fn bad(key: &str, value: &str) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: format!("unrecognized value {value:?}"),
    }
}

impl RunConfig {
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        Self {
            scenario: Some(kind),
            ..Self::default()
        }
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut config = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            config.set(key.trim(), value.trim()).map_err(|e| ConfigError::Syntax {
                line: n + 1,
                message: e.to_string(),
            })?;
        }
        config.source()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, crate::HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::HarnessError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::from_text(&text)?)
    }

    /// Applies one setting; also used by parameter sweeps.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let sel = &mut self.selection;
        match key {
            "scenario" => {
                self.scenario = Some(parse(key, value)?);
            }
            "input" => self.input = Some(PathBuf::from(value)),
            "strategy" => self.strategy = parse(key, value)?,
            "capacity" => sel.capacity = parse(key, value)?,
            "batch_size" => sel.batch_size = parse(key, value)?,
            "bandwidth" => sel.bandwidth = parse(key, value)?,
            "temperature" => sel.temperature = parse(key, value)?,
            "threshold" => sel.threshold = parse(key, value)?,
            "seed" => sel.seed = parse(key, value)?,
            "k_pred" => self.k_pred = Some(parse(key, value)?),
            "k_out" => self.k_out = Some(parse(key, value)?),
            "task" => {
                self.task = Some(match value {
                    "classification" => Task::Classification,
                    "regression" => Task::Regression,
                    _ => return Err(bad(key, value)),
                })
            }
            "predictor" => self.predictor = parse(key, value)?,
            "bbdr" => {
                self.bbdr = match value {
                    "model" => BbdrMode::Model,
                    "oracle" => BbdrMode::Oracle,
                    _ => return Err(bad(key, value)),
                }
            }
            "retrain" => {
                self.retrain = match value.split_whitespace().collect::<Vec<_>>().as_slice() {
                    ["strategy"] => RetrainPolicy::Strategy,
                    ["every", n] => match parse::<usize>(key, n)? {
                        0 => return Err(bad(key, value)),
                        n => RetrainPolicy::Every(n),
                    },
                    _ => return Err(bad(key, value)),
                }
            }
            "output_dir" => self.output_dir = Some(PathBuf::from(value)),
            "iterations" => self.iterations = Some(parse(key, value)?),
            "samples_per_iteration" => self.samples_per_iteration = Some(parse(key, value)?),
            "feature_dim" => self.feature_dim = Some(parse(key, value)?),
            "stationary" => self.stationary = parse(key, value)?,
            "noise_margin" => self.noise_margin = Some(parse(key, value)?),
            "noise_fraction" => self.noise_fraction = parse(key, value)?,
            "eval_per_class" => self.eval_per_class = parse(key, value)?,
            "record_timing" => self.record_timing = parse(key, value)?,
            "snapshots" => self.snapshots = parse(key, value)?,
            "committee_size" => self.committee_size = parse(key, value)?,
            "random_mode" => {
                self.params.random_mode = match value {
                    "reservoir" => RandomMode::Reservoir,
                    "pool" => RandomMode::Pool,
                    _ => return Err(bad(key, value)),
                }
            }
            "direction" => self.params.direction = Some(parse(key, value)?),
            "priority_temperature" => self.params.priority_temperature = Some(parse(key, value)?),
            "lars_half_life" => self.params.lars_half_life = Some(parse(key, value)?),
            "qbc_disagreement" => {
                self.params.disagreement = match value {
                    "vote" => Disagreement::VoteEntropy,
                    "member" => Disagreement::MemberEntropy,
                    _ => return Err(bad(key, value)),
                }
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    pub fn source(&self) -> Result<Source, ConfigError> {
        match (&self.scenario, &self.input) {
            (Some(kind), None) => Ok(Source::Scenario(*kind)),
            (None, Some(path)) => Ok(Source::Input(path.clone())),
            _ => Err(ConfigError::Source),
        }
    }

    /// Selection parameters with bin counts and task filled in from the
    /// scenario where not set explicitly.
    pub fn strategy_config(&self, default_bins: usize, default_task: Task) -> StrategyConfig {
        let k_out = self.k_out.unwrap_or(default_bins);
        StrategyConfig {
            k_out,
            k_pred: self.k_pred.unwrap_or(k_out),
            task: self.task.unwrap_or(default_task),
            ..self.selection.clone()
        }
    }
}
