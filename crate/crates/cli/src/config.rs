//! Run configuration: built-in per-problem defaults, a user TOML file on
//! top, then `--set key=value` overrides.

use std::path::{Path, PathBuf};

use alffi::inference::ShuffleMode;
use alffi::nn::{Activation, FeatureTransform, TrainConfig};
use alffi::SeedSpec;
use serde::Deserialize;
use toml::{Table, Value};

/// A problem in the configuration or an invalid override.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Cosmo,
    Onoff,
    Sir,
    Toy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub taus: Vec<f64>,
    pub prior: PriorConfig,
    #[serde(default)]
    pub cosmo: CosmoConfig,
    #[serde(default)]
    pub sir: SirConfig,
    pub training: TrainingSetConfig,
    pub network: NetworkConfig,
    pub train: TrainSection,
    pub grid: GridConfig,
    pub histogram: HistogramConfig,
    pub coverage: CoverageConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub lows: Vec<f64>,
    pub highs: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosmoConfig {
    /// Template catalog, CSV `z,x,sigma`.
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirConfig {
    /// Epidemic series `t,x`; the bundled boarding-school data when absent.
    pub data: Option<PathBuf>,
    pub population: Option<u64>,
    pub s0: Option<u64>,
    pub i0: Option<u64>,
    pub r0: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSetConfig {
    pub count: usize,
    pub shuffle: ShuffleMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub batch_norm: bool,
    pub lambda_transform: FeatureTransform,
    pub lambda_shift: f64,
    pub lambda_scale: f64,
    /// Per-parameter shift and scale; empty means the prior-box center and
    /// half-width.
    #[serde(default)]
    pub theta_shift: Vec<f64>,
    #[serde(default)]
    pub theta_scale: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub patience_iterations: usize,
    pub validation_fraction: f64,
    pub eval_interval: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistogramConfig {
    pub bins: Vec<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    pub trials: usize,
}

const COMMON: &str = r#"
seed = 1
output_dir = "out"
taus = [0.68, 0.80, 0.90, 0.95]

[training]
shuffle = "permute"

[grid]
nodes = [200, 200]

[histogram]
bins = [10, 10]
count = 250000

[coverage]
trials = 2000
"#;

const ONOFF: &str = r#"
[prior]
lows = [0.0, 0.0]
highs = [20.0, 20.0]

[training]
count = 1000000

[network]
hidden = [12, 12, 12, 12, 12, 12]
activation = "prelu"
batch_norm = true
lambda_transform = "sqrt"
lambda_shift = 2.0
lambda_scale = 2.0

[train]
batch_size = 1000
learning_rate = 6e-4
max_iterations = 20000
patience_iterations = 10000
validation_fraction = 0.02
eval_interval = 1000
"#;

const COSMO: &str = r#"
[prior]
lows = [0.05, 66.0]
highs = [0.65, 76.0]

[training]
count = 250000

[network]
hidden = [20, 20, 20, 20, 20]
activation = "relu"
batch_norm = false
lambda_transform = "sqrt"
lambda_shift = 1.5
lambda_scale = 0.5

[train]
batch_size = 50
learning_rate = 1e-3
max_iterations = 150000
patience_iterations = 50000
validation_fraction = 0.02
eval_interval = 1000
"#;

const SIR: &str = r#"
[prior]
lows = [0.1, 0.00125]
highs = [0.9, 0.00325]

[training]
count = 750000

[network]
hidden = [25, 25, 25, 25, 25, 25]
activation = "relu"
batch_norm = false
lambda_transform = "sqrt"
lambda_shift = 0.5
lambda_scale = 0.5

[train]
batch_size = 50
learning_rate = 1e-3
max_iterations = 150000
patience_iterations = 50000
validation_fraction = 0.01
eval_interval = 1000
"#;

const TOY: &str = r#"
taus = [0.68, 0.90]

[prior]
lows = [-2.0]
highs = [2.0]

[training]
count = 200000

[network]
hidden = [20, 20, 20, 20, 20]
activation = "relu"
batch_norm = false
lambda_transform = "identity"
lambda_shift = 0.0
lambda_scale = 2.0

[grid]
nodes = [200]

[histogram]
bins = [10]
count = 100000

[train]
batch_size = 256
learning_rate = 1e-3
max_iterations = 30000
patience_iterations = 6000
validation_fraction = 0.05
eval_interval = 500
"#;

/// The built-in defaults for `problem`, as TOML text.
pub fn defaults_text(problem: ProblemKind) -> String {
    let specific = match problem {
        ProblemKind::Onoff => ONOFF,
        ProblemKind::Cosmo => COSMO,
        ProblemKind::Sir => SIR,
        ProblemKind::Toy => TOY,
    };
    let name = match problem {
        ProblemKind::Onoff => "onoff",
        ProblemKind::Cosmo => "cosmo",
        ProblemKind::Sir => "sir",
        ProblemKind::Toy => "toy",
    };
    let mut table: Table = COMMON.parse().expect("built-in defaults parse");
    merge(
        &mut table,
        specific.parse().expect("built-in defaults parse"),
    );
    table.insert("problem".into(), Value::String(name.into()));
    toml::to_string(&table).expect("tables serialize")
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies one `key.path=value` override. The value is read as a TOML
/// value when it parses as one and as a bare string otherwise.
fn apply_override(table: &mut Table, assignment: &str) -> anyhow::Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{key}`: `{part}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Loads the configuration. Relative paths inside the file resolve against
/// the file's directory.
pub fn load(
    path: Option<&Path>,
    overrides: &[String],
    problem: Option<ProblemKind>,
) -> anyhow::Result<RunConfig> {
    let mut user = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| config_err(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut user, o)?;
    }
    let kind = match (user.get("problem"), problem) {
        (Some(v), _) => v
            .clone()
            .try_into::<ProblemKind>()
            .map_err(|e| config_err(format!("problem: {e}")))?,
        (None, Some(k)) => k,
        (None, None) => {
            return Err(config_err(
                "no problem given: set `problem` in the config or pass --problem",
            ))
        }
    };
    let mut table: Table = defaults_text(kind).parse().expect("defaults parse");
    merge(&mut table, user);
    let mut cfg: RunConfig = table
        .try_into()
        .map_err(|e| config_err(format!("invalid config: {e}")))?;
    if let Some(dir) = path.and_then(Path::parent) {
        for p in [&mut cfg.cosmo.catalog, &mut cfg.sir.data]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.prior.lows.len()
    }

    fn validate(&self) -> anyhow::Result<()> {
        if self.taus.is_empty() || self.taus.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(config_err("taus must be non-empty and inside (0, 1)"));
        }
        if self.taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("taus must be strictly increasing"));
        }
        let dim = if self.problem == ProblemKind::Toy {
            1
        } else {
            2
        };
        if self.prior.lows.len() != dim || self.prior.highs.len() != dim {
            return Err(config_err(format!("prior needs {dim} bounds per side")));
        }
        if self.grid.nodes.len() != dim || self.histogram.bins.len() != dim {
            return Err(config_err(format!(
                "grid.nodes and histogram.bins need {dim} entries"
            )));
        }
        for (name, v) in [
            ("network.theta_shift", &self.network.theta_shift),
            ("network.theta_scale", &self.network.theta_scale),
        ] {
            if !v.is_empty() && v.len() != dim {
                return Err(config_err(format!("{name} needs {dim} entries or none")));
            }
        }
        if self.network.hidden.is_empty() {
            return Err(config_err("network.hidden needs at least one layer"));
        }
        if let Some(p) = &self.cosmo.catalog {
            if !p.exists() {
                return Err(config_err(format!(
                    "cosmo.catalog {} does not exist",
                    p.display()
                )));
            }
        }
        if let Some(p) = &self.sir.data {
            if !p.exists() {
                return Err(config_err(format!(
                    "sir.data {} does not exist",
                    p.display()
                )));
            }
        }
        self.train_config()
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        Ok(())
    }

    pub fn seed_spec(&self) -> SeedSpec {
        SeedSpec::new(self.seed)
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            max_iterations: t.max_iterations,
            patience_iterations: t.patience_iterations,
            validation_fraction: t.validation_fraction,
            eval_interval: t.eval_interval,
            seed: self.seed_spec().child(3),
        }
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}
