use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use vinecast_core::dataio::{parse_iso_date, DEFAULT_MIN_ROWS};
use vinecast_core::forecast::{JointSpec, DEFAULT_ALPHA, DEFAULT_DRAWS, MIN_DRAWS};
use vinecast_core::marginals::MarginalSpec;
use vinecast_core::sentiment::{Aggregation, LexiconKind};
use vinecast_core::vine::{VineConfig, VineVariant};

use crate::CliError;

pub const CONFIG_ENV: &str = "VINECAST_CONFIG";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconConfig {
    pub path: PathBuf,
    pub kind: LexiconKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SentimentConfig {
    pub corpus: PathBuf,
    pub lexicons: BTreeMap<String, LexiconConfig>,
    #[serde(default)]
    pub stopwords: Option<PathBuf>,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "yes")]
    pub stem: bool,
    #[serde(default)]
    pub fill_days: bool,
}

fn yes() -> bool {
    true
}

fn default_min_rows() -> usize {
    DEFAULT_MIN_ROWS
}

fn default_horizon() -> usize {
    38
}

fn default_draws() -> usize {
    DEFAULT_DRAWS
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_variants() -> Vec<VineVariant> {
    VineVariant::ALL.to_vec()
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

/// Everything a run needs; relative paths are taken from the config file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_min_rows")]
    pub min_rows: usize,
    #[serde(default)]
    pub sentiment: Option<SentimentConfig>,
    pub marginals: BTreeMap<String, MarginalSpec>,
    #[serde(default)]
    pub vine: VineConfig,
    /// Last training date, `YYYY-MM-DD`.
    #[serde(default)]
    pub split: Option<String>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub refit_every: Option<usize>,
    #[serde(default = "default_variants")]
    pub variants: Vec<VineVariant>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Previously fitted model for `forecast` and `diagnostics`.
    #[serde(default)]
    pub model: Option<PathBuf>,
}

/// A parsed config together with the document it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Effective document after overrides, used for hashing.
    pub document: Value,
    pub base: PathBuf,
    pub file_bytes: Vec<u8>,
}

impl LoadedConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output_dir)
    }

    pub fn joint_spec(&self) -> JointSpec {
        JointSpec {
            marginals: self.config.marginals.clone(),
            vine: self.config.vine.clone(),
        }
    }

    pub fn split_day(&self) -> Result<Option<i64>, CliError> {
        self.config
            .split
            .as_deref()
            .map(|s| parse_iso_date(s).map_err(|e| CliError::Validation(format!("config key `split`: {e}"))))
            .transpose()
    }
}

/// Set `value` at a dotted key path, creating objects along the way.
pub fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Validation(format!("override key `{key}` is malformed")));
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::Validation(format!("override key `{key}`: `{part}` is not inside an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("key has at least one part")
}

pub fn load(path: &Path, overrides: &[(String, Value)]) -> Result<LoadedConfig, CliError> {
    let file_bytes = std::fs::read(path).map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let mut document: Value = serde_json::from_slice(&file_bytes)
        .map_err(|e| CliError::Validation(format!("config {} is not valid JSON: {e}", path.display())))?;
    if !document.is_object() {
        return Err(CliError::Validation("config must be a JSON object".into()));
    }
    for (k, v) in overrides {
        set_path(&mut document, k, v.clone())?;
    }
    let config: RunConfig = serde_path_to_error::deserialize(document.clone()).map_err(|e| {
        let key = e.path().to_string();
        CliError::Validation(format!("config key `{key}`: {}", e.into_inner()))
    })?;
    validate(&config)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig {
        config,
        document,
        base,
        file_bytes,
    })
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("config key `{key}`: {msg}"))
}

pub fn validate(c: &RunConfig) -> Result<(), CliError> {
    if !(c.alpha > 0.0 && c.alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0,1), got {}", c.alpha)));
    }
    if c.draws < MIN_DRAWS {
        return Err(invalid("draws", format!("must be at least {MIN_DRAWS}, got {}", c.draws)));
    }
    if c.horizon == 0 {
        return Err(invalid("horizon", "must be at least 1"));
    }
    if c.refit_every == Some(0) {
        return Err(invalid("refit_every", "must be at least 1"));
    }
    if c.threads == Some(0) {
        return Err(invalid("threads", "must be at least 1"));
    }
    if c.variants.is_empty() {
        return Err(invalid("variants", "must name at least one variant"));
    }
    if c.vine.families.is_empty() {
        return Err(invalid("vine.families", "must name at least one family"));
    }
    if let Some(s) = &c.split {
        parse_iso_date(s).map_err(|e| invalid("split", e))?;
    }
    if let Some(s) = &c.sentiment {
        if s.lexicons.is_empty() {
            return Err(invalid("sentiment.lexicons", "must name at least one lexicon"));
        }
    }
    Ok(())
}
