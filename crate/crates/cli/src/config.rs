//! Run configuration: a TOML file as the single source of truth, with
//! `--set key=value` dotted overrides for sweeps.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tabdiff::data::schema::TableSchema;
use tabdiff::nn::adam::AdamConfig;
use tabdiff::nn::mlp::Activation;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSection {
    pub schema: String,
    pub csv: String,
    /// Overrides the schema's split column when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_column: Option<String>,
    pub clients: usize,
}

fn default_time_embed_dim() -> usize {
    32
}
fn default_embed_dim() -> usize {
    2
}
fn default_n_quantiles() -> usize {
    1000
}
fn default_activation() -> Activation {
    Activation::Relu
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSection {
    pub hidden_layers: usize,
    pub hidden_width: usize,
    #[serde(default = "default_time_embed_dim")]
    pub time_embed_dim: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "default_n_quantiles")]
    pub n_quantiles: usize,
}

fn default_snapshot_every() -> usize {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FederationSection {
    pub rounds: usize,
    pub client_steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
}

fn default_n_synth() -> usize {
    1000
}
fn default_utility() -> bool {
    true
}
fn default_dcr_max_pairs() -> usize {
    10_000_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationSection {
    #[serde(default = "default_n_synth")]
    pub n_synth: usize,
    #[serde(default = "default_utility")]
    pub utility: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(default = "default_dcr_max_pairs")]
    pub dcr_max_pairs: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            n_synth: default_n_synth(),
            utility: default_utility(),
            label_column: None,
            dcr_max_pairs: default_dcr_max_pairs(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub federation: FederationSection,
    #[serde(default)]
    pub optimizer: AdamConfig,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Loads the TOML file and applies `key.path=value` overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut table: toml::Table =
            text.parse().with_context(|| format!("parsing config {}", path.display()))?;
        for spec in overrides {
            apply_override(&mut table, spec)?;
        }
        let config: RunConfig =
            toml::Value::Table(table).try_into().context("interpreting config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.clients == 0 {
            bail!("data.clients must be >= 1");
        }
        if self.model.timesteps < 2 {
            bail!("model.timesteps must be >= 2");
        }
        if !(self.model.beta_start > 0.0 && self.model.beta_start <= self.model.beta_end) {
            bail!("model beta bounds must satisfy 0 < beta_start <= beta_end");
        }
        if self.federation.rounds == 0
            || self.federation.client_steps == 0
            || self.federation.batch_size == 0
        {
            bail!("federation rounds, client_steps and batch_size must be >= 1");
        }
        if self.federation.snapshot_every == 0 {
            bail!("federation.snapshot_every must be >= 1");
        }
        Ok(())
    }

    /// Serializes the effective configuration (after overrides) for
    /// provenance echoes in checkpoints.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Output directory: explicit config value, then the `TABDIFF_OUT`
    /// environment variable, then the current directory.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.output.dir {
            return PathBuf::from(dir);
        }
        if let Ok(dir) = std::env::var("TABDIFF_OUT") {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        PathBuf::from(".")
    }

    /// The non-iid split column: config override first, then the schema.
    pub fn split_column<'a>(&'a self, schema: &'a TableSchema) -> Result<&'a str> {
        self.data
            .split_column
            .as_deref()
            .or(schema.split_column.as_deref())
            .ok_or_else(|| {
                anyhow::anyhow!("no split column: set data.split_column or the schema's split_column")
            })
    }

    /// Utility label column: evaluation override, then the schema's label
    /// column, then the split column.
    pub fn label_column<'a>(&'a self, schema: &'a TableSchema) -> Option<&'a str> {
        self.evaluation
            .label_column
            .as_deref()
            .or(schema.label_column.as_deref())
            .or(schema.split_column.as_deref())
    }
}

/// Applies one `a.b.c=value` override; the value is parsed as TOML and falls
/// back to a plain string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .with_context(|| format!("override '{spec}' is not of the form key=value"))?;
    let value: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(t) => t["v"].clone(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    let mut at = table;
    for k in &keys[..keys.len() - 1] {
        at = at
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .with_context(|| format!("override path '{path}' crosses a non-table value"))?;
    }
    at.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[data]
schema = "schema.toml"
csv = "data.csv"
clients = 3

[model]
hidden_layers = 2
hidden_width = 16
timesteps = 10
beta_start = 1e-4
beta_end = 0.02

[federation]
rounds = 2
client_steps = 3
batch_size = 8
seed = 42
"#;

    fn load_str(text: &str, overrides: &[&str]) -> Result<RunConfig> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        std::fs::write(&path, text).unwrap();
        let ov: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        RunConfig::load(&path, &ov)
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = load_str(MINIMAL, &[]).unwrap();
        assert_eq!(c.model.embed_dim, 2);
        assert_eq!(c.model.n_quantiles, 1000);
        assert_eq!(c.federation.snapshot_every, 100);
        assert_eq!(c.optimizer.lr, 1e-4);
        assert!(c.evaluation.utility);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = load_str(
            MINIMAL,
            &["federation.seed=7", "model.hidden_width=64", "evaluation.utility=false"],
        )
        .unwrap();
        assert_eq!(c.federation.seed, 7);
        assert_eq!(c.model.hidden_width, 64);
        assert!(!c.evaluation.utility);
    }

    #[test]
    fn string_overrides_need_no_quotes() {
        let c = load_str(MINIMAL, &["data.split_column=department"]).unwrap();
        assert_eq!(c.data.split_column.as_deref(), Some("department"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(load_str(MINIMAL, &["model.timesteps=1"]).is_err());
        assert!(load_str(MINIMAL, &["federation.rounds=0"]).is_err());
        assert!(load_str(MINIMAL, &["not-an-override"]).is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = load_str(MINIMAL, &["federation.parallel=true"]).unwrap();
        let echoed = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(echoed.federation.seed, c.federation.seed);
        assert!(echoed.federation.parallel);
    }
}
