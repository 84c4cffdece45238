//! Shared plumbing between subcommands: loading data under a config,
//! building the federation setup, converting runs to and from checkpoints,
//! and CSV output.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tabdiff::data::embedding::Codec;
use tabdiff::data::partition::{partition_noniid, Partition};
use tabdiff::data::schema::{ColumnKind, TableSchema};
use tabdiff::data::table::{load_csv, Cell, TableData};
use tabdiff::diffusion::model::TrainingSet;
use tabdiff::diffusion::schedule::NoiseSchedule;
use tabdiff::federation::{FederationConfig, FederationSetup, FederationState};
use tabdiff::nn::mlp::MlpConfig;

use crate::checkpoint::{Checkpoint, CheckpointKind, ClientEntry};
use crate::config::RunConfig;

/// Resolves a config-file path relative to the config's own directory.
pub fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Everything a training or evaluation run needs, loaded once.
pub struct Prepared {
    pub config: RunConfig,
    pub schema: TableSchema,
    pub data: TableData,
    pub partition: Partition,
    pub codec: Codec,
}

impl Prepared {
    /// Loads schema and CSV, partitions rows by the split column, and fits
    /// the codec on the full table. `base` is the config file's directory;
    /// relative data paths resolve against it.
    pub fn load(config: RunConfig, base: &Path) -> Result<Self> {
        let schema = TableSchema::load(resolve(base, &config.data.schema))
            .context("loading schema")?;
        let data = load_csv(resolve(base, &config.data.csv), &schema)
            .context("loading data csv")?;
        let split = config.split_column(&schema)?.to_string();
        let partition = partition_noniid(&data, &split, config.data.clients)
            .context("partitioning rows across clients")?;
        let codec = Codec::fit(
            &data,
            config.model.n_quantiles,
            config.model.embed_dim,
            config.federation.seed,
        )
        .context("fitting the encoding")?;
        Ok(Prepared { config, schema, data, partition, codec })
    }

    pub fn setup(&self) -> Result<FederationSetup> {
        let d = self.codec.encoded_dim(&self.schema);
        let m = &self.config.model;
        let mlp = MlpConfig {
            input_dim: d,
            hidden_layers: m.hidden_layers,
            hidden_width: m.hidden_width,
            output_dim: d,
            time_embed_dim: m.time_embed_dim,
            activation: m.activation,
        };
        let schedule = NoiseSchedule::linear(m.timesteps, m.beta_start, m.beta_end)?;
        Ok(FederationSetup {
            schedule,
            mlp,
            codec: self.codec.clone(),
            n_numeric: self.schema.n_numeric(),
            adam: self.config.optimizer,
        })
    }

    pub fn federation_config(&self) -> FederationConfig {
        let f = &self.config.federation;
        FederationConfig {
            rounds: f.rounds,
            client_steps: f.client_steps,
            batch_size: f.batch_size,
            seed: f.seed,
            participants_per_round: None,
            parallel: f.parallel,
        }
    }

    pub fn client_sets(&self) -> Result<Vec<(TrainingSet, usize)>> {
        self.partition
            .client_rows
            .iter()
            .map(|rows| {
                let set = TrainingSet::prepare(&self.data, &self.codec.quantile, rows)?;
                Ok((set, rows.len()))
            })
            .collect()
    }

    /// Snapshot of a federated run in checkpoint form.
    pub fn checkpoint(&self, state: &FederationState) -> Checkpoint {
        self.checkpoint_with(
            CheckpointKind::Federated,
            &state.central.params,
            state
                .clients
                .iter()
                .map(|c| ClientEntry { size: c.size, adam: c.adam.clone() })
                .collect(),
            state.round,
            state.history.clone(),
        )
    }

    pub fn checkpoint_with(
        &self,
        kind: CheckpointKind,
        params: &tabdiff::nn::param::ParamVector,
        clients: Vec<ClientEntry>,
        round: usize,
        history: Vec<tabdiff::federation::RoundRecord>,
    ) -> Checkpoint {
        let m = &self.config.model;
        let d = self.codec.encoded_dim(&self.schema);
        Checkpoint {
            kind,
            config_echo: self.config.to_toml(),
            schema_toml: self.schema.to_toml(),
            timesteps: m.timesteps,
            beta_start: m.beta_start,
            beta_end: m.beta_end,
            mlp: MlpConfig {
                input_dim: d,
                hidden_layers: m.hidden_layers,
                hidden_width: m.hidden_width,
                output_dim: d,
                time_embed_dim: m.time_embed_dim,
                activation: m.activation,
            },
            n_numeric: self.schema.n_numeric(),
            embed_dim: m.embed_dim,
            vocabs: self
                .schema
                .categorical_indices()
                .into_iter()
                .map(|c| (c, self.data.vocab(c).to_vec()))
                .collect(),
            quantile: self
                .codec
                .quantile
                .columns()
                .map(|(i, t)| (i, t.knots.clone()))
                .collect(),
            round,
            params: params.clone(),
            clients,
            history,
        }
    }

    /// Restores a federated run from a checkpoint into a fresh state built
    /// from this configuration. The checkpoint must come from the same
    /// schema and client layout.
    pub fn restore(&self, ckpt: &Checkpoint) -> Result<FederationState> {
        if ckpt.kind != CheckpointKind::Federated {
            bail!("cannot resume: checkpoint is a standalone local model");
        }
        if ckpt.fingerprint()? != crate::checkpoint::schema_fingerprint(&self.schema) {
            bail!("cannot resume: checkpoint was trained under a different schema");
        }
        let setup = self.setup()?;
        let config = self.federation_config();
        let mut state = FederationState::init(setup, self.client_sets()?, &config)?;
        if !state.central.params.same_layout(&ckpt.params) {
            bail!("cannot resume: checkpoint parameters do not match the configured model");
        }
        if state.clients.len() != ckpt.clients.len() {
            bail!(
                "cannot resume: checkpoint has {} clients, configuration has {}",
                ckpt.clients.len(),
                state.clients.len()
            );
        }
        for (client, saved) in state.clients.iter_mut().zip(&ckpt.clients) {
            if client.size != saved.size {
                bail!(
                    "cannot resume: client {} size changed ({} rows vs {} in checkpoint)",
                    client.id,
                    client.size,
                    saved.size
                );
            }
            client.adam = saved.adam.clone();
        }
        state.central.params = ckpt.params.clone();
        state.round = ckpt.round;
        state.history = ckpt.history.clone();
        Ok(state)
    }
}

/// Writes a table as CSV with a header row; numeric cells use the shortest
/// round-tripping decimal form.
pub fn write_table_csv(data: &TableData, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let header: Vec<&str> = data.schema.columns.iter().map(|c| c.name.as_str()).collect();
    w.write_record(&header)?;
    for row in data.rows() {
        let rec: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| match (data.schema.columns[c].kind, cell) {
                (ColumnKind::Numeric, Cell::Num(v)) => v.to_string(),
                (ColumnKind::Categorical, Cell::Cat(id)) => {
                    data.category_name(c, *id).to_string()
                }
                _ => unreachable!("table cells match their schema"),
            })
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Rewrites the round-history CSV from scratch; cheap and resume-safe.
pub fn write_history_csv(
    history: &[tabdiff::federation::RoundRecord],
    n_clients: usize,
    path: &Path,
) -> Result<()> {
    let mut f = std::fs::File::create(path)
        .with_context(|| format!("creating {}", path.display()))?;
    let mut header = String::from("round,aggregate_loss");
    for c in 0..n_clients {
        header.push_str(&format!(",client{c}_loss"));
    }
    writeln!(f, "{header}")?;
    for rec in history {
        let mut line = format!("{},{}", rec.round, rec.aggregate_loss);
        for &l in &rec.client_losses {
            if l.is_nan() {
                line.push(',');
            } else {
                line.push_str(&format!(",{l}"));
            }
        }
        writeln!(f, "{line}")?;
    }
    Ok(())
}
