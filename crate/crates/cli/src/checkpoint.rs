//! Self-contained binary checkpoints: model, codec, optimizer states, and
//! training progress. Little-endian fixed-width fields with an explicit
//! layout header; no external serialization format, bit-exact across
//! platforms.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use sha2::{Digest, Sha256};
use tabdiff::data::embedding::{Codec, EmbeddingCodec, EmbeddingTable};
use tabdiff::data::quantile::{ColumnTransform, QuantileTransform};
use tabdiff::data::schema::TableSchema;
use tabdiff::diffusion::model::DiffusionModel;
use tabdiff::diffusion::schedule::NoiseSchedule;
use tabdiff::federation::RoundRecord;
use tabdiff::nn::adam::{AdamConfig, AdamState};
use tabdiff::nn::mlp::{Activation, MlpConfig};
use tabdiff::nn::param::ParamVector;

const MAGIC: &[u8; 4] = b"FTDF";
const TRAILER: &[u8; 4] = b"DONE";
const VERSION: u32 = 1;

/// Hex SHA-256 of the schema's canonical TOML form.
pub fn schema_fingerprint(schema: &TableSchema) -> String {
    let mut hasher = Sha256::new();
    hasher.update(schema.to_toml().as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CheckpointKind {
    Federated,
    /// Standalone baseline trained on one client's data.
    Local(u32),
}

#[derive(Debug, Clone)]
pub struct ClientEntry {
    pub size: usize,
    pub adam: AdamState,
}

/// Everything needed to resume training or sample from a saved model.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    /// Effective run configuration, echoed for provenance.
    pub config_echo: String,
    pub schema_toml: String,
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub mlp: MlpConfig,
    pub n_numeric: usize,
    pub embed_dim: usize,
    /// (schema column index, category names) per categorical column.
    pub vocabs: Vec<(usize, Vec<String>)>,
    /// (schema column index, knots) per numeric column.
    pub quantile: Vec<(usize, Vec<f64>)>,
    pub round: usize,
    pub params: ParamVector,
    pub clients: Vec<ClientEntry>,
    pub history: Vec<RoundRecord>,
}

// -- little-endian primitives ------------------------------------------------

fn w_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn w_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn w_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    Ok(w.write_all(&v.to_le_bytes())?)
}
fn w_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w_u32(w, s.len() as u32)?;
    Ok(w.write_all(s.as_bytes())?)
}
fn w_f64s<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    w_u64(w, vs.len() as u64)?;
    for &v in vs {
        w_f64(w, v)?;
    }
    Ok(())
}

fn r_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
fn r_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
fn r_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
fn r_str<R: Read>(r: &mut R) -> Result<String> {
    let len = r_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}
fn r_f64s<R: Read>(r: &mut R) -> Result<Vec<f64>> {
    let len = r_u64(r)? as usize;
    (0..len).map(|_| r_f64(r)).collect()
}

impl Checkpoint {
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w_u32(w, VERSION)?;
        match self.kind {
            CheckpointKind::Federated => w_u32(w, u32::MAX)?,
            CheckpointKind::Local(i) => w_u32(w, i)?,
        }
        w_str(w, &self.config_echo)?;
        w_str(w, &self.schema_toml)?;
        w_str(w, &schema_fingerprint(&TableSchema::from_toml(&self.schema_toml)?))?;

        w_u64(w, self.timesteps as u64)?;
        w_f64(w, self.beta_start)?;
        w_f64(w, self.beta_end)?;

        w_u32(w, self.mlp.input_dim as u32)?;
        w_u32(w, self.mlp.hidden_layers as u32)?;
        w_u32(w, self.mlp.hidden_width as u32)?;
        w_u32(w, self.mlp.output_dim as u32)?;
        w_u32(w, self.mlp.time_embed_dim as u32)?;
        w.write_all(&[match self.mlp.activation {
            Activation::Relu => 0u8,
            Activation::Silu => 1u8,
        }])?;

        w_u32(w, self.n_numeric as u32)?;
        w_u32(w, self.embed_dim as u32)?;

        w_u32(w, self.vocabs.len() as u32)?;
        for (col, names) in &self.vocabs {
            w_u32(w, *col as u32)?;
            w_u32(w, names.len() as u32)?;
            for n in names {
                w_str(w, n)?;
            }
        }

        w_u32(w, self.quantile.len() as u32)?;
        for (col, knots) in &self.quantile {
            w_u32(w, *col as u32)?;
            w_f64s(w, knots)?;
        }

        w_u64(w, self.round as u64)?;
        self.params.write_to(w).context("writing parameter payload")?;

        w_u32(w, self.clients.len() as u32)?;
        for c in &self.clients {
            w_u64(w, c.size as u64)?;
            w_u64(w, c.adam.step)?;
            w_f64(w, c.adam.config.lr)?;
            w_f64(w, c.adam.config.beta1)?;
            w_f64(w, c.adam.config.beta2)?;
            w_f64(w, c.adam.config.eps)?;
            w_f64s(w, &c.adam.m)?;
            w_f64s(w, &c.adam.v)?;
        }

        w_u32(w, self.history.len() as u32)?;
        for rec in &self.history {
            w_u64(w, rec.round as u64)?;
            w_f64s(w, &rec.client_losses)?;
            w_f64(w, rec.aggregate_loss)?;
        }

        w.write_all(TRAILER)?;
        Ok(())
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).context("reading checkpoint header")?;
        if &magic != MAGIC {
            bail!("not a checkpoint file (bad magic bytes)");
        }
        let version = r_u32(r)?;
        if version != VERSION {
            bail!("unsupported checkpoint version {version}");
        }
        let kind = match r_u32(r)? {
            u32::MAX => CheckpointKind::Federated,
            i => CheckpointKind::Local(i),
        };
        let config_echo = r_str(r)?;
        let schema_toml = r_str(r)?;
        let stored_fp = r_str(r)?;
        let schema = TableSchema::from_toml(&schema_toml)?;
        if stored_fp != schema_fingerprint(&schema) {
            bail!("checkpoint schema fingerprint does not match its embedded schema");
        }

        let timesteps = r_u64(r)? as usize;
        let beta_start = r_f64(r)?;
        let beta_end = r_f64(r)?;

        let input_dim = r_u32(r)? as usize;
        let hidden_layers = r_u32(r)? as usize;
        let hidden_width = r_u32(r)? as usize;
        let output_dim = r_u32(r)? as usize;
        let time_embed_dim = r_u32(r)? as usize;
        let mut act = [0u8; 1];
        r.read_exact(&mut act)?;
        let activation = match act[0] {
            0 => Activation::Relu,
            1 => Activation::Silu,
            other => bail!("unknown activation tag {other}"),
        };
        let mlp = MlpConfig {
            input_dim,
            hidden_layers,
            hidden_width,
            output_dim,
            time_embed_dim,
            activation,
        };

        let n_numeric = r_u32(r)? as usize;
        let embed_dim = r_u32(r)? as usize;

        let n_vocab = r_u32(r)? as usize;
        let mut vocabs = Vec::with_capacity(n_vocab);
        for _ in 0..n_vocab {
            let col = r_u32(r)? as usize;
            let n = r_u32(r)? as usize;
            let names = (0..n).map(|_| r_str(r)).collect::<Result<Vec<_>>>()?;
            vocabs.push((col, names));
        }

        let n_q = r_u32(r)? as usize;
        let mut quantile = Vec::with_capacity(n_q);
        for _ in 0..n_q {
            let col = r_u32(r)? as usize;
            quantile.push((col, r_f64s(r)?));
        }

        let round = r_u64(r)? as usize;
        let params = ParamVector::read_from(r).context("reading parameter payload")?;

        let n_clients = r_u32(r)? as usize;
        let mut clients = Vec::with_capacity(n_clients);
        for _ in 0..n_clients {
            let size = r_u64(r)? as usize;
            let step = r_u64(r)?;
            let config = AdamConfig {
                lr: r_f64(r)?,
                beta1: r_f64(r)?,
                beta2: r_f64(r)?,
                eps: r_f64(r)?,
            };
            let m = r_f64s(r)?;
            let v = r_f64s(r)?;
            clients.push(ClientEntry { size, adam: AdamState { m, v, step, config } });
        }

        let n_hist = r_u32(r)? as usize;
        let mut history = Vec::with_capacity(n_hist);
        for _ in 0..n_hist {
            let round = r_u64(r)? as usize;
            let client_losses = r_f64s(r)?;
            let aggregate_loss = r_f64(r)?;
            history.push(RoundRecord { round, client_losses, aggregate_loss });
        }

        let mut trailer = [0u8; 4];
        r.read_exact(&mut trailer).context("reading checkpoint trailer")?;
        if &trailer != TRAILER {
            bail!("incomplete checkpoint: completion trailer missing");
        }

        Ok(Checkpoint {
            kind,
            config_echo,
            schema_toml,
            timesteps,
            beta_start,
            beta_end,
            mlp,
            n_numeric,
            embed_dim,
            vocabs,
            quantile,
            round,
            params,
            clients,
            history,
        })
    }

    /// Writes atomically: a temp file in the target directory is renamed into
    /// place only after the trailer is on disk, so readers never observe a
    /// partial checkpoint under the final name.
    pub fn save(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".{}.tmp",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint")
        ));
        let mut f = std::fs::File::create(&tmp)
            .with_context(|| format!("creating {}", tmp.display()))?;
        self.write(&mut f)?;
        f.sync_all()?;
        drop(f);
        std::fs::rename(&tmp, path)
            .with_context(|| format!("moving checkpoint into place at {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::fs::File::open(path)
            .with_context(|| format!("opening checkpoint {}", path.display()))?;
        Self::read(&mut f).with_context(|| format!("loading checkpoint {}", path.display()))
    }

    pub fn schema(&self) -> Result<TableSchema> {
        Ok(TableSchema::from_toml(&self.schema_toml)?)
    }

    pub fn fingerprint(&self) -> Result<String> {
        Ok(schema_fingerprint(&self.schema()?))
    }

    /// Rebuilds the codec from stored knots and the embedding segments of
    /// the parameter vector.
    pub fn codec(&self) -> Result<Codec> {
        let schema = self.schema()?;
        let cols: BTreeMap<usize, ColumnTransform> = self
            .quantile
            .iter()
            .map(|(col, knots)| (*col, ColumnTransform { knots: knots.clone() }))
            .collect();
        let quantile = QuantileTransform::from_parts(cols);
        let mut tables = Vec::new();
        for (col, names) in &self.vocabs {
            let name = schema.columns[*col].name.clone();
            let seg = self.params.segment(&format!("embed.{name}"))?;
            let weights = tabdiff::ndarray::Array2::from_shape_vec(
                (names.len(), self.embed_dim),
                seg.to_vec(),
            )
            .context("embedding segment shape")?;
            tables.push(EmbeddingTable { col: *col, name, weights });
        }
        let embeddings = EmbeddingCodec::from_tables(tables, self.embed_dim);
        Ok(Codec { quantile, embeddings })
    }

    /// Rebuilds the diffusion model with the stored parameters.
    pub fn model(&self) -> Result<DiffusionModel> {
        let codec = self.codec()?;
        let schedule = NoiseSchedule::linear(self.timesteps, self.beta_start, self.beta_end)?;
        let mut model =
            DiffusionModel::init(schedule, self.mlp.clone(), &codec, self.n_numeric, 0)?;
        if !model.params.same_layout(&self.params) {
            bail!("checkpoint parameter layout does not match its model configuration");
        }
        model.params = self.params.clone();
        Ok(model)
    }

    /// Ordered vocabulary list for every schema column (empty for numerics),
    /// as expected by table constructors.
    pub fn full_vocabs(&self) -> Result<Vec<Vec<String>>> {
        let schema = self.schema()?;
        let mut out = vec![Vec::new(); schema.columns.len()];
        for (col, names) in &self.vocabs {
            out[*col] = names.clone();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tabdiff::data::schema::{Column, ColumnKind};
    use tabdiff::data::table::{Cell, TableData};

    fn toy_checkpoint() -> Checkpoint {
        let schema = TableSchema {
            columns: vec![
                Column { name: "amount".into(), kind: ColumnKind::Numeric },
                Column { name: "dept".into(), kind: ColumnKind::Categorical },
            ],
            label_column: None,
            split_column: Some("dept".into()),
        };
        let data = TableData::from_rows(
            schema.clone(),
            (0..8)
                .map(|i| vec![Cell::Num(i as f64), Cell::Cat((i % 3) as u32)])
                .collect(),
            vec![Vec::new(), vec!["a".into(), "b".into(), "c".into()]],
        )
        .unwrap();
        let codec = Codec::fit(&data, 10, 2, 5).unwrap();
        let mlp = MlpConfig {
            input_dim: 3,
            hidden_layers: 1,
            hidden_width: 8,
            output_dim: 3,
            time_embed_dim: 4,
            activation: Activation::Relu,
        };
        let schedule = NoiseSchedule::linear(10, 1e-4, 0.02).unwrap();
        let model = DiffusionModel::init(schedule, mlp.clone(), &codec, 1, 5).unwrap();
        let adam = AdamState::new(model.params.len(), AdamConfig::default());
        Checkpoint {
            kind: CheckpointKind::Federated,
            config_echo: "seed = 5".into(),
            schema_toml: schema.to_toml(),
            timesteps: 10,
            beta_start: 1e-4,
            beta_end: 0.02,
            mlp,
            n_numeric: 1,
            embed_dim: 2,
            vocabs: vec![(1, vec!["a".into(), "b".into(), "c".into()])],
            quantile: codec
                .quantile
                .columns()
                .map(|(i, t)| (i, t.knots.clone()))
                .collect(),
            round: 3,
            params: model.params,
            clients: vec![ClientEntry { size: 8, adam }],
            history: vec![RoundRecord {
                round: 0,
                client_losses: vec![1.5],
                aggregate_loss: 1.5,
            }],
        }
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let ckpt = toy_checkpoint();
        let mut first = Vec::new();
        ckpt.write(&mut first).unwrap();
        let loaded = Checkpoint::read(&mut first.as_slice()).unwrap();
        let mut second = Vec::new();
        loaded.write(&mut second).unwrap();
        assert_eq!(first, second);
        assert_eq!(loaded.round, 3);
        assert!(loaded.params.bitwise_eq(&ckpt.params));
    }

    #[test]
    fn corrupted_magic_is_rejected() {
        let ckpt = toy_checkpoint();
        let mut buf = Vec::new();
        ckpt.write(&mut buf).unwrap();
        buf[0] = b'X';
        let err = Checkpoint::read(&mut buf.as_slice()).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn truncated_file_is_flagged_incomplete() {
        let ckpt = toy_checkpoint();
        let mut buf = Vec::new();
        ckpt.write(&mut buf).unwrap();
        buf.truncate(buf.len() - 2);
        assert!(Checkpoint::read(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn model_reconstruction_round_trips() {
        let ckpt = toy_checkpoint();
        let model = ckpt.model().unwrap();
        assert!(model.params.bitwise_eq(&ckpt.params));
        let codec = ckpt.codec().unwrap();
        assert_eq!(codec.embeddings.tables().len(), 1);
        assert_eq!(codec.embeddings.tables()[0].vocab_size(), 3);
    }

    #[test]
    fn fingerprint_tracks_schema_changes() {
        let ckpt = toy_checkpoint();
        let schema = ckpt.schema().unwrap();
        let mut other = schema.clone();
        other.columns[0].name = "renamed".into();
        assert_ne!(schema_fingerprint(&schema), schema_fingerprint(&other));
        assert_eq!(schema_fingerprint(&schema), ckpt.fingerprint().unwrap());
    }
}
