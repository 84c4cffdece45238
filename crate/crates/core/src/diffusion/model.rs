//! Diffusion model over encoded tabular rows: training objective, optimizer
//! loop, ancestral sampling, and decoding back to tables.
//!
//! Embedding tables are trainable segments of the model's parameter vector.
//! Each batch re-encodes its rows from the current tables, and the backward
//! pass routes the input gradient through `sqrt(alpha_bar[t]) * x0` back
//! into the table rows that produced the batch.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::embedding::Codec;
use crate::data::quantile::QuantileTransform;
use crate::data::table::TableData;
use crate::diffusion::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::nn::adam::{adam_step, AdamState};
use crate::nn::mlp::{mlp_backward, mlp_forward, mlp_forward_cached, MlpConfig};
use crate::nn::param::{Layout, ParamVector};
use std::sync::Arc;

/// Rows prepared for training: numeric cells already mapped to normal
/// scores, categorical cells kept as ids so embeddings can be looked up from
/// the current parameters each step.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    numeric: Vec<Vec<f64>>,
    cats: Vec<Vec<u32>>,
}

impl TrainingSet {
    pub fn prepare(data: &TableData, quantile: &QuantileTransform, rows: &[usize]) -> Result<Self> {
        let num_cols = data.schema.numeric_indices();
        let cat_cols = data.schema.categorical_indices();
        let mut numeric = Vec::with_capacity(rows.len());
        let mut cats = Vec::with_capacity(rows.len());
        for &r in rows {
            let row = data.row(r);
            let mut nv = Vec::with_capacity(num_cols.len());
            for &c in &num_cols {
                nv.push(quantile.apply(c, row[c].as_num().expect("numeric cell"))?);
            }
            let mut cv = Vec::with_capacity(cat_cols.len());
            for &c in &cat_cols {
                cv.push(row[c].as_cat().expect("categorical cell"));
            }
            numeric.push(nv);
            cats.push(cv);
        }
        Ok(TrainingSet { numeric, cats })
    }

    pub fn len(&self) -> usize {
        self.numeric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numeric.is_empty()
    }

    pub fn n_numeric(&self) -> usize {
        self.numeric.first().map_or(0, |v| v.len())
    }

    pub fn n_categorical(&self) -> usize {
        self.cats.first().map_or(0, |v| v.len())
    }
}

/// Noise predictor plus schedule; `params` holds MLP weights and embedding
/// tables in one flat vector.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub schedule: NoiseSchedule,
    pub config: MlpConfig,
    pub params: ParamVector,
    pub data_dim: usize,
    /// Embedding segment names in schema categorical order.
    cat_segments: Vec<String>,
    n_numeric: usize,
    embed_dim: usize,
}

impl DiffusionModel {
    /// Builds the joint layout (MLP layers + embedding tables), initializes
    /// weights from the seed, and copies the codec's initial tables in.
    pub fn init(
        schedule: NoiseSchedule,
        config: MlpConfig,
        codec: &Codec,
        n_numeric: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let embed_dim = codec.embeddings.dim();
        let data_dim = n_numeric + embed_dim * codec.embeddings.tables().len();
        if config.input_dim != data_dim {
            return Err(Error::config(format!(
                "mlp input_dim {} does not match encoded dim {data_dim}",
                config.input_dim
            )));
        }
        let layout = codec.embeddings.extend_layout(config.extend_layout(Layout::builder())).build();
        let mut params = ParamVector::zeros(layout);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        config.init_weights(&mut params, &mut rng)?;
        codec.embeddings.write_into(&mut params)?;
        let cat_segments = codec.embeddings.tables().iter().map(|t| t.segment_name()).collect();
        Ok(DiffusionModel {
            schedule,
            config,
            params,
            data_dim,
            cat_segments,
            n_numeric,
            embed_dim,
        })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        self.params.layout()
    }

    /// Codec whose embedding tables reflect the current parameters.
    pub fn trained_codec(&self, base: &Codec) -> Result<Codec> {
        let mut codec = base.clone();
        codec.embeddings.refresh_from(&self.params)?;
        Ok(codec)
    }

    /// Encodes the given training rows from current embedding segments.
    fn encode_batch(&self, set: &TrainingSet, indices: &[usize]) -> Result<Array2<f64>> {
        let mut x0 = Array2::zeros((indices.len(), self.data_dim));
        let dim = self.embed_dim;
        for (b, &i) in indices.iter().enumerate() {
            for (c, &v) in set.numeric[i].iter().enumerate() {
                x0[[b, c]] = v;
            }
            for (j, seg_name) in self.cat_segments.iter().enumerate() {
                let seg = self.params.segment(seg_name)?;
                let id = set.cats[i][j] as usize;
                for k in 0..dim {
                    x0[[b, self.n_numeric + j * dim + k]] = seg[id * dim + k];
                }
            }
        }
        Ok(x0)
    }

    /// One minibatch of the denoising objective: per-row uniform timestep and
    /// standard-normal noise, MSE between drawn and predicted noise.
    /// Returns the loss and the full parameter gradient.
    pub fn loss_batch<R: Rng>(
        &self,
        set: &TrainingSet,
        indices: &[usize],
        rng: &mut R,
    ) -> Result<(f64, ParamVector)> {
        let b = indices.len();
        if b == 0 {
            return Err(Error::config("empty batch"));
        }
        let timesteps = self.schedule.timesteps();
        let t_batch: Vec<usize> = (0..b).map(|_| rng.random_range(0..timesteps)).collect();
        let mut noise = Array2::zeros((b, self.data_dim));
        for v in noise.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        self.loss_batch_with(set, indices, &t_batch, &noise)
    }

    /// Deterministic inner loss: caller supplies timesteps and noise.
    pub fn loss_batch_with(
        &self,
        set: &TrainingSet,
        indices: &[usize],
        t_batch: &[usize],
        noise: &Array2<f64>,
    ) -> Result<(f64, ParamVector)> {
        let b = indices.len();
        let x0 = self.encode_batch(set, indices)?;
        let mut xt = Array2::zeros((b, self.data_dim));
        for r in 0..b {
            let sa = self.schedule.alpha_bar[t_batch[r]].sqrt();
            let sb = self.schedule.beta_bar[t_batch[r]].sqrt();
            for c in 0..self.data_dim {
                xt[[r, c]] = sa * x0[[r, c]] + sb * noise[[r, c]];
            }
        }

        let cache = mlp_forward_cached(&self.params, &self.config, &xt, t_batch)?;
        let resid = cache.output() - noise;
        let loss = resid.iter().map(|v| v * v).sum::<f64>() / b as f64;
        if !loss.is_finite() {
            let row = (0..b)
                .find(|&r| resid.row(r).iter().any(|v| !v.is_finite()))
                .unwrap_or(0);
            return Err(Error::NonFinite(format!("loss at timestep {}", t_batch[row])));
        }

        let grad_out = resid.mapv(|v| 2.0 * v / b as f64);
        let (mut grads, grad_x) = mlp_backward(&self.params, &self.config, &cache, &grad_out)?;

        // Route the input gradient into the embedding rows that produced x0.
        let dim = self.embed_dim;
        for (j, seg_name) in self.cat_segments.iter().enumerate() {
            let seg = grads.segment_mut(seg_name)?;
            for (r, &i) in indices.iter().enumerate() {
                let sa = self.schedule.alpha_bar[t_batch[r]].sqrt();
                let id = set.cats[i][j] as usize;
                for k in 0..dim {
                    seg[id * dim + k] += sa * grad_x[[r, self.n_numeric + j * dim + k]];
                }
            }
        }
        Ok((loss, grads))
    }

    /// Runs `steps` iterations of minibatch-sample, loss, Adam update.
    /// Minibatches are drawn without replacement when the set is large
    /// enough, with replacement otherwise. Returns the per-step losses.
    pub fn train_steps<R: Rng>(
        &mut self,
        set: &TrainingSet,
        steps: usize,
        batch_size: usize,
        adam: &mut AdamState,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if steps == 0 {
            return Err(Error::config("steps must be >= 1"));
        }
        if batch_size == 0 || set.is_empty() {
            return Err(Error::config("batch_size and dataset must be non-empty"));
        }
        let n = set.len();
        let mut losses = Vec::with_capacity(steps);
        for _ in 0..steps {
            let indices: Vec<usize> = if n >= batch_size {
                rand::seq::index::sample(rng, n, batch_size).into_vec()
            } else {
                (0..batch_size).map(|_| rng.random_range(0..n)).collect()
            };
            let (loss, grads) = self.loss_batch(set, &indices, rng)?;
            adam_step(&mut self.params, &grads, adam)?;
            losses.push(loss);
        }
        Ok(losses)
    }

    /// Ancestral sampling: start from standard-normal latents and denoise
    /// through all timesteps; the final step adds no noise.
    pub fn sample<R: Rng>(&self, n_rows: usize, rng: &mut R) -> Result<Array2<f64>> {
        let timesteps = self.schedule.timesteps();
        let mut x = Array2::zeros((n_rows, self.data_dim));
        for v in x.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for t in (0..timesteps).rev() {
            let t_batch = vec![t; n_rows];
            let eps = mlp_forward(&self.params, &self.config, &x, &t_batch)?;
            let inv_sqrt_alpha = 1.0 / self.schedule.alpha[t].sqrt();
            let noise_coef = self.schedule.beta[t] / self.schedule.beta_bar[t].sqrt();
            let sigma = self.schedule.beta[t].sqrt();
            for r in 0..n_rows {
                for c in 0..self.data_dim {
                    let mu = inv_sqrt_alpha * (x[[r, c]] - noise_coef * eps[[r, c]]);
                    let z: f64 = if t > 0 { StandardNormal.sample(rng) } else { 0.0 };
                    x[[r, c]] = mu + sigma * z;
                }
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("sample at timestep {t}")));
            }
        }
        Ok(x)
    }

}

/// Decodes sampled latents into a table under an explicit schema.
pub fn synthesize_table<R: Rng>(
    model: &DiffusionModel,
    base_codec: &Codec,
    schema: &crate::data::schema::TableSchema,
    vocabs: &[Vec<String>],
    n_rows: usize,
    rng: &mut R,
) -> Result<TableData> {
    let codec = model.trained_codec(base_codec)?;
    let latents = model.sample(n_rows, rng)?;
    let mut rows = Vec::with_capacity(n_rows);
    for r in 0..n_rows {
        let encoded: Vec<f64> = latents.row(r).to_vec();
        rows.push(codec.decode_row(schema, &encoded)?);
    }
    TableData::from_rows(schema.clone(), rows, vocabs.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{Column, ColumnKind, TableSchema};
    use crate::data::table::Cell;
    use crate::nn::adam::AdamConfig;
    use crate::nn::mlp::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_table(values: &[f64], cats: &[u32]) -> TableData {
        let schema = TableSchema::new(vec![
            Column { name: "x".into(), kind: ColumnKind::Numeric },
            Column { name: "c".into(), kind: ColumnKind::Categorical },
        ]);
        let rows = values
            .iter()
            .zip(cats)
            .map(|(&v, &c)| vec![Cell::Num(v), Cell::Cat(c)])
            .collect();
        let n_vocab = *cats.iter().max().unwrap() as usize + 1;
        let vocab = (0..n_vocab).map(|i| format!("c{i}")).collect();
        TableData::from_rows(schema, rows, vec![Vec::new(), vocab]).unwrap()
    }

    fn toy_model(width: usize, seed: u64) -> (DiffusionModel, TrainingSet, Codec, TableData) {
        let values: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let cats: Vec<u32> = (0..16).map(|i| (i % 3) as u32).collect();
        let data = toy_table(&values, &cats);
        let codec = Codec::fit(&data, 8, 2, seed).unwrap();
        let d = codec.encoded_dim(&data.schema);
        let config = MlpConfig {
            input_dim: d,
            hidden_layers: 2,
            hidden_width: width,
            output_dim: d,
            time_embed_dim: 4,
            activation: Activation::Relu,
        };
        let schedule = NoiseSchedule::linear(10, 1e-4, 0.02).unwrap();
        let model = DiffusionModel::init(schedule, config, &codec, 1, seed).unwrap();
        let rows: Vec<usize> = (0..data.n_rows()).collect();
        let set = TrainingSet::prepare(&data, &codec.quantile, &rows).unwrap();
        (model, set, codec, data)
    }

    #[test]
    fn perfect_prediction_gives_zero_loss_and_grads() {
        // Zero network predicts zero noise; drawing zero noise makes the
        // prediction exact.
        let (mut model, set, _, _) = toy_model(4, 3);
        for v in model.params.values_mut() {
            *v = 0.0;
        }
        let noise = Array2::zeros((4, model.data_dim));
        let (loss, grads) =
            model.loss_batch_with(&set, &[0, 1, 2, 3], &[1, 2, 3, 4], &noise).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn zero_predictor_loss_matches_chi_square_mean() {
        // Zero-output network: loss = mean ||eps||^2 ~ d.
        let (mut model, set, _, _) = toy_model(4, 3);
        for l in 0..model.config.n_weight_layers() {
            model.params.segment_mut(&format!("layer{l}.weight")).unwrap().fill(0.0);
            model.params.segment_mut(&format!("layer{l}.bias")).unwrap().fill(0.0);
        }
        let d = model.data_dim as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = 256;
        let indices: Vec<usize> = (0..b).map(|i| i % set.len()).collect();
        let (loss, _) = model.loss_batch(&set, &indices, &mut rng).unwrap();
        assert!(
            (loss - d).abs() / d < 0.2,
            "zero-predictor loss {loss} should be near d = {d}"
        );
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let (model, set, _, _) = toy_model(4, 7);
        let indices = [0usize, 3, 5];
        let t_batch = [2usize, 5, 8];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut noise = Array2::zeros((3, model.data_dim));
        for v in noise.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let (_, grads) = model.loss_batch_with(&set, &indices, &t_batch, &noise).unwrap();

        let h = 1e-5;
        let mut max_rel = 0.0f64;
        for i in 0..model.params.len() {
            let mut plus = model.clone();
            plus.params.values_mut()[i] += h;
            let (lp, _) = plus.loss_batch_with(&set, &indices, &t_batch, &noise).unwrap();
            let mut minus = model.clone();
            minus.params.values_mut()[i] -= h;
            let (lm, _) = minus.loss_batch_with(&set, &indices, &t_batch, &noise).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            let g = grads.values()[i];
            let denom = g.abs().max(fd.abs()).max(1e-6);
            max_rel = max_rel.max((fd - g).abs() / denom);
        }
        assert!(max_rel < 1e-5, "max relative gradient error {max_rel}");
    }

    #[test]
    fn train_steps_is_deterministic_and_validates_steps() {
        let (mut m1, set, _, _) = toy_model(8, 1);
        let mut m2 = m1.clone();
        let mut adam1 = AdamState::new(m1.params.len(), AdamConfig { lr: 1e-3, ..Default::default() });
        let mut adam2 = adam1.clone();
        assert!(m1
            .train_steps(&set, 0, 4, &mut adam1, &mut ChaCha8Rng::seed_from_u64(2))
            .is_err());
        m1.train_steps(&set, 10, 4, &mut adam1, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        m2.train_steps(&set, 10, 4, &mut adam2, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(m1.params.bitwise_eq(&m2.params));
    }

    #[test]
    fn training_reduces_loss_on_point_mass() {
        // 1-D data at a single point: trivially learnable target.
        let values = vec![0.5; 32];
        let schema =
            TableSchema::new(vec![Column { name: "x".into(), kind: ColumnKind::Numeric }]);
        let rows = values.iter().map(|&v| vec![Cell::Num(v)]).collect();
        let data = TableData::from_rows(schema, rows, vec![Vec::new()]).unwrap();
        let codec = Codec::fit(&data, 8, 2, 3).unwrap();
        let config = MlpConfig {
            input_dim: 1,
            hidden_layers: 1,
            hidden_width: 16,
            output_dim: 1,
            time_embed_dim: 4,
            activation: Activation::Relu,
        };
        let schedule = NoiseSchedule::linear(10, 1e-4, 0.02).unwrap();
        let mut model = DiffusionModel::init(schedule, config, &codec, 1, 3).unwrap();
        let rows: Vec<usize> = (0..data.n_rows()).collect();
        let set = TrainingSet::prepare(&data, &codec.quantile, &rows).unwrap();
        let mut adam = AdamState::new(model.params.len(), AdamConfig { lr: 1e-3, ..Default::default() });
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let losses = model.train_steps(&set, 500, 16, &mut adam, &mut rng).unwrap();
        let initial: f64 = losses[..20].iter().sum::<f64>() / 20.0;
        let final_: f64 = losses[losses.len() - 20..].iter().sum::<f64>() / 20.0;
        assert!(final_ < 0.5 * initial, "initial {initial}, final {final_}");
    }

    #[test]
    fn sampling_is_deterministic_under_a_seed() {
        let (model, _, _, _) = toy_model(4, 2);
        let a = model.sample(5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = model.sample(5, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn one_step_sampler_arithmetic_with_zero_predictor() {
        // T=2 minimal schedule, zero predictor: each reverse step is
        // x/sqrt(alpha_t) plus sigma_t * z, with z = 0 at the last step.
        let values = vec![0.0, 1.0];
        let schema =
            TableSchema::new(vec![Column { name: "x".into(), kind: ColumnKind::Numeric }]);
        let rows = values.iter().map(|&v| vec![Cell::Num(v)]).collect();
        let data = TableData::from_rows(schema, rows, vec![Vec::new()]).unwrap();
        let codec = Codec::fit(&data, 2, 2, 1).unwrap();
        let config = MlpConfig {
            input_dim: 1,
            hidden_layers: 1,
            hidden_width: 2,
            output_dim: 1,
            time_embed_dim: 2,
            activation: Activation::Relu,
        };
        let schedule = NoiseSchedule::linear(2, 0.5, 0.5).unwrap();
        let mut model = DiffusionModel::init(schedule.clone(), config, &codec, 1, 1).unwrap();
        for v in model.params.values_mut() {
            *v = 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let out = model.sample(1, &mut rng).unwrap();
        // Replay the same rng draws by hand.
        let mut rng2 = ChaCha8Rng::seed_from_u64(8);
        let x_init: f64 = StandardNormal.sample(&mut rng2);
        let z1: f64 = StandardNormal.sample(&mut rng2);
        let x1 = x_init / schedule.alpha[1].sqrt() + schedule.beta[1].sqrt() * z1;
        let x0 = x1 / schedule.alpha[0].sqrt();
        assert!((out[[0, 0]] - x0).abs() < 1e-12);
    }
}
