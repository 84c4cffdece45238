//! Category embedding tables and the row codec mapping mixed-type rows to
//! and from the continuous diffusion space.
//!
//! A row encodes as the concatenation of its numeric columns' normal scores
//! followed by each categorical column's embedding vector, in schema order.
//! Decoding inverts the quantile transform and assigns each categorical to
//! the nearest embedding row.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::quantile::QuantileTransform;
use crate::data::schema::TableSchema;
use crate::data::table::{Cell, TableData};
use crate::error::{Error, Result};
use crate::nn::param::{LayoutBuilder, ParamVector};

pub const DEFAULT_EMBED_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    /// Schema column index this table belongs to.
    pub col: usize,
    pub name: String,
    /// vocab_size x dim weights.
    pub weights: Array2<f64>,
}

impl EmbeddingTable {
    pub fn segment_name(&self) -> String {
        format!("embed.{}", self.name)
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.nrows()
    }

    /// Nearest embedding row by Euclidean distance, ties broken by lowest id.
    pub fn nearest(&self, v: &[f64]) -> u32 {
        let mut best = 0u32;
        let mut best_d = f64::INFINITY;
        for (id, row) in self.weights.rows().into_iter().enumerate() {
            let d: f64 = row.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best_d {
                best_d = d;
                best = id as u32;
            }
        }
        best
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let n = self.vocab_size();
        let mut min = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let d: f64 = (0..self.weights.ncols())
                    .map(|k| (self.weights[[i, k]] - self.weights[[j, k]]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                min = min.min(d);
            }
        }
        min
    }
}

/// Per-categorical-column embedding tables.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCodec {
    tables: Vec<EmbeddingTable>,
    dim: usize,
}

impl EmbeddingCodec {
    /// Draws each category's vector from a seeded standard normal scaled by
    /// `1/sqrt(dim)`.
    pub fn init(schema: &TableSchema, vocab_sizes: &[usize], dim: usize, seed: u64) -> Result<Self> {
        let cat_cols = schema.categorical_indices();
        if vocab_sizes.len() != cat_cols.len() {
            return Err(Error::shape(format!(
                "{} vocab sizes for {} categorical columns",
                vocab_sizes.len(),
                cat_cols.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (dim as f64).sqrt();
        let mut tables = Vec::with_capacity(cat_cols.len());
        for (&col, &vocab) in cat_cols.iter().zip(vocab_sizes) {
            if vocab == 0 {
                return Err(Error::config(format!(
                    "categorical column {} has an empty vocabulary",
                    schema.columns[col].name
                )));
            }
            let weights = Array2::from_shape_fn((vocab, dim), |_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            });
            tables.push(EmbeddingTable { col, name: schema.columns[col].name.clone(), weights });
        }
        Ok(EmbeddingCodec { tables, dim })
    }

    pub fn from_tables(tables: Vec<EmbeddingTable>, dim: usize) -> Self {
        EmbeddingCodec { tables, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tables(&self) -> &[EmbeddingTable] {
        &self.tables
    }

    pub fn table_for_column(&self, col: usize) -> Result<&EmbeddingTable> {
        self.tables
            .iter()
            .find(|t| t.col == col)
            .ok_or_else(|| Error::UnknownColumn(format!("no embedding table for column {col}")))
    }

    /// Adds one `embed.<column>` segment per table to a layout builder.
    pub fn extend_layout(&self, mut builder: LayoutBuilder) -> LayoutBuilder {
        for t in &self.tables {
            builder = builder.add(t.segment_name(), &[t.vocab_size(), self.dim]);
        }
        builder
    }

    /// Copies table weights into their parameter segments.
    pub fn write_into(&self, params: &mut ParamVector) -> Result<()> {
        for t in &self.tables {
            let seg = params.segment_mut(&t.segment_name())?;
            seg.copy_from_slice(t.weights.as_slice().expect("standard layout"));
        }
        Ok(())
    }

    /// Refreshes table weights from trained parameter segments.
    pub fn refresh_from(&mut self, params: &ParamVector) -> Result<()> {
        for t in &mut self.tables {
            let seg = params.segment(&format!("embed.{}", t.name))?;
            t.weights =
                Array2::from_shape_vec((t.weights.nrows(), t.weights.ncols()), seg.to_vec())
                    .expect("segment length matches table shape");
        }
        Ok(())
    }
}

/// Fitted quantile transforms plus embedding tables: everything needed to
/// move rows between tabular and continuous form.
#[derive(Debug, Clone, PartialEq)]
pub struct Codec {
    pub quantile: QuantileTransform,
    pub embeddings: EmbeddingCodec,
}

impl Codec {
    pub fn fit(data: &TableData, n_quantiles: usize, embed_dim: usize, seed: u64) -> Result<Self> {
        let quantile = QuantileTransform::fit(data, n_quantiles)?;
        let vocab_sizes: Vec<usize> =
            data.schema.categorical_indices().iter().map(|&c| data.vocab(c).len()).collect();
        let embeddings = EmbeddingCodec::init(&data.schema, &vocab_sizes, embed_dim, seed)?;
        Ok(Codec { quantile, embeddings })
    }

    pub fn encoded_dim(&self, schema: &TableSchema) -> usize {
        schema.n_numeric() + self.embeddings.dim() * schema.n_categorical()
    }

    pub fn encode_row(&self, schema: &TableSchema, row: &[Cell]) -> Result<Vec<f64>> {
        if row.len() != schema.columns.len() {
            return Err(Error::shape(format!("row has {} cells", row.len())));
        }
        let mut out = Vec::with_capacity(self.encoded_dim(schema));
        for &col in &schema.numeric_indices() {
            let v = row[col]
                .as_num()
                .ok_or_else(|| Error::shape(format!("expected numeric cell in column {col}")))?;
            out.push(self.quantile.apply(col, v)?);
        }
        for &col in &schema.categorical_indices() {
            let id = row[col]
                .as_cat()
                .ok_or_else(|| Error::shape(format!("expected categorical cell in column {col}")))?;
            let table = self.embeddings.table_for_column(col)?;
            out.extend(table.weights.row(id as usize).iter());
        }
        Ok(out)
    }

    /// Total: every vector in R^d decodes to some valid row.
    pub fn decode_row(&self, schema: &TableSchema, encoded: &[f64]) -> Result<Vec<Cell>> {
        let d = self.encoded_dim(schema);
        if encoded.len() != d {
            return Err(Error::shape(format!("encoded vector length {} != {d}", encoded.len())));
        }
        let mut cells = vec![Cell::Num(0.0); schema.columns.len()];
        let mut pos = 0;
        for &col in &schema.numeric_indices() {
            cells[col] = Cell::Num(self.quantile.invert(col, encoded[pos])?);
            pos += 1;
        }
        let dim = self.embeddings.dim();
        for &col in &schema.categorical_indices() {
            let table = self.embeddings.table_for_column(col)?;
            cells[col] = Cell::Cat(table.nearest(&encoded[pos..pos + dim]));
            pos += dim;
        }
        Ok(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{Column, ColumnKind};

    fn schema() -> TableSchema {
        TableSchema::new(vec![
            Column { name: "amount".into(), kind: ColumnKind::Numeric },
            Column { name: "dept".into(), kind: ColumnKind::Categorical },
        ])
    }

    fn table_data(n_cats: usize) -> TableData {
        let rows: Vec<Vec<Cell>> = (0..6)
            .map(|i| vec![Cell::Num(i as f64), Cell::Cat((i % n_cats) as u32)])
            .collect();
        let vocab = (0..n_cats).map(|i| format!("c{i}")).collect();
        TableData::from_rows(schema(), rows, vec![Vec::new(), vocab]).unwrap()
    }

    #[test]
    fn init_is_seed_deterministic() {
        let s = schema();
        let a = EmbeddingCodec::init(&s, &[3], 2, 9).unwrap();
        let b = EmbeddingCodec::init(&s, &[3], 2, 9).unwrap();
        assert_eq!(a, b);
        let c = EmbeddingCodec::init(&s, &[3], 2, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn table_rows_are_pairwise_distinct() {
        let e = EmbeddingCodec::init(&schema(), &[58], 2, 1).unwrap();
        assert_eq!(e.tables()[0].weights.shape(), &[58, 2]);
        assert!(e.tables()[0].min_pairwise_distance() > 0.0);
    }

    #[test]
    fn encoded_dim_arithmetic() {
        let data = table_data(3);
        let codec = Codec::fit(&data, 10, 2, 4).unwrap();
        assert_eq!(codec.encoded_dim(&data.schema), 3);
    }

    #[test]
    fn round_trip_at_reference_quantiles() {
        let data = table_data(3);
        let codec = Codec::fit(&data, 10, 2, 4).unwrap();
        for row in data.rows() {
            let enc = codec.encode_row(&data.schema, row).unwrap();
            let dec = codec.decode_row(&data.schema, &enc).unwrap();
            assert_eq!(dec[1], row[1]);
            let orig = row[0].as_num().unwrap();
            let back = dec[0].as_num().unwrap();
            assert!((orig - back).abs() < 1e-9, "{orig} vs {back}");
        }
    }

    #[test]
    fn single_category_vocab_is_exact() {
        let data = table_data(1);
        let codec = Codec::fit(&data, 10, 2, 4).unwrap();
        let enc = codec.encode_row(&data.schema, data.row(0)).unwrap();
        let dec = codec.decode_row(&data.schema, &enc).unwrap();
        assert_eq!(dec[1], Cell::Cat(0));
    }

    #[test]
    fn small_perturbations_keep_the_category() {
        let data = table_data(4);
        let codec = Codec::fit(&data, 10, 2, 4).unwrap();
        let table = codec.embeddings.table_for_column(1).unwrap();
        let min_dist = table.min_pairwise_distance();
        let enc = codec.encode_row(&data.schema, data.row(2)).unwrap();
        // Perturb the categorical sub-vector by 0.49x the minimum
        // inter-embedding distance in a fixed direction.
        let mut perturbed = enc.clone();
        let delta = 0.49 * min_dist / (2f64).sqrt();
        perturbed[1] += delta;
        perturbed[2] -= delta;
        let dec = codec.decode_row(&data.schema, &perturbed).unwrap();
        assert_eq!(dec[1], data.row(2)[1]);
    }

    #[test]
    fn wrong_vector_length_is_an_error() {
        let data = table_data(2);
        let codec = Codec::fit(&data, 10, 2, 4).unwrap();
        assert!(codec.decode_row(&data.schema, &[0.0, 0.0]).is_err());
    }
}
