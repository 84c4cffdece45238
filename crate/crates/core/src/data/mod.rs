//! Tabular schema, CSV ingestion, quantile-normal transforms, category
//! embeddings, and the non-iid client partitioner.

pub mod embedding;
pub mod partition;
pub mod quantile;
pub mod schema;
pub mod table;

pub use embedding::{Codec, EmbeddingCodec, EmbeddingTable, DEFAULT_EMBED_DIM};
pub use partition::{partition_noniid, Partition};
pub use quantile::{ColumnTransform, QuantileTransform, CLAMP_EPS, DEFAULT_N_QUANTILES};
pub use schema::{Column, ColumnKind, TableSchema};
pub use table::{load_csv, Cell, TableData};
