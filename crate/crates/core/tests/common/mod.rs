//! Shared helpers for integration tests: small random tables with mixed
//! column kinds.
//!
//! Each test binary compiles its own copy, so not every helper is used by
//! every binary.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tabdiff::data::schema::{Column, ColumnKind, TableSchema};
use tabdiff::data::table::{Cell, TableData};

/// Builds a random table with `n_cols` columns (alternating numeric and
/// categorical, starting numeric) and `n_rows` rows. Numeric values are drawn
/// from a continuous range, so columns are almost surely non-constant for
/// `n_rows >= 2`.
pub fn random_table(rng: &mut ChaCha8Rng, n_rows: usize, n_cols: usize) -> TableData {
    let columns: Vec<Column> = (0..n_cols)
        .map(|c| Column {
            name: format!("col{c}"),
            kind: if c % 2 == 0 { ColumnKind::Numeric } else { ColumnKind::Categorical },
        })
        .collect();
    let schema = TableSchema::new(columns);
    let vocab_sizes: Vec<usize> =
        (0..n_cols).map(|c| if c % 2 == 0 { 0 } else { rng.random_range(2..5) }).collect();
    let rows: Vec<Vec<Cell>> = (0..n_rows)
        .map(|_| {
            (0..n_cols)
                .map(|c| {
                    if c % 2 == 0 {
                        Cell::Num(rng.random_range(-10.0..10.0))
                    } else {
                        Cell::Cat(rng.random_range(0..vocab_sizes[c] as u32))
                    }
                })
                .collect()
        })
        .collect();
    let vocab: Vec<Vec<String>> = vocab_sizes
        .iter()
        .map(|&s| (0..s).map(|i| format!("v{i}")).collect())
        .collect();
    TableData::from_rows(schema, rows, vocab).unwrap()
}

/// Same schema for two tables so they can be compared by the metrics.
pub fn random_table_pair(
    rng: &mut ChaCha8Rng,
    n_rows: usize,
    n_cols: usize,
) -> (TableData, TableData) {
    let a = random_table(rng, n_rows, n_cols);
    let mut b = random_table(rng, n_rows, n_cols);
    // Force identical schemas and vocabularies (random_table already builds
    // them deterministically per column kind, but vocab sizes differ).
    b = TableData::from_rows(
        a.schema.clone(),
        b.rows()
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(c, cell)| match cell {
                        Cell::Num(v) => Cell::Num(*v),
                        Cell::Cat(id) => {
                            let n = a.vocab(c).len() as u32;
                            Cell::Cat(id % n)
                        }
                    })
                    .collect()
            })
            .collect(),
        (0..n_cols).map(|c| a.vocab(c).to_vec()).collect(),
    )
    .unwrap();
    (a, b)
}
