//! Non-iid client partitioning: the most frequent categories of a split
//! column each define one client's rows; remaining rows are dropped.

use crate::data::table::TableData;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Disjoint row-index lists, client `i` holding the rows of the i-th
    /// most frequent category.
    pub client_rows: Vec<Vec<usize>>,
    pub dropped_row_count: usize,
}

impl Partition {
    pub fn n_clients(&self) -> usize {
        self.client_rows.len()
    }

    pub fn client_sizes(&self) -> Vec<usize> {
        self.client_rows.iter().map(|r| r.len()).collect()
    }
}

/// Partitions rows by the `n_clients` most frequent categories of
/// `split_column`. Frequency ties break on lower category id, which is
/// first-appearance order.
pub fn partition_noniid(data: &TableData, split_column: &str, n_clients: usize) -> Result<Partition> {
    let col = data
        .schema
        .column_index(split_column)
        .ok_or_else(|| Error::UnknownColumn(split_column.to_string()))?;
    let ids = data.cat_column(col)?;
    let vocab_len = data.vocab(col).len();
    if n_clients == 0 {
        return Err(Error::config("need at least one client"));
    }
    if vocab_len < n_clients {
        return Err(Error::config(format!(
            "split column {split_column} has {vocab_len} categories but {n_clients} clients requested"
        )));
    }

    let mut counts = vec![0usize; vocab_len];
    for &id in &ids {
        counts[id as usize] += 1;
    }
    let mut order: Vec<usize> = (0..vocab_len).collect();
    order.sort_by_key(|&c| (std::cmp::Reverse(counts[c]), c));
    let top = &order[..n_clients];

    let mut client_of_category = vec![None; vocab_len];
    for (client, &cat) in top.iter().enumerate() {
        client_of_category[cat] = Some(client);
    }
    let mut client_rows = vec![Vec::new(); n_clients];
    let mut dropped = 0usize;
    for (row, &id) in ids.iter().enumerate() {
        match client_of_category[id as usize] {
            Some(c) => client_rows[c].push(row),
            None => dropped += 1,
        }
    }
    Ok(Partition { client_rows, dropped_row_count: dropped })
}
