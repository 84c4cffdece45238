//! Category alignment between two tables that may have built their
//! vocabularies independently. Ids are remapped onto the union vocabulary:
//! real categories first in their original order, then synth-only ones.

use crate::data::table::TableData;
use crate::error::{Error, Result};

pub struct AlignedCats {
    pub real_ids: Vec<u32>,
    pub synth_ids: Vec<u32>,
    pub union_size: usize,
    /// Number of distinct categories present in the real column.
    pub n_real: usize,
    /// Number of real categories also present in the synth column.
    pub n_shared: usize,
}

pub fn align_cats(real: &TableData, synth: &TableData, col: usize) -> Result<AlignedCats> {
    let real_vocab = real.vocab(col);
    let synth_vocab = synth.vocab(col);
    let mut union: Vec<&str> = real_vocab.iter().map(|s| s.as_str()).collect();
    for s in synth_vocab {
        if !union.contains(&s.as_str()) {
            union.push(s);
        }
    }
    let map = |vocab: &[String], ids: &[u32]| -> Vec<u32> {
        let remap: Vec<u32> = vocab
            .iter()
            .map(|s| union.iter().position(|u| u == s).unwrap() as u32)
            .collect();
        ids.iter().map(|&i| remap[i as usize]).collect()
    };
    let real_ids = map(real_vocab, &real.cat_column(col)?);
    let synth_ids = map(synth_vocab, &synth.cat_column(col)?);
    let n_shared = real_vocab.iter().filter(|s| synth_vocab.contains(s)).count();
    Ok(AlignedCats {
        real_ids,
        synth_ids,
        union_size: union.len(),
        n_real: real_vocab.len(),
        n_shared,
    })
}

/// Checks that two tables share the same column declarations.
pub fn check_matched_schemas(real: &TableData, synth: &TableData) -> Result<()> {
    if real.schema.columns != synth.schema.columns {
        return Err(Error::shape("real and synthetic tables have different columns".to_string()));
    }
    Ok(())
}
