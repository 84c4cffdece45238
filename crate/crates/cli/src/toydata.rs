//! Deterministic mixed-type toy dataset: three numeric columns drawn from
//! per-segment Gaussians plus a segment column (the non-iid split) and a
//! grade column whose distribution is skewed by segment (the utility label).

use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use tabdiff::data::schema::{Column, ColumnKind, TableSchema};
use tabdiff::data::table::{Cell, TableData};

pub const SEGMENTS: [&str; 3] = ["retail", "corporate", "public"];
pub const GRADES: [&str; 3] = ["low", "mid", "high"];

const SEGMENT_PROBS: [f64; 3] = [0.5, 0.3, 0.2];
/// Per-segment means for (amount, balance, duration).
const MEANS: [[f64; 3]; 3] = [[-2.0, 0.0, 1.0], [1.0, 2.0, -1.0], [3.0, -2.0, 0.0]];
const SIGMA: f64 = 0.7;
/// Per-segment grade probabilities.
const GRADE_PROBS: [[f64; 3]; 3] =
    [[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.1, 0.3, 0.6]];

pub fn toy_schema() -> TableSchema {
    TableSchema {
        columns: vec![
            Column { name: "amount".into(), kind: ColumnKind::Numeric },
            Column { name: "balance".into(), kind: ColumnKind::Numeric },
            Column { name: "duration".into(), kind: ColumnKind::Numeric },
            Column { name: "segment".into(), kind: ColumnKind::Categorical },
            Column { name: "grade".into(), kind: ColumnKind::Categorical },
        ],
        label_column: Some("grade".into()),
        split_column: Some("segment".into()),
    }
}

pub fn toy_table(n_rows: usize, seed: u64) -> TableData {
    let schema = toy_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seg_dist = WeightedIndex::new(SEGMENT_PROBS).expect("valid weights");
    let grade_dists: Vec<WeightedIndex<f64>> = GRADE_PROBS
        .iter()
        .map(|p| WeightedIndex::new(p).expect("valid weights"))
        .collect();
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let seg = seg_dist.sample(&mut rng);
        let mut row = Vec::with_capacity(5);
        for c in 0..3 {
            let z: f64 = StandardNormal.sample(&mut rng);
            row.push(Cell::Num(MEANS[seg][c] + SIGMA * z));
        }
        row.push(Cell::Cat(seg as u32));
        row.push(Cell::Cat(grade_dists[seg].sample(&mut rng) as u32));
        rows.push(row);
    }
    let vocab = vec![
        Vec::new(),
        Vec::new(),
        Vec::new(),
        SEGMENTS.iter().map(|s| s.to_string()).collect(),
        GRADES.iter().map(|s| s.to_string()).collect(),
    ];
    TableData::from_rows(schema, rows, vocab).expect("generator emits valid rows")
}
