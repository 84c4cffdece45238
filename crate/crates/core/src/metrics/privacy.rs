//! Distance-to-closest-record privacy score.
//!
//! Each synthetic row's DCR is its minimum Euclidean distance to any real
//! row, measured in a common metric space: quantile-normal scores for numeric
//! columns and one-hot indicators for categorical ones. The reported score is
//! the median DCR — lower means synthetic rows sit closer to real ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::quantile::QuantileTransform;
use crate::data::schema::ColumnKind;
use crate::data::table::TableData;
use crate::error::{Error, Result};
use crate::metrics::align::{align_cats, check_matched_schemas};

/// Default cap on |synth| x |real| distance evaluations before the synthetic
/// side is subsampled.
pub const DEFAULT_MAX_PAIRS: usize = 10_000_000;

const SUBSAMPLE_SEED: u64 = 0x5eed_dc_0d;

#[derive(Debug, Clone, Serialize)]
pub struct PrivacyReport {
    pub median_dcr: f64,
    /// Synthetic rows actually scored (smaller than |synth| when subsampled).
    pub evaluated_rows: usize,
    pub subsampled: bool,
}

/// How a numeric column is mapped into the metric space.
enum NumericMap {
    Quantile,
    MinMax { min: f64, range: f64 },
    Raw,
}

/// Embeds both tables in the shared metric space. Feature layout: numeric
/// columns in schema order, then one categorical block per column over the
/// union vocabulary.
fn embed(real: &TableData, synth: &TableData) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n_real = real.n_rows();
    let n_synth = synth.n_rows();
    let mut rf: Vec<Vec<f64>> = vec![Vec::new(); n_real];
    let mut sf: Vec<Vec<f64>> = vec![Vec::new(); n_synth];
    let quantile = QuantileTransform::fit(real, crate::data::quantile::DEFAULT_N_QUANTILES)?;
    for (c, col) in real.schema.columns.iter().enumerate() {
        match col.kind {
            ColumnKind::Numeric => {
                let rv = real.numeric_column(c)?;
                let sv = synth.numeric_column(c)?;
                let map = if quantile.column(c)?.is_constant() {
                    // Degenerate transform: scale by the real range, or fall
                    // through to raw differences when the range is zero too.
                    let (min, max) = rv.iter().fold(
                        (f64::INFINITY, f64::NEG_INFINITY),
                        |(lo, hi), &v| (lo.min(v), hi.max(v)),
                    );
                    if max > min {
                        NumericMap::MinMax { min, range: max - min }
                    } else {
                        NumericMap::Raw
                    }
                } else {
                    NumericMap::Quantile
                };
                let push = |feats: &mut Vec<Vec<f64>>, vals: &[f64]| -> Result<()> {
                    for (row, &v) in feats.iter_mut().zip(vals) {
                        row.push(match &map {
                            NumericMap::Quantile => quantile.apply(c, v)?,
                            NumericMap::MinMax { min, range } => (v - min) / range,
                            NumericMap::Raw => v,
                        });
                    }
                    Ok(())
                };
                push(&mut rf, &rv)?;
                push(&mut sf, &sv)?;
            }
            ColumnKind::Categorical => {
                let a = align_cats(real, synth, c)?;
                let push = |feats: &mut Vec<Vec<f64>>, ids: &[u32]| {
                    for (row, &id) in feats.iter_mut().zip(ids) {
                        let base = row.len();
                        row.resize(base + a.union_size, 0.0);
                        row[base + id as usize] = 1.0;
                    }
                };
                push(&mut rf, &a.real_ids);
                push(&mut sf, &a.synth_ids);
            }
        }
    }
    Ok((rf, sf))
}

pub fn privacy_dcr(real: &TableData, synth: &TableData, max_pairs: usize) -> Result<PrivacyReport> {
    check_matched_schemas(real, synth)?;
    if real.rows().is_empty() || synth.rows().is_empty() {
        return Err(Error::config("privacy over an empty table"));
    }
    let (rf, sf) = embed(real, synth)?;

    let mut picked: Vec<usize> = (0..sf.len()).collect();
    let mut subsampled = false;
    if sf.len().saturating_mul(rf.len()) > max_pairs {
        let keep = (max_pairs / rf.len()).max(1).min(sf.len());
        let mut rng = ChaCha8Rng::seed_from_u64(SUBSAMPLE_SEED);
        picked = rand::seq::index::sample(&mut rng, sf.len(), keep).into_vec();
        picked.sort_unstable();
        subsampled = true;
    }

    let mut dcrs: Vec<f64> = picked
        .iter()
        .map(|&s| {
            rf.iter()
                .map(|r| {
                    sf[s]
                        .iter()
                        .zip(r)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    dcrs.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let n = dcrs.len();
    let median = if n % 2 == 1 { dcrs[n / 2] } else { 0.5 * (dcrs[n / 2 - 1] + dcrs[n / 2]) };
    Ok(PrivacyReport { median_dcr: median, evaluated_rows: n, subsampled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{Column, TableSchema};
    use crate::data::table::Cell;
    use approx::assert_abs_diff_eq;

    fn numeric_table(values: &[f64]) -> TableData {
        let schema =
            TableSchema::new(vec![Column { name: "x".into(), kind: ColumnKind::Numeric }]);
        TableData::from_rows(
            schema,
            values.iter().map(|&v| vec![Cell::Num(v)]).collect(),
            vec![Vec::new()],
        )
        .unwrap()
    }

    #[test]
    fn exact_copy_is_zero() {
        let real = numeric_table(&[1.0, 2.0, 5.0, 9.0]);
        let p = privacy_dcr(&real, &real, DEFAULT_MAX_PAIRS).unwrap();
        assert_eq!(p.median_dcr, 0.0);
        assert!(!p.subsampled);
    }

    #[test]
    fn degenerate_real_column_uses_raw_distances() {
        let real = numeric_table(&[0.0]);
        let synth = numeric_table(&[3.0, 4.0, 5.0]);
        let p = privacy_dcr(&real, &synth, DEFAULT_MAX_PAIRS).unwrap();
        assert_abs_diff_eq!(p.median_dcr, 4.0);
    }

    #[test]
    fn categorical_mismatch_distance() {
        let schema =
            TableSchema::new(vec![Column { name: "c".into(), kind: ColumnKind::Categorical }]);
        let real = TableData::from_rows(
            schema.clone(),
            vec![vec![Cell::Cat(0)]],
            vec![vec!["A".into()]],
        )
        .unwrap();
        let synth = TableData::from_rows(
            schema,
            vec![vec![Cell::Cat(0)]],
            vec![vec!["B".into()]],
        )
        .unwrap();
        // Disjoint one-hot vectors differ in two coordinates.
        let p = privacy_dcr(&real, &synth, DEFAULT_MAX_PAIRS).unwrap();
        assert_abs_diff_eq!(p.median_dcr, 2.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn subsampling_reports_reduced_count() {
        let real = numeric_table(&(0..20).map(f64::from).collect::<Vec<_>>());
        let synth = numeric_table(&(0..20).map(|i| f64::from(i) + 0.5).collect::<Vec<_>>());
        let p = privacy_dcr(&real, &synth, 100).unwrap();
        assert!(p.subsampled);
        assert_eq!(p.evaluated_rows, 5);
        assert!(p.median_dcr >= 0.0);
    }

    #[test]
    fn even_count_median_averages() {
        let real = numeric_table(&[0.0]);
        let synth = numeric_table(&[1.0, 2.0, 4.0, 8.0]);
        let p = privacy_dcr(&real, &synth, DEFAULT_MAX_PAIRS).unwrap();
        assert_abs_diff_eq!(p.median_dcr, 3.0);
    }
}
