//! Column- and row-level fidelity between a real and a synthetic table.
//!
//! Numeric columns compare empirical distributions with the two-sample
//! Kolmogorov-Smirnov statistic; categorical columns with the (unhalved)
//! total variation distance over category frequencies. Row fidelity compares
//! Pearson correlations of numeric pairs and joint category distributions of
//! categorical pairs; mixed pairs are excluded.

use serde::Serialize;

use crate::data::schema::ColumnKind;
use crate::data::table::TableData;
use crate::error::{Error, Result};
use crate::metrics::align::{align_cats, check_matched_schemas};

/// Two-sample Kolmogorov-Smirnov statistic: the sup distance between the
/// empirical CDFs, in `[0, 1]`.
pub fn kss(real: &[f64], synth: &[f64]) -> Result<f64> {
    if real.is_empty() || synth.is_empty() {
        return Err(Error::config("kss over an empty column"));
    }
    let mut a = real.to_vec();
    let mut b = synth.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    let mut sup = 0.0f64;
    for &v in a.iter().chain(b.iter()) {
        let fa = a.partition_point(|&x| x <= v) as f64 / a.len() as f64;
        let fb = b.partition_point(|&x| x <= v) as f64 / b.len() as f64;
        sup = sup.max((fa - fb).abs());
    }
    Ok(sup)
}

/// Unhalved total variation distance over category frequencies, in `[0, 2]`.
/// Categories range over the union of both columns.
pub fn tvd(real_ids: &[u32], synth_ids: &[u32], n_categories: usize) -> Result<f64> {
    if real_ids.is_empty() || synth_ids.is_empty() {
        return Err(Error::config("tvd over an empty column"));
    }
    let mut p = vec![0.0f64; n_categories];
    let mut q = vec![0.0f64; n_categories];
    for &id in real_ids {
        p[id as usize] += 1.0 / real_ids.len() as f64;
    }
    for &id in synth_ids {
        q[id as usize] += 1.0 / synth_ids.len() as f64;
    }
    Ok(p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum())
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct ColumnFidelity {
    pub per_column: Vec<(String, f64)>,
    pub mean: f64,
}

/// Per-column fidelity: numeric `1 - KSS`, categorical `1 - TVD/2`, averaged
/// over all columns.
pub fn column_fidelity(real: &TableData, synth: &TableData) -> Result<ColumnFidelity> {
    check_matched_schemas(real, synth)?;
    let mut per_column = Vec::new();
    for (c, col) in real.schema.columns.iter().enumerate() {
        let score = match col.kind {
            ColumnKind::Numeric => {
                1.0 - kss(&real.numeric_column(c)?, &synth.numeric_column(c)?)?
            }
            ColumnKind::Categorical => {
                let a = align_cats(real, synth, c)?;
                1.0 - 0.5 * tvd(&a.real_ids, &a.synth_ids, a.union_size)?
            }
        };
        per_column.push((col.name.clone(), score));
    }
    let mean = per_column.iter().map(|(_, s)| s).sum::<f64>() / per_column.len() as f64;
    Ok(ColumnFidelity { per_column, mean })
}

#[derive(Debug, Clone, Serialize)]
pub struct RowFidelity {
    pub per_pair: Vec<(String, String, f64)>,
    /// Numeric-categorical pairs, excluded by construction.
    pub excluded_mixed_pairs: usize,
    /// Same-kind pairs skipped because a correlation was undefined.
    pub skipped_pairs: usize,
    /// Mean over included pairs; absent when no pair qualifies.
    pub mean: Option<f64>,
}

/// Pairwise row fidelity: numeric pairs `1 - |rho_real - rho_synth| / 2`,
/// categorical pairs `1 - TVD(joint) / 2`.
pub fn row_fidelity(real: &TableData, synth: &TableData) -> Result<RowFidelity> {
    check_matched_schemas(real, synth)?;
    let cols = &real.schema.columns;
    if cols.len() < 2 {
        return Err(Error::config("row fidelity needs at least two columns"));
    }
    let mut per_pair = Vec::new();
    let mut excluded = 0usize;
    let mut skipped = 0usize;
    for a in 0..cols.len() {
        for b in a + 1..cols.len() {
            match (cols[a].kind, cols[b].kind) {
                (ColumnKind::Numeric, ColumnKind::Numeric) => {
                    let rho_real =
                        pearson(&real.numeric_column(a)?, &real.numeric_column(b)?);
                    let rho_synth =
                        pearson(&synth.numeric_column(a)?, &synth.numeric_column(b)?);
                    match (rho_real, rho_synth) {
                        (Some(r), Some(s)) => {
                            let score = 1.0 - 0.5 * (r - s).abs();
                            per_pair.push((cols[a].name.clone(), cols[b].name.clone(), score));
                        }
                        _ => skipped += 1,
                    }
                }
                (ColumnKind::Categorical, ColumnKind::Categorical) => {
                    let aa = align_cats(real, synth, a)?;
                    let ab = align_cats(real, synth, b)?;
                    let k = ab.union_size as u32;
                    let joint = |xs: &[u32], ys: &[u32]| -> Vec<u32> {
                        xs.iter().zip(ys).map(|(&x, &y)| x * k + y).collect()
                    };
                    let jr = joint(&aa.real_ids, &ab.real_ids);
                    let js = joint(&aa.synth_ids, &ab.synth_ids);
                    let score =
                        1.0 - 0.5 * tvd(&jr, &js, aa.union_size * ab.union_size)?;
                    per_pair.push((cols[a].name.clone(), cols[b].name.clone(), score));
                }
                _ => excluded += 1,
            }
        }
    }
    let mean = if per_pair.is_empty() {
        None
    } else {
        Some(per_pair.iter().map(|(_, _, s)| s).sum::<f64>() / per_pair.len() as f64)
    };
    Ok(RowFidelity { per_pair, excluded_mixed_pairs: excluded, skipped_pairs: skipped, mean })
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    pub column: ColumnFidelity,
    pub row: RowFidelity,
    /// Aggregate: mean of column and row fidelity means.
    pub omega: f64,
}

pub fn fidelity(real: &TableData, synth: &TableData) -> Result<FidelityReport> {
    let column = column_fidelity(real, synth)?;
    // Single-column tables have no pairs; the aggregate degrades to the
    // column mean.
    let row = if real.schema.columns.len() < 2 {
        RowFidelity {
            per_pair: Vec::new(),
            excluded_mixed_pairs: 0,
            skipped_pairs: 0,
            mean: None,
        }
    } else {
        row_fidelity(real, synth)?
    };
    let omega = match row.mean {
        Some(r) => 0.5 * (column.mean + r),
        None => column.mean,
    };
    Ok(FidelityReport { column, row, omega })
}
