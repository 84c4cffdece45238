//! Coverage: how much of the real data's support the synthetic table spans.
//!
//! Categorical columns score the proportion of real categories that reappear;
//! numeric columns score range overlap, scale-free in the real column's range.

use serde::Serialize;

use crate::data::schema::ColumnKind;
use crate::data::table::TableData;
use crate::error::{Error, Result};
use crate::metrics::align::{align_cats, check_matched_schemas};

#[derive(Debug, Clone, Serialize)]
pub struct ColumnCoverage {
    pub name: String,
    pub score: f64,
    /// Set when the real column's numeric range collapsed to a point, making
    /// the range-overlap formula inapplicable.
    pub degenerate_range: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub per_column: Vec<ColumnCoverage>,
    pub mean: f64,
}

fn numeric_coverage(real: &[f64], synth: &[f64]) -> (f64, bool) {
    let (rmin, rmax) = min_max(real);
    let (smin, smax) = min_max(synth);
    let range = rmax - rmin;
    if range == 0.0 {
        // Degenerate real range: covered iff the value reappears.
        let covered = synth.iter().any(|&v| v == rmin);
        return (if covered { 1.0 } else { 0.0 }, true);
    }
    let tau = (smin - rmin) / range;
    let chi = (rmax - smax) / range;
    let gamma = 1.0 - (tau.max(0.0) + chi.max(0.0));
    (gamma.clamp(0.0, 1.0), false)
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    })
}

pub fn coverage(real: &TableData, synth: &TableData) -> Result<CoverageReport> {
    check_matched_schemas(real, synth)?;
    if real.rows().is_empty() || synth.rows().is_empty() {
        return Err(Error::config("coverage over an empty table"));
    }
    let mut per_column = Vec::new();
    for (c, col) in real.schema.columns.iter().enumerate() {
        let (score, degenerate) = match col.kind {
            ColumnKind::Numeric => {
                numeric_coverage(&real.numeric_column(c)?, &synth.numeric_column(c)?)
            }
            ColumnKind::Categorical => {
                // Count categories observed in the rows, not vocabulary
                // entries: a declared-but-unused category is nothing to cover.
                let a = align_cats(real, synth, c)?;
                let mut real_seen: Vec<u32> = a.real_ids.clone();
                real_seen.sort_unstable();
                real_seen.dedup();
                let hit = real_seen.iter().filter(|id| a.synth_ids.contains(id)).count();
                (hit as f64 / real_seen.len() as f64, false)
            }
        };
        per_column.push(ColumnCoverage { name: col.name.clone(), score, degenerate_range: degenerate });
    }
    let mean = per_column.iter().map(|c| c.score).sum::<f64>() / per_column.len() as f64;
    Ok(CoverageReport { per_column, mean })
}
