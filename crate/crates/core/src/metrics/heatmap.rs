//! Cross-client evaluation grid: every model's synthetic output scored
//! against every client's data subset.

use std::io::Write;

use serde::Serialize;

use crate::data::table::TableData;
use crate::error::Result;
use crate::metrics::coverage::coverage;
use crate::metrics::fidelity::fidelity;
use crate::metrics::privacy::{privacy_dcr, DEFAULT_MAX_PAIRS};

#[derive(Debug, Clone, Serialize)]
pub struct Matrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Row-major, `row_labels.len() x col_labels.len()`.
    pub values: Vec<Vec<f64>>,
}

impl Matrix {
    /// Writes the matrix as CSV with a leading label column.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["model".to_string()];
        header.extend(self.col_labels.iter().cloned());
        out.write_record(&header)?;
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(crate::error::Error::Io)?;
        Ok(())
    }

    /// Index of the maximum entry in row `r`.
    pub fn row_argmax(&self, r: usize) -> usize {
        let row = &self.values[r];
        let mut best = 0;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        best
    }

    /// Population variance of row `r`.
    pub fn row_variance(&self, r: usize) -> f64 {
        let row = &self.values[r];
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapReport {
    pub fidelity: Matrix,
    pub coverage: Matrix,
    pub privacy: Matrix,
}

/// Scores each model's synthetic table against each data subset. `models`
/// pairs a display label with generated rows; `subsets` pairs a label with
/// the real rows held by that client.
pub fn heatmap_eval(
    models: &[(String, TableData)],
    subsets: &[(String, TableData)],
) -> Result<HeatmapReport> {
    let row_labels: Vec<String> = models.iter().map(|(l, _)| l.clone()).collect();
    let col_labels: Vec<String> = subsets.iter().map(|(l, _)| l.clone()).collect();
    let blank = || Matrix {
        row_labels: row_labels.clone(),
        col_labels: col_labels.clone(),
        values: vec![vec![0.0; col_labels.len()]; row_labels.len()],
    };
    let mut report =
        HeatmapReport { fidelity: blank(), coverage: blank(), privacy: blank() };
    for (r, (_, synth)) in models.iter().enumerate() {
        for (c, (_, real)) in subsets.iter().enumerate() {
            report.fidelity.values[r][c] = fidelity(real, synth)?.omega;
            report.coverage.values[r][c] = coverage(real, synth)?.mean;
            report.privacy.values[r][c] = privacy_dcr(real, synth, DEFAULT_MAX_PAIRS)?.median_dcr;
        }
    }
    Ok(report)
}
