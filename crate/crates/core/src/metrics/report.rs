//! Combined evaluation report over the full metric suite.

use serde::Serialize;

use crate::data::table::TableData;
use crate::error::Result;
use crate::metrics::coverage::{coverage, CoverageReport};
use crate::metrics::fidelity::{fidelity, FidelityReport};
use crate::metrics::privacy::{privacy_dcr, PrivacyReport};
use crate::metrics::utility::{utility_default, UtilityReport};

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub fidelity: FidelityReport,
    /// Absent when utility evaluation was not requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilityReport>,
    pub coverage: CoverageReport,
    pub privacy: PrivacyReport,
}

/// Runs the full suite of real-vs-synthetic scores. `label_column = None`
/// skips utility (it needs a classification target).
pub fn evaluate(
    real: &TableData,
    synth: &TableData,
    label_column: Option<&str>,
    dcr_max_pairs: usize,
) -> Result<MetricReport> {
    Ok(MetricReport {
        fidelity: fidelity(real, synth)?,
        utility: label_column
            .map(|label| utility_default(synth, real, label))
            .transpose()?,
        coverage: coverage(real, synth)?,
        privacy: privacy_dcr(real, synth, dcr_max_pairs)?,
    })
}
