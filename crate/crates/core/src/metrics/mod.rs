//! Evaluation metrics for synthetic tabular data: fidelity, utility,
//! coverage, privacy, and the cross-client heatmap grid.

pub mod align;
pub mod classifiers;
pub mod coverage;
pub mod fidelity;
pub mod heatmap;
pub mod privacy;
pub mod report;
pub mod utility;

pub use classifiers::{ClassifierKind, DEFAULT_CLASSIFIERS};
pub use coverage::{coverage, CoverageReport};
pub use fidelity::{column_fidelity, fidelity, kss, row_fidelity, tvd, FidelityReport};
pub use heatmap::{heatmap_eval, HeatmapReport, Matrix};
pub use privacy::{privacy_dcr, PrivacyReport, DEFAULT_MAX_PAIRS};
pub use report::{evaluate, MetricReport};
pub use utility::{utility, utility_default, UtilityReport};
