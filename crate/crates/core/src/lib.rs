//! Federated diffusion-based synthesis of mixed-type tabular data, with a
//! fidelity/utility/coverage/privacy evaluation suite.
//!
//! The crate is organized around five subsystems:
//!
//! - [`nn`]: flat parameter vectors, a dense noise-predictor MLP with manual
//!   backpropagation, and Adam.
//! - [`data`]: tabular schema and CSV ingestion, quantile-normal transforms
//!   for numeric columns, 2-D category embeddings, and the non-iid
//!   dominant-category partitioner.
//! - [`diffusion`]: linear noise schedule, forward perturbation, training
//!   loss, and ancestral sampling.
//! - [`federation`]: synchronous rounds of local training with
//!   sample-size-weighted parameter averaging.
//! - [`metrics`]: column/row fidelity, classifier-based utility, coverage,
//!   and distance-to-closest-record privacy.

pub mod data;
pub mod diffusion;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod nn;

pub use error::{Error, Result};

/// Re-export of the array crate used in public signatures.
pub use ndarray;
