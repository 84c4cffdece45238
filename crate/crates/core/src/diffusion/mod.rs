//! Gaussian diffusion core: noise schedule, forward perturbation, training
//! loss, and reverse ancestral sampling.

pub mod model;
pub mod schedule;

pub use model::{synthesize_table, DiffusionModel, TrainingSet};
pub use schedule::{forward_sample, NoiseSchedule};
