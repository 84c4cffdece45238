//! Minimal dense numerical kernel: flat parameter vectors, MLP
//! forward/backward, and the Adam optimizer.

pub mod adam;
pub mod mlp;
pub mod param;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use mlp::{
    mlp_backward, mlp_forward, mlp_forward_cached, time_embedding, Activation, ForwardCache,
    MlpConfig,
};
pub use param::{Layout, LayoutBuilder, ParamVector, Segment};
