//! Library side of the command-line driver. The binary is a thin wrapper so
//! that integration tests can exercise the same code paths directly.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod pipeline;
pub mod toydata;
