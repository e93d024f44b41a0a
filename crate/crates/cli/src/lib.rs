//! Library surface of the floodwatch command-line tool; the binary in
//! `main.rs` is a thin argument-parsing layer over [`pipeline`].

pub mod config;
pub mod pipeline;

pub use config::{ArtifactPaths, PipelineConfig};
