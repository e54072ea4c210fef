//! Library surface of the `gistrag` binary: configuration, the index /
//! retrieve / eval pipeline, and the serialized output record shapes.
//!
//! The binary in `main.rs` is a thin argument-parsing shell over these
//! modules; integration tests drive the same functions in-process.

pub mod config;
pub mod pipeline;
pub mod records;
