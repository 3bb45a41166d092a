//! Spatial placement from natural-language instructions.
//!
//! Instructions are parsed into (reference, relation) tuples, references are
//! grounded to scene objects with a pair of residual adapters over frozen
//! embeddings, and each grounded pair becomes a truncated Gaussian over the
//! table from which a placement is sampled.

pub mod adapter;
pub mod embeddings;
pub mod error;
pub mod geometry;
pub mod grounding;
pub mod harness;
pub mod parser;
pub mod pipeline;
pub mod placement;
pub mod raster;
pub mod relation;
pub mod scene;
pub mod seed;

pub use error::{Error, Result};
