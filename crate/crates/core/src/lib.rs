//! Neural signed distance functions trained with a shape curriculum.
//!
//! The crate covers the whole pipeline: ground-truth geometry and signed
//! distance oracles ([`geometry`]), near-surface training samples
//! ([`dataset`]), the auto-decoder MLP with progressive growth ([`model`]),
//! the tolerance/hard-sample curriculum and epoch loop ([`training`]),
//! test-time latent fitting ([`inference`]), iso-surface extraction
//! ([`extraction`]) and point-set metrics ([`metrics`]).

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod extraction;
pub mod geometry;
pub mod inference;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod training;

pub use error::{Result, SdfError};
pub use geometry::Point3;
