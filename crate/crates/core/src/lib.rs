//! Variable selection for large tabular tuning datasets.
//!
//! The main entry point is [`pipeline::run_pipeline`], which loads (or
//! generates) a dataset, trains a masked regression network, ranks the
//! candidate variables by their learned mask weights, and optionally
//! cross-checks the chosen subset against an exhaustive least-squares
//! search.

pub mod error;
pub mod ingest;
pub mod linalg;
pub mod mask;
pub mod nn;
pub mod pipeline;
pub mod plot;
pub mod scaling;
pub mod selection;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
