//! Online constrained k-means.
//!
//! Streaming cluster assignment under per-cluster minimum-size constraints,
//! driven by dual prices, together with a pseudo-label discrimination loop
//! that trains a small linear encoder against the clustering, an offline
//! min-cost-flow oracle for the same assignment problem, and the usual
//! clustering scores.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assign;
pub mod centers;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod discriminate;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod metrics;
pub mod oracle;
pub mod pipeline;
pub mod synth;
pub mod vector;

pub use config::{CenterMode, CokeConfig, DualMode};
pub use dataset::Dataset;
pub use error::{CokeError, Result};
pub use vector::{normalize, UnitVector};
