//! Distributed online primal-dual mirror descent with time-varying coupled
//! inequality constraints.
//!
//! Agents on a time-varying network each pick a point in their own set, pay a
//! private convex cost plus a regularizer, and jointly keep a sum of
//! constraint functions nonpositive. Each round an agent mixes its
//! neighbours' dual variables, takes a composite mirror-descent step, updates
//! its dual variable and pushes the result through a dynamic mapping that
//! predicts where the optimum moves next.

// `!(a <= b)` is used on purpose so that NaN fails a check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod network;
pub mod problem;
pub mod algorithm;
pub mod metrics;
pub mod experiment;

pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentError};
pub use geometry::{BregmanGeometry, Domain, Mirror, RegularizerSpec};
pub use network::{check_assumption1, generate_graph_sequence, CommGraphSequence};
pub use problem::{OnlineProblem, Subgradients, TrackingInstance, TrackingParams};
