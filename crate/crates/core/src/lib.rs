//! Degree-fair node classification.
//!
//! A small, dependency-light engine for training graph encoders whose
//! predictive quality does not depend on node degree, plus the metrics used
//! to audit that property:
//!
//! - [`graph`]: sparse undirected graphs, normalized adjacency, centrality,
//!   degree/centrality group partitions, a power-law generator and splits.
//! - [`autodiff`]: a tape-based reverse-mode engine over dense matrices.
//! - [`model`]: GCN encoders with PairNorm, predictor, degree discriminator,
//!   classifier and the moving-average target update.
//! - [`objectives`]: contrastive, adversarial and group-balanced losses.
//! - [`train`]: the alternating discriminator / encoder training loop.
//! - [`metrics`]: accuracy, parity gaps and accuracy-distribution gaps.

pub mod autodiff;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod objectives;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
