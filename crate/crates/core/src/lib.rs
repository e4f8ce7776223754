//! Clustering by transitive propagation.
//!
//! Given a symmetric matrix of pairwise log-likelihood ratios
//! `ΔS_ij = log f1(i,j) - log f0(i,j)` (positive favours "different clusters"),
//! the solver searches for the edge colouring `H` that maximizes
//! `Σ H_ij ΔS_ij` subject to `H` encoding a valid partition. It does so by
//! damped max-sum message passing on a factor graph with one hard
//! transitivity factor per triple of points, at `O(N³)` time per sweep and
//! `O(N³)` memory.
//!
//! Besides the solver the crate carries the pieces needed to check and use it:
//!
//! * [`types`]: score matrices, hypothesis matrices, partitions, the objective.
//! * [`oracle`]: exhaustive search over set partitions for small `N`.
//! * [`models`]: the binary-read likelihood model and score-matrix ingestion.
//! * [`simulator`]: seeded template/read datasets and error accounting.
//! * [`prior`]: the partition function of the blue-edge prior family and its
//!   moments.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too, and index
// loops read more naturally than iterators over symmetric matrices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod models;
pub mod oracle;
pub mod prior;
pub mod simulator;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use models::{BinaryReadModel, Read, ReadSet};
pub use solver::{no_prior_solution, solve, MessageTensor, SolverConfig, SolverResult};
pub use types::{HypothesisMatrix, Objective, Partition, ScoreMatrix, TripleVerdict};
