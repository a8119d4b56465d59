//! Event-driven simulators for the interchange process on path graphs and
//! the machinery needed to check its limit behaviour numerically.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`]: keyed, counter-based random streams and Poisson clocks.
//! * [`path`]: piecewise-constant càdlàg trajectories.
//! * [`walks`]: continuous-time simple random walks and exact oracles.
//! * [`interchange`]: the interchange process on `P_n`, covering maps and
//!   tracked-particle simulation on `Z`.
//! * [`coupling`]: the coupled triple `(S1, S2, S3)` and its experiments.
//! * [`rbm`]: reflected Brownian motion on `[0, 1]` (the reference model).
//! * [`ssep`]: symmetric simple exclusion driven by the interchange log.
//! * [`stats`]: distances, hypothesis tests and the tightness experiment.
//! * [`verdict`]: pass/fail records shared by the CLI and the test suites.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod error;
pub mod interchange;
pub mod parallel;
pub mod path;
pub mod rbm;
pub mod rng;
pub mod ssep;
pub mod stats;
pub mod verdict;
pub mod walks;

pub use error::{Error, Result};
pub use interchange::{fold_lattice, fold_real, PathGraphConfig, PermutationTrajectory};
pub use path::CadlagPath;
pub use rng::{EventStream, StreamFamily, StreamKey};
pub use stats::{MeanEstimate, PointMeasure};
pub use verdict::Verdict;

/// Version string recorded in run manifests; bump when a sampler changes the
/// streams it consumes.
pub const ARTIFACT_VERSION: &str = concat!("permuton-", env!("CARGO_PKG_VERSION"));
