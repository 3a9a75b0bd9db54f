//! Multi-treatment instrumental-variables estimation for capacity-constrained
//! allocation systems.
//!
//! The crate is organised in five layers:
//!
//! - [`estimator`]: first stage, reduced form, just-identified 2SLS, Wald
//!   ratios, cluster-robust and cluster-bootstrap inference.
//! - [`cascade`]: the linear algebra that turns a first-stage matrix and a
//!   reduced form into total policy effects (direct solve and Neumann
//!   rounds), plus heterogeneity and aggregation helpers.
//! - [`mechanism`]: a deferred-acceptance admission simulator with lottery
//!   tie-breaking, pivotal groups, luck instruments, and a brute-force
//!   "add one slot" oracle. Also a fixed-supply linear market.
//! - [`synth`]: synthetic populations with tunable heterogeneity and
//!   substitution.
//! - [`io`]: CSV/JSON formats, embedded reference tables, and the command
//!   implementations behind the `cascade-iv` binary.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod data;
pub mod error;
pub mod estimator;
pub mod io;
pub mod linalg;
pub mod mechanism;
pub mod seed;
pub mod synth;

pub use data::Dataset;
pub use error::{Error, Result, Warning};
