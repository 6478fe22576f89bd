//! Safety gates for self-improving controllers, at desk scale.
//!
//! The crate has two halves. The *system* half simulates a liquid
//! time-constant (LTC) controller steering a 2D point mass through
//! obstacle fields, with a deterministic ground-truth safety oracle over a
//! fixed operating domain. The *gate* half implements two families of
//! safety gates over that system:
//!
//! - classification gates (logistic regression, k-NN, random forest,
//!   linear SVM, Gaussian Bayes, and MLPs over three feature maps), which
//!   demonstrably fail the dual conditions — bounded cumulative
//!   false-accept risk with unbounded accepted safe improvement — and
//! - the Lipschitz ball verifier, a pure `O(d)` norm check around a
//!   verified center, which achieves zero false accepts and supports
//!   directed in-ball improvement and ball chaining.
//!
//! [`theory`] provides the analytic kit: high-precision normal
//! CDF/quantile, the Neyman-Pearson optimal test, Hölder per-step bounds,
//! and exact finite-horizon utility ceilings.

// Numeric kernels index by position on purpose, comparisons are written
// to reject NaN, and distribution constants keep their published digits.
#![allow(
    clippy::excessive_precision,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::manual_is_multiple_of,
    clippy::type_complexity
)]

pub mod ball;
pub mod env2d;
pub mod gates;
pub mod linalg;
pub mod lipschitz;
pub mod oracle;
pub mod params;
pub mod rng;
pub mod theory;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("rollout produced a non-finite state at step {step}")]
    Rollout { step: usize },

    #[error("scenario generation failed: {0}")]
    Generation(String),

    #[error("controller search found no positive-margin candidate among {candidates}")]
    SearchFailed { candidates: usize },

    #[error("parameter dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite Jacobian norm at step {step}")]
    NonFiniteJacobian { step: usize },

    #[error("ball construction refused: margin {margin} is not positive")]
    NonPositiveMargin { margin: f64 },

    #[error("gate touched the oracle during a decision at step {step}")]
    GateTouchedOracle { step: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
