//! Variance-reduced stochastic compositional proximal gradient methods for
//!
//! ```text
//! min_x  (1/n1) Σ_i F_i((1/n2) Σ_j G_j(x)) + h(x)
//! ```
//!
//! with baselines, a sampling-oracle query model, problem generators and
//! convergence diagnostics.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod oracle;
pub mod problems;
pub mod regularizers;
pub mod solvers;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use metrics::{ReferenceOptimum, TraceOptions, TraceRecord};
pub use numerics::{Matrix, RngStream, Vector};
pub use oracle::{counted, Counted, QueryCounter, QueryCounts};
pub use problems::{
    AnyProblem, CompositionProblem, FiniteSumProblem, LassoProblem, LinQuadProblem,
    PolicyEvalProblem, PortfolioProblem, ProblemData, SmoothObjective,
};
pub use regularizers::Regularizer;
pub use solvers::{
    prox_full_gradient, prox_svrg, scpg_baseline, vrsc_pg, Budget, ProblemConstants,
    ProxGradConfig, ProxSvrgConfig, RunOptions, ScpgConfig, SolveResult, StopReason, VrscpgConfig,
};
