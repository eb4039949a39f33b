//! Solvers for composite problems `min_x f(x) + h(x)`.
//!
//! Every solver wraps the problem it is given in a query counter, draws all
//! randomness from one [`RngStream`](crate::numerics::RngStream) seeded by its
//! configuration, and records diagnostics on the raw problem.

mod estimators;
mod params;
mod prox_svrg;
mod reference;
mod scpg;
mod vrsc_pg;

pub use estimators::{
    estimate_gradient_vt, estimate_inner_jacobian, estimate_inner_value, Snapshot,
};
pub use params::{
    linear_rate_factor, sublinear_rate_condition, suggest_params_general,
    suggest_params_strongly_convex, GeneralParams, ProblemConstants, StronglyConvexParams,
};
pub use prox_svrg::{prox_svrg, ProxSvrgConfig};
pub use reference::{
    gradient_mapping, prox_full_gradient, proximal_gradient_descent, solve_reference,
    ProxGradConfig,
};
pub use scpg::{scpg_baseline, ScpgConfig};
pub use vrsc_pg::{vrsc_pg, IndexSampling, VrscpgConfig};

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Recorder, TraceOptions, TraceRecord};
use crate::numerics::{all_finite, Vector};
use crate::oracle::QueryCounts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Ran the configured number of iterations.
    Completed,
    /// Step length fell below the tolerance.
    Converged,
    QueryBudget,
    WallBudget,
    /// A recorded gap reached the configured threshold.
    GapReached,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub x_final: Vector,
    pub trace: Vec<TraceRecord>,
    pub counts: QueryCounts,
    pub stop: StopReason,
    /// Every iterate, starting point first; empty unless requested.
    #[serde(skip)]
    pub iterates: Vec<Vector>,
}

/// Resource limits for a run. A step is only taken if its full query cost
/// fits in the remaining query budget.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Budget {
    pub max_queries: Option<u64>,
    pub max_wall: Option<Duration>,
}

impl Budget {
    pub fn queries(max: u64) -> Self {
        Self {
            max_queries: Some(max),
            max_wall: None,
        }
    }

    fn check(&self, spent: QueryCounts, next_cost: u64, elapsed: Duration) -> Option<StopReason> {
        if let Some(max) = self.max_queries {
            if spent.total() + next_cost > max {
                return Some(StopReason::QueryBudget);
            }
        }
        if let Some(max) = self.max_wall {
            if elapsed >= max {
                return Some(StopReason::WallBudget);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Starting point; the origin when absent.
    pub x0: Option<Vector>,
    pub trace: TraceOptions,
    pub budget: Budget,
    pub record_iterates: bool,
}

impl RunOptions {
    fn start(&self, dim: usize) -> Result<Vector> {
        match &self.x0 {
            Some(x) if x.len() != dim => Err(Error::Domain(format!(
                "starting point has length {}, problem expects {dim}",
                x.len()
            ))),
            Some(x) => Ok(x.clone()),
            None => Ok(Vector::zeros(dim)),
        }
    }
}

pub(crate) enum Step {
    Continue,
    GapReached,
    Diverged,
}

/// Shared bookkeeping of an iterative run: trace, iterates, stop checks.
pub(crate) struct RunState<'a> {
    recorder: Recorder<'a>,
    opts: &'a RunOptions,
    iterates: Vec<Vector>,
    step: u64,
}

impl<'a> RunState<'a> {
    pub(crate) fn new(
        recorder: Recorder<'a>,
        opts: &'a RunOptions,
        x0: &Vector,
        counts: QueryCounts,
    ) -> Result<(Self, bool)> {
        let mut state = Self {
            recorder,
            opts,
            iterates: Vec::new(),
            step: 0,
        };
        if opts.record_iterates {
            state.iterates.push(x0.clone());
        }
        let hit = state.recorder.record(0, 0, 0, counts, x0)?;
        Ok((state, hit))
    }

    pub(crate) fn budget_stop(&self, spent: QueryCounts, next_cost: u64) -> Option<StopReason> {
        self.opts
            .budget
            .check(spent, next_cost, self.recorder.elapsed())
    }

    /// Registers a completed step. A recorded objective that overflowed
    /// counts as divergence even when the iterate itself is finite.
    pub(crate) fn step(
        &mut self,
        epoch: usize,
        inner_iter: usize,
        counts: QueryCounts,
        x: &Vector,
    ) -> Result<Step> {
        self.step += 1;
        if self.opts.record_iterates {
            self.iterates.push(x.clone());
        }
        if !self.recorder.due(self.step) {
            return Ok(Step::Continue);
        }
        let hit = self
            .recorder
            .record(self.step, epoch, inner_iter, counts, x)?;
        Ok(if !self.recorder.last_finite() {
            Step::Diverged
        } else if hit {
            Step::GapReached
        } else {
            Step::Continue
        })
    }

    pub(crate) fn diverged(
        self,
        epoch: usize,
        inner_iter: usize,
        last_finite: Vector,
        counts: QueryCounts,
    ) -> Error {
        let partial = SolveResult {
            x_final: last_finite,
            trace: self.recorder.into_records(),
            counts,
            stop: StopReason::Completed,
            iterates: self.iterates,
        };
        Error::Diverged {
            epoch,
            inner_iter,
            partial: Box::new(partial),
        }
    }

    pub(crate) fn finish(
        mut self,
        epoch: usize,
        inner_iter: usize,
        x: Vector,
        counts: QueryCounts,
        stop: StopReason,
    ) -> Result<SolveResult> {
        self.recorder
            .record(self.step, epoch, inner_iter, counts, &x)?;
        Ok(SolveResult {
            x_final: x,
            trace: self.recorder.into_records(),
            counts,
            stop,
            iterates: self.iterates,
        })
    }
}

pub(crate) fn check_finite(x: &Vector) -> bool {
    all_finite(x)
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

pub(crate) fn at_least_one(name: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be at least 1")))
    }
}
