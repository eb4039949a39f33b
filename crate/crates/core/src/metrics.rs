//! Convergence diagnostics and the per-run trace recorder.
//!
//! Diagnostics always run on the raw (uncounted) problem, so recording a trace
//! never changes the oracle tallies of a run.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::{l2_norm_sq, Vector};
use crate::oracle::QueryCounts;
use crate::problems::SmoothObjective;
use crate::regularizers::Regularizer;
use crate::solvers::gradient_mapping;

/// Gradient-mapping residual below which a reference optimum counts as verified.
pub const OPTIMUM_RESIDUAL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch: usize,
    pub inner_iter: usize,
    pub wall_ms: f64,
    pub q_inner_val: u64,
    pub q_inner_jac: u64,
    pub q_outer_grad: u64,
    pub objective: f64,
    /// `H(x) − H(x*)`; NaN when no reference optimum was supplied.
    pub gap: f64,
    /// `‖G_η(x)‖²`; NaN when gradient metrics are disabled.
    pub grad_map_sq: f64,
    /// `‖∇f(x) + g‖²` with `g` the min-norm subgradient; NaN when disabled.
    pub composite_grad_sq: f64,
}

impl TraceRecord {
    pub fn queries(&self) -> QueryCounts {
        QueryCounts::new(self.q_inner_val, self.q_inner_jac, self.q_outer_grad)
    }
}

/// `H(x) = f(x) + h(x)`.
pub fn objective_h<O: SmoothObjective + ?Sized>(
    obj: &O,
    h: &Regularizer,
    x: &Vector,
) -> Result<f64> {
    Ok(obj.value(x)? + h.value(x))
}

/// A candidate minimizer of `H` together with its stationarity residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceOptimum {
    pub x: Vector,
    pub objective: f64,
    /// `‖G_η(x)‖` at the step size used for certification.
    pub residual: f64,
    pub verified: bool,
}

impl ReferenceOptimum {
    pub fn certify<O: SmoothObjective + ?Sized>(
        obj: &O,
        h: &Regularizer,
        x: Vector,
        eta: f64,
    ) -> Result<Self> {
        let residual = gradient_mapping(obj, h, &x, eta)?.norm();
        let objective = objective_h(obj, h, &x)?;
        Ok(Self {
            x,
            objective,
            residual,
            verified: residual <= OPTIMUM_RESIDUAL_TOL,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub gap: f64,
    /// False when the reference point failed its stationarity check; the gap
    /// is then only a difference of objective values.
    pub verified: bool,
}

pub fn objective_gap<O: SmoothObjective + ?Sized>(
    obj: &O,
    h: &Regularizer,
    x: &Vector,
    reference: &ReferenceOptimum,
) -> Result<GapReport> {
    if !reference.verified {
        log::warn!(
            "objective gap against an unverified optimum (residual {:.3e})",
            reference.residual
        );
    }
    Ok(GapReport {
        gap: objective_h(obj, h, x)? - reference.objective,
        verified: reference.verified,
    })
}

pub fn composite_grad_sq<O: SmoothObjective + ?Sized>(
    obj: &O,
    h: &Regularizer,
    x: &Vector,
) -> Result<f64> {
    let grad = obj.gradient(x)?;
    let sub = h.min_norm_subgradient(x, &grad)?;
    Ok(l2_norm_sq(&(grad + sub)))
}

pub fn grad_map_sq<O: SmoothObjective + ?Sized>(
    obj: &O,
    h: &Regularizer,
    x: &Vector,
    eta: f64,
) -> Result<f64> {
    Ok(l2_norm_sq(&gradient_mapping(obj, h, x, eta)?))
}

/// Which diagnostics a solver records, and how often.
#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Record every `stride`-th iteration (counted across epochs). The starting
    /// point and the final iterate are always recorded.
    pub stride: usize,
    /// Compute `grad_map_sq` and `composite_grad_sq`. Each costs a full
    /// (uncounted) gradient per record.
    pub gradient_metrics: bool,
    /// Step size for `grad_map_sq`; defaults to the solver's step size.
    pub diag_eta: Option<f64>,
    pub reference: Option<ReferenceOptimum>,
    /// Stop the run once a recorded gap is at or below this value.
    pub stop_gap: Option<f64>,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            gradient_metrics: true,
            diag_eta: None,
            reference: None,
            stop_gap: None,
        }
    }
}

pub(crate) struct Recorder<'a> {
    obj: &'a dyn SmoothObjective,
    h: Regularizer,
    eta: f64,
    opts: &'a TraceOptions,
    start: Instant,
    records: Vec<TraceRecord>,
    last_step: Option<u64>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        obj: &'a dyn SmoothObjective,
        h: Regularizer,
        solver_eta: f64,
        opts: &'a TraceOptions,
    ) -> Self {
        Self {
            obj,
            h,
            eta: opts.diag_eta.unwrap_or(solver_eta),
            opts,
            start: Instant::now(),
            records: Vec::new(),
            last_step: None,
        }
    }

    pub(crate) fn elapsed(&self) -> std::time::Duration {
        self.start.elapsed()
    }

    /// Whether global step `step` falls on the stride.
    pub(crate) fn due(&self, step: u64) -> bool {
        let stride = self.opts.stride.max(1) as u64;
        step.is_multiple_of(stride)
    }

    /// Records the state after global step `step`. Returns true when the
    /// stop-gap threshold has been reached.
    pub(crate) fn record(
        &mut self,
        step: u64,
        epoch: usize,
        inner_iter: usize,
        counts: QueryCounts,
        x: &Vector,
    ) -> Result<bool> {
        if self.last_step == Some(step) {
            return Ok(false);
        }
        self.last_step = Some(step);
        let wall_ms = self.start.elapsed().as_secs_f64() * 1e3;
        let objective = objective_h(self.obj, &self.h, x)?;
        let gap = match &self.opts.reference {
            Some(r) => objective - r.objective,
            None => f64::NAN,
        };
        let (grad_map_sq, composite) = if self.opts.gradient_metrics {
            let grad = self.obj.gradient(x)?;
            let prox = self.h.prox(&(x - &grad * self.eta), self.eta)?;
            let mapping = (x - prox) / self.eta;
            let sub = self.h.min_norm_subgradient(x, &grad)?;
            (l2_norm_sq(&mapping), l2_norm_sq(&(grad + sub)))
        } else {
            (f64::NAN, f64::NAN)
        };
        self.records.push(TraceRecord {
            epoch,
            inner_iter,
            wall_ms,
            q_inner_val: counts.inner_value,
            q_inner_jac: counts.inner_jacobian,
            q_outer_grad: counts.outer_gradient,
            objective,
            gap,
            grad_map_sq,
            composite_grad_sq: composite,
        });
        Ok(matches!(self.opts.stop_gap, Some(t) if gap <= t))
    }

    /// Whether the most recent record has a finite objective.
    pub(crate) fn last_finite(&self) -> bool {
        self.records.last().is_none_or(|r| r.objective.is_finite())
    }

    pub(crate) fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }
}
