//! Sampling-oracle accounting.
//!
//! One oracle query is one of: an inner value `G_j(x)`, an inner Jacobian
//! `∇G_j(x)`, or an outer gradient `∇F_i(y)`. Outer *values* are not
//! queries; they only feed diagnostics.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::numerics::{Matrix, Vector};
use crate::problems::{CompositionProblem, FiniteSumProblem};

/// Snapshot of the three query tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounts {
    pub inner_value: u64,
    pub inner_jacobian: u64,
    pub outer_gradient: u64,
}

impl QueryCounts {
    pub const fn new(inner_value: u64, inner_jacobian: u64, outer_gradient: u64) -> Self {
        Self {
            inner_value,
            inner_jacobian,
            outer_gradient,
        }
    }

    pub fn total(&self) -> u64 {
        self.inner_value + self.inner_jacobian + self.outer_gradient
    }
}

impl std::ops::Add for QueryCounts {
    type Output = QueryCounts;
    fn add(self, rhs: Self) -> Self {
        QueryCounts::new(
            self.inner_value + rhs.inner_value,
            self.inner_jacobian + rhs.inner_jacobian,
            self.outer_gradient + rhs.outer_gradient,
        )
    }
}

impl std::ops::Mul<u64> for QueryCounts {
    type Output = QueryCounts;
    fn mul(self, k: u64) -> Self {
        QueryCounts::new(
            self.inner_value * k,
            self.inner_jacobian * k,
            self.outer_gradient * k,
        )
    }
}

/// Shared, monotone query tallies.
#[derive(Debug, Default)]
pub struct QueryCounter {
    inner_value: AtomicU64,
    inner_jacobian: AtomicU64,
    outer_gradient: AtomicU64,
}

impl QueryCounter {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn snapshot(&self) -> QueryCounts {
        QueryCounts::new(
            self.inner_value.load(Ordering::Relaxed),
            self.inner_jacobian.load(Ordering::Relaxed),
            self.outer_gradient.load(Ordering::Relaxed),
        )
    }

    pub fn total(&self) -> u64 {
        self.snapshot().total()
    }

    fn bump(slot: &AtomicU64) {
        slot.fetch_add(1, Ordering::Relaxed);
    }
}

/// Delegating wrapper that tallies every oracle query.
pub struct Counted<P> {
    inner: P,
    counter: Arc<QueryCounter>,
}

impl<P> Counted<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            counter: QueryCounter::new(),
        }
    }

    pub fn with_counter(inner: P, counter: Arc<QueryCounter>) -> Self {
        Self { inner, counter }
    }

    pub fn counter(&self) -> &Arc<QueryCounter> {
        &self.counter
    }

    pub fn counts(&self) -> QueryCounts {
        self.counter.snapshot()
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

/// Wraps a problem in a counting proxy and returns it with its counter handle.
pub fn counted<P: CompositionProblem>(problem: P) -> (Counted<P>, Arc<QueryCounter>) {
    let wrapped = Counted::new(problem);
    let handle = Arc::clone(&wrapped.counter);
    (wrapped, handle)
}

impl<P: CompositionProblem> CompositionProblem for Counted<P> {
    fn n_outer(&self) -> usize {
        self.inner.n_outer()
    }
    fn n_inner(&self) -> usize {
        self.inner.n_inner()
    }
    fn dim_x(&self) -> usize {
        self.inner.dim_x()
    }
    fn dim_y(&self) -> usize {
        self.inner.dim_y()
    }
    fn inner_value(&self, j: usize, x: &Vector) -> Vector {
        QueryCounter::bump(&self.counter.inner_value);
        self.inner.inner_value(j, x)
    }
    fn inner_jacobian(&self, j: usize, x: &Vector) -> Matrix {
        QueryCounter::bump(&self.counter.inner_jacobian);
        self.inner.inner_jacobian(j, x)
    }
    fn outer_value(&self, i: usize, y: &Vector) -> f64 {
        self.inner.outer_value(i, y)
    }
    fn outer_gradient(&self, i: usize, y: &Vector) -> Vector {
        QueryCounter::bump(&self.counter.outer_gradient);
        self.inner.outer_gradient(i, y)
    }
}

/// For a plain finite sum, a component gradient `∇f_i(x)` is a composition
/// with the identity inner map, so it is tallied as an outer-gradient query.
impl<P: FiniteSumProblem> FiniteSumProblem for Counted<P> {
    fn n_components(&self) -> usize {
        self.inner.n_components()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        self.inner.component_value(i, x)
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        QueryCounter::bump(&self.counter.outer_gradient);
        self.inner.component_gradient(i, x)
    }
}

/// Queries of one full chain-rule gradient: `(n2, n2, n1)`.
pub fn full_gradient_cost(n1: usize, n2: usize) -> QueryCounts {
    QueryCounts::new(n2 as u64, n2 as u64, n1 as u64)
}

/// Queries of one VRSC-PG inner iteration: `(2A, 2B, 2b1)`.
pub fn vrsc_pg_inner_cost(a: usize, b: usize, b1: usize) -> QueryCounts {
    QueryCounts::new(2 * a as u64, 2 * b as u64, 2 * b1 as u64)
}

/// Per-kind queries of a full VRSC-PG run.
pub fn vrsc_pg_cost_by_kind(
    n1: usize,
    n2: usize,
    m: usize,
    a: usize,
    b: usize,
    b1: usize,
    epochs: usize,
) -> QueryCounts {
    (full_gradient_cost(n1, n2) + vrsc_pg_inner_cost(a, b, b1) * m as u64) * epochs as u64
}

/// Total queries of a full VRSC-PG run: `S · (n1 + 2 n2 + m (2A + 2B + 2 b1))`.
pub fn vrsc_pg_cost(
    n1: usize,
    n2: usize,
    m: usize,
    a: usize,
    b: usize,
    b1: usize,
    epochs: usize,
) -> u64 {
    vrsc_pg_cost_by_kind(n1, n2, m, a, b, b1, epochs).total()
}

/// SCGD-style baseline: one of each kind per iteration.
pub fn scpg_cost(iters: usize) -> QueryCounts {
    QueryCounts::new(iters as u64, iters as u64, iters as u64)
}

/// Proximal SVRG: `n` component gradients per epoch plus two per inner step.
pub fn prox_svrg_cost(n: usize, m: usize, epochs: usize) -> QueryCounts {
    QueryCounts::new(0, 0, ((n + 2 * m) * epochs) as u64)
}

/// Deterministic proximal gradient: one full gradient per iteration.
pub fn prox_full_gradient_cost(n1: usize, n2: usize, gradient_evaluations: usize) -> QueryCounts {
    full_gradient_cost(n1, n2) * gradient_evaluations as u64
}
