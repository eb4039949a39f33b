//! Variance-reduced estimators of the inner value, the inner Jacobian, and the
//! composite gradient, all anchored at an epoch snapshot.

use crate::error::{domain, Result};
use crate::numerics::{Matrix, Vector};
use crate::problems::{
    check_x, full_inner_jacobian, full_inner_value, mean_outer_gradient, CompositionProblem,
};

/// Full-batch quantities at the epoch reference point `x̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub x_tilde: Vector,
    /// `G(x̃)`.
    pub inner_value: Vector,
    /// `∇G(x̃)`.
    pub inner_jacobian: Matrix,
    /// `∇f(x̃)`.
    pub gradient: Vector,
}

impl Snapshot {
    /// Costs `n2` inner values, `n2` inner Jacobians and `n1` outer gradients.
    pub fn compute<P: CompositionProblem + ?Sized>(p: &P, x_tilde: &Vector) -> Result<Self> {
        let inner_value = full_inner_value(p, x_tilde)?;
        let inner_jacobian = full_inner_jacobian(p, x_tilde)?;
        let outer = mean_outer_gradient(p, &inner_value)?;
        let gradient = inner_jacobian.tr_mul(&outer);
        Ok(Self {
            x_tilde: x_tilde.clone(),
            inner_value,
            inner_jacobian,
            gradient,
        })
    }
}

fn check_indices(indices: &[usize], bound: usize, what: &str) -> Result<()> {
    if indices.is_empty() {
        return domain(format!("{what} index set is empty"));
    }
    if let Some(bad) = indices.iter().find(|&&i| i >= bound) {
        return domain(format!("{what} index {bad} out of range [0, {bound})"));
    }
    Ok(())
}

/// `Ĝ = G(x̃) − (1/A) Σ_{j∈A} (G_j(x̃) − G_j(x))`. Costs `2A` inner values.
pub fn estimate_inner_value<P: CompositionProblem + ?Sized>(
    snap: &Snapshot,
    p: &P,
    x: &Vector,
    a_indices: &[usize],
) -> Result<Vector> {
    check_x(p, x)?;
    check_indices(a_indices, p.n_inner(), "inner-value")?;
    let mut correction = Vector::zeros(p.dim_y());
    for &j in a_indices {
        correction += p.inner_value(j, &snap.x_tilde) - p.inner_value(j, x);
    }
    Ok(&snap.inner_value - correction / a_indices.len() as f64)
}

/// `∇Ĝ = ∇G(x̃) − (1/B) Σ_{j∈B} (∇G_j(x̃) − ∇G_j(x))`. Costs `2B` inner Jacobians.
pub fn estimate_inner_jacobian<P: CompositionProblem + ?Sized>(
    snap: &Snapshot,
    p: &P,
    x: &Vector,
    b_indices: &[usize],
) -> Result<Matrix> {
    check_x(p, x)?;
    check_indices(b_indices, p.n_inner(), "inner-Jacobian")?;
    let mut correction = Matrix::zeros(p.dim_y(), p.dim_x());
    for &j in b_indices {
        correction += p.inner_jacobian(j, &snap.x_tilde) - p.inner_jacobian(j, x);
    }
    Ok(&snap.inner_jacobian - correction / b_indices.len() as f64)
}

/// `v = (1/b1) Σ_{i∈I} (∇Ĝᵀ ∇F_i(Ĝ) − ∇G(x̃)ᵀ ∇F_i(G(x̃))) + ∇f(x̃)`.
/// Costs `2 b1` outer gradients.
///
/// The estimate is biased: `E[v] ≠ ∇f(x)` in general, because `∇F_i` is
/// evaluated at the random point `Ĝ`.
pub fn estimate_gradient_vt<P: CompositionProblem + ?Sized>(
    snap: &Snapshot,
    p: &P,
    g_hat: &Vector,
    j_hat: &Matrix,
    i_indices: &[usize],
) -> Result<Vector> {
    check_indices(i_indices, p.n_outer(), "outer")?;
    if g_hat.len() != p.dim_y() || j_hat.shape() != (p.dim_y(), p.dim_x()) {
        return domain("estimated inner value or Jacobian has the wrong shape");
    }
    let mut at_estimate = Vector::zeros(p.dim_y());
    let mut at_snapshot = Vector::zeros(p.dim_y());
    for &i in i_indices {
        at_estimate += p.outer_gradient(i, g_hat);
        at_snapshot += p.outer_gradient(i, &snap.inner_value);
    }
    let correction = j_hat.tr_mul(&at_estimate) - snap.inner_jacobian.tr_mul(&at_snapshot);
    Ok(correction / i_indices.len() as f64 + &snap.gradient)
}
