//! Finite-sum composition problems.
//!
//! A [`CompositionProblem`] describes
//!
//! ```text
//! f(x) = (1/n1) Σ_i F_i( (1/n2) Σ_j G_j(x) )
//! ```
//!
//! through per-index queries of the inner maps `G_j : R^N → R^M` and the outer
//! functions `F_i : R^M → R`. The free functions in this module assemble the
//! full-batch quantities from those queries; each one documents how many
//! queries of each kind it issues.

mod finite_sum;
mod generators;
mod io;
mod linquad;
mod policy_eval;
mod portfolio;

pub use finite_sum::{FiniteSumObjective, FiniteSumProblem, LassoProblem};
pub use generators::{
    gaussian_covariance, gen_gaussian_rewards, gen_lasso, gen_linquad, gen_mdp, gen_mdp_detailed,
    MdpSample, MDP_SHIFT,
};
pub use io::{load_problem, save_problem, AnyProblem, ProblemData, ProblemFile};
pub use linquad::LinQuadProblem;
pub use policy_eval::{PolicyEvalProblem, DEFAULT_GAMMA};
pub use portfolio::PortfolioProblem;

use crate::error::{domain, Result};
use crate::numerics::{Matrix, Vector};

pub trait CompositionProblem: Send + Sync {
    /// Number of outer components `F_i`.
    fn n_outer(&self) -> usize;
    /// Number of inner components `G_j`.
    fn n_inner(&self) -> usize;
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;

    fn inner_value(&self, j: usize, x: &Vector) -> Vector;
    /// `∇G_j(x)`, an `M × N` matrix.
    fn inner_jacobian(&self, j: usize, x: &Vector) -> Matrix;
    fn outer_value(&self, i: usize, y: &Vector) -> f64;
    fn outer_gradient(&self, i: usize, y: &Vector) -> Vector;
}

impl<P: CompositionProblem + ?Sized> CompositionProblem for &P {
    fn n_outer(&self) -> usize {
        (**self).n_outer()
    }
    fn n_inner(&self) -> usize {
        (**self).n_inner()
    }
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_y(&self) -> usize {
        (**self).dim_y()
    }
    fn inner_value(&self, j: usize, x: &Vector) -> Vector {
        (**self).inner_value(j, x)
    }
    fn inner_jacobian(&self, j: usize, x: &Vector) -> Matrix {
        (**self).inner_jacobian(j, x)
    }
    fn outer_value(&self, i: usize, y: &Vector) -> f64 {
        (**self).outer_value(i, y)
    }
    fn outer_gradient(&self, i: usize, y: &Vector) -> Vector {
        (**self).outer_gradient(i, y)
    }
}

impl<P: CompositionProblem + ?Sized> CompositionProblem for Box<P> {
    fn n_outer(&self) -> usize {
        (**self).n_outer()
    }
    fn n_inner(&self) -> usize {
        (**self).n_inner()
    }
    fn dim_x(&self) -> usize {
        (**self).dim_x()
    }
    fn dim_y(&self) -> usize {
        (**self).dim_y()
    }
    fn inner_value(&self, j: usize, x: &Vector) -> Vector {
        (**self).inner_value(j, x)
    }
    fn inner_jacobian(&self, j: usize, x: &Vector) -> Matrix {
        (**self).inner_jacobian(j, x)
    }
    fn outer_value(&self, i: usize, y: &Vector) -> f64 {
        (**self).outer_value(i, y)
    }
    fn outer_gradient(&self, i: usize, y: &Vector) -> Vector {
        (**self).outer_gradient(i, y)
    }
}

pub(crate) fn check_x<P: CompositionProblem + ?Sized>(p: &P, x: &Vector) -> Result<()> {
    if x.len() != p.dim_x() {
        return domain(format!(
            "decision vector has length {}, problem expects {}",
            x.len(),
            p.dim_x()
        ));
    }
    Ok(())
}

pub(crate) fn check_y<P: CompositionProblem + ?Sized>(p: &P, y: &Vector) -> Result<()> {
    if y.len() != p.dim_y() {
        return domain(format!(
            "inner output has length {}, problem expects {}",
            y.len(),
            p.dim_y()
        ));
    }
    Ok(())
}

/// `G(x) = (1/n2) Σ_j G_j(x)`. Issues `n2` inner-value queries.
pub fn full_inner_value<P: CompositionProblem + ?Sized>(p: &P, x: &Vector) -> Result<Vector> {
    check_x(p, x)?;
    let mut acc = Vector::zeros(p.dim_y());
    for j in 0..p.n_inner() {
        acc += p.inner_value(j, x);
    }
    Ok(acc / p.n_inner() as f64)
}

/// `∇G(x) = (1/n2) Σ_j ∇G_j(x)`. Issues `n2` inner-Jacobian queries.
pub fn full_inner_jacobian<P: CompositionProblem + ?Sized>(p: &P, x: &Vector) -> Result<Matrix> {
    check_x(p, x)?;
    let mut acc = Matrix::zeros(p.dim_y(), p.dim_x());
    for j in 0..p.n_inner() {
        acc += p.inner_jacobian(j, x);
    }
    Ok(acc / p.n_inner() as f64)
}

/// `(1/n1) Σ_i ∇F_i(y)`. Issues `n1` outer-gradient queries.
pub fn mean_outer_gradient<P: CompositionProblem + ?Sized>(p: &P, y: &Vector) -> Result<Vector> {
    check_y(p, y)?;
    let mut acc = Vector::zeros(p.dim_y());
    for i in 0..p.n_outer() {
        acc += p.outer_gradient(i, y);
    }
    Ok(acc / p.n_outer() as f64)
}

/// Chain-rule gradient `∇G(x)ᵀ · (1/n1) Σ_i ∇F_i(G(x))`.
/// Issues `n2` inner-value, `n2` inner-Jacobian and `n1` outer-gradient queries.
pub fn full_gradient<P: CompositionProblem + ?Sized>(p: &P, x: &Vector) -> Result<Vector> {
    let g = full_inner_value(p, x)?;
    let jac = full_inner_jacobian(p, x)?;
    let outer = mean_outer_gradient(p, &g)?;
    Ok(jac.tr_mul(&outer))
}

/// `f(x)`. Issues `n2` inner-value queries plus `n1` outer-value evaluations.
pub fn objective_f<P: CompositionProblem + ?Sized>(p: &P, x: &Vector) -> Result<f64> {
    let g = full_inner_value(p, x)?;
    let total: f64 = (0..p.n_outer()).map(|i| p.outer_value(i, &g)).sum();
    Ok(total / p.n_outer() as f64)
}

/// The smooth part of a composite objective seen as a plain function of `x`.
///
/// Diagnostics and reference solvers work against this so they apply to both
/// composition and ordinary finite-sum problems.
pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> Result<f64>;
    fn gradient(&self, x: &Vector) -> Result<Vector>;
}

/// Adapts a [`CompositionProblem`] to [`SmoothObjective`].
pub struct Composed<P>(pub P);

impl<P: CompositionProblem> SmoothObjective for Composed<P> {
    fn dim(&self) -> usize {
        self.0.dim_x()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        objective_f(&self.0, x)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        full_gradient(&self.0, x)
    }
}

/// Estimates the Lipschitz constant of `∇f` by power iteration on
/// gradient differences. Exact (up to iteration count) for quadratics.
pub fn estimate_smoothness<O: SmoothObjective + ?Sized>(
    obj: &O,
    at: &Vector,
    iters: usize,
) -> Result<f64> {
    let n = obj.dim();
    let base = obj.gradient(at)?;
    let mut dir = Vector::from_fn(n, |i, _| 1.0 + 0.01 * (i as f64).sin());
    dir /= dir.norm();
    let scale = 1e-3 * (1.0 + at.norm());
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let probe = at + &dir * scale;
        let hv = (obj.gradient(&probe)? - &base) / scale;
        let norm = hv.norm();
        if norm == 0.0 {
            break;
        }
        estimate = norm;
        dir = hv / norm;
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_difference_gradient, RngStream, FD_STEP};

    #[test]
    fn dimension_mismatch_is_a_domain_error() {
        let p = LinQuadProblem::new(
            vec![Matrix::identity(2, 2)],
            vec![Vector::zeros(2)],
            vec![Vector::zeros(2)],
        )
        .unwrap();
        let bad = Vector::zeros(3);
        assert!(full_inner_value(&p, &bad).is_err());
        assert!(full_inner_jacobian(&p, &bad).is_err());
        assert!(full_gradient(&p, &bad).is_err());
        assert!(objective_f(&p, &bad).is_err());
    }

    #[test]
    fn smoothness_estimate_on_quadratic() {
        let mut rng = RngStream::new(5);
        let p = gen_linquad(4, 3, 5, 7, 0.3, &mut rng).unwrap();
        let a = p.hessian();
        let top = a.symmetric_eigen().eigenvalues.max();
        let est = estimate_smoothness(&Composed(&p), &Vector::zeros(5), 200).unwrap();
        assert!((est - top).abs() / top < 1e-6, "{est} vs {top}");
    }

    #[test]
    fn chain_rule_matches_finite_differences_on_every_kind() {
        let mut rng = RngStream::new(17);
        let rewards = gen_gaussian_rewards(12, 4, 3.0, &mut rng).unwrap();
        let portfolio = PortfolioProblem::new(rewards).unwrap();
        let (pm, rm) = gen_mdp(6, 3, &mut rng).unwrap();
        let policy = PolicyEvalProblem::new(pm, rm, 0.9).unwrap();
        let linquad = gen_linquad(5, 4, 3, 4, 0.5, &mut rng).unwrap();
        let problems: Vec<Box<dyn CompositionProblem>> =
            vec![Box::new(portfolio), Box::new(policy), Box::new(linquad)];
        for p in &problems {
            for _ in 0..5 {
                let x = Vector::from_fn(p.dim_x(), |_, _| rng.standard_normal());
                let analytic = full_gradient(p, &x).unwrap();
                let jac = full_inner_jacobian(p, &x).unwrap();
                let outer = mean_outer_gradient(p, &full_inner_value(p, &x).unwrap()).unwrap();
                assert_eq!(analytic, jac.tr_mul(&outer));
                let fd = central_difference_gradient(|v| objective_f(p, v).unwrap(), &x, FD_STEP)
                    .unwrap();
                let rel = (&analytic - &fd).norm() / analytic.norm().max(1.0);
                assert!(rel < 1e-5, "relative error {rel}");
            }
        }
    }
}
