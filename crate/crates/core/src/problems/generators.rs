//! Synthetic instance generators. All draws come from the caller's
//! [`RngStream`], so a seed fixes the instance.

use crate::error::{domain, Result};
use crate::numerics::{Matrix, RngStream, Vector};

use super::{LassoProblem, LinQuadProblem};

/// Offset added to every raw transition weight before normalization.
pub const MDP_SHIFT: f64 = 1e-5;

/// Covariance `Q diag(λ) Qᵀ` with `Q` the orthogonal factor of a Gaussian
/// matrix and eigenvalues geometrically spaced from 1 to `kappa_cov`.
pub fn gaussian_covariance(dim: usize, kappa_cov: f64, rng: &mut RngStream) -> Result<Matrix> {
    let (q, eig) = covariance_factors(dim, kappa_cov, rng)?;
    Ok(&q * Matrix::from_diagonal(&eig) * q.transpose())
}

fn covariance_factors(dim: usize, kappa_cov: f64, rng: &mut RngStream) -> Result<(Matrix, Vector)> {
    if dim == 0 {
        return domain("dimension must be positive");
    }
    if !(kappa_cov >= 1.0) || !kappa_cov.is_finite() {
        return domain(format!(
            "covariance condition number must be >= 1, got {kappa_cov}"
        ));
    }
    let gauss = Matrix::from_fn(dim, dim, |_, _| rng.standard_normal());
    let q = gauss.qr().q();
    let eig = Vector::from_fn(dim, |k, _| {
        if dim == 1 {
            1.0
        } else {
            kappa_cov.powf(k as f64 / (dim - 1) as f64)
        }
    });
    Ok((q, eig))
}

/// Draws `n` reward vectors from `N(1, C)` with `cond(C) = kappa_cov` and maps
/// every entry through the absolute value.
pub fn gen_gaussian_rewards(
    n: usize,
    assets: usize,
    kappa_cov: f64,
    rng: &mut RngStream,
) -> Result<Matrix> {
    if n == 0 {
        return domain("need at least one period");
    }
    let (q, eig) = covariance_factors(assets, kappa_cov, rng)?;
    let factor = q * Matrix::from_diagonal(&eig.map(f64::sqrt));
    let mut rewards = Matrix::zeros(n, assets);
    for t in 0..n {
        let z = Vector::from_fn(assets, |_, _| rng.standard_normal());
        let sample = &factor * z;
        for k in 0..assets {
            rewards[(t, k)] = (1.0 + sample[k]).abs();
        }
    }
    Ok(rewards)
}

#[derive(Debug, Clone)]
pub struct MdpSample {
    /// Per-action transition weights after the shift, before normalization.
    pub raw_transitions: Vec<Matrix>,
    /// Transition matrix averaged under the uniform policy.
    pub transition: Matrix,
    pub rewards: Matrix,
}

/// Random MDP: per action, uniform `[0,1]` weights plus [`MDP_SHIFT`], rows
/// normalized; the evaluated policy picks actions uniformly. Rewards are
/// uniform on `[0,1]`.
pub fn gen_mdp_detailed(states: usize, actions: usize, rng: &mut RngStream) -> Result<MdpSample> {
    if states < 2 {
        return domain(format!("need at least two states, got {states}"));
    }
    if actions == 0 {
        return domain("need at least one action");
    }
    let mut raw_transitions = Vec::with_capacity(actions);
    let mut transition = Matrix::zeros(states, states);
    for _ in 0..actions {
        let raw = Matrix::from_fn(states, states, |_, _| rng.uniform() + MDP_SHIFT);
        for s in 0..states {
            let row = raw.row(s);
            let sum: f64 = row.iter().sum();
            for t in 0..states {
                transition[(s, t)] += row[t] / sum;
            }
        }
        raw_transitions.push(raw);
    }
    transition /= actions as f64;
    // Re-normalize so rows sum to one to rounding, independent of the action count.
    for s in 0..states {
        let sum: f64 = transition.row(s).iter().sum();
        transition.row_mut(s).scale_mut(1.0 / sum);
    }
    let rewards = Matrix::from_fn(states, states, |_, _| rng.uniform());
    Ok(MdpSample {
        raw_transitions,
        transition,
        rewards,
    })
}

pub fn gen_mdp(states: usize, actions: usize, rng: &mut RngStream) -> Result<(Matrix, Matrix)> {
    let sample = gen_mdp_detailed(states, actions, rng)?;
    Ok((sample.transition, sample.rewards))
}

/// Random linear-quadratic composition: `Q_j = E + noise·W_j/√N` where `E`
/// has ones on its leading diagonal, offsets and targets standard Gaussian.
pub fn gen_linquad(
    n_outer: usize,
    n_inner: usize,
    dim_x: usize,
    dim_y: usize,
    noise: f64,
    rng: &mut RngStream,
) -> Result<LinQuadProblem> {
    if n_outer == 0 || n_inner == 0 || dim_x == 0 {
        return domain("component counts and dimension must be positive");
    }
    if dim_y < dim_x {
        return domain(format!(
            "inner output dimension {dim_y} is below decision dimension {dim_x}; the composite would not be strongly convex"
        ));
    }
    let scale = noise / (dim_x as f64).sqrt();
    let q = (0..n_inner)
        .map(|_| {
            Matrix::from_fn(dim_y, dim_x, |r, c| {
                let base = if r == c { 1.0 } else { 0.0 };
                base + scale * rng.standard_normal()
            })
        })
        .collect();
    let c = (0..n_inner)
        .map(|_| Vector::from_fn(dim_y, |_, _| rng.standard_normal()))
        .collect();
    let b = (0..n_outer)
        .map(|_| Vector::from_fn(dim_y, |_, _| rng.standard_normal()))
        .collect();
    LinQuadProblem::new(q, c, b)
}

/// Sparse regression: Gaussian design, a ground truth with every third
/// coefficient equal to one, and Gaussian target noise of scale `noise`.
pub fn gen_lasso(n: usize, dim: usize, noise: f64, rng: &mut RngStream) -> Result<LassoProblem> {
    let design = Matrix::from_fn(n, dim, |_, _| rng.standard_normal());
    let truth = Vector::from_fn(dim, |i, _| if i % 3 == 0 { 1.0 } else { 0.0 });
    let noise = Vector::from_fn(n, |_, _| noise * rng.standard_normal());
    let targets = &design * truth + noise;
    LassoProblem::new(design, targets)
}
