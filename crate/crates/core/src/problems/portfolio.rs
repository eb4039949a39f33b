use crate::error::{domain, Result};
use crate::numerics::{Matrix, Vector};

use super::CompositionProblem;

/// Mean-variance portfolio selection over `n` periods of `N` asset rewards.
///
/// Composition embedding, with `n1 = n2 = n` and `M = N + 1`:
///
/// * inner `G_j(x) = (x, ⟨r_j, x⟩)`
/// * outer `F_i(w, z) = −⟨r_i, w⟩ + (⟨r_i, w⟩ − z)²`
///
/// so that `f(x) = −mean_t ⟨r_t, x⟩ + mean_t (⟨r_t, x⟩ − mean_j ⟨r_j, x⟩)²`.
#[derive(Debug, Clone)]
pub struct PortfolioProblem {
    rewards: Matrix,
    rows: Vec<Vector>,
}

impl PortfolioProblem {
    pub fn new(rewards: Matrix) -> Result<Self> {
        if rewards.nrows() == 0 || rewards.ncols() == 0 {
            return domain("reward matrix is empty");
        }
        if let Some(v) = rewards.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return domain(format!(
                "rewards must be finite and strictly positive, found {v}"
            ));
        }
        let rows = (0..rewards.nrows())
            .map(|t| rewards.row(t).transpose())
            .collect();
        Ok(Self { rewards, rows })
    }

    pub fn rewards(&self) -> &Matrix {
        &self.rewards
    }

    pub fn periods(&self) -> usize {
        self.rows.len()
    }

    pub fn assets(&self) -> usize {
        self.rewards.ncols()
    }

    /// Mean-variance objective evaluated directly from the rewards.
    pub fn mean_variance_objective(&self, x: &Vector) -> f64 {
        let returns: Vec<f64> = self.rows.iter().map(|r| r.dot(x)).collect();
        let n = returns.len() as f64;
        let mean = returns.iter().sum::<f64>() / n;
        let variance = returns.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        -mean + variance
    }
}

impl CompositionProblem for PortfolioProblem {
    fn n_outer(&self) -> usize {
        self.rows.len()
    }

    fn n_inner(&self) -> usize {
        self.rows.len()
    }

    fn dim_x(&self) -> usize {
        self.assets()
    }

    fn dim_y(&self) -> usize {
        self.assets() + 1
    }

    fn inner_value(&self, j: usize, x: &Vector) -> Vector {
        let n = self.assets();
        let mut out = Vector::zeros(n + 1);
        out.rows_mut(0, n).copy_from(x);
        out[n] = self.rows[j].dot(x);
        out
    }

    fn inner_jacobian(&self, j: usize, _x: &Vector) -> Matrix {
        let n = self.assets();
        let mut jac = Matrix::zeros(n + 1, n);
        jac.view_mut((0, 0), (n, n)).fill_with_identity();
        jac.row_mut(n).copy_from(&self.rows[j].transpose());
        jac
    }

    fn outer_value(&self, i: usize, y: &Vector) -> f64 {
        let n = self.assets();
        let ret = self.rows[i].dot(&y.rows(0, n));
        -ret + (ret - y[n]).powi(2)
    }

    fn outer_gradient(&self, i: usize, y: &Vector) -> Vector {
        let n = self.assets();
        let r = &self.rows[i];
        let dev = r.dot(&y.rows(0, n)) - y[n];
        let mut out = Vector::zeros(n + 1);
        out.rows_mut(0, n).copy_from(&(r * (2.0 * dev - 1.0)));
        out[n] = -2.0 * dev;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_difference_jacobian, RngStream, FD_STEP};
    use crate::problems::{
        full_inner_jacobian, full_inner_value, gen_gaussian_rewards, objective_f,
    };

    fn naive_objective(rewards: &Matrix, x: &Vector) -> f64 {
        let (n, assets) = rewards.shape();
        let mut ret = vec![0.0; n];
        for t in 0..n {
            for k in 0..assets {
                ret[t] += rewards[(t, k)] * x[k];
            }
        }
        let mut mean = 0.0;
        for r in &ret {
            mean += r / n as f64;
        }
        let mut var = 0.0;
        for r in &ret {
            var += (r - mean) * (r - mean) / n as f64;
        }
        -mean + var
    }

    #[test]
    fn single_period_toy() {
        let p = PortfolioProblem::new(Matrix::from_element(1, 1, 2.0)).unwrap();
        let x = Vector::from_element(1, 3.0);
        assert_eq!(p.inner_value(0, &x), Vector::from_vec(vec![3.0, 6.0]));
        assert_eq!(objective_f(&p, &x).unwrap(), -6.0);
        assert_eq!(p.mean_variance_objective(&x), -6.0);
    }

    #[test]
    fn two_period_embedding_matches_direct_evaluation() {
        let rewards = Matrix::from_row_slice(2, 3, &[1.0, 0.5, 2.0, 0.3, 1.5, 0.7]);
        let p = PortfolioProblem::new(rewards.clone()).unwrap();
        let x = Vector::from_vec(vec![0.4, -1.2, 0.9]);
        let composed = objective_f(&p, &x).unwrap();
        assert!((composed - naive_objective(&rewards, &x)).abs() < 1e-12);
    }

    #[test]
    fn full_inner_value_at_origin_is_zero() {
        let mut rng = RngStream::new(1);
        let p = PortfolioProblem::new(gen_gaussian_rewards(10, 4, 2.0, &mut rng).unwrap()).unwrap();
        assert_eq!(
            full_inner_value(&p, &Vector::zeros(4)).unwrap(),
            Vector::zeros(5)
        );
    }

    #[test]
    fn full_inner_value_matches_double_loop() {
        let mut rng = RngStream::new(2);
        let rewards = gen_gaussian_rewards(15, 5, 2.0, &mut rng).unwrap();
        let p = PortfolioProblem::new(rewards.clone()).unwrap();
        let x = Vector::from_fn(5, |_, _| rng.standard_normal());
        let mut expect = Vector::zeros(6);
        for j in 0..15 {
            for k in 0..5 {
                expect[k] += x[k] / 15.0;
                expect[5] += rewards[(j, k)] * x[k] / 15.0;
            }
        }
        let got = full_inner_value(&p, &x).unwrap();
        assert!((got - expect).amax() < 1e-12);
    }

    #[test]
    fn jacobian_is_identity_over_mean_rewards() {
        let mut rng = RngStream::new(3);
        let rewards = gen_gaussian_rewards(8, 3, 2.0, &mut rng).unwrap();
        let p = PortfolioProblem::new(rewards.clone()).unwrap();
        let x = Vector::from_fn(3, |_, _| rng.standard_normal());
        let jac = full_inner_jacobian(&p, &x).unwrap();
        let fd =
            central_difference_jacobian(|v| full_inner_value(&p, v).unwrap(), &x, FD_STEP).unwrap();
        assert!((&jac - &fd).amax() < 1e-8);
        for k in 0..3 {
            let mean: f64 = (0..8).map(|t| rewards[(t, k)]).sum::<f64>() / 8.0;
            assert!((jac[(3, k)] - mean).abs() < 1e-14);
        }
        for j in 0..8 {
            assert_eq!(
                p.inner_jacobian(j, &x),
                p.inner_jacobian(j, &Vector::zeros(3))
            );
        }
    }

    #[test]
    fn rejects_nonpositive_rewards() {
        assert!(PortfolioProblem::new(Matrix::from_row_slice(1, 2, &[1.0, 0.0])).is_err());
        assert!(PortfolioProblem::new(Matrix::from_row_slice(1, 2, &[1.0, -3.0])).is_err());
    }

    #[test]
    fn outer_gradient_matches_finite_differences() {
        let mut rng = RngStream::new(4);
        let p = PortfolioProblem::new(gen_gaussian_rewards(5, 3, 2.0, &mut rng).unwrap()).unwrap();
        let y = Vector::from_fn(4, |_, _| rng.standard_normal());
        for i in 0..5 {
            let fd =
                crate::numerics::central_difference_gradient(|v| p.outer_value(i, v), &y, FD_STEP)
                    .unwrap();
            let g = p.outer_gradient(i, &y);
            assert!((&g - &fd).norm() / g.norm().max(1.0) < 1e-5);
        }
    }
}
