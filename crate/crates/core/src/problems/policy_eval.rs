use crate::error::{domain, Result};
use crate::numerics::{Matrix, Vector};

use super::CompositionProblem;

/// Tabular policy evaluation as a Bellman-residual minimization.
///
/// The decision variable is the value table `V ∈ R^S`. Inner components are
/// indexed by next state `j`:
///
/// ```text
/// G_j(V) = (V, b_j(V)),   b_j(V)_s = S · P[s, j] · (R[s, j] + γ V_j)
/// ```
///
/// so `(1/S) Σ_j G_j(V) = (V, T(V))` with `T` the Bellman operator. Outer
/// components are indexed by state: `F_i(w, t) = (w_i − t_i)²`, giving
/// `f(V) = (1/S) Σ_s (V_s − T(V)_s)²`.
#[derive(Debug, Clone)]
pub struct PolicyEvalProblem {
    transition: Matrix,
    rewards: Matrix,
    gamma: f64,
    /// Column `j` of `S · P`, cached for the inner queries.
    scaled_columns: Vec<Vector>,
    reward_columns: Vec<Vector>,
}

pub const DEFAULT_GAMMA: f64 = 0.95;

impl PolicyEvalProblem {
    pub fn new(transition: Matrix, rewards: Matrix, gamma: f64) -> Result<Self> {
        let s = transition.nrows();
        if s == 0 || transition.ncols() != s {
            return domain(format!(
                "transition matrix must be square and nonempty, got {}x{}",
                transition.nrows(),
                transition.ncols()
            ));
        }
        if rewards.shape() != (s, s) {
            return domain(format!(
                "reward matrix must be {s}x{s}, got {}x{}",
                rewards.nrows(),
                rewards.ncols()
            ));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return domain(format!("discount must lie in (0, 1), got {gamma}"));
        }
        if rewards.iter().any(|v| !v.is_finite()) {
            return domain("rewards must be finite");
        }
        for r in 0..s {
            let row = transition.row(r);
            if row.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
                return domain(format!("transition row {r} has a non-positive entry"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return domain(format!("transition row {r} sums to {sum}"));
            }
        }
        let scaled_columns = (0..s).map(|j| transition.column(j) * s as f64).collect();
        let reward_columns = (0..s).map(|j| rewards.column(j).into_owned()).collect();
        Ok(Self {
            transition,
            rewards,
            gamma,
            scaled_columns,
            reward_columns,
        })
    }

    pub fn states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    pub fn rewards(&self) -> &Matrix {
        &self.rewards
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Expected one-step reward `r̄_s = Σ_{s'} P[s,s'] R[s,s']`.
    pub fn expected_rewards(&self) -> Vector {
        self.transition.component_mul(&self.rewards).column_sum()
    }

    /// Bellman operator `T(V) = r̄ + γ P V`.
    pub fn bellman(&self, v: &Vector) -> Vector {
        self.expected_rewards() + (&self.transition * v) * self.gamma
    }

    /// `(1/S) ‖V − T(V)‖²`, evaluated without the composition embedding.
    pub fn bellman_residual(&self, v: &Vector) -> f64 {
        let r = v - self.bellman(v);
        r.norm_squared() / self.states() as f64
    }

    /// The fixed point `(I − γP)^{-1} r̄`.
    pub fn exact_values(&self) -> Result<Vector> {
        let s = self.states();
        let system = Matrix::identity(s, s) - &self.transition * self.gamma;
        system
            .lu()
            .solve(&self.expected_rewards())
            .ok_or_else(|| crate::Error::Numeric("singular Bellman system".into()))
    }
}

impl CompositionProblem for PolicyEvalProblem {
    fn n_outer(&self) -> usize {
        self.states()
    }

    fn n_inner(&self) -> usize {
        self.states()
    }

    fn dim_x(&self) -> usize {
        self.states()
    }

    fn dim_y(&self) -> usize {
        2 * self.states()
    }

    fn inner_value(&self, j: usize, x: &Vector) -> Vector {
        let s = self.states();
        let mut out = Vector::zeros(2 * s);
        out.rows_mut(0, s).copy_from(x);
        let col = &self.scaled_columns[j];
        let rew = &self.reward_columns[j];
        let next = self.gamma * x[j];
        for k in 0..s {
            out[s + k] = col[k] * (rew[k] + next);
        }
        out
    }

    fn inner_jacobian(&self, j: usize, _x: &Vector) -> Matrix {
        let s = self.states();
        let mut jac = Matrix::zeros(2 * s, s);
        jac.view_mut((0, 0), (s, s)).fill_with_identity();
        let col = &self.scaled_columns[j];
        for k in 0..s {
            jac[(s + k, j)] = self.gamma * col[k];
        }
        jac
    }

    fn outer_value(&self, i: usize, y: &Vector) -> f64 {
        let s = self.states();
        (y[i] - y[s + i]).powi(2)
    }

    fn outer_gradient(&self, i: usize, y: &Vector) -> Vector {
        let s = self.states();
        let d = 2.0 * (y[i] - y[s + i]);
        let mut out = Vector::zeros(2 * s);
        out[i] = d;
        out[s + i] = -d;
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_difference_jacobian, RngStream, FD_STEP};
    use crate::problems::{full_inner_jacobian, full_inner_value, gen_mdp, objective_f};

    fn two_state() -> PolicyEvalProblem {
        let p = Matrix::from_row_slice(2, 2, &[0.3, 0.7, 0.6, 0.4]);
        let r = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 2.0]);
        PolicyEvalProblem::new(p, r, 0.9).unwrap()
    }

    #[test]
    fn two_state_embedding_matches_direct_residual() {
        let p = two_state();
        let v = Vector::from_vec(vec![1.5, -0.5]);
        // T(V)_0 = 0.3(1 + 0.9·1.5) + 0.7(0 + 0.9·(−0.5)) = 0.39
        // T(V)_1 = 0.6(0.5 + 1.35) + 0.4(2 − 0.45) = 1.73
        let direct = ((1.5f64 - 0.39).powi(2) + (-0.5f64 - 1.73).powi(2)) / 2.0;
        assert!((objective_f(&p, &v).unwrap() - direct).abs() < 1e-12);
        assert!((p.bellman_residual(&v) - direct).abs() < 1e-12);
    }

    #[test]
    fn inner_mean_is_value_and_bellman_image() {
        let mut rng = RngStream::new(9);
        let (pm, rm) = gen_mdp(7, 3, &mut rng).unwrap();
        let p = PolicyEvalProblem::new(pm, rm, 0.8).unwrap();
        let v = Vector::from_fn(7, |_, _| rng.standard_normal());
        let g = full_inner_value(&p, &v).unwrap();
        assert!((g.rows(0, 7) - &v).amax() < 1e-14);
        assert!((g.rows(7, 7) - p.bellman(&v)).amax() < 1e-12);
    }

    #[test]
    fn fixed_point_has_zero_residual() {
        let mut rng = RngStream::new(10);
        let (pm, rm) = gen_mdp(20, 4, &mut rng).unwrap();
        let p = PolicyEvalProblem::new(pm, rm, DEFAULT_GAMMA).unwrap();
        let v = p.exact_values().unwrap();
        assert!(objective_f(&p, &v).unwrap() <= 1e-9);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let mut rng = RngStream::new(11);
        let (pm, rm) = gen_mdp(5, 2, &mut rng).unwrap();
        let p = PolicyEvalProblem::new(pm, rm, 0.9).unwrap();
        let v = Vector::from_fn(5, |_, _| rng.standard_normal());
        let jac = full_inner_jacobian(&p, &v).unwrap();
        let fd =
            central_difference_jacobian(|x| full_inner_value(&p, x).unwrap(), &v, FD_STEP).unwrap();
        assert!((&jac - &fd).amax() < 1e-8);
        // Bottom block of the mean Jacobian is γP.
        let bottom = jac.view((5, 0), (5, 5)).into_owned();
        assert!((bottom - p.transition() * 0.9).amax() < 1e-14);
    }

    #[test]
    fn validation() {
        let good = Matrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let r = Matrix::zeros(2, 2);
        assert!(PolicyEvalProblem::new(good.clone(), r.clone(), 1.0).is_err());
        assert!(PolicyEvalProblem::new(good.clone(), r.clone(), 0.0).is_err());
        let off = Matrix::from_row_slice(2, 2, &[0.5, 0.6, 0.5, 0.5]);
        assert!(PolicyEvalProblem::new(off, r.clone(), 0.9).is_err());
        let zero = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 0.5]);
        assert!(PolicyEvalProblem::new(zero, r, 0.9).is_err());
    }
}
