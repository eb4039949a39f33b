use crate::error::{domain, Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::solvers::ProblemConstants;

use super::CompositionProblem;

/// Affine inner maps `G_j(x) = Q_j x + c_j` under quadratic outer functions
/// `F_i(y) = ½‖y − b_i‖²`.
///
/// The composite is the quadratic `½‖Q̄x + c̄ − b̄‖² + const` with Hessian
/// `Q̄ᵀQ̄`, so optimum and constants are available in closed form.
#[derive(Debug, Clone)]
pub struct LinQuadProblem {
    q: Vec<Matrix>,
    c: Vec<Vector>,
    b: Vec<Vector>,
    q_mean: Matrix,
    c_mean: Vector,
    b_mean: Vector,
}

impl LinQuadProblem {
    pub fn new(q: Vec<Matrix>, c: Vec<Vector>, b: Vec<Vector>) -> Result<Self> {
        if q.is_empty() || b.is_empty() {
            return domain("need at least one inner and one outer component");
        }
        if c.len() != q.len() {
            return domain(format!(
                "{} inner matrices but {} offsets",
                q.len(),
                c.len()
            ));
        }
        let (m, n) = q[0].shape();
        if m == 0 || n == 0 {
            return domain("inner matrices must be nonempty");
        }
        if q.iter().any(|qj| qj.shape() != (m, n)) {
            return domain("inner matrices have inconsistent shapes");
        }
        if c.iter().chain(b.iter()).any(|v| v.len() != m) {
            return domain(format!("offsets and targets must have length {m}"));
        }
        let finite = q.iter().all(|qj| qj.iter().all(|v| v.is_finite()))
            && c.iter()
                .chain(b.iter())
                .all(|v| v.iter().all(|e| e.is_finite()));
        if !finite {
            return domain("non-finite problem data");
        }
        let q_mean = q.iter().fold(Matrix::zeros(m, n), |acc, qj| acc + qj) / q.len() as f64;
        let c_mean = c.iter().fold(Vector::zeros(m), |acc, cj| acc + cj) / c.len() as f64;
        let b_mean = b.iter().fold(Vector::zeros(m), |acc, bi| acc + bi) / b.len() as f64;
        Ok(Self {
            q,
            c,
            b,
            q_mean,
            c_mean,
            b_mean,
        })
    }

    pub fn inner_matrices(&self) -> &[Matrix] {
        &self.q
    }

    pub fn inner_offsets(&self) -> &[Vector] {
        &self.c
    }

    pub fn targets(&self) -> &[Vector] {
        &self.b
    }

    pub fn hessian(&self) -> Matrix {
        self.q_mean.tr_mul(&self.q_mean)
    }

    /// The unregularized minimizer, from the normal equations.
    pub fn minimizer(&self) -> Result<Vector> {
        let rhs = self.q_mean.tr_mul(&(&self.b_mean - &self.c_mean));
        self.hessian()
            .cholesky()
            .map(|ch| ch.solve(&rhs))
            .ok_or_else(|| Error::Numeric("mean inner map is rank deficient".into()))
    }

    /// Closed-form objective: `½‖Q̄x + c̄ − b̄‖² + ½ mean_i ‖b_i − b̄‖²`.
    pub fn closed_form_objective(&self, x: &Vector) -> f64 {
        let resid = &self.q_mean * x + &self.c_mean - &self.b_mean;
        let spread: f64 = self
            .b
            .iter()
            .map(|bi| (bi - &self.b_mean).norm_squared())
            .sum::<f64>()
            / self.b.len() as f64;
        0.5 * resid.norm_squared() + 0.5 * spread
    }

    /// Closed-form gradient `Q̄ᵀ(Q̄x + c̄ − b̄)`.
    pub fn closed_form_gradient(&self, x: &Vector) -> Vector {
        self.q_mean
            .tr_mul(&(&self.q_mean * x + &self.c_mean - &self.b_mean))
    }

    /// Problem constants valid on the ball of the given radius around the
    /// unregularized minimizer.
    ///
    /// `L_F = 1` and `L_G = 0` exactly; `B_F` is only a bound over the ball,
    /// since `‖∇F_i(y)‖ = ‖y − b_i‖` is unbounded globally.
    pub fn constants(&self, radius: f64) -> Result<ProblemConstants> {
        let eig = self.hessian().symmetric_eigen().eigenvalues;
        let mu = eig.min();
        let spectral = |m: &Matrix| m.singular_values().max();
        let q_bar = spectral(&self.q_mean);
        let l_f = self
            .q
            .iter()
            .map(|qj| spectral(&qj.tr_mul(&self.q_mean)))
            .fold(0.0, f64::max);
        let b_g = self.q.iter().map(spectral).fold(0.0, f64::max);
        let x_star = self.minimizer()?;
        let center = &self.q_mean * &x_star + &self.c_mean;
        let b_f = self
            .b
            .iter()
            .map(|bi| (&center - bi).norm())
            .fold(0.0, f64::max)
            + q_bar * radius;
        ProblemConstants::new(mu, l_f, 1.0, 0.0, b_f, b_g)
    }
}

impl CompositionProblem for LinQuadProblem {
    fn n_outer(&self) -> usize {
        self.b.len()
    }

    fn n_inner(&self) -> usize {
        self.q.len()
    }

    fn dim_x(&self) -> usize {
        self.q_mean.ncols()
    }

    fn dim_y(&self) -> usize {
        self.q_mean.nrows()
    }

    fn inner_value(&self, j: usize, x: &Vector) -> Vector {
        &self.q[j] * x + &self.c[j]
    }

    fn inner_jacobian(&self, j: usize, _x: &Vector) -> Matrix {
        self.q[j].clone()
    }

    fn outer_value(&self, i: usize, y: &Vector) -> f64 {
        0.5 * (y - &self.b[i]).norm_squared()
    }

    fn outer_gradient(&self, i: usize, y: &Vector) -> Vector {
        y - &self.b[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::problems::{
        full_gradient, full_inner_jacobian, full_inner_value, gen_linquad, objective_f,
    };

    #[test]
    fn single_inner_component() {
        let q = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let c = Vector::from_vec(vec![0.5, -1.0]);
        let p =
            LinQuadProblem::new(vec![q.clone()], vec![c.clone()], vec![Vector::zeros(2)]).unwrap();
        let x = Vector::from_vec(vec![1.0, 3.0]);
        assert_eq!(full_inner_value(&p, &x).unwrap(), &q * &x + c);
    }

    #[test]
    fn mean_jacobian_and_gradient_are_closed_form() {
        let mut rng = RngStream::new(21);
        let p = gen_linquad(6, 5, 4, 6, 0.4, &mut rng).unwrap();
        let x = Vector::from_fn(4, |_, _| rng.standard_normal());
        let mean_q = p
            .inner_matrices()
            .iter()
            .fold(Matrix::zeros(6, 4), |a, q| a + q)
            / 5.0;
        assert!((full_inner_jacobian(&p, &x).unwrap() - mean_q).amax() < 1e-14);

        let x_star = p.minimizer().unwrap();
        let expect = p.hessian() * (&x - &x_star);
        assert!((full_gradient(&p, &x).unwrap() - expect).amax() < 1e-10);
        assert!(full_gradient(&p, &x_star).unwrap().amax() < 1e-8);
    }

    #[test]
    fn objective_matches_closed_form() {
        let mut rng = RngStream::new(22);
        let p = gen_linquad(7, 3, 5, 5, 0.3, &mut rng).unwrap();
        let x_star = p.minimizer().unwrap();
        let f_star = objective_f(&p, &x_star).unwrap();
        assert!((f_star - p.closed_form_objective(&x_star)).abs() < 1e-10);
        let x = Vector::from_fn(5, |_, _| rng.standard_normal());
        assert!((objective_f(&p, &x).unwrap() - p.closed_form_objective(&x)).abs() < 1e-10);
    }

    #[test]
    fn constants_are_consistent() {
        let mut rng = RngStream::new(23);
        let p = gen_linquad(4, 4, 3, 5, 0.2, &mut rng).unwrap();
        let c = p.constants(1.0).unwrap();
        assert!(c.mu > 0.0);
        assert!(c.l_f >= c.mu * (1.0 - 1e-12));
        assert_eq!(c.l_inner, 0.0);
    }
}
