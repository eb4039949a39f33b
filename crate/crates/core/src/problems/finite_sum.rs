use crate::error::{domain, Error, Result};
use crate::numerics::{Matrix, Vector};

use super::SmoothObjective;

/// `f(x) = (1/n) Σ_i f_i(x)`, the problem class of proximal SVRG.
pub trait FiniteSumProblem: Send + Sync {
    fn n_components(&self) -> usize;
    fn dim(&self) -> usize;
    fn component_value(&self, i: usize, x: &Vector) -> f64;
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector;

    fn mean_value(&self, x: &Vector) -> f64 {
        (0..self.n_components())
            .map(|i| self.component_value(i, x))
            .sum::<f64>()
            / self.n_components() as f64
    }

    /// Full gradient; one component-gradient query per component.
    fn mean_gradient(&self, x: &Vector) -> Vector {
        let mut acc = Vector::zeros(self.dim());
        for i in 0..self.n_components() {
            acc += self.component_gradient(i, x);
        }
        acc / self.n_components() as f64
    }
}

impl<P: FiniteSumProblem + ?Sized> FiniteSumProblem for &P {
    fn n_components(&self) -> usize {
        (**self).n_components()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        (**self).component_value(i, x)
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        (**self).component_gradient(i, x)
    }
}

/// Least squares `f_i(x) = ½(⟨a_i, x⟩ − y_i)²`.
#[derive(Debug, Clone)]
pub struct LassoProblem {
    design: Matrix,
    targets: Vector,
    rows: Vec<Vector>,
}

impl LassoProblem {
    pub fn new(design: Matrix, targets: Vector) -> Result<Self> {
        if design.nrows() == 0 || design.ncols() == 0 {
            return domain("design matrix is empty");
        }
        if design.nrows() != targets.len() {
            return domain(format!(
                "design has {} rows but {} targets",
                design.nrows(),
                targets.len()
            ));
        }
        if design.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return domain("non-finite lasso data");
        }
        let rows = (0..design.nrows())
            .map(|i| design.row(i).transpose())
            .collect();
        Ok(Self {
            design,
            targets,
            rows,
        })
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn targets(&self) -> &Vector {
        &self.targets
    }

    /// Unregularized least-squares solution via the normal equations.
    pub fn least_squares(&self) -> Result<Vector> {
        let gram = self.design.tr_mul(&self.design);
        let rhs = self.design.tr_mul(&self.targets);
        gram.cholesky()
            .map(|ch| ch.solve(&rhs))
            .ok_or_else(|| Error::Numeric("design matrix is rank deficient".into()))
    }
}

impl FiniteSumProblem for LassoProblem {
    fn n_components(&self) -> usize {
        self.rows.len()
    }

    fn dim(&self) -> usize {
        self.design.ncols()
    }

    fn component_value(&self, i: usize, x: &Vector) -> f64 {
        0.5 * (self.rows[i].dot(x) - self.targets[i]).powi(2)
    }

    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        &self.rows[i] * (self.rows[i].dot(x) - self.targets[i])
    }
}

/// Adapts a [`FiniteSumProblem`] to [`SmoothObjective`].
pub struct FiniteSumObjective<P>(pub P);

impl<P: FiniteSumProblem> SmoothObjective for FiniteSumObjective<P> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        check(&self.0, x)?;
        Ok(self.0.mean_value(x))
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check(&self.0, x)?;
        Ok(self.0.mean_gradient(x))
    }
}

fn check<P: FiniteSumProblem>(p: &P, x: &Vector) -> Result<()> {
    if x.len() != p.dim() {
        return domain(format!(
            "decision vector has length {}, problem expects {}",
            x.len(),
            p.dim()
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{central_difference_gradient, RngStream, FD_STEP};

    fn random_lasso(rng: &mut RngStream, n: usize, d: usize) -> LassoProblem {
        let design = Matrix::from_fn(n, d, |_, _| rng.standard_normal());
        let targets = Vector::from_fn(n, |_, _| rng.standard_normal());
        LassoProblem::new(design, targets).unwrap()
    }

    #[test]
    fn value_at_origin() {
        let mut rng = RngStream::new(1);
        let p = random_lasso(&mut rng, 6, 3);
        for i in 0..6 {
            let y = p.targets()[i];
            assert_eq!(p.component_value(i, &Vector::zeros(3)), 0.5 * y * y);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(2);
        let p = random_lasso(&mut rng, 5, 4);
        let x = Vector::from_fn(4, |_, _| rng.standard_normal());
        for i in 0..5 {
            let fd = central_difference_gradient(|v| p.component_value(i, v), &x, FD_STEP).unwrap();
            let g = p.component_gradient(i, &x);
            assert!((&g - &fd).norm() / g.norm().max(1.0) < 1e-6);
        }
    }

    #[test]
    fn full_gradient_vanishes_at_least_squares() {
        let mut rng = RngStream::new(3);
        let p = random_lasso(&mut rng, 20, 5);
        let x = p.least_squares().unwrap();
        assert!(p.mean_gradient(&x).amax() < 1e-8);
    }

    #[test]
    fn dimension_checks() {
        assert!(LassoProblem::new(Matrix::zeros(3, 2), Vector::zeros(2)).is_err());
        let mut rng = RngStream::new(4);
        let p = random_lasso(&mut rng, 3, 2);
        assert!(FiniteSumObjective(&p).value(&Vector::zeros(3)).is_err());
    }
}
