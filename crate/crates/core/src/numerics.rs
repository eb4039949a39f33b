//! Dense linear-algebra aliases, the seeded random stream, and finite-difference
//! derivative checks.
//!
//! Vectors and matrices are plain `nalgebra` dense types. The checked
//! constructors here are the entry points for user-supplied data and reject
//! non-finite entries.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

pub fn vector_from(entries: Vec<f64>) -> Result<Vector> {
    if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
        return domain(format!("vector entry {i} is not finite"));
    }
    Ok(Vector::from_vec(entries))
}

/// Builds a matrix from row-major data.
pub fn matrix_from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return domain(format!("matrix shape {rows}x{cols} has an empty side"));
    }
    if entries.len() != rows * cols {
        return domain(format!(
            "matrix {rows}x{cols} needs {} entries, got {}",
            rows * cols,
            entries.len()
        ));
    }
    if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
        return domain(format!("matrix entry {i} is not finite"));
    }
    Ok(Matrix::from_row_slice(rows, cols, entries))
}

/// Row-major copy of a matrix's entries.
pub fn row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter().copied());
    }
    out
}

pub fn l2_norm_sq(v: &Vector) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Deterministic random stream.
///
/// Backed by ChaCha8 (a counter-based stream cipher with a fixed, published
/// output function), seeded through `SeedableRng::seed_from_u64`. Every draw
/// consumes whole 64-bit words, so the sequence is identical on every platform.
///
/// * `index(n)` consumes one word `u` and returns `floor(u * n / 2^64)`.
/// * `uniform()` consumes one word and returns `(u >> 11) * 2^-53` in `[0, 1)`.
/// * `standard_normal()` uses `rand_distr`'s ziggurat sampler.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    draws: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            draws: 0,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of index/uniform draws made so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Uniform index in `[0, n)`. `n` must be nonzero.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.draws += 1;
        let u = self.inner.next_u64();
        ((u as u128 * n as u128) >> 64) as usize
    }

    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.draws += 1;
        self.inner.sample(StandardNormal)
    }
}

/// Draws `k` indices uniformly from `[0, n)` with replacement.
pub fn sample_with_replacement(rng: &mut RngStream, n: usize, k: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return domain("cannot sample from an empty index range");
    }
    Ok((0..k).map(|_| rng.index(n)).collect())
}

/// Central-difference gradient of a scalar function.
pub fn central_difference_gradient<F>(f: F, x: &Vector, h: f64) -> Result<Vector>
where
    F: Fn(&Vector) -> f64,
{
    if !(h > 0.0) {
        return domain(format!("finite-difference step must be positive, got {h}"));
    }
    let mut probe = x.clone();
    let mut grad = Vector::zeros(x.len());
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + h;
        let up = f(&probe);
        probe[i] = xi - h;
        let down = f(&probe);
        probe[i] = xi;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "function is not finite near coordinate {i}"
            )));
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    Ok(grad)
}

/// Central-difference Jacobian of a vector-valued function; column `i` holds
/// the derivative with respect to `x_i`.
pub fn central_difference_jacobian<F>(f: F, x: &Vector, h: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Vector,
{
    if !(h > 0.0) {
        return domain(format!("finite-difference step must be positive, got {h}"));
    }
    let rows = f(x).len();
    let mut jac = Matrix::zeros(rows, x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + h;
        let up = f(&probe);
        probe[i] = xi - h;
        let down = f(&probe);
        probe[i] = xi;
        if !all_finite(&up) || !all_finite(&down) {
            return Err(Error::Numeric(format!(
                "function is not finite near coordinate {i}"
            )));
        }
        jac.set_column(i, &((up - down) / (2.0 * h)));
    }
    Ok(jac)
}

/// Largest relative deviation between two vectors, measured against the
/// larger of `scale_floor` and the reference's norm.
pub fn relative_error(actual: &Vector, reference: &Vector, scale_floor: f64) -> f64 {
    let scale = reference.norm().max(scale_floor);
    (actual - reference).norm() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampling_edge_cases() {
        let mut rng = RngStream::new(7);
        assert!(sample_with_replacement(&mut rng, 5, 0).unwrap().is_empty());
        assert_eq!(
            sample_with_replacement(&mut rng, 1, 3).unwrap(),
            vec![0, 0, 0]
        );
        assert!(matches!(
            sample_with_replacement(&mut rng, 0, 3),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sampling_replays_and_advances_exactly() {
        let a = sample_with_replacement(&mut RngStream::new(42), 10, 4).unwrap();
        let b = sample_with_replacement(&mut RngStream::new(42), 10, 4).unwrap();
        assert_eq!(a, b);

        let mut rng = RngStream::new(42);
        sample_with_replacement(&mut rng, 10, 4).unwrap();
        assert_eq!(rng.draws(), 4);
    }

    #[test]
    fn sampling_frequencies_are_uniform() {
        let mut rng = RngStream::new(2024);
        let draws = 100_000;
        let mut counts = [0usize; 10];
        for i in sample_with_replacement(&mut rng, 10, draws).unwrap() {
            counts[i] += 1;
        }
        let p: f64 = 0.1;
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - p).abs() <= 4.0 * sd, "frequency {freq}");
        }
    }

    #[test]
    fn central_difference_examples() {
        let g = central_difference_gradient(|v| v[0] * v[0], &Vector::from_vec(vec![3.0]), FD_STEP)
            .unwrap();
        assert!((g[0] - 6.0).abs() < 1e-9);

        let g = central_difference_gradient(|_| 4.2, &Vector::from_vec(vec![1.0, -2.0]), FD_STEP)
            .unwrap();
        assert_eq!(g, Vector::zeros(2));

        let x = Vector::from_vec(vec![1.0, 0.0]);
        let g = central_difference_gradient(|v| v[0].exp(), &x, FD_STEP).unwrap();
        assert!((g[0] - std::f64::consts::E).abs() / std::f64::consts::E < 1e-8);
        assert_eq!(g[1], 0.0);
    }

    #[test]
    fn central_difference_rejects_bad_input() {
        let x = Vector::from_vec(vec![1.0]);
        assert!(matches!(
            central_difference_gradient(|v| v[0], &x, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            central_difference_gradient(|v| (v[0] - 1.0).ln(), &x, FD_STEP),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn norm_sq_examples() {
        assert_eq!(l2_norm_sq(&Vector::zeros(3)), 0.0);
        assert_eq!(l2_norm_sq(&Vector::from_vec(vec![3.0, 4.0])), 25.0);

        let mut rng = RngStream::new(3);
        let v = Vector::from_fn(100, |_, _| rng.standard_normal());
        let mut naive = 0.0;
        for i in 0..v.len() {
            naive += v[i] * v[i];
        }
        assert!((l2_norm_sq(&v) - naive).abs() <= 1e-12 * naive);
    }

    #[test]
    fn checked_constructors() {
        assert!(vector_from(vec![1.0, f64::NAN]).is_err());
        assert!(matrix_from_row_major(2, 2, &[1.0, 2.0, 3.0]).is_err());
        let m = matrix_from_row_major(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m[(1, 0)], 4.0);
        assert_eq!(row_major(&m), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }
}
