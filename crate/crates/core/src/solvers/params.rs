//! Step-size and batch-size schedules with the matching rate checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularity constants of a composition problem.
///
/// `mu` is the strong-convexity modulus of `f`, `l_f` the Lipschitz constant
/// of `∇f`. `l_outer` and `l_inner` bound the Lipschitz constants of `∇F_i`
/// and `∇G_j`; `b_outer` and `b_inner` bound `‖∇F_i‖` and `‖∇G_j‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub mu: f64,
    pub l_f: f64,
    pub l_outer: f64,
    pub l_inner: f64,
    pub b_outer: f64,
    pub b_inner: f64,
}

impl ProblemConstants {
    /// `mu` and `l_f` must be positive; the bounds may be zero (an affine
    /// inner map has `l_inner = 0`).
    pub fn new(
        mu: f64,
        l_f: f64,
        l_outer: f64,
        l_inner: f64,
        b_outer: f64,
        b_inner: f64,
    ) -> Result<Self> {
        for (name, v) in [("mu", mu), ("l_f", l_f)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("l_outer", l_outer),
            ("l_inner", l_inner),
            ("b_outer", b_outer),
            ("b_inner", b_inner),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(Self {
            mu,
            l_f,
            l_outer,
            l_inner,
            b_outer,
            b_inner,
        })
    }

    pub fn unit() -> Self {
        Self {
            mu: 1.0,
            l_f: 1.0,
            l_outer: 1.0,
            l_inner: 1.0,
            b_outer: 1.0,
            b_inner: 1.0,
        }
    }

    /// `B_G⁴ L_F²`, the weight of the inner-value estimation error.
    fn value_weight(&self) -> f64 {
        self.b_inner.powi(4) * self.l_outer.powi(2)
    }

    /// `B_F² L_G²`, the weight of the inner-Jacobian estimation error.
    fn jacobian_weight(&self) -> f64 {
        self.b_outer.powi(2) * self.l_inner.powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StronglyConvexParams {
    pub eta: f64,
    pub m: usize,
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralParams {
    pub eta: f64,
    pub m: usize,
    pub b1: usize,
    pub a_min: usize,
    pub b_min: usize,
}

fn ceil_at_least_one(v: f64) -> usize {
    (v.ceil() as usize).max(1)
}

/// Schedule for strongly convex `f`, designed so the linear rate factor is
/// below `2/3`:
/// `η = 1/(96 L_f)`, `m = ⌈16(1 + 96 L_f/μ)⌉`, `A = ⌈2048 B_G⁴ L_F²/μ²⌉`,
/// `B = ⌈2048 B_F² L_G²/μ²⌉`. Batch sizes are at least 1.
pub fn suggest_params_strongly_convex(c: &ProblemConstants) -> StronglyConvexParams {
    let mu2 = c.mu * c.mu;
    StronglyConvexParams {
        eta: 1.0 / (96.0 * c.l_f),
        m: ceil_at_least_one(16.0 * (1.0 + 96.0 * c.l_f / c.mu)),
        a: ceil_at_least_one(2048.0 * c.value_weight() / mu2),
        b: ceil_at_least_one(2048.0 * c.jacobian_weight() / mu2),
    }
}

/// Largest `m` with `m³ ≤ n`.
fn integer_cbrt(n: usize) -> usize {
    let mut m = (n as f64).cbrt().round() as usize;
    while m.pow(3) > n {
        m -= 1;
    }
    while (m + 1).pow(3) <= n {
        m += 1;
    }
    m
}

/// Schedule for general (nonconvex) `f` with `n = n1 + n2`:
/// `m = ⌊n^{1/3}⌋`, `b1 = ⌈n^{2/3}⌉`, `η = 1/(4 L_f)`,
/// `A_min = ⌈8 m² B_G⁴ L_F²/L_f⌉`, `B_min = ⌈8 m² B_F² L_G²/L_f⌉`.
/// Roots are taken in integer arithmetic so perfect cubes are exact.
pub fn suggest_params_general(n1: usize, n2: usize, c: &ProblemConstants) -> Result<GeneralParams> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidConfig("n1 and n2 must be at least 1".into()));
    }
    let n = n1 + n2;
    let m = integer_cbrt(n).max(1);
    let sq = n * n;
    let mut b1 = integer_cbrt(sq);
    if b1.pow(3) < sq {
        b1 += 1;
    }
    let m2 = (m * m) as f64;
    Ok(GeneralParams {
        eta: 1.0 / (4.0 * c.l_f),
        m,
        b1,
        a_min: ceil_at_least_one(8.0 * m2 * c.value_weight() / c.l_f),
        b_min: ceil_at_least_one(8.0 * m2 * c.jacobian_weight() / c.l_f),
    })
}

/// Per-epoch contraction factor `ρ` of the expected gap for strongly convex
/// `f`, with the auxiliary weight fixed at `μ/8`:
///
/// ```text
/// K = 6ηL_f + (η/2 + 4/μ)(32/μ)(B_F²L_G²/B + B_G⁴L_F²/A)
/// ρ = (2/μ + 2ηK(m+1)) / (2η(7/8 − K)m)
/// ```
///
/// Values of `ρ ≥ 1` carry no guarantee. A nonpositive denominator is an
/// invalid configuration.
pub fn linear_rate_factor(
    eta: f64,
    m: usize,
    a: usize,
    b: usize,
    c: &ProblemConstants,
) -> Result<f64> {
    if !(eta > 0.0) || m == 0 || a == 0 || b == 0 {
        return Err(Error::InvalidConfig(
            "eta, m, A and B must be positive".into(),
        ));
    }
    let mu = c.mu;
    let k = 6.0 * eta * c.l_f
        + (eta / 2.0 + 4.0 / mu)
            * (32.0 / mu)
            * (c.jacobian_weight() / b as f64 + c.value_weight() / a as f64);
    let mf = m as f64;
    let denominator = 2.0 * eta * (7.0 / 8.0 - k) * mf;
    if !(denominator > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rate denominator is nonpositive (K = {k:.6e}); shrink eta or grow A and B"
        )));
    }
    Ok((2.0 / mu + 2.0 * eta * k * (mf + 1.0)) / denominator)
}

/// Whether `(η, m, b1, A, B)` satisfies the step-size condition for general
/// `f`:
///
/// ```text
/// 4(ηm²L_f²/b1 + 2ηm²B_G⁴L_F²/A + 2ηm²B_F²L_G²/B) + L_f/2 ≤ 1/(2η)
/// ```
///
/// The inequality is inclusive; a relative slack of `1e-12` absorbs rounding
/// at exact equality.
pub fn sublinear_rate_condition(
    eta: f64,
    m: usize,
    a: usize,
    b: usize,
    b1: usize,
    c: &ProblemConstants,
) -> bool {
    if !(eta > 0.0) || m == 0 || a == 0 || b == 0 || b1 == 0 {
        return false;
    }
    let em2 = eta * (m * m) as f64;
    let lhs = 4.0
        * (em2 * c.l_f * c.l_f / b1 as f64
            + 2.0 * em2 * c.value_weight() / a as f64
            + 2.0 * em2 * c.jacobian_weight() / b as f64)
        + c.l_f / 2.0;
    let rhs = 1.0 / (2.0 * eta);
    lhs <= rhs * (1.0 + 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::problems::gen_linquad;

    #[test]
    fn strongly_convex_unit_constants() {
        let p = suggest_params_strongly_convex(&ProblemConstants::unit());
        assert_eq!(p.eta, 1.0 / 96.0);
        assert_eq!((p.m, p.a, p.b), (1552, 2048, 2048));
        let rho = linear_rate_factor(p.eta, p.m, p.a, p.b, &ProblemConstants::unit()).unwrap();
        assert!(rho <= 2.0 / 3.0 + 1e-9, "rho = {rho}");
    }

    #[test]
    fn doubling_mu_quarters_batches() {
        let mut c = ProblemConstants::unit();
        c.b_inner = 1.3;
        c.l_inner = 0.7;
        let p1 = suggest_params_strongly_convex(&c);
        c.mu = 2.0;
        let p2 = suggest_params_strongly_convex(&c);
        assert_eq!(p2.a, (2048.0 * 1.3f64.powi(4) / 4.0).ceil() as usize);
        assert!(p2.a * 4 >= p1.a - 4 && p2.a * 4 <= p1.a + 4);
        assert!(p2.b * 4 >= p1.b - 4 && p2.b * 4 <= p1.b + 4);
    }

    #[test]
    fn measured_linquad_constants_give_contraction() {
        let mut rng = RngStream::new(91);
        let p = gen_linquad(10, 10, 3, 4, 0.2, &mut rng).unwrap();
        let c = p.constants(1.0).unwrap();
        let s = suggest_params_strongly_convex(&c);
        assert!(linear_rate_factor(s.eta, s.m, s.a, s.b, &c).unwrap() < 1.0);
    }

    // Independent transcription, written from the formula with the fractions
    // cleared differently.
    fn rho_oracle(eta: f64, m: f64, a: f64, b: f64, c: &ProblemConstants) -> f64 {
        let err =
            c.b_outer.powi(2) * c.l_inner.powi(2) / b + c.b_inner.powi(4) * c.l_outer.powi(2) / a;
        let k = 6.0 * eta * c.l_f + 32.0 * (eta * c.mu + 8.0) / (2.0 * c.mu * c.mu) * err;
        (1.0 / c.mu + eta * k * (m + 1.0)) / (eta * m * (0.875 - k))
    }

    #[test]
    fn rate_factor_matches_second_transcription() {
        let mut rng = RngStream::new(92);
        let mut checked = 0;
        while checked < 200 {
            let mut u = || 0.2 + 1.8 * rng.uniform();
            let c = ProblemConstants::new(u(), u(), u(), u(), u(), u()).unwrap();
            let eta = 1e-3 * u();
            let m = 1 + rng.index(500);
            let a = 500 + rng.index(5000);
            let b = 500 + rng.index(5000);
            if let Ok(rho) = linear_rate_factor(eta, m, a, b, &c) {
                let expect = rho_oracle(eta, m as f64, a as f64, b as f64, &c);
                assert!((rho - expect).abs() <= 1e-12 * expect.abs().max(1.0));
                checked += 1;
            }
        }
    }

    #[test]
    fn rate_factor_blows_up_as_eta_vanishes() {
        let c = ProblemConstants::unit();
        let mut last = 0.0;
        for eta in [1e-3, 1e-6, 1e-9, 1e-12] {
            let rho = linear_rate_factor(eta, 1552, 2048, 2048, &c).unwrap();
            assert!(rho > last);
            last = rho;
        }
        assert!(last > 1e8);
        assert!(linear_rate_factor(1.0, 10, 1, 1, &c).is_err());
        assert!(linear_rate_factor(0.0, 10, 1, 1, &c).is_err());
    }

    #[test]
    fn general_schedule_examples() {
        let c = ProblemConstants::unit();
        let g = suggest_params_general(600, 400, &c).unwrap();
        assert_eq!(
            g,
            GeneralParams {
                eta: 0.25,
                m: 10,
                b1: 100,
                a_min: 800,
                b_min: 800
            }
        );
        // Exact equality at these inputs; the inclusive check must accept it.
        assert!(sublinear_rate_condition(
            g.eta, g.m, g.a_min, g.b_min, g.b1, &c
        ));
        assert_eq!(suggest_params_general(5, 3, &c).unwrap().m, 2);
        assert_eq!(suggest_params_general(5, 3, &c).unwrap().b1, 4);
        assert!(suggest_params_general(0, 3, &c).is_err());
    }

    #[test]
    fn general_schedule_satisfies_condition_when_l_f_at_least_one() {
        let mut rng = RngStream::new(93);
        for _ in 0..200 {
            let c = ProblemConstants::new(
                0.5,
                1.0 + 3.0 * rng.uniform(),
                2.0 * rng.uniform(),
                2.0 * rng.uniform(),
                2.0 * rng.uniform(),
                2.0 * rng.uniform(),
            )
            .unwrap();
            let n1 = 1 + rng.index(3000);
            let n2 = 1 + rng.index(3000);
            let g = suggest_params_general(n1, n2, &c).unwrap();
            assert!(sublinear_rate_condition(
                g.eta, g.m, g.a_min, g.b_min, g.b1, &c
            ));
        }
    }

    #[test]
    fn condition_fails_for_huge_steps() {
        let c = ProblemConstants::unit();
        assert!(!sublinear_rate_condition(1e3, 10, 800, 800, 100, &c));
    }

    #[test]
    fn integer_roots() {
        assert_eq!(integer_cbrt(1000), 10);
        assert_eq!(integer_cbrt(999), 9);
        assert_eq!(integer_cbrt(1), 1);
        assert_eq!(integer_cbrt(26), 2);
        assert_eq!(integer_cbrt(27), 3);
    }

    #[test]
    fn constants_validation() {
        assert!(ProblemConstants::new(0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ProblemConstants::new(1.0, 1.0, 1.0, -1.0, 1.0, 1.0).is_err());
        assert!(ProblemConstants::new(1.0, 1.0, 1.0, 0.0, 1.0, 1.0).is_ok());
    }
}
