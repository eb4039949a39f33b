use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::metrics::{objective_h, Recorder, ReferenceOptimum};
use crate::numerics::Vector;
use crate::oracle::{full_gradient_cost, Counted};
use crate::problems::{
    check_x, estimate_smoothness, full_gradient, Composed, CompositionProblem, SmoothObjective,
};
use crate::regularizers::Regularizer;

use super::{
    at_least_one, check_finite, positive, RunOptions, RunState, SolveResult, Step, StopReason,
};

/// `G_η(x) = (x − prox_{ηh}(x − η∇f(x))) / η`.
///
/// Vanishes exactly at minimizers of `f + h`; equals `∇f(x)` when `h = 0`.
pub fn gradient_mapping<O: SmoothObjective + ?Sized>(
    obj: &O,
    h: &Regularizer,
    x: &Vector,
    eta: f64,
) -> Result<Vector> {
    positive("eta", eta)?;
    if x.len() != obj.dim() {
        return domain(format!("x has length {}, expected {}", x.len(), obj.dim()));
    }
    let grad = obj.gradient(x)?;
    let stepped = h.prox(&(x - grad * eta), eta)?;
    Ok((x - stepped) / eta)
}

/// Plain proximal gradient descent on a smooth objective. Returns the final
/// point and the number of steps taken; stops once `‖Δx‖ ≤ tol`.
pub fn proximal_gradient_descent<O: SmoothObjective + ?Sized>(
    obj: &O,
    h: &Regularizer,
    eta: f64,
    x0: Vector,
    max_iters: usize,
    tol: f64,
) -> Result<(Vector, usize)> {
    positive("eta", eta)?;
    let mut x = x0;
    for it in 0..max_iters {
        let next = h.prox(&(&x - obj.gradient(&x)? * eta), eta)?;
        if !check_finite(&next) {
            return Err(Error::Numeric(format!(
                "proximal gradient diverged at step {}",
                it + 1
            )));
        }
        let step = (&next - &x).norm();
        x = next;
        if step <= tol {
            return Ok((x, it + 1));
        }
    }
    Ok((x, max_iters))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxGradConfig {
    pub eta: f64,
    pub max_iters: usize,
    /// Stop once `‖x_{t+1} − x_t‖ ≤ tol`.
    pub tol: f64,
}

impl ProxGradConfig {
    pub fn validate(&self) -> Result<()> {
        positive("eta", self.eta)?;
        at_least_one("max_iters", self.max_iters)?;
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tol must be nonnegative, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// Deterministic proximal gradient on a composition problem, one full
/// gradient (`n2, n2, n1` queries) per step.
pub fn prox_full_gradient<P: CompositionProblem>(
    problem: &P,
    h: &Regularizer,
    cfg: &ProxGradConfig,
    opts: &RunOptions,
) -> Result<SolveResult> {
    cfg.validate()?;
    let x0 = opts.start(problem.dim_x())?;
    check_x(problem, &x0)?;
    let step_cost = full_gradient_cost(problem.n_outer(), problem.n_inner()).total();

    let oracle = Counted::new(problem);
    let raw = Composed(problem);
    let recorder = Recorder::new(&raw, *h, cfg.eta, &opts.trace);
    let (mut run, hit) = RunState::new(recorder, opts, &x0, oracle.counts())?;
    if hit {
        return run.finish(0, 0, x0, oracle.counts(), StopReason::GapReached);
    }
    let mut x = x0;
    for t in 0..cfg.max_iters {
        if let Some(stop) = run.budget_stop(oracle.counts(), step_cost) {
            return run.finish(0, t, x, oracle.counts(), stop);
        }
        let next = h.prox(&(&x - full_gradient(&oracle, &x)? * cfg.eta), cfg.eta)?;
        if !check_finite(&next) {
            return Err(run.diverged(0, t + 1, x, oracle.counts()));
        }
        let step = (&next - &x).norm();
        x = next;
        match run.step(0, t + 1, oracle.counts(), &x)? {
            Step::Continue => {}
            Step::GapReached => {
                return run.finish(0, t + 1, x, oracle.counts(), StopReason::GapReached)
            }
            Step::Diverged => return Err(run.diverged(0, t + 1, x, oracle.counts())),
        }
        if step <= cfg.tol {
            return run.finish(0, t + 1, x, oracle.counts(), StopReason::Converged);
        }
    }
    run.finish(0, cfg.max_iters, x, oracle.counts(), StopReason::Completed)
}

const REFERENCE_MAX_ITERS: usize = 2_000_000;

/// Minimizes `f + h` to `‖Δx‖ ≤ tol` and certifies the result.
///
/// Accelerated proximal gradient with adaptive restart does the bulk of the
/// work; plain proximal gradient steps at `η = 1/L` finish it so the stopping
/// rule is the usual fixed-point one. `L` is estimated by power iteration
/// and backtracked upward if a step violates the quadratic upper bound.
pub fn solve_reference<O: SmoothObjective + ?Sized>(
    obj: &O,
    h: &Regularizer,
    tol: f64,
) -> Result<ReferenceOptimum> {
    let dim = obj.dim();
    let origin = Vector::zeros(dim);
    let mut lip = estimate_smoothness(obj, &origin, 100)?.max(1e-12) * 1.01;

    let mut x = origin.clone();
    let mut y = origin;
    let mut momentum = 1.0_f64;
    let mut value = objective_h(obj, h, &x)?;
    for _ in 0..REFERENCE_MAX_ITERS {
        let (fy, gy) = (obj.value(&y)?, obj.gradient(&y)?);
        let mut next;
        loop {
            let eta = 1.0 / lip;
            next = h.prox(&(&y - &gy * eta), eta)?;
            let d = &next - &y;
            let bound = fy + gy.dot(&d) + 0.5 * lip * d.norm_squared();
            if obj.value(&next)? <= bound + 1e-12 * fy.abs().max(1.0) {
                break;
            }
            lip *= 2.0;
        }
        if !check_finite(&next) {
            return Err(Error::Numeric("reference solve diverged".into()));
        }
        let next_value = objective_h(obj, h, &next)?;
        let step = (&next - &y).norm();
        if next_value > value && momentum > 1.0 {
            // Restart: drop the momentum and retry from the last iterate. A
            // plain step from `x` is always accepted, so this cannot cycle.
            momentum = 1.0;
            y = x.clone();
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt()) / 2.0;
        y = &next + (&next - &x) * ((momentum - 1.0) / t_next);
        momentum = t_next;
        x = next;
        value = next_value;
        if step <= tol {
            break;
        }
    }
    let eta = 1.0 / lip;
    let (x, _) = proximal_gradient_descent(obj, h, eta, x, REFERENCE_MAX_ITERS, tol)?;
    let optimum = ReferenceOptimum::certify(obj, h, x, eta)?;
    if !optimum.verified {
        log::warn!(
            "reference optimum not verified: gradient-mapping residual {:.3e}",
            optimum.residual
        );
    }
    Ok(optimum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::problems::{gen_linquad, gen_mdp, PolicyEvalProblem};

    struct Half;

    impl SmoothObjective for Half {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &Vector) -> Result<f64> {
            Ok(0.5 * x[0] * x[0])
        }
        fn gradient(&self, x: &Vector) -> Result<Vector> {
            Ok(x.clone())
        }
    }

    #[test]
    fn mapping_toy_and_zero_regularizer() {
        let x = Vector::from_element(1, 0.5);
        let g = gradient_mapping(&Half, &Regularizer::l1(1.0).unwrap(), &x, 1.0).unwrap();
        assert_eq!(g[0], 0.5);

        let mut rng = RngStream::new(81);
        let p = gen_linquad(4, 3, 3, 4, 0.3, &mut rng).unwrap();
        let x = Vector::from_fn(3, |_, _| rng.standard_normal());
        let obj = Composed(&p);
        let g = gradient_mapping(&obj, &Regularizer::Zero, &x, 0.37).unwrap();
        assert!((g - full_gradient(&p, &x).unwrap()).amax() < 1e-12);
        assert!(gradient_mapping(&obj, &Regularizer::Zero, &Vector::zeros(2), 0.1).is_err());
    }

    #[test]
    fn full_gradient_reaches_closed_form() {
        let mut rng = RngStream::new(82);
        let p = gen_linquad(5, 4, 3, 4, 0.3, &mut rng).unwrap();
        let cfg = ProxGradConfig {
            eta: 0.3,
            max_iters: 100_000,
            tol: 1e-13,
        };
        let res = prox_full_gradient(&p, &Regularizer::Zero, &cfg, &RunOptions::default()).unwrap();
        assert_eq!(res.stop, StopReason::Converged);
        assert!((res.x_final - p.minimizer().unwrap()).amax() < 1e-8);
    }

    #[test]
    fn fixed_point_start_returns_immediately() {
        let mut rng = RngStream::new(83);
        let p = gen_linquad(5, 4, 3, 4, 0.3, &mut rng).unwrap();
        let x_star = p.minimizer().unwrap();
        let cfg = ProxGradConfig {
            eta: 0.3,
            max_iters: 1000,
            tol: 1e-10,
        };
        let opts = RunOptions {
            x0: Some(x_star),
            ..Default::default()
        };
        let res = prox_full_gradient(&p, &Regularizer::Zero, &cfg, &opts).unwrap();
        assert_eq!(res.stop, StopReason::Converged);
        assert_eq!(res.counts, full_gradient_cost(5, 4));
    }

    #[test]
    fn policy_values_by_direct_solve() {
        let mut rng = RngStream::new(84);
        let (pm, rm) = gen_mdp(8, 2, &mut rng).unwrap();
        let p = PolicyEvalProblem::new(pm, rm, 0.9).unwrap();
        let opt = solve_reference(&Composed(&p), &Regularizer::Zero, 1e-12).unwrap();
        assert!(opt.verified);
        assert!((opt.x - p.exact_values().unwrap()).amax() < 1e-6);
    }

    #[test]
    fn reference_mapping_vanishes_with_l1() {
        let mut rng = RngStream::new(85);
        let p = gen_linquad(6, 5, 4, 5, 0.4, &mut rng).unwrap();
        let h = Regularizer::l1(0.2).unwrap();
        let obj = Composed(&p);
        let opt = solve_reference(&obj, &h, 1e-12).unwrap();
        assert!(opt.verified);
        for eta in [0.01, 0.1, 1.0] {
            assert!(gradient_mapping(&obj, &h, &opt.x, eta).unwrap().norm() < 1e-7);
        }
        let (x, _) =
            proximal_gradient_descent(&obj, &h, 0.1, Vector::zeros(4), 1_000_000, 1e-14).unwrap();
        assert!((x - &opt.x).amax() < 1e-8);
    }
}
