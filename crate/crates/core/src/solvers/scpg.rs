use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::Recorder;
use crate::numerics::{RngStream, Vector};
use crate::oracle::{scpg_cost, Counted};
use crate::problems::{check_x, Composed, CompositionProblem};
use crate::regularizers::Regularizer;

use super::{
    at_least_one, check_finite, positive, RunOptions, RunState, SolveResult, Step, StopReason,
};

/// Decaying-rate stochastic compositional proximal gradient.
///
/// Step sizes follow `α_t = alpha0 / (1+t)^exp_alpha` and
/// `β_t = beta0 / (1+t)^exp_beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScpgConfig {
    pub alpha0: f64,
    #[serde(default = "default_beta0")]
    pub beta0: f64,
    #[serde(default = "default_exp_alpha")]
    pub exp_alpha: f64,
    #[serde(default = "default_exp_beta")]
    pub exp_beta: f64,
    pub iters: usize,
    pub seed: u64,
}

fn default_beta0() -> f64 {
    1.0
}

fn default_exp_alpha() -> f64 {
    0.75
}

fn default_exp_beta() -> f64 {
    0.5
}

impl ScpgConfig {
    pub fn new(alpha0: f64, iters: usize, seed: u64) -> Self {
        Self {
            alpha0,
            beta0: default_beta0(),
            exp_alpha: default_exp_alpha(),
            exp_beta: default_exp_beta(),
            iters,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("alpha0", self.alpha0)?;
        positive("beta0", self.beta0)?;
        if self.beta0 > 1.0 {
            return Err(Error::InvalidConfig(format!(
                "beta0 must not exceed 1 (the running average would extrapolate), got {}",
                self.beta0
            )));
        }
        for (name, e) in [("exp_alpha", self.exp_alpha), ("exp_beta", self.exp_beta)] {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must lie in (0, 1], got {e}"
                )));
            }
        }
        at_least_one("iters", self.iters)
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha0 / (1.0 + t as f64).powf(self.exp_alpha)
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta0 / (1.0 + t as f64).powf(self.exp_beta)
    }
}

/// Stochastic compositional gradient with a proximal step:
///
/// ```text
/// y ← (1 − β_t) y + β_t G_j(x)
/// x ← prox_{α_t h}(x − α_t ∇G_j(x)ᵀ ∇F_i(y))
/// ```
///
/// with `j` then `i` drawn uniformly per iteration. The running estimate `y`
/// starts at zero. Three queries per iteration.
pub fn scpg_baseline<P: CompositionProblem>(
    problem: &P,
    h: &Regularizer,
    cfg: &ScpgConfig,
    opts: &RunOptions,
) -> Result<SolveResult> {
    cfg.validate()?;
    let x0 = opts.start(problem.dim_x())?;
    check_x(problem, &x0)?;
    let step_cost = scpg_cost(1).total();

    let oracle = Counted::new(problem);
    let raw = Composed(problem);
    let recorder = Recorder::new(&raw, *h, cfg.alpha0, &opts.trace);
    let (mut run, hit) = RunState::new(recorder, opts, &x0, oracle.counts())?;
    if hit {
        return run.finish(0, 0, x0, oracle.counts(), StopReason::GapReached);
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut x = x0;
    let mut y = Vector::zeros(problem.dim_y());
    for t in 0..cfg.iters {
        if let Some(stop) = run.budget_stop(oracle.counts(), step_cost) {
            return run.finish(0, t, x, oracle.counts(), stop);
        }
        let j = rng.index(problem.n_inner());
        let value = oracle.inner_value(j, &x);
        let jac = oracle.inner_jacobian(j, &x);
        let beta = cfg.beta(t);
        y = y * (1.0 - beta) + value * beta;
        let i = rng.index(problem.n_outer());
        let grad = jac.tr_mul(&oracle.outer_gradient(i, &y));
        let alpha = cfg.alpha(t);
        let next = h.prox(&(&x - grad * alpha), alpha)?;
        if !check_finite(&next) || !check_finite(&y) {
            return Err(run.diverged(0, t + 1, x, oracle.counts()));
        }
        x = next;
        match run.step(0, t + 1, oracle.counts(), &x)? {
            Step::Continue => {}
            Step::GapReached => {
                return run.finish(0, t + 1, x, oracle.counts(), StopReason::GapReached)
            }
            Step::Diverged => return Err(run.diverged(0, t + 1, x, oracle.counts())),
        }
    }
    run.finish(0, cfg.iters, x, oracle.counts(), StopReason::Completed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;
    use crate::oracle::QueryCounts;
    use crate::problems::{gen_linquad, LinQuadProblem};

    #[test]
    fn unit_beta_single_inner_component_uses_exact_inner_value() {
        let q = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]);
        let c = Vector::from_vec(vec![0.1, -0.3]);
        let b = vec![
            Vector::from_vec(vec![1.0, 0.0]),
            Vector::from_vec(vec![0.0, 1.0]),
        ];
        let p = LinQuadProblem::new(vec![q.clone()], vec![c.clone()], b.clone()).unwrap();
        let mut cfg = ScpgConfig::new(0.1, 5, 3);
        // (1+t)^1e-300 rounds to 1, so β_t = 1 at every step.
        cfg.exp_beta = 1e-300;
        let opts = RunOptions {
            record_iterates: true,
            ..Default::default()
        };
        let res = scpg_baseline(&p, &Regularizer::Zero, &cfg, &opts).unwrap();
        // Replay the outer index draws: j is always 0, i comes second.
        let mut rng = RngStream::new(3);
        let mut x = Vector::zeros(2);
        for (t, it) in res.iterates[1..].iter().enumerate() {
            let _j = rng.index(1);
            let i = rng.index(2);
            let y = &q * &x + &c;
            let grad = q.tr_mul(&(y - &b[i]));
            x = &x - grad * cfg.alpha(t);
            assert!((&x - it).amax() < 1e-14);
        }
    }

    #[test]
    fn three_queries_per_iteration() {
        let mut rng = RngStream::new(61);
        let p = gen_linquad(5, 4, 3, 3, 0.2, &mut rng).unwrap();
        let res = scpg_baseline(
            &p,
            &Regularizer::l1(0.01).unwrap(),
            &ScpgConfig::new(0.05, 37, 1),
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(res.counts, QueryCounts::new(37, 37, 37));
    }

    #[test]
    fn schedule_and_validation() {
        let c = ScpgConfig::new(1.0, 10, 0);
        assert_eq!(c.alpha(0), 1.0);
        assert!((c.alpha(15) - 16f64.powf(-0.75)).abs() < 1e-15);
        assert!((c.beta(3) - 0.5).abs() < 1e-15);
        let mut bad = c.clone();
        bad.exp_alpha = 1.5;
        assert!(bad.validate().is_err());
        let mut bad = c.clone();
        bad.beta0 = 2.0;
        assert!(bad.validate().is_err());
        let mut bad = c;
        bad.alpha0 = 0.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reduces_the_objective() {
        let mut rng = RngStream::new(62);
        let p = gen_linquad(20, 20, 3, 4, 0.2, &mut rng).unwrap();
        let res = scpg_baseline(
            &p,
            &Regularizer::Zero,
            &ScpgConfig::new(0.3, 3000, 5),
            &RunOptions::default(),
        )
        .unwrap();
        let first = res.trace.first().unwrap().objective;
        let last = res.trace.last().unwrap().objective;
        assert!(last < first);
    }
}
