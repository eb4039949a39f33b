use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::Recorder;
use crate::numerics::RngStream;
use crate::oracle::{Counted, QueryCounts};
use crate::problems::{FiniteSumObjective, FiniteSumProblem};
use crate::regularizers::Regularizer;

use super::{
    at_least_one, check_finite, positive, RunOptions, RunState, SolveResult, Step, StopReason,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxSvrgConfig {
    pub eta: f64,
    pub m: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl ProxSvrgConfig {
    pub fn validate(&self) -> Result<()> {
        positive("eta", self.eta)?;
        at_least_one("m", self.m)?;
        at_least_one("epochs", self.epochs)
    }
}

/// Proximal SVRG for `min (1/n) Σ f_i(x) + h(x)`.
///
/// Per epoch: full gradient `f'` at `x̃` (`n` queries), then `m` steps with
/// `v = ∇f_i(x) − ∇f_i(x̃) + f'` (2 queries each) and
/// `x ← prox_{ηh}(x − η v)`. Component-gradient queries are tallied as
/// outer-gradient queries.
pub fn prox_svrg<P: FiniteSumProblem>(
    problem: &P,
    h: &Regularizer,
    cfg: &ProxSvrgConfig,
    opts: &RunOptions,
) -> Result<SolveResult> {
    cfg.validate()?;
    let n = problem.n_components();
    let x0 = opts.start(problem.dim())?;
    let epoch_cost = n as u64 + 2;
    let step_cost = 2;

    let oracle = Counted::new(problem);
    let raw = FiniteSumObjective(problem);
    let recorder = Recorder::new(&raw, *h, cfg.eta, &opts.trace);
    let (mut run, hit) = RunState::new(recorder, opts, &x0, QueryCounts::default())?;
    if hit {
        return run.finish(0, 0, x0, oracle.counts(), StopReason::GapReached);
    }
    let mut rng = RngStream::new(cfg.seed);
    let mut x_tilde = x0;
    for s in 0..cfg.epochs {
        if let Some(stop) = run.budget_stop(oracle.counts(), epoch_cost) {
            return run.finish(s, 0, x_tilde, oracle.counts(), stop);
        }
        let full = oracle.mean_gradient(&x_tilde);
        let mut x = x_tilde.clone();
        for t in 0..cfg.m {
            if t > 0 {
                if let Some(stop) = run.budget_stop(oracle.counts(), step_cost) {
                    return run.finish(s + 1, t, x, oracle.counts(), stop);
                }
            }
            let i = rng.index(n);
            let v =
                oracle.component_gradient(i, &x) - oracle.component_gradient(i, &x_tilde) + &full;
            let next = h.prox(&(&x - v * cfg.eta), cfg.eta)?;
            if !check_finite(&next) {
                return Err(run.diverged(s + 1, t + 1, x, oracle.counts()));
            }
            x = next;
            match run.step(s + 1, t + 1, oracle.counts(), &x)? {
                Step::Continue => {}
                Step::GapReached => {
                    return run.finish(s + 1, t + 1, x, oracle.counts(), StopReason::GapReached)
                }
                Step::Diverged => return Err(run.diverged(s + 1, t + 1, x, oracle.counts())),
            }
        }
        x_tilde = x;
    }
    run.finish(
        cfg.epochs,
        cfg.m,
        x_tilde,
        oracle.counts(),
        StopReason::Completed,
    )
}
