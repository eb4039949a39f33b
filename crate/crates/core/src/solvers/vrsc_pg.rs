use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::Recorder;
use crate::numerics::{sample_with_replacement, RngStream};
use crate::oracle::{full_gradient_cost, vrsc_pg_inner_cost, Counted};
use crate::problems::{check_x, Composed, CompositionProblem};
use crate::regularizers::Regularizer;

use super::estimators::{
    estimate_gradient_vt, estimate_inner_jacobian, estimate_inner_value, Snapshot,
};
use super::{
    at_least_one, check_finite, positive, RunOptions, RunState, SolveResult, Step, StopReason,
};

/// How the per-iteration index sets are formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSampling {
    /// `A`, `B` and `b1` indices drawn uniformly with replacement, independently.
    #[default]
    WithReplacement,
    /// Every index exactly once (`A = B = n2`, `b1 = n1` are implied); no
    /// randomness is consumed.
    FullPass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VrscpgConfig {
    pub eta: f64,
    /// Inner iterations per epoch.
    pub m: usize,
    pub epochs: usize,
    /// Inner-value mini-batch size.
    pub a: usize,
    /// Inner-Jacobian mini-batch size.
    pub b: usize,
    /// Outer-gradient mini-batch size.
    pub b1: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampling: IndexSampling,
}

impl VrscpgConfig {
    pub fn validate(&self) -> Result<()> {
        positive("eta", self.eta)?;
        at_least_one("m", self.m)?;
        at_least_one("epochs", self.epochs)?;
        at_least_one("A", self.a)?;
        at_least_one("B", self.b)?;
        at_least_one("b1", self.b1)
    }

    /// Mini-batch sizes actually used on a problem.
    pub fn batch_sizes(&self, n1: usize, n2: usize) -> (usize, usize, usize) {
        match self.sampling {
            IndexSampling::WithReplacement => (self.a, self.b, self.b1),
            IndexSampling::FullPass => (n2, n2, n1),
        }
    }
}

/// Variance-reduced stochastic compositional proximal gradient.
///
/// Each epoch takes a snapshot at `x̃` (full inner value, inner Jacobian and
/// gradient), then runs `m` inner steps
/// `x ← prox_{ηh}(x − η v)` where `v` is built from independent mini-batches
/// `A`, `B` (inner) and `I` (outer), drawn in that order. The last inner
/// iterate becomes the next snapshot point.
pub fn vrsc_pg<P: CompositionProblem>(
    problem: &P,
    h: &Regularizer,
    cfg: &VrscpgConfig,
    opts: &RunOptions,
) -> Result<SolveResult> {
    cfg.validate()?;
    let x0 = opts.start(problem.dim_x())?;
    check_x(problem, &x0)?;
    let (n1, n2) = (problem.n_outer(), problem.n_inner());
    let (a, b, b1) = cfg.batch_sizes(n1, n2);
    let snapshot_cost = full_gradient_cost(n1, n2).total();
    let step_cost = vrsc_pg_inner_cost(a, b, b1).total();

    let oracle = Counted::new(problem);
    let raw = Composed(problem);
    let recorder = Recorder::new(&raw, *h, cfg.eta, &opts.trace);
    let (mut run, hit) = RunState::new(recorder, opts, &x0, oracle.counts())?;
    if hit {
        return run.finish(0, 0, x0, oracle.counts(), StopReason::GapReached);
    }
    let mut rng = RngStream::new(cfg.seed);
    let full_inner: Vec<usize> = (0..n2).collect();
    let full_outer: Vec<usize> = (0..n1).collect();
    let draw = |rng: &mut RngStream, n: usize, k: usize, full: &[usize]| -> Result<Vec<usize>> {
        match cfg.sampling {
            IndexSampling::WithReplacement => sample_with_replacement(rng, n, k),
            IndexSampling::FullPass => Ok(full.to_vec()),
        }
    };

    let mut x_tilde = x0;
    for s in 0..cfg.epochs {
        if let Some(stop) = run.budget_stop(oracle.counts(), snapshot_cost + step_cost) {
            return run.finish(s, 0, x_tilde, oracle.counts(), stop);
        }
        let snap = Snapshot::compute(&oracle, &x_tilde)?;
        let mut x = x_tilde.clone();
        for t in 0..cfg.m {
            if t > 0 {
                if let Some(stop) = run.budget_stop(oracle.counts(), step_cost) {
                    return run.finish(s + 1, t, x, oracle.counts(), stop);
                }
            }
            let a_idx = draw(&mut rng, n2, a, &full_inner)?;
            let g_hat = estimate_inner_value(&snap, &oracle, &x, &a_idx)?;
            let b_idx = draw(&mut rng, n2, b, &full_inner)?;
            let j_hat = estimate_inner_jacobian(&snap, &oracle, &x, &b_idx)?;
            let i_idx = draw(&mut rng, n1, b1, &full_outer)?;
            let v = estimate_gradient_vt(&snap, &oracle, &g_hat, &j_hat, &i_idx)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::TraceOptions;
    use crate::numerics::{Matrix, Vector};
    use crate::oracle::vrsc_pg_cost_by_kind;
    use crate::problems::{full_gradient, gen_linquad, PortfolioProblem};
    use crate::solvers::Budget;
    use crate::Error;

    fn cfg(eta: f64, m: usize, epochs: usize) -> VrscpgConfig {
        VrscpgConfig {
            eta,
            m,
            epochs,
            a: 2,
            b: 2,
            b1: 2,
            seed: 9,
            sampling: IndexSampling::WithReplacement,
        }
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let mut rng = RngStream::new(51);
        let p = gen_linquad(6, 5, 3, 4, 0.3, &mut rng).unwrap();
        let x_star = p.minimizer().unwrap();
        let opts = RunOptions {
            x0: Some(x_star.clone()),
            ..Default::default()
        };
        let res = vrsc_pg(&p, &Regularizer::Zero, &cfg(0.1, 4, 3), &opts).unwrap();
        assert!((res.x_final - x_star).amax() < 1e-10);
    }

    #[test]
    fn counts_match_closed_form_and_trace_is_monotone() {
        let mut rng = RngStream::new(52);
        let p = gen_linquad(7, 5, 3, 4, 0.3, &mut rng).unwrap();
        let c = cfg(0.05, 6, 4);
        let res = vrsc_pg(
            &p,
            &Regularizer::l1(0.01).unwrap(),
            &c,
            &RunOptions::default(),
        )
        .unwrap();
        assert_eq!(res.counts, vrsc_pg_cost_by_kind(7, 5, 6, 2, 2, 2, 4));
        assert_eq!(res.stop, StopReason::Completed);
        assert_eq!(res.trace.len(), 1 + 6 * 4);
        for w in res.trace.windows(2) {
            assert!(w[1].wall_ms >= w[0].wall_ms);
            assert!(w[1].queries().total() > w[0].queries().total());
        }
    }

    #[test]
    fn same_seed_same_iterates() {
        let mut rng = RngStream::new(53);
        let p = gen_linquad(8, 6, 3, 4, 0.3, &mut rng).unwrap();
        let opts = RunOptions {
            record_iterates: true,
            ..Default::default()
        };
        let r1 = vrsc_pg(&p, &Regularizer::l1(0.05).unwrap(), &cfg(0.1, 5, 3), &opts).unwrap();
        let r2 = vrsc_pg(&p, &Regularizer::l1(0.05).unwrap(), &cfg(0.1, 5, 3), &opts).unwrap();
        assert_eq!(r1.iterates, r2.iterates);
        let mut other = cfg(0.1, 5, 3);
        other.seed = 10;
        let r3 = vrsc_pg(&p, &Regularizer::l1(0.05).unwrap(), &other, &opts).unwrap();
        assert_ne!(r1.iterates, r3.iterates);
    }

    #[test]
    fn single_step_epochs_are_proximal_gradient_steps() {
        let mut rng = RngStream::new(54);
        let p = gen_linquad(6, 5, 3, 4, 0.3, &mut rng).unwrap();
        let h = Regularizer::l1(0.1).unwrap();
        let opts = RunOptions {
            record_iterates: true,
            ..Default::default()
        };
        let res = vrsc_pg(&p, &h, &cfg(0.2, 1, 10), &opts).unwrap();
        let mut x = Vector::zeros(3);
        for it in &res.iterates[1..] {
            x = h
                .prox(&(&x - full_gradient(&p, &x).unwrap() * 0.2), 0.2)
                .unwrap();
            assert!((&x - it).amax() < 1e-12);
        }
    }

    #[test]
    fn query_budget_is_respected() {
        let mut rng = RngStream::new(55);
        let p = gen_linquad(10, 10, 3, 4, 0.3, &mut rng).unwrap();
        let opts = RunOptions {
            budget: Budget::queries(200),
            ..Default::default()
        };
        let res = vrsc_pg(&p, &Regularizer::Zero, &cfg(0.1, 20, 50), &opts).unwrap();
        assert_eq!(res.stop, StopReason::QueryBudget);
        assert!(res.counts.total() <= 200);
        assert_eq!(res.trace.last().unwrap().queries(), res.counts);
    }

    #[test]
    fn divergence_is_reported_with_partial_trace() {
        let p = PortfolioProblem::new(Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 1.5])).unwrap();
        let err = vrsc_pg(
            &p,
            &Regularizer::Zero,
            &cfg(1e6, 50, 100),
            &RunOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::Diverged { partial, .. } => {
                assert!(!partial.trace.is_empty());
                assert!(partial.x_final.iter().all(|v| v.is_finite()));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn invalid_configuration() {
        let mut rng = RngStream::new(56);
        let p = gen_linquad(2, 2, 2, 2, 0.3, &mut rng).unwrap();
        let mut c = cfg(0.1, 1, 1);
        c.a = 0;
        assert!(vrsc_pg(&p, &Regularizer::Zero, &c, &RunOptions::default()).is_err());
        let c = cfg(-0.1, 1, 1);
        assert!(vrsc_pg(&p, &Regularizer::Zero, &c, &RunOptions::default()).is_err());
    }

    #[test]
    fn stride_and_stop_gap() {
        let mut rng = RngStream::new(57);
        let p = gen_linquad(6, 6, 3, 4, 0.3, &mut rng).unwrap();
        let reference =
            crate::solvers::solve_reference(&Composed(&p), &Regularizer::Zero, 1e-12).unwrap();
        let opts = RunOptions {
            trace: TraceOptions {
                stride: 5,
                gradient_metrics: false,
                reference: Some(reference),
                stop_gap: Some(1e-8),
                ..Default::default()
            },
            ..Default::default()
        };
        let res = vrsc_pg(&p, &Regularizer::Zero, &cfg(0.3, 5, 200), &opts).unwrap();
        assert_eq!(res.stop, StopReason::GapReached);
        let last = res.trace.last().unwrap();
        assert!(last.gap <= 1e-8);
        assert!(last.grad_map_sq.is_nan());
        assert!(res.trace.iter().all(|r| r.inner_iter % 5 == 0));
    }
}
