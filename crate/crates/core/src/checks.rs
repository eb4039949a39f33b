//! Built-in verification suite.
//!
//! Each check builds its own small instances from a fixed seed, measures one
//! property, and reports the measured value next to its threshold. The CLI
//! `check` command and the acceptance tests both drive this module.
//!
//! [`Fault`] injects a known defect into the code under test so the suite can
//! demonstrate that it notices.

use std::fmt;

use crate::error::Result;
use crate::metrics::{
    composite_grad_sq, grad_map_sq, objective_h, ReferenceOptimum, TraceOptions, TraceRecord,
};
use crate::numerics::{
    central_difference_gradient, l2_norm_sq, relative_error, sample_with_replacement, RngStream,
    Vector, FD_STEP,
};
use crate::oracle::{
    counted, prox_full_gradient_cost, prox_svrg_cost, scpg_cost, vrsc_pg_cost,
    vrsc_pg_cost_by_kind, QueryCounts,
};
use crate::problems::{
    estimate_smoothness, full_gradient, full_inner_jacobian, full_inner_value,
    gen_gaussian_rewards, gen_lasso, gen_linquad, gen_mdp, objective_f, Composed,
    CompositionProblem, FiniteSumObjective, LassoProblem, PolicyEvalProblem, PortfolioProblem,
    SmoothObjective,
};
use crate::regularizers::Regularizer;
use crate::solvers::{
    estimate_gradient_vt, estimate_inner_jacobian, estimate_inner_value, linear_rate_factor,
    prox_full_gradient, prox_svrg, proximal_gradient_descent, scpg_baseline, solve_reference,
    sublinear_rate_condition, suggest_params_general, suggest_params_strongly_convex, vrsc_pg,
    Budget, IndexSampling, ProblemConstants, ProxGradConfig, ProxSvrgConfig, RunOptions,
    ScpgConfig, Snapshot, SolveResult, VrscpgConfig,
};

/// A deliberately broken component, for testing the suite itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Fault {
    #[default]
    None,
    /// The L1 prox under test soft-thresholds at half the correct level.
    HalvedThreshold,
    /// Live inner-value counts read one higher than they are.
    CountOffByOne,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub seed: u64,
    /// Resamples for the unbiasedness check.
    pub resamples: usize,
    /// Independent solver seeds for the median-over-seeds checks.
    pub seeds: usize,
    /// Query budget per run in the portfolio ordering check.
    pub ordering_budget: u64,
    pub fault: Fault,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 20170,
            resamples: 100_000,
            seeds: 5,
            ordering_budget: 1_000_000,
            fault: Fault::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: String,
    pub passed: bool,
    /// Measured values against their thresholds.
    pub detail: String,
}

impl Outcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Runs a check, turning an error into a failed outcome.
fn guarded(name: &str, check: impl FnOnce() -> Result<Outcome>) -> Outcome {
    check().unwrap_or_else(|e| Outcome::new(name, false, format!("error: {e}")))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Least-squares line through `(x, y)`: returns `(slope, r²)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, r2)
}

/// Minimizer of a unimodal scalar function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..iters {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

fn prox_under_test(h: &Regularizer, x: &Vector, eta: f64, fault: Fault) -> Result<Vector> {
    match (fault, h) {
        (Fault::HalvedThreshold, Regularizer::L1 { lambda }) => {
            Regularizer::l1(lambda / 2.0)?.prox(x, eta)
        }
        _ => h.prox(x, eta),
    }
}

fn live_counts(res: &SolveResult, fault: Fault) -> QueryCounts {
    let mut c = res.counts;
    if fault == Fault::CountOffByOne {
        c.inner_value += 1;
    }
    c
}

fn gaussian(rng: &mut RngStream, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.standard_normal())
}

fn quiet_trace() -> TraceOptions {
    TraceOptions {
        stride: usize::MAX,
        gradient_metrics: false,
        ..Default::default()
    }
}

fn portfolio(rng: &mut RngStream, n: usize, assets: usize, kappa: f64) -> Result<PortfolioProblem> {
    PortfolioProblem::new(gen_gaussian_rewards(n, assets, kappa, rng)?)
}

fn policy(rng: &mut RngStream, states: usize, gamma: f64) -> Result<PolicyEvalProblem> {
    let (p, r) = gen_mdp(states, 3, rng)?;
    PolicyEvalProblem::new(p, r, gamma)
}

fn lasso(rng: &mut RngStream, n: usize, d: usize) -> Result<LassoProblem> {
    gen_lasso(n, d, 0.1, rng)
}

/// The three composition problem kinds at small sizes.
fn composition_zoo(
    rng: &mut RngStream,
) -> Result<Vec<(&'static str, Box<dyn CompositionProblem>)>> {
    Ok(vec![
        ("portfolio", Box::new(portfolio(rng, 30, 6, 3.0)?)),
        ("policy_eval", Box::new(policy(rng, 8, 0.9)?)),
        ("linquad", Box::new(gen_linquad(7, 5, 4, 6, 0.3, rng)?)),
    ])
}

// ---------------------------------------------------------------------------
// Acceptance criteria
// ---------------------------------------------------------------------------

/// Estimators reproduce the snapshot quantities exactly at `x = x̃`.
pub fn snapshot_exactness(s: &Settings) -> Outcome {
    let name = "snapshot exactness";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed);
        let zoo = composition_zoo(&mut rng)?;
        let mut worst = 0.0f64;
        for trial in 0..100 {
            let (_, p) = &zoo[trial % zoo.len()];
            let p = p.as_ref();
            let x_tilde = gaussian(&mut rng, p.dim_x());
            let snap = Snapshot::compute(p, &x_tilde)?;
            let k = 1 + rng.index(6);
            let a = sample_with_replacement(&mut rng, p.n_inner(), k)?;
            let k = 1 + rng.index(6);
            let b = sample_with_replacement(&mut rng, p.n_inner(), k)?;
            let k = 1 + rng.index(6);
            let i = sample_with_replacement(&mut rng, p.n_outer(), k)?;
            let g = estimate_inner_value(&snap, p, &x_tilde, &a)?;
            let j = estimate_inner_jacobian(&snap, p, &x_tilde, &b)?;
            let v = estimate_gradient_vt(&snap, p, &g, &j, &i)?;
            worst = worst
                .max((&g - &snap.inner_value).amax())
                .max((&j - &snap.inner_jacobian).amax())
                .max((&v - full_gradient(p, &x_tilde)?).amax());
        }
        Ok(Outcome::new(
            name,
            worst <= 1e-12,
            format!("max deviation {worst:.3e} over 100 states (tol 1e-12)"),
        ))
    })
}

/// Largest |z|-score of the estimator means over `resamples` draws, with
/// deterministic entries (zero spread) checked for exact agreement instead.
fn max_z_score(samples_sum: &[f64], samples_sq: &[f64], truth: &[f64], r: usize) -> (f64, f64) {
    let n = r as f64;
    let mut z_max = 0.0f64;
    let mut exact_dev = 0.0f64;
    for k in 0..truth.len() {
        let mean = samples_sum[k] / n;
        let var = (samples_sq[k] / n - mean * mean).max(0.0) * n / (n - 1.0);
        let se = (var / n).sqrt();
        let dev = (mean - truth[k]).abs();
        if se <= 1e-12 * (1.0 + truth[k].abs()) {
            exact_dev = exact_dev.max(dev / (1.0 + truth[k].abs()));
        } else {
            z_max = z_max.max(dev / se);
        }
    }
    (z_max, exact_dev)
}

/// Monte-Carlo means of `Ĝ` and `∇Ĝ` sit within 4 standard errors of the
/// exact values on the portfolio and policy-evaluation problems.
pub fn estimator_unbiasedness(s: &Settings) -> Outcome {
    let name = "estimator unbiasedness";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 1);
        let problems: Vec<(&str, Box<dyn CompositionProblem>)> = vec![
            ("portfolio", Box::new(portfolio(&mut rng, 40, 8, 2.0)?)),
            ("policy_eval", Box::new(policy(&mut rng, 10, 0.9)?)),
        ];
        let (a, b) = (5, 5);
        let mut z_worst = 0.0f64;
        let mut exact_worst = 0.0f64;
        for (_, p) in &problems {
            let p = p.as_ref();
            for _ in 0..5 {
                let x_tilde = gaussian(&mut rng, p.dim_x());
                let x = gaussian(&mut rng, p.dim_x());
                let snap = Snapshot::compute(p, &x_tilde)?;
                let g_true = full_inner_value(p, &x)?;
                let j_true = full_inner_jacobian(p, &x)?;
                let (dg, dj) = (g_true.len(), j_true.len());
                let mut sum = vec![0.0; dg + dj];
                let mut sq = vec![0.0; dg + dj];
                for _ in 0..s.resamples {
                    let ai = sample_with_replacement(&mut rng, p.n_inner(), a)?;
                    let bi = sample_with_replacement(&mut rng, p.n_inner(), b)?;
                    let g = estimate_inner_value(&snap, p, &x, &ai)?;
                    let j = estimate_inner_jacobian(&snap, p, &x, &bi)?;
                    for (k, v) in g.iter().chain(j.iter()).enumerate() {
                        sum[k] += v;
                        sq[k] += v * v;
                    }
                }
                let truth: Vec<f64> = g_true.iter().chain(j_true.iter()).copied().collect();
                let (z, e) = max_z_score(&sum, &sq, &truth, s.resamples);
                z_worst = z_worst.max(z);
                exact_worst = exact_worst.max(e);
            }
        }
        Ok(Outcome::new(
            name,
            z_worst <= 4.0 && exact_worst <= 1e-10,
            format!(
                "max |z| {z_worst:.3} (limit 4) over {} resamples, deterministic entries off by {exact_worst:.1e}",
                s.resamples
            ),
        ))
    })
}

/// VRSC-PG with exact full passes and `m = 1` is proximal gradient descent.
pub fn full_batch_degeneration(s: &Settings) -> Outcome {
    let name = "full-batch degeneration";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 2);
        let p = gen_linquad(12, 9, 5, 7, 0.3, &mut rng)?;
        let h = Regularizer::l1(0.02)?;
        let eta = 0.5 / estimate_smoothness(&Composed(&p), &Vector::zeros(5), 100)?;
        let opts = RunOptions {
            x0: Some(gaussian(&mut rng, 5)),
            trace: quiet_trace(),
            record_iterates: true,
            ..Default::default()
        };
        let cfg = VrscpgConfig {
            eta,
            m: 1,
            epochs: 50,
            a: 1,
            b: 1,
            b1: 1,
            seed: 0,
            sampling: IndexSampling::FullPass,
        };
        let vr = vrsc_pg(&p, &h, &cfg, &opts)?;
        let pg_cfg = ProxGradConfig {
            eta,
            max_iters: 50,
            tol: 0.0,
        };
        let pg = prox_full_gradient(&p, &h, &pg_cfg, &opts)?;
        let steps = vr.iterates.len().min(pg.iterates.len());
        let worst = vr
            .iterates
            .iter()
            .zip(&pg.iterates)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        Ok(Outcome::new(
            name,
            steps == 51 && worst <= 1e-12,
            format!(
                "max stepwise deviation {worst:.3e} over {} steps (tol 1e-12)",
                steps - 1
            ),
        ))
    })
}

/// `full_gradient` agrees with central differences of the objective on every
/// problem kind.
pub fn gradient_correctness(s: &Settings) -> Outcome {
    let name = "gradient correctness";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 3);
        let zoo = composition_zoo(&mut rng)?;
        let lasso = lasso(&mut rng, 20, 6)?;
        let mut objectives: Vec<(&str, Box<dyn SmoothObjective + '_>)> = zoo
            .iter()
            .map(|(n, p)| {
                (
                    *n,
                    Box::new(Composed(p.as_ref())) as Box<dyn SmoothObjective>,
                )
            })
            .collect();
        objectives.push(("lasso", Box::new(FiniteSumObjective(&lasso))));
        let mut worst = 0.0f64;
        for (_, obj) in &objectives {
            for _ in 0..20 {
                let x = gaussian(&mut rng, obj.dim());
                let analytic = obj.gradient(&x)?;
                let fd =
                    central_difference_gradient(|z| obj.value(z).unwrap_or(f64::NAN), &x, FD_STEP)?;
                worst = worst.max(relative_error(&analytic, &fd, 1.0));
            }
        }
        Ok(Outcome::new(
            name,
            worst <= 1e-5,
            format!("max relative error {worst:.3e} over 4 kinds x 20 points (tol 1e-5)"),
        ))
    })
}

/// Soft-thresholding matches a numerical 1-D minimizer and is nonexpansive.
pub fn prox_correctness(s: &Settings) -> Outcome {
    let name = "prox correctness";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 4);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let x = 2.0 * rng.standard_normal();
            let lambda = 2.0 * rng.uniform();
            let eta = 0.01 + 2.0 * rng.uniform();
            let h = Regularizer::l1(lambda)?;
            let obj = |z: f64| lambda * z.abs() + (z - x).powi(2) / (2.0 * eta);
            let reach = x.abs() + lambda * eta + 1.0;
            let oracle = golden_section(obj, -reach, reach, 200);
            let got = prox_under_test(&h, &Vector::from_element(1, x), eta, s.fault)?[0];
            worst = worst.max((got - oracle).abs());
        }
        let mut expansion = 0.0f64;
        for _ in 0..1000 {
            let h = Regularizer::l1(rng.uniform())?;
            let eta = 0.01 + rng.uniform();
            let a = gaussian(&mut rng, 5);
            let b = gaussian(&mut rng, 5);
            let pa = prox_under_test(&h, &a, eta, s.fault)?;
            let pb = prox_under_test(&h, &b, eta, s.fault)?;
            expansion = expansion.max((pa - pb).norm() - (a - b).norm());
        }
        Ok(Outcome::new(
            name,
            worst <= 1e-6 && expansion <= 1e-12,
            format!("max oracle deviation {worst:.3e} (tol 1e-6), max expansion {expansion:.3e}"),
        ))
    })
}

/// Lasso via Prox-SVRG against ISTA.
pub fn recovery_lasso(s: &Settings) -> Outcome {
    let name = "closed-form recovery (lasso, Prox-SVRG vs ISTA)";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 5);
        let p = lasso(&mut rng, 60, 8)?;
        let h = Regularizer::l1(0.1)?;
        let obj = FiniteSumObjective(&p);
        let l = estimate_smoothness(&obj, &Vector::zeros(8), 200)?;
        let (ista, _) =
            proximal_gradient_descent(&obj, &h, 1.0 / l, Vector::zeros(8), 1_000_000, 1e-15)?;
        let l_max = (0..60)
            .map(|i| p.design().row(i).norm_squared())
            .fold(0.0, f64::max);
        let cfg = ProxSvrgConfig {
            eta: 0.25 / l_max,
            m: 120,
            epochs: 400,
            seed: s.seed,
        };
        let res = prox_svrg(
            &p,
            &h,
            &cfg,
            &RunOptions {
                trace: quiet_trace(),
                ..Default::default()
            },
        )?;
        let dev = (res.x_final - ista).amax();
        Ok(Outcome::new(
            name,
            dev <= 1e-8,
            format!("max deviation {dev:.3e} (tol 1e-8)"),
        ))
    })
}

/// VRSC-PG on unregularized policy evaluation recovers the value function.
pub fn recovery_policy_values(s: &Settings) -> Outcome {
    let name = "closed-form recovery (policy values, VRSC-PG)";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 6);
        let p = policy(&mut rng, 50, 0.95)?;
        let exact = p.exact_values()?;
        let l = estimate_smoothness(&Composed(&p), &Vector::zeros(50), 200)?;
        // Sampled inner maps carry a factor S, so the stable step is far below 1/L.
        let cfg = VrscpgConfig {
            eta: 0.05 / l,
            m: 100,
            epochs: 2000,
            a: 5,
            b: 5,
            b1: 5,
            seed: s.seed,
            sampling: IndexSampling::WithReplacement,
        };
        let res = vrsc_pg(
            &p,
            &Regularizer::Zero,
            &cfg,
            &RunOptions {
                trace: quiet_trace(),
                ..Default::default()
            },
        )?;
        let dev = (res.x_final - exact).amax();
        Ok(Outcome::new(
            name,
            dev <= 1e-6,
            format!("sup-norm error {dev:.3e} (tol 1e-6)"),
        ))
    })
}

/// Deterministic proximal gradient on LinQuad reaches the linear-solve optimum.
pub fn recovery_linquad(s: &Settings) -> Outcome {
    let name = "closed-form recovery (LinQuad, full proximal gradient)";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 7);
        let p = gen_linquad(15, 12, 6, 8, 0.3, &mut rng)?;
        let l = estimate_smoothness(&Composed(&p), &Vector::zeros(6), 200)?;
        let cfg = ProxGradConfig {
            eta: 1.0 / l,
            max_iters: 1_000_000,
            tol: 1e-14,
        };
        let res = prox_full_gradient(
            &p,
            &Regularizer::Zero,
            &cfg,
            &RunOptions {
                trace: quiet_trace(),
                ..Default::default()
            },
        )?;
        let dev = (res.x_final - p.minimizer()?).amax();
        Ok(Outcome::new(
            name,
            dev <= 1e-8,
            format!("max deviation {dev:.3e} (tol 1e-8)"),
        ))
    })
}

/// Live query counters equal the closed-form predictions for random
/// configurations of every solver.
pub fn query_accounting(s: &Settings) -> Outcome {
    let name = "query accounting";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 8);
        let mut mismatches = Vec::new();
        let quiet = RunOptions {
            trace: quiet_trace(),
            ..Default::default()
        };
        for trial in 0..20 {
            let (n1, n2) = (1 + rng.index(12), 1 + rng.index(12));
            let p = gen_linquad(n1, n2, 3, 4, 0.2, &mut rng)?;
            let h = Regularizer::l1(0.01)?;

            let cfg = VrscpgConfig {
                eta: 0.01,
                m: 1 + rng.index(8),
                epochs: 1 + rng.index(5),
                a: 1 + rng.index(6),
                b: 1 + rng.index(6),
                b1: 1 + rng.index(6),
                seed: trial,
                sampling: IndexSampling::WithReplacement,
            };
            let live = live_counts(&vrsc_pg(&p, &h, &cfg, &quiet)?, s.fault);
            let predicted = vrsc_pg_cost_by_kind(n1, n2, cfg.m, cfg.a, cfg.b, cfg.b1, cfg.epochs);
            let total = vrsc_pg_cost(n1, n2, cfg.m, cfg.a, cfg.b, cfg.b1, cfg.epochs);
            if live != predicted || live.total() != total {
                mismatches.push(format!("vrsc_pg {live:?} vs {predicted:?}"));
            }

            let iters = 1 + rng.index(50);
            let live = live_counts(
                &scpg_baseline(&p, &h, &ScpgConfig::new(0.01, iters, trial), &quiet)?,
                s.fault,
            );
            if live != scpg_cost(iters) {
                mismatches.push(format!("scpg {live:?} vs {:?}", scpg_cost(iters)));
            }

            let iters = 1 + rng.index(20);
            let pg = ProxGradConfig {
                eta: 0.01,
                max_iters: iters,
                tol: 0.0,
            };
            let live = live_counts(&prox_full_gradient(&p, &h, &pg, &quiet)?, s.fault);
            if live != prox_full_gradient_cost(n1, n2, iters) {
                mismatches.push(format!("prox_full_gradient {live:?}"));
            }

            let n = 1 + rng.index(15);
            let fp = lasso(&mut rng, n, 3)?;
            let cfg = ProxSvrgConfig {
                eta: 0.001,
                m: 1 + rng.index(8),
                epochs: 1 + rng.index(5),
                seed: trial,
            };
            let live = live_counts(&prox_svrg(&fp, &h, &cfg, &quiet)?, s.fault);
            if live != prox_svrg_cost(n, cfg.m, cfg.epochs) {
                mismatches.push(format!("prox_svrg {live:?}"));
            }
        }
        Ok(Outcome::new(
            name,
            mismatches.is_empty(),
            if mismatches.is_empty() {
                "80 runs (4 solvers x 20 configs) match exactly".to_string()
            } else {
                format!("{} mismatches, first: {}", mismatches.len(), mismatches[0])
            },
        ))
    })
}

/// Records at epoch boundaries of a VRSC-PG run.
fn epoch_gaps(res: &SolveResult) -> (Vec<f64>, Vec<f64>) {
    let mut epochs = Vec::new();
    let mut gaps = Vec::new();
    for r in &res.trace {
        if r.gap > 0.0 {
            epochs.push(r.epoch as f64);
            gaps.push(r.gap.ln());
        }
    }
    (epochs, gaps)
}

/// Geometric decrease of the gap on a strongly convex LinQuad with L1.
pub fn linear_convergence(s: &Settings) -> Outcome {
    let name = "linear convergence";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 9);
        let p = gen_linquad(100, 100, 20, 25, 0.3, &mut rng)?;
        let h = Regularizer::l1(0.01)?;
        let reference = solve_reference(&Composed(&p), &h, 1e-13)?;
        let l = estimate_smoothness(&Composed(&p), &Vector::zeros(20), 200)?;
        let m = 50;
        let mut slopes = Vec::new();
        let mut r2s = Vec::new();
        let mut finals = Vec::new();
        let mut points = usize::MAX;
        for seed in 0..s.seeds as u64 {
            let cfg = VrscpgConfig {
                eta: 0.02 / l,
                m,
                epochs: 500,
                a: 5,
                b: 5,
                b1: 5,
                seed,
                sampling: IndexSampling::WithReplacement,
            };
            let opts = RunOptions {
                trace: TraceOptions {
                    stride: m,
                    gradient_metrics: false,
                    reference: Some(reference.clone()),
                    stop_gap: Some(1e-10),
                    ..Default::default()
                },
                ..Default::default()
            };
            let res = vrsc_pg(&p, &h, &cfg, &opts)?;
            let (epochs, gaps) = epoch_gaps(&res);
            points = points.min(epochs.len());
            let (slope, r2) = linear_fit(&epochs, &gaps);
            slopes.push(slope);
            r2s.push(r2);
            finals.push(res.trace.last().map_or(f64::INFINITY, |r| r.gap));
        }
        let slope = median(&mut slopes);
        let r2 = median(&mut r2s);
        let worst_final = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Outcome::new(
            name,
            slope < 0.0 && r2 >= 0.9 && worst_final <= 1e-8 && points >= 10,
            format!(
                "median slope {slope:.3e}/epoch, median R² {r2:.4} (min 0.9), worst final gap {worst_final:.2e} \
                 (max 1e-8), at least {points} epochs fitted"
            ),
        ))
    })
}

/// The strongly convex schedule at unit constants contracts by at most 2/3.
pub fn unit_rate_bound(_s: &Settings) -> Outcome {
    let name = "rate bound at unit constants";
    guarded(name, || {
        let c = ProblemConstants::unit();
        let p = suggest_params_strongly_convex(&c);
        let rho = linear_rate_factor(p.eta, p.m, p.a, p.b, &c)?;
        Ok(Outcome::new(
            name,
            rho <= 2.0 / 3.0 + 1e-9,
            format!(
                "rho {rho:.6} with eta 1/96, m {}, A {}, B {} (limit 2/3)",
                p.m, p.a, p.b
            ),
        ))
    })
}

/// Queries to the first recorded gap at or below `threshold`.
fn queries_to_gap(trace: &[TraceRecord], threshold: f64) -> Option<u64> {
    trace
        .iter()
        .find(|r| r.gap <= threshold)
        .map(|r| r.queries().total())
}

fn best_gap(trace: &[TraceRecord]) -> f64 {
    trace.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Method {
    Vrsc,
    Scpg,
}

/// Step sizes tried per solver, as in the portfolio experiments.
pub const ETA_GRID: [f64; 5] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];
pub const ORDERING_GAP: f64 = 1e-6;

fn ordering_run(
    p: &PortfolioProblem,
    h: &Regularizer,
    reference: &ReferenceOptimum,
    method: Method,
    eta: f64,
    seed: u64,
    budget: u64,
) -> Option<Vec<TraceRecord>> {
    let opts = RunOptions {
        trace: TraceOptions {
            stride: if method == Method::Vrsc { 5 } else { 50 },
            gradient_metrics: false,
            reference: Some(reference.clone()),
            stop_gap: Some(ORDERING_GAP),
            ..Default::default()
        },
        budget: Budget::queries(budget),
        ..Default::default()
    };
    let res = match method {
        Method::Vrsc => vrsc_pg(
            p,
            h,
            &VrscpgConfig {
                eta,
                m: 100,
                epochs: usize::MAX,
                a: 5,
                b: 5,
                b1: 5,
                seed,
                sampling: IndexSampling::WithReplacement,
            },
            &opts,
        ),
        Method::Scpg => scpg_baseline(p, h, &ScpgConfig::new(eta, usize::MAX, seed), &opts),
    };
    res.ok().map(|r| r.trace)
}

/// Tuning score: reaching the target sooner wins, then a smaller best gap.
fn tune_eta(
    p: &PortfolioProblem,
    h: &Regularizer,
    reference: &ReferenceOptimum,
    method: Method,
    budget: u64,
) -> f64 {
    let mut best = (u64::MAX, f64::INFINITY, ETA_GRID[0]);
    for eta in ETA_GRID {
        if let Some(trace) = ordering_run(p, h, reference, method, eta, 0, budget) {
            let hit = queries_to_gap(&trace, ORDERING_GAP).unwrap_or(u64::MAX);
            let gap = best_gap(&trace);
            if (hit, gap) < (best.0, best.1) || (hit == best.0 && gap < best.1) {
                best = (hit, gap, eta);
            }
        }
    }
    best.2
}

struct OrderingData {
    traces: Vec<Option<Vec<TraceRecord>>>,
    eta: f64,
}

/// VRSC-PG reaches a `1e-6` gap in fewer queries than the decaying-rate
/// baseline on portfolio instances with covariance condition numbers 2 and
/// 10, and both methods need more queries on the worse-conditioned one.
///
/// A run that never reaches a threshold within the budget counts as needing
/// infinitely many queries. When a method never reaches `1e-6` on the easier
/// instance, the conditioning comparison uses the smallest gap all of its
/// easier-instance runs did reach.
pub fn portfolio_ordering(s: &Settings) -> Outcome {
    let name = "portfolio ordering";
    guarded(name, || {
        let h = Regularizer::l1(1e-3)?;
        let mut details = Vec::new();
        let mut passed = true;
        let mut per_kappa = Vec::new();
        for kappa in [2.0, 10.0] {
            let mut rng = RngStream::new(s.seed + 10);
            let p = portfolio(&mut rng, 200, 50, kappa)?;
            let reference = solve_reference(&Composed(&p), &h, 1e-12)?;
            let mut data = Vec::new();
            for method in [Method::Vrsc, Method::Scpg] {
                let eta = tune_eta(&p, &h, &reference, method, s.ordering_budget);
                let traces = (1..=s.seeds as u64)
                    .map(|seed| {
                        ordering_run(&p, &h, &reference, method, eta, seed, s.ordering_budget)
                    })
                    .collect();
                data.push(OrderingData { traces, eta });
            }
            let hits = |d: &OrderingData| -> Vec<Option<u64>> {
                d.traces
                    .iter()
                    .map(|t| t.as_ref().and_then(|t| queries_to_gap(t, ORDERING_GAP)))
                    .collect()
            };
            let (vh, sh) = (hits(&data[0]), hits(&data[1]));
            let wins = vh
                .iter()
                .zip(&sh)
                .filter(|(v, s)| match (v, s) {
                    (Some(v), Some(s)) => v < s,
                    (Some(_), None) => true,
                    _ => false,
                })
                .count();
            let fmt_hits = |h: &[Option<u64>]| {
                h.iter()
                    .map(|q| q.map_or("never".to_string(), |q| q.to_string()))
                    .collect::<Vec<_>>()
                    .join("/")
            };
            details.push(format!(
                "kappa {kappa}: VRSC-PG first in {wins}/{} seeds (eta {} vs {}; queries {} vs {})",
                s.seeds,
                data[0].eta,
                data[1].eta,
                fmt_hits(&vh),
                fmt_hits(&sh)
            ));
            passed &= wins * 5 >= s.seeds * 4;
            per_kappa.push(data);
        }
        for (idx, label) in [(0, "VRSC-PG"), (1, "SC-PG")] {
            let easy = &per_kappa[0][idx];
            let hard = &per_kappa[1][idx];
            let reached_all = |d: &OrderingData| {
                d.traces
                    .iter()
                    .all(|t| t.as_ref().is_some_and(|t| best_gap(t) <= ORDERING_GAP))
            };
            let threshold = if reached_all(easy) {
                ORDERING_GAP
            } else {
                easy.traces
                    .iter()
                    .map(|t| t.as_ref().map_or(f64::INFINITY, |t| best_gap(t)))
                    .fold(ORDERING_GAP, f64::max)
            };
            let q = |d: &OrderingData| {
                let mut v: Vec<f64> = d
                    .traces
                    .iter()
                    .map(|t| {
                        t.as_ref()
                            .and_then(|t| queries_to_gap(t, threshold))
                            .map_or(f64::INFINITY, |q| q as f64)
                    })
                    .collect();
                median(&mut v)
            };
            let (qe, qh) = (q(easy), q(hard));
            let harder = qh > qe;
            passed &= harder;
            details.push(format!(
                "{label} median queries to gap {threshold:.2e}: {qe:.0} at kappa 2 vs {qh:.0} at kappa 10 ({})",
                if harder { "more at 10" } else { "NOT more at 10" }
            ));
        }
        Ok(Outcome::new(name, passed, details.join("; ")))
    })
}

/// With the general-case schedule, the best gradient-mapping norm keeps
/// falling: doubling the budget cuts it to at most 0.75x.
pub fn gradient_mapping_trend(s: &Settings) -> Outcome {
    let name = "gradient-mapping decrease";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 11);
        let p = gen_linquad(60, 60, 8, 10, 0.3, &mut rng)?;
        let h = Regularizer::l1(0.01)?;
        let c = p.constants(1.0)?;
        let g = suggest_params_general(p.n_outer(), p.n_inner(), &c)?;
        let holds = sublinear_rate_condition(g.eta, g.m, g.a_min, g.b_min, g.b1, &c);
        let epoch_cost = vrsc_pg_cost(p.n_outer(), p.n_inner(), g.m, g.a_min, g.b_min, g.b1, 1);
        let t = 3 * epoch_cost;
        let mut ratios = Vec::new();
        for seed in 0..s.seeds as u64 {
            let cfg = VrscpgConfig {
                eta: g.eta,
                m: g.m,
                epochs: usize::MAX,
                a: g.a_min,
                b: g.b_min,
                b1: g.b1,
                seed,
                sampling: IndexSampling::WithReplacement,
            };
            let opts = RunOptions {
                trace: TraceOptions::default(),
                budget: Budget::queries(2 * t),
                ..Default::default()
            };
            let res = vrsc_pg(&p, &h, &cfg, &opts)?;
            let best_within = |limit: u64| {
                res.trace
                    .iter()
                    .filter(|r| r.queries().total() <= limit)
                    .map(|r| r.grad_map_sq)
                    .fold(f64::INFINITY, f64::min)
            };
            ratios.push(best_within(2 * t) / best_within(t));
        }
        let ratio = median(&mut ratios);
        Ok(Outcome::new(
            name,
            holds && ratio <= 0.75,
            format!(
                "median ratio {ratio:.3e} (max 0.75) at T = {t} queries; step-size condition {} (L_f {:.3}, m {}, b1 {}, A {}, B {})",
                if holds { "holds" } else { "violated" },
                c.l_f,
                g.m,
                g.b1,
                g.a_min,
                g.b_min
            ),
        ))
    })
}

// ---------------------------------------------------------------------------
// Further module invariants
// ---------------------------------------------------------------------------

pub fn sampling_uniformity(s: &Settings) -> Outcome {
    let name = "sampling uniformity";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 20);
        let draws = 100_000;
        let idx = sample_with_replacement(&mut rng, 10, draws)?;
        let mut freq = [0usize; 10];
        for i in idx {
            freq[i] += 1;
        }
        let sd = (draws as f64 * 0.1 * 0.9).sqrt();
        let worst = freq
            .iter()
            .map(|&f| (f as f64 - draws as f64 * 0.1).abs() / sd)
            .fold(0.0, f64::max);
        Ok(Outcome::new(
            name,
            worst <= 4.0,
            format!("max deviation {worst:.2} sd (limit 4)"),
        ))
    })
}

pub fn prox_optimality(s: &Settings) -> Outcome {
    let name = "prox optimality and subgradient membership";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 21);
        let mut beaten = 0;
        let mut membership = 0;
        for _ in 0..200 {
            let lambda = rng.uniform();
            let h = Regularizer::l1(lambda)?;
            let eta = 0.01 + rng.uniform();
            let x = gaussian(&mut rng, 6);
            let p = prox_under_test(&h, &x, eta, s.fault)?;
            let obj = |z: &Vector| h.value(z) + l2_norm_sq(&(z - &x)) / (2.0 * eta);
            let base = obj(&p);
            for _ in 0..100 {
                let cand = &p + gaussian(&mut rng, 6) * (0.1 * rng.uniform());
                if obj(&cand) < base - 1e-12 {
                    beaten += 1;
                }
            }
            let z = Vector::from_fn(6, |i, _| if i % 2 == 0 { 0.0 } else { x[i] });
            let g = h.min_norm_subgradient(&z, &gaussian(&mut rng, 6))?;
            for i in 0..6 {
                let ok = if z[i] != 0.0 {
                    (g[i] - lambda * z[i].signum()).abs() <= 1e-15
                } else {
                    g[i].abs() <= lambda
                };
                membership += usize::from(!ok);
            }
        }
        Ok(Outcome::new(
            name,
            beaten == 0 && membership == 0,
            format!("{beaten} of 20000 perturbed candidates beat the prox; {membership} subgradient violations"),
        ))
    })
}

pub fn embedding_fidelity(s: &Settings) -> Outcome {
    let name = "embedding fidelity";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 22);
        let pf = portfolio(&mut rng, 30, 6, 3.0)?;
        let pe = policy(&mut rng, 8, 0.9)?;
        let lq = gen_linquad(7, 5, 4, 6, 0.3, &mut rng)?;
        let mut worst = 0.0f64;
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
        for _ in 0..50 {
            let x = gaussian(&mut rng, 6);
            worst = worst.max(rel(objective_f(&pf, &x)?, pf.mean_variance_objective(&x)));
            let v = gaussian(&mut rng, 8);
            worst = worst.max(rel(objective_f(&pe, &v)?, pe.bellman_residual(&v)));
            let z = gaussian(&mut rng, 4);
            worst = worst.max(rel(objective_f(&lq, &z)?, lq.closed_form_objective(&z)));
        }
        let zero_residual = objective_f(&pe, &pe.exact_values()?)?;
        let x = gaussian(&mut rng, 6);
        let constant_jac = (0..pf.n_inner())
            .all(|j| pf.inner_jacobian(j, &x) == pf.inner_jacobian(j, &Vector::zeros(6)));
        let positive = pe.transition().iter().all(|&v| v > 0.0);
        Ok(Outcome::new(
            name,
            worst <= 1e-10 && zero_residual <= 1e-9 && constant_jac && positive,
            format!(
                "max relative mismatch {worst:.2e} (tol 1e-10); residual at fixed point {zero_residual:.2e}; \
                 constant portfolio Jacobian {constant_jac}; positive transitions {positive}"
            ),
        ))
    })
}

pub fn counting_transparency(s: &Settings) -> Outcome {
    let name = "counting transparency";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 23);
        let mut identical = true;
        for (_, p) in composition_zoo(&mut rng)? {
            let (c, _) = counted(p.as_ref());
            let x = gaussian(&mut rng, p.dim_x());
            let y = gaussian(&mut rng, p.dim_y());
            for j in 0..p.n_inner() {
                identical &= c.inner_value(j, &x) == p.inner_value(j, &x);
                identical &= c.inner_jacobian(j, &x) == p.inner_jacobian(j, &x);
            }
            for i in 0..p.n_outer() {
                identical &= c.outer_gradient(i, &y) == p.outer_gradient(i, &y);
            }
        }
        Ok(Outcome::new(
            name,
            identical,
            format!("counted outputs bitwise identical: {identical}"),
        ))
    })
}

pub fn variance_shrinkage(s: &Settings) -> Outcome {
    let name = "variance shrinkage";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 24);
        let p = gen_linquad(20, 20, 5, 6, 0.4, &mut rng)?;
        let x_tilde = gaussian(&mut rng, 5);
        let snap = Snapshot::compute(&p, &x_tilde)?;
        let distances = [0.01, 0.1, 1.0];
        let mut monotone = 0;
        let directions = 11;
        let mut example = [0.0; 3];
        for d in 0..directions {
            let mut dir = gaussian(&mut rng, 5);
            dir /= dir.norm();
            let mut vars = [0.0; 3];
            for (k, r) in distances.iter().enumerate() {
                let x = &x_tilde + &dir * *r;
                let mut draws = Vec::with_capacity(100);
                for _ in 0..100 {
                    let a = sample_with_replacement(&mut rng, 20, 3)?;
                    let b = sample_with_replacement(&mut rng, 20, 3)?;
                    let i = sample_with_replacement(&mut rng, 20, 3)?;
                    let g = estimate_inner_value(&snap, &p, &x, &a)?;
                    let j = estimate_inner_jacobian(&snap, &p, &x, &b)?;
                    draws.push(estimate_gradient_vt(&snap, &p, &g, &j, &i)?);
                }
                let mean = draws.iter().fold(Vector::zeros(5), |acc, v| acc + v) / 100.0;
                vars[k] = draws.iter().map(|v| l2_norm_sq(&(v - &mean))).sum::<f64>() / 99.0;
            }
            if vars[0] < vars[1] && vars[1] < vars[2] {
                monotone += 1;
            }
            if d == 0 {
                example = vars;
            }
        }
        Ok(Outcome::new(
            name,
            monotone * 2 > directions,
            format!(
                "variance increasing with distance in {monotone}/{directions} directions; e.g. {:.2e} < {:.2e} < {:.2e}",
                example[0], example[1], example[2]
            ),
        ))
    })
}

pub fn determinism(s: &Settings) -> Outcome {
    let name = "determinism";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 25);
        let p = gen_linquad(10, 8, 4, 5, 0.3, &mut rng)?;
        let fp = lasso(&mut rng, 12, 4)?;
        let h = Regularizer::l1(0.05)?;
        let opts = RunOptions {
            record_iterates: true,
            trace: quiet_trace(),
            ..Default::default()
        };
        let cfg = VrscpgConfig {
            eta: 0.05,
            m: 10,
            epochs: 5,
            a: 3,
            b: 3,
            b1: 3,
            seed: 7,
            sampling: IndexSampling::WithReplacement,
        };
        let sc = ScpgConfig::new(0.05, 100, 7);
        let sv = ProxSvrgConfig {
            eta: 0.01,
            m: 10,
            epochs: 5,
            seed: 7,
        };
        let same = vrsc_pg(&p, &h, &cfg, &opts)?.iterates == vrsc_pg(&p, &h, &cfg, &opts)?.iterates
            && scpg_baseline(&p, &h, &sc, &opts)?.iterates
                == scpg_baseline(&p, &h, &sc, &opts)?.iterates
            && prox_svrg(&fp, &h, &sv, &opts)?.iterates == prox_svrg(&fp, &h, &sv, &opts)?.iterates;
        Ok(Outcome::new(
            name,
            same,
            format!("repeated runs bitwise identical: {same}"),
        ))
    })
}

pub fn metric_properties(s: &Settings) -> Outcome {
    let name = "metric properties";
    guarded(name, || {
        let mut rng = RngStream::new(s.seed + 26);
        let mut worst_gap = f64::INFINITY;
        let mut at_opt = 0.0f64;
        let mut off_opt = f64::INFINITY;
        let mut monotone = true;
        let mut composite_at_opt = 0.0f64;
        for (_, p) in composition_zoo(&mut rng)? {
            let p = p.as_ref();
            let h = Regularizer::l1(0.05)?;
            let obj = Composed(p);
            let reference = solve_reference(&obj, &h, 1e-13)?;
            let l = estimate_smoothness(&obj, &Vector::zeros(p.dim_x()), 100)?;
            let eta = 0.5 / l;
            at_opt = at_opt.max(grad_map_sq(&obj, &h, &reference.x, eta)?);
            composite_at_opt = composite_at_opt.max(composite_grad_sq(&obj, &h, &reference.x)?);
            for _ in 0..5 {
                let x = &reference.x + gaussian(&mut rng, p.dim_x());
                off_opt = off_opt
                    .min(grad_map_sq(&obj, &h, &x, eta)?)
                    .min(composite_grad_sq(&obj, &h, &x)?);
            }
            let cfg = VrscpgConfig {
                eta: 0.1 * eta,
                m: 10,
                epochs: 10,
                a: 3,
                b: 3,
                b1: 3,
                seed: 1,
                sampling: IndexSampling::WithReplacement,
            };
            let opts = RunOptions {
                trace: TraceOptions {
                    reference: Some(reference.clone()),
                    ..Default::default()
                },
                ..Default::default()
            };
            if let Ok(res) = vrsc_pg(&p, &h, &cfg, &opts) {
                worst_gap = worst_gap.min(
                    res.trace
                        .iter()
                        .map(|r| r.gap)
                        .fold(f64::INFINITY, f64::min),
                );
                monotone &= res.trace.windows(2).all(|w| {
                    w[1].wall_ms >= w[0].wall_ms && w[1].queries().total() >= w[0].queries().total()
                });
            }
            let h_val = objective_h(&obj, &h, &reference.x)?;
            worst_gap = worst_gap.min(h_val - reference.objective);
        }
        Ok(Outcome::new(
            name,
            worst_gap >= -1e-9 && at_opt <= 1e-12 && composite_at_opt <= 1e-12 && off_opt > 1e-6 && monotone,
            format!(
                "min gap {worst_gap:.2e} (>= -1e-9); at optimum grad-map {at_opt:.1e}, composite {composite_at_opt:.1e} \
                 (<= 1e-12); off optimum min {off_opt:.2e} (> 1e-6); trace monotone {monotone}"
            ),
        ))
    })
}

pub type Check = fn(&Settings) -> Outcome;

/// The acceptance criteria, in order, by outcome name.
pub fn acceptance_checks() -> Vec<(&'static str, Check)> {
    vec![
        ("snapshot exactness", snapshot_exactness),
        ("estimator unbiasedness", estimator_unbiasedness),
        ("full-batch degeneration", full_batch_degeneration),
        ("gradient correctness", gradient_correctness),
        ("prox correctness", prox_correctness),
        (
            "closed-form recovery (lasso, Prox-SVRG vs ISTA)",
            recovery_lasso,
        ),
        (
            "closed-form recovery (policy values, VRSC-PG)",
            recovery_policy_values,
        ),
        (
            "closed-form recovery (LinQuad, full proximal gradient)",
            recovery_linquad,
        ),
        ("query accounting", query_accounting),
        ("linear convergence", linear_convergence),
        ("rate bound at unit constants", unit_rate_bound),
        ("portfolio ordering", portfolio_ordering),
        ("gradient-mapping decrease", gradient_mapping_trend),
    ]
}

/// Module invariants not already covered by the acceptance criteria.
pub fn invariant_checks() -> Vec<(&'static str, Check)> {
    vec![
        ("sampling uniformity", sampling_uniformity),
        (
            "prox optimality and subgradient membership",
            prox_optimality,
        ),
        ("embedding fidelity", embedding_fidelity),
        ("counting transparency", counting_transparency),
        ("variance shrinkage", variance_shrinkage),
        ("determinism", determinism),
        ("metric properties", metric_properties),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> Settings {
        Settings {
            resamples: 2000,
            seeds: 3,
            ..Default::default()
        }
    }

    #[test]
    fn helpers() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        let (slope, r2) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, -1.0, -3.0]);
        assert!((slope + 2.0).abs() < 1e-15 && (r2 - 1.0).abs() < 1e-15);
        assert!((golden_section(|x| (x - 0.3).powi(2), -1.0, 1.0, 100) - 0.3).abs() < 1e-9);
    }

    #[test]
    fn registry_names_match_outcomes() {
        let s = quick();
        for (name, check) in acceptance_checks().into_iter().chain(invariant_checks()) {
            if matches!(
                name,
                "estimator unbiasedness"
                    | "closed-form recovery (policy values, VRSC-PG)"
                    | "portfolio ordering"
            ) {
                continue;
            }
            assert_eq!(check(&s).name, name);
        }
    }

    #[test]
    fn fast_checks_pass() {
        let s = quick();
        for o in [
            snapshot_exactness(&s),
            full_batch_degeneration(&s),
            gradient_correctness(&s),
            prox_correctness(&s),
            query_accounting(&s),
            unit_rate_bound(&s),
            sampling_uniformity(&s),
            prox_optimality(&s),
            embedding_fidelity(&s),
            counting_transparency(&s),
            variance_shrinkage(&s),
            determinism(&s),
        ] {
            assert!(o.passed, "{o}");
        }
    }

    #[test]
    fn halved_threshold_is_caught() {
        let s = Settings {
            fault: Fault::HalvedThreshold,
            ..quick()
        };
        assert!(!prox_correctness(&s).passed);
        assert!(!prox_optimality(&s).passed);
    }

    #[test]
    fn off_by_one_count_is_caught() {
        let s = Settings {
            fault: Fault::CountOffByOne,
            ..quick()
        };
        assert!(!query_accounting(&s).passed);
    }
}
