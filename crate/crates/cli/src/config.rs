//! Experiment configuration: one JSON document per sweep.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use composolve::checks::{Fault, Settings};
use composolve::problems::{
    gen_gaussian_rewards, gen_lasso, gen_linquad, gen_mdp, load_problem, AnyProblem,
};
use composolve::solvers::IndexSampling;
use composolve::{PolicyEvalProblem, PortfolioProblem, Regularizer, RngStream};
use serde::{Deserialize, Serialize};

/// The step-size grid searched by `"eta": "tune"`.
pub const DEFAULT_ETA_GRID: [f64; 5] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub regularizer: Regularizer,
    #[serde(default)]
    pub solvers: Vec<SolverEntry>,
    pub seeds: Vec<u64>,
    pub budget: BudgetSpec,
    /// Output directory, relative to the config file. `--out` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub trace: TraceSpec,
    #[serde(default = "default_grid")]
    pub eta_grid: Vec<f64>,
    /// Step-length tolerance for the reference solve.
    #[serde(default = "default_reference_tol")]
    pub reference_tol: f64,
}

fn default_grid() -> Vec<f64> {
    DEFAULT_ETA_GRID.to_vec()
}

fn default_reference_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Portfolio {
        n: usize,
        #[serde(rename = "N")]
        assets: usize,
        kappa_cov: f64,
        data_seed: u64,
    },
    PolicyEval {
        #[serde(rename = "S")]
        states: usize,
        num_actions: usize,
        #[serde(default = "default_gamma")]
        gamma: f64,
        data_seed: u64,
    },
    Linquad {
        n1: usize,
        n2: usize,
        #[serde(rename = "N")]
        dim_x: usize,
        #[serde(rename = "M")]
        dim_y: usize,
        noise: f64,
        data_seed: u64,
    },
    Lasso {
        n: usize,
        #[serde(rename = "N")]
        dim: usize,
        noise: f64,
        data_seed: u64,
    },
    /// A problem file written by `gen`, relative to the config file.
    File { path: PathBuf },
}

fn default_gamma() -> f64 {
    composolve::problems::DEFAULT_GAMMA
}

/// Either a fixed step size or `"tune"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Eta {
    Fixed(f64),
    Named(EtaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaKeyword {
    Tune,
}

impl Eta {
    pub fn fixed(self) -> Option<f64> {
        match self {
            Eta::Fixed(v) => Some(v),
            Eta::Named(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverEntry {
    /// Names trace files and legend entries; defaults to the solver name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub solver: SolverSpec,
}

impl SolverEntry {
    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.solver.name().to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SolverSpec {
    VrscPg {
        eta: Eta,
        m: usize,
        #[serde(rename = "A")]
        a: usize,
        #[serde(rename = "B")]
        b: usize,
        b1: usize,
        /// Unlimited when absent; the budget ends the run.
        #[serde(default)]
        epochs: Option<usize>,
        #[serde(default)]
        sampling: IndexSampling,
    },
    Scpg {
        /// Initial step size `alpha0`.
        eta: Eta,
        #[serde(default = "one")]
        beta0: f64,
        #[serde(default = "three_quarters")]
        exp_alpha: f64,
        #[serde(default = "half")]
        exp_beta: f64,
        #[serde(default)]
        iters: Option<usize>,
    },
    ProxSvrg {
        eta: Eta,
        m: usize,
        #[serde(default)]
        epochs: Option<usize>,
    },
    ProxFullGradient {
        eta: Eta,
        #[serde(default)]
        max_iters: Option<usize>,
        #[serde(default)]
        tol: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn three_quarters() -> f64 {
    0.75
}

fn half() -> f64 {
    0.5
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::VrscPg { .. } => "vrsc_pg",
            SolverSpec::Scpg { .. } => "scpg",
            SolverSpec::ProxSvrg { .. } => "prox_svrg",
            SolverSpec::ProxFullGradient { .. } => "prox_full_gradient",
        }
    }

    pub fn eta(&self) -> Eta {
        match self {
            SolverSpec::VrscPg { eta, .. }
            | SolverSpec::Scpg { eta, .. }
            | SolverSpec::ProxSvrg { eta, .. }
            | SolverSpec::ProxFullGradient { eta, .. } => *eta,
        }
    }

    fn iteration_limit(&self) -> Option<usize> {
        match self {
            SolverSpec::VrscPg { epochs, .. } | SolverSpec::ProxSvrg { epochs, .. } => *epochs,
            SolverSpec::Scpg { iters, .. } => *iters,
            SolverSpec::ProxFullGradient { max_iters, .. } => *max_iters,
        }
    }

    /// Whether the solver needs a composition (rather than a plain finite-sum) problem.
    pub fn needs_composition(&self) -> bool {
        !matches!(self, SolverSpec::ProxSvrg { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_queries: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wall_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_true")]
    pub gradient_metrics: bool,
    /// Step size for the gradient mapping; the solver's own when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag_eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_gap: Option<f64>,
}

fn default_stride() -> usize {
    1
}

fn default_true() -> bool {
    true
}

impl Default for TraceSpec {
    fn default() -> Self {
        Self {
            stride: 1,
            gradient_metrics: true,
            diag_eta: None,
            stop_gap: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()
            .with_context(|| format!("invalid config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.seeds.is_empty(), "at least one seed is required");
        let b = &self.budget;
        ensure!(
            b.max_queries.is_some() || b.max_wall_seconds.is_some(),
            "budget needs max_queries or max_wall_seconds"
        );
        ensure!(
            b.max_queries.is_none_or(|q| q > 0),
            "max_queries must be positive"
        );
        ensure!(
            b.max_wall_seconds.is_none_or(|w| w > 0.0 && w.is_finite()),
            "max_wall_seconds must be positive"
        );
        ensure!(self.trace.stride >= 1, "trace.stride must be at least 1");
        ensure!(
            !self.eta_grid.is_empty() && self.eta_grid.iter().all(|e| *e > 0.0 && e.is_finite()),
            "eta_grid must be a nonempty list of positive step sizes"
        );
        ensure!(self.reference_tol > 0.0, "reference_tol must be positive");
        let mut labels = HashSet::new();
        for entry in &self.solvers {
            let label = entry.label();
            ensure!(
                !label.is_empty()
                    && label
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
                "solver label {label:?} must be nonempty ASCII letters, digits, '_' or '-'"
            );
            ensure!(
                labels.insert(label.clone()),
                "duplicate solver label {label:?}"
            );
            if let Some(eta) = entry.solver.eta().fixed() {
                ensure!(
                    eta > 0.0 && eta.is_finite(),
                    "{label}: eta must be positive, got {eta}"
                );
            }
            if entry.solver.iteration_limit() == Some(0) {
                bail!("{label}: iteration limit must be at least 1");
            }
            self.validate_solver(&label, &entry.solver)?;
        }
        Ok(())
    }

    fn validate_solver(&self, label: &str, spec: &SolverSpec) -> Result<()> {
        match spec {
            SolverSpec::VrscPg { m, a, b, b1, .. } => {
                ensure!(
                    *m >= 1 && *a >= 1 && *b >= 1 && *b1 >= 1,
                    "{label}: m, A, B and b1 must be at least 1"
                );
            }
            SolverSpec::Scpg {
                beta0,
                exp_alpha,
                exp_beta,
                ..
            } => {
                ensure!(
                    *beta0 > 0.0 && *beta0 <= 1.0,
                    "{label}: beta0 must lie in (0, 1]"
                );
                ensure!(
                    *exp_alpha >= 0.0 && *exp_beta >= 0.0,
                    "{label}: decay exponents must be nonnegative"
                );
            }
            SolverSpec::ProxSvrg { m, .. } => ensure!(*m >= 1, "{label}: m must be at least 1"),
            SolverSpec::ProxFullGradient { tol, .. } => {
                ensure!(*tol >= 0.0, "{label}: tol must be nonnegative")
            }
        }
        Ok(())
    }

    /// Output directory: the override, else `out` relative to `base`, else `base/results`.
    pub fn out_dir(&self, base: &Path, override_dir: Option<&Path>) -> PathBuf {
        match (override_dir, &self.out) {
            (Some(dir), _) => dir.to_path_buf(),
            (None, Some(dir)) => base.join(dir),
            (None, None) => base.join("results"),
        }
    }
}

/// Builds the problem the config describes. `base` resolves relative file paths.
pub fn build_problem(spec: &ProblemSpec, base: &Path) -> Result<AnyProblem> {
    Ok(match spec {
        ProblemSpec::Portfolio {
            n,
            assets,
            kappa_cov,
            data_seed,
        } => {
            let mut rng = RngStream::new(*data_seed);
            AnyProblem::Portfolio(PortfolioProblem::new(gen_gaussian_rewards(
                *n, *assets, *kappa_cov, &mut rng,
            )?)?)
        }
        ProblemSpec::PolicyEval {
            states,
            num_actions,
            gamma,
            data_seed,
        } => {
            let mut rng = RngStream::new(*data_seed);
            let (p, r) = gen_mdp(*states, *num_actions, &mut rng)?;
            AnyProblem::PolicyEval(PolicyEvalProblem::new(p, r, *gamma)?)
        }
        ProblemSpec::Linquad {
            n1,
            n2,
            dim_x,
            dim_y,
            noise,
            data_seed,
        } => {
            let mut rng = RngStream::new(*data_seed);
            AnyProblem::LinQuad(gen_linquad(*n1, *n2, *dim_x, *dim_y, *noise, &mut rng)?)
        }
        ProblemSpec::Lasso {
            n,
            dim,
            noise,
            data_seed,
        } => {
            let mut rng = RngStream::new(*data_seed);
            AnyProblem::Lasso(gen_lasso(*n, *dim, *noise, &mut rng)?)
        }
        ProblemSpec::File { path } => {
            let path = base.join(path);
            let file = load_problem(&path)
                .with_context(|| format!("loading problem {}", path.display()))?;
            file.data.build()?
        }
    })
}

/// Settings for `check`. Every field has a default, so the file is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub seed: u64,
    pub resamples: usize,
    pub seeds: usize,
    pub ordering_budget: u64,
    pub fault: FaultSpec,
    /// Check names to leave out, e.g. the slow portfolio ordering run.
    pub skip: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultSpec {
    #[default]
    None,
    HalvedThreshold,
    CountOffByOne,
}

impl Default for CheckConfig {
    fn default() -> Self {
        let s = Settings::default();
        Self {
            seed: s.seed,
            resamples: s.resamples,
            seeds: s.seeds,
            ordering_budget: s.ordering_budget,
            fault: FaultSpec::None,
            skip: Vec::new(),
        }
    }
}

impl CheckConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn settings(&self) -> Settings {
        Settings {
            seed: self.seed,
            resamples: self.resamples,
            seeds: self.seeds,
            ordering_budget: self.ordering_budget,
            fault: match self.fault {
                FaultSpec::None => Fault::None,
                FaultSpec::HalvedThreshold => Fault::HalvedThreshold,
                FaultSpec::CountOffByOne => Fault::CountOffByOne,
            },
        }
    }
}
