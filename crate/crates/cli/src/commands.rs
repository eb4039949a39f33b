use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use composolve::checks::{acceptance_checks, invariant_checks, Outcome};
use composolve::problems::{save_problem, ProblemData, ProblemFile};
use composolve::solvers::solve_reference;
use composolve::{
    prox_full_gradient, prox_svrg, scpg_baseline, vrsc_pg, AnyProblem, Budget, ProxGradConfig,
    ProxSvrgConfig, ReferenceOptimum, Regularizer, RunOptions, ScpgConfig, SolveResult,
    TraceOptions, VrscpgConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::{
    build_problem, CheckConfig, Eta, ExperimentConfig, ProblemSpec, SolverEntry, SolverSpec,
};
use crate::svg::{self, Series};
use crate::trace_csv::{self, read_trace, write_trace};

pub const SUMMARY_FILE: &str = "summary.json";
pub const PROBLEM_FILE: &str = "problem.json";

/// Writes the generated problem, with the configured `lambda`, to `out/problem.json`.
pub fn cmd_gen(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<PathBuf> {
    if matches!(cfg.problem, ProblemSpec::File { .. }) {
        bail!("gen needs a generator spec, not a problem file");
    }
    let problem = build_problem(&cfg.problem, base)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(PROBLEM_FILE);
    let file = ProblemFile {
        data: ProblemData::from_problem(&problem),
        lambda: match cfg.regularizer {
            Regularizer::L1 { lambda } => Some(lambda),
            Regularizer::Zero => None,
        },
    };
    save_problem(&path, &file).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Finished,
    Diverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub label: String,
    pub solver: String,
    pub seed: u64,
    pub eta: Option<f64>,
    pub status: RunStatus,
    /// Why a finished run stopped, or the error for a failed one.
    pub detail: String,
    /// Trace file name inside the output directory.
    pub trace_file: Option<String>,
    pub total_queries: Option<u64>,
    pub final_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRecord {
    pub label: String,
    pub seed: u64,
    /// `(eta, final gap)`; the gap is null for runs that diverged.
    pub trials: Vec<(f64, Option<f64>)>,
    pub chosen: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub x: Vec<f64>,
    pub objective: f64,
    pub residual: f64,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub composolve: String,
    pub composolve_cli: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub versions: Versions,
    pub config: ExperimentConfig,
    pub problem_kind: String,
    pub dim: usize,
    pub reference: ReferenceSummary,
    pub tuning: Vec<TuneRecord>,
    pub runs: Vec<RunRecord>,
}

impl Summary {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text =
            fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn run_options(cfg: &ExperimentConfig, reference: &ReferenceOptimum) -> RunOptions {
    RunOptions {
        x0: None,
        trace: TraceOptions {
            stride: cfg.trace.stride,
            gradient_metrics: cfg.trace.gradient_metrics,
            diag_eta: cfg.trace.diag_eta,
            reference: Some(reference.clone()),
            stop_gap: cfg.trace.stop_gap,
        },
        budget: Budget {
            max_queries: cfg.budget.max_queries,
            max_wall: cfg.budget.max_wall_seconds.map(Duration::from_secs_f64),
        },
        record_iterates: false,
    }
}

fn execute(
    problem: &AnyProblem,
    h: &Regularizer,
    spec: &SolverSpec,
    eta: f64,
    seed: u64,
    opts: &RunOptions,
) -> composolve::Result<SolveResult> {
    let unlimited = |n: Option<usize>| n.unwrap_or(usize::MAX);
    let composition = || {
        problem.as_composition().ok_or_else(|| {
            composolve::Error::InvalidConfig(format!("{} needs a composition problem", spec.name()))
        })
    };
    match spec {
        SolverSpec::VrscPg {
            m,
            a,
            b,
            b1,
            epochs,
            sampling,
            ..
        } => {
            let cfg = VrscpgConfig {
                eta,
                m: *m,
                epochs: unlimited(*epochs),
                a: *a,
                b: *b,
                b1: *b1,
                seed,
                sampling: *sampling,
            };
            vrsc_pg(&composition()?, h, &cfg, opts)
        }
        SolverSpec::Scpg {
            beta0,
            exp_alpha,
            exp_beta,
            iters,
            ..
        } => {
            let cfg = ScpgConfig {
                alpha0: eta,
                beta0: *beta0,
                exp_alpha: *exp_alpha,
                exp_beta: *exp_beta,
                iters: unlimited(*iters),
                seed,
            };
            scpg_baseline(&composition()?, h, &cfg, opts)
        }
        SolverSpec::ProxSvrg { m, epochs, .. } => {
            let AnyProblem::Lasso(p) = problem else {
                return Err(composolve::Error::InvalidConfig(
                    "prox_svrg needs a lasso problem".into(),
                ));
            };
            let cfg = ProxSvrgConfig {
                eta,
                m: *m,
                epochs: unlimited(*epochs),
                seed,
            };
            prox_svrg(p, h, &cfg, opts)
        }
        SolverSpec::ProxFullGradient { max_iters, tol, .. } => {
            let cfg = ProxGradConfig {
                eta,
                max_iters: unlimited(*max_iters),
                tol: *tol,
            };
            prox_full_gradient(&composition()?, h, &cfg, opts)
        }
    }
}

/// Runs `jobs` on all available cores; results come back in job order.
fn parallel_map<J: Sync, R: Send>(jobs: &[J], f: impl Fn(&J) -> R + Sync) -> Vec<R> {
    let workers = thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                *slots[i]
                    .lock()
                    .expect("no worker panics while holding the lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("lock not poisoned")
                .expect("every job ran")
        })
        .collect()
}

fn final_gap(res: &SolveResult) -> Option<f64> {
    res.trace.last().map(|r| r.gap)
}

/// Runs every (solver, seed) pair, writing one trace per run and then the summary.
pub fn cmd_run(cfg: &ExperimentConfig, base: &Path, out: &Path) -> Result<Summary> {
    let problem = build_problem(&cfg.problem, base)?;
    let h = cfg.regularizer;
    if let Regularizer::L1 { lambda } = h {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            bail!("regularizer lambda must be nonnegative, got {lambda}");
        }
    }
    for entry in &cfg.solvers {
        let composition = problem.as_composition().is_some();
        if entry.solver.needs_composition() != composition {
            bail!(
                "solver {} cannot run on a {} problem",
                entry.label(),
                problem.kind()
            );
        }
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let smooth = problem.smooth();
    let reference = solve_reference(smooth.as_ref(), &h, cfg.reference_tol)?;
    if !reference.verified {
        log::warn!(
            "reference optimum unverified (residual {:.3e}); gaps are approximate",
            reference.residual
        );
    }
    let opts = run_options(cfg, &reference);

    let tune_seed = cfg.seeds[0];
    let tune_jobs: Vec<(usize, f64)> = cfg
        .solvers
        .iter()
        .enumerate()
        .filter(|(_, e)| e.solver.eta().fixed().is_none())
        .flat_map(|(i, _)| cfg.eta_grid.iter().map(move |&eta| (i, eta)))
        .collect();
    let tune_results = parallel_map(&tune_jobs, |&(i, eta)| {
        execute(&problem, &h, &cfg.solvers[i].solver, eta, tune_seed, &opts)
            .ok()
            .and_then(|r| final_gap(&r))
            .filter(|g| g.is_finite())
    });
    let mut tuning = Vec::new();
    let mut etas: Vec<Option<f64>> = cfg.solvers.iter().map(|e| e.solver.eta().fixed()).collect();
    for (i, entry) in cfg.solvers.iter().enumerate() {
        if !matches!(entry.solver.eta(), Eta::Named(_)) {
            continue;
        }
        let trials: Vec<(f64, Option<f64>)> = tune_jobs
            .iter()
            .zip(&tune_results)
            .filter(|((j, _), _)| *j == i)
            .map(|((_, eta), gap)| (*eta, *gap))
            .collect();
        let chosen = trials
            .iter()
            .filter_map(|(eta, gap)| gap.map(|g| (*eta, g)))
            .fold(None::<(f64, f64)>, |best, (eta, g)| match best {
                Some((_, bg)) if bg <= g => best,
                _ => Some((eta, g)),
            })
            .map(|(eta, _)| eta);
        log::info!("{}: tuned eta {:?}", entry.label(), chosen);
        etas[i] = chosen;
        tuning.push(TuneRecord {
            label: entry.label(),
            seed: tune_seed,
            trials,
            chosen,
        });
    }

    let jobs: Vec<(usize, u64)> = (0..cfg.solvers.len())
        .flat_map(|i| cfg.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let runs = parallel_map(&jobs, |&(i, seed)| {
        run_one(&problem, &h, &cfg.solvers[i], etas[i], seed, &opts, out)
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let summary = Summary {
        versions: Versions {
            composolve: composolve::VERSION.to_string(),
            composolve_cli: env!("CARGO_PKG_VERSION").to_string(),
        },
        config: cfg.clone(),
        problem_kind: problem.kind().to_string(),
        dim: problem.dim_x(),
        reference: ReferenceSummary {
            x: reference.x.iter().copied().collect(),
            objective: reference.objective,
            residual: reference.residual,
            verified: reference.verified,
        },
        tuning,
        runs,
    };
    let path = out.join(SUMMARY_FILE);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(summary)
}

/// One run. Solver failures are recorded, only I/O errors propagate.
fn run_one(
    problem: &AnyProblem,
    h: &Regularizer,
    entry: &SolverEntry,
    eta: Option<f64>,
    seed: u64,
    opts: &RunOptions,
    out: &Path,
) -> Result<RunRecord> {
    let mut record = RunRecord {
        label: entry.label(),
        solver: entry.solver.name().to_string(),
        seed,
        eta,
        status: RunStatus::Failed,
        detail: String::new(),
        trace_file: None,
        total_queries: None,
        final_gap: None,
    };
    let Some(eta) = eta else {
        record.detail = "tuning failed: every step size on the grid diverged".into();
        return Ok(record);
    };
    let (result, status, detail) = match execute(problem, h, &entry.solver, eta, seed, opts) {
        Ok(res) => {
            let detail = format!("{:?}", res.stop);
            (res, RunStatus::Finished, detail)
        }
        Err(composolve::Error::Diverged {
            epoch,
            inner_iter,
            partial,
        }) => {
            log::warn!(
                "{} seed {seed}: diverged at epoch {epoch}, inner iteration {inner_iter}",
                record.label
            );
            (
                *partial,
                RunStatus::Diverged,
                format!("diverged at epoch {epoch}, inner iteration {inner_iter}"),
            )
        }
        Err(e) => {
            log::warn!("{} seed {seed}: {e}", record.label);
            record.detail = e.to_string();
            return Ok(record);
        }
    };
    let name = format!("{}_seed{seed}.csv", record.label);
    write_trace(&out.join(&name), &result.trace)?;
    record.status = status;
    record.detail = detail;
    record.trace_file = Some(name);
    record.total_queries = Some(result.counts.total());
    record.final_gap = final_gap(&result);
    Ok(record)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XAxis {
    #[default]
    Queries,
    Wall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YAxis {
    #[default]
    Gap,
    GradNorm,
}

impl XAxis {
    fn label(self) -> &'static str {
        match self {
            XAxis::Queries => "sampling-oracle queries",
            XAxis::Wall => "wall time (ms)",
        }
    }

    fn slug(self) -> &'static str {
        match self {
            XAxis::Queries => "queries",
            XAxis::Wall => "wall",
        }
    }
}

impl YAxis {
    fn label(self) -> &'static str {
        match self {
            YAxis::Gap => "objective gap",
            YAxis::GradNorm => "squared composite gradient norm",
        }
    }

    fn slug(self) -> &'static str {
        match self {
            YAxis::Gap => "gap",
            YAxis::GradNorm => "gradnorm",
        }
    }
}

/// Renders traces to SVG. Each input is `(legend label, csv path)`.
pub fn plot_traces(inputs: &[(String, PathBuf)], x: XAxis, y: YAxis) -> Result<String> {
    let mut series = Vec::new();
    for (label, path) in inputs {
        let records = read_trace(path)?;
        if records.is_empty() {
            bail!("{}: trace has no rows", path.display());
        }
        let points = records
            .iter()
            .map(|r| {
                let px = match x {
                    XAxis::Queries => r.queries().total() as f64,
                    XAxis::Wall => r.wall_ms,
                };
                let py = match y {
                    YAxis::Gap => r.gap,
                    YAxis::GradNorm => r.composite_grad_sq,
                };
                (px, py)
            })
            .collect();
        series.push(Series {
            label: label.clone(),
            points,
        });
    }
    let prepared = svg::prepare(series);
    if prepared.clipped > 0 {
        log::warn!(
            "{} nonpositive values drawn at the floor {:e}",
            prepared.clipped,
            svg::Y_FLOOR
        );
    }
    if prepared.dropped > 0 {
        log::warn!("{} non-finite points left out", prepared.dropped);
    }
    svg::render(&prepared.series, x.label(), y.label())
}

/// Plots every trace listed in `dir/summary.json` to `dir/plot_<y>_vs_<x>.svg`.
pub fn cmd_plot(dir: &Path, x: XAxis, y: YAxis) -> Result<PathBuf> {
    let summary = Summary::load(dir)?;
    let inputs: Vec<(String, PathBuf)> = summary
        .runs
        .iter()
        .filter_map(|r| {
            r.trace_file
                .as_ref()
                .map(|f| (format!("{} (seed {})", r.label, r.seed), dir.join(f)))
        })
        .collect();
    if inputs.is_empty() {
        bail!("{}: no traces to plot", dir.join(SUMMARY_FILE).display());
    }
    let svg = plot_traces(&inputs, x, y)?;
    let path = dir.join(format!("plot_{}_vs_{}.svg", y.slug(), x.slug()));
    fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// A small sweep used by the pipeline checks.
pub fn pipeline_config() -> ExperimentConfig {
    serde_json::from_str(
        r#"{
            "problem": {"kind": "portfolio", "n": 40, "N": 8, "kappa_cov": 2, "data_seed": 1},
            "regularizer": {"kind": "l1", "lambda": 0.001},
            "solvers": [
                {"name": "vrsc_pg", "eta": "tune", "m": 20, "A": 5, "B": 5, "b1": 5},
                {"name": "scpg", "eta": 0.1},
                {"name": "prox_full_gradient", "eta": 0.01}
            ],
            "seeds": [1, 2],
            "budget": {"max_queries": 20000},
            "trace": {"stride": 5}
        }"#,
    )
    .expect("built-in config parses")
}

fn same_modulo_wall(a: &Path, b: &Path) -> Result<bool> {
    let read = |p: &Path| fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    Ok(trace_csv::without_wall_column(&read(a)?) == trace_csv::without_wall_column(&read(b)?))
}

/// Checks of the experiment pipeline itself, run in `scratch`.
pub fn pipeline_checks(scratch: &Path) -> Vec<Outcome> {
    let mut out = Vec::new();
    let cfg = pipeline_config();
    let guarded = |name: &str, f: &dyn Fn() -> Result<(bool, String)>| {
        let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e:#}")));
        Outcome {
            name: name.to_string(),
            passed,
            detail,
        }
    };

    out.push(guarded("run replay", &|| {
        let (a, b) = (scratch.join("replay_a"), scratch.join("replay_b"));
        let sa = cmd_run(&cfg, scratch, &a)?;
        let sb = cmd_run(&cfg, scratch, &b)?;
        let files: Vec<&String> = sa
            .runs
            .iter()
            .filter_map(|r| r.trace_file.as_ref())
            .collect();
        let mut same = sa.runs == sb.runs && files.len() == cfg.solvers.len() * cfg.seeds.len();
        for f in &files {
            same &= same_modulo_wall(&a.join(f), &b.join(f))?;
        }
        Ok((
            same,
            format!(
                "{} trace files identical apart from wall_ms: {same}",
                files.len()
            ),
        ))
    }));

    out.push(guarded("trace schema", &|| {
        let dir = scratch.join("replay_a");
        let summary = Summary::load(&dir)?;
        let mut rows = 0;
        for r in &summary.runs {
            if let Some(f) = &r.trace_file {
                let text = fs::read_to_string(dir.join(f))?;
                let header_ok = text.lines().next() == Some(trace_csv::HEADER);
                if !header_ok || text.contains('\r') {
                    return Ok((false, format!("{f}: header or line endings differ")));
                }
                rows += trace_csv::parse_trace(&text)?.len();
            }
        }
        Ok((true, format!("{rows} rows parsed against the fixed header")))
    }));

    out.push(guarded("budget respected", &|| {
        let dir = scratch.join("replay_a");
        let summary = Summary::load(&dir)?;
        let limit = cfg.budget.max_queries.unwrap_or(u64::MAX);
        let mut worst = 0;
        for r in &summary.runs {
            if let Some(f) = &r.trace_file {
                for rec in read_trace(&dir.join(f))? {
                    worst = worst.max(rec.queries().total());
                }
            }
        }
        Ok((
            worst <= limit,
            format!("largest recorded query total {worst} (budget {limit})"),
        ))
    }));

    out.push(guarded("empty solver list", &|| {
        let dir = scratch.join("empty");
        let mut empty = cfg.clone();
        empty.solvers.clear();
        cmd_run(&empty, scratch, &dir)?;
        let mut names: Vec<String> = fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect::<std::io::Result<_>>()?;
        names.sort();
        Ok((
            names == [SUMMARY_FILE],
            format!("files written: {}", names.join(", ")),
        ))
    }));

    out.push(guarded("plot determinism", &|| {
        let dir = scratch.join("replay_a");
        let first = fs::read(cmd_plot(&dir, XAxis::Queries, YAxis::Gap)?)?;
        let second = fs::read(cmd_plot(&dir, XAxis::Queries, YAxis::Gap)?)?;
        let text = String::from_utf8(first.clone())?;
        let lines = text.matches("<polyline").count();
        let expected = cfg.solvers.len() * cfg.seeds.len();
        Ok((
            first == second && lines == expected,
            format!(
                "byte-identical rerun {}, {lines} polylines for {expected} traces",
                first == second
            ),
        ))
    }));

    out.push(guarded("gen idempotence", &|| {
        let (a, b) = (scratch.join("gen_a"), scratch.join("gen_b"));
        let pa = cmd_gen(&cfg, scratch, &a)?;
        let pb = cmd_gen(&cfg, scratch, &b)?;
        let same = fs::read(&pa)? == fs::read(&pb)?;
        let loaded = composolve::problems::load_problem(&pa)?;
        let lossless =
            loaded.data == ProblemData::from_problem(&build_problem(&cfg.problem, scratch)?);
        Ok((
            same && lossless,
            format!("byte-identical {same}, lossless reload {lossless}"),
        ))
    }));
    out
}

/// Runs the core suites (less any skipped names) and the pipeline checks.
pub fn cmd_check(cfg: &CheckConfig, scratch: &Path) -> Result<Vec<Outcome>> {
    fs::create_dir_all(scratch).with_context(|| format!("creating {}", scratch.display()))?;
    let settings = cfg.settings();
    let mut outcomes = Vec::new();
    for (name, check) in acceptance_checks().into_iter().chain(invariant_checks()) {
        if cfg.skip.iter().any(|s| s == name) {
            log::info!("skipping {name}");
            continue;
        }
        let outcome = check(&settings);
        log::info!("{outcome}");
        outcomes.push(outcome);
    }
    for outcome in pipeline_checks(scratch) {
        if !cfg.skip.contains(&outcome.name) {
            outcomes.push(outcome);
        }
    }
    Ok(outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let jobs: Vec<u64> = (0..50).collect();
        assert_eq!(
            parallel_map(&jobs, |j| j * 2),
            jobs.iter().map(|j| j * 2).collect::<Vec<_>>()
        );
        assert!(parallel_map(&[] as &[u64], |j| *j).is_empty());
    }

    #[test]
    fn solver_problem_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = pipeline_config();
        cfg.solvers =
            vec![serde_json::from_str(r#"{"name": "prox_svrg", "eta": 0.1, "m": 5}"#).unwrap()];
        assert!(cmd_run(&cfg, dir.path(), dir.path()).is_err());
    }

    #[test]
    fn divergence_is_recorded_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = pipeline_config();
        cfg.solvers = vec![
            serde_json::from_str(r#"{"name": "vrsc_pg", "label": "wild", "eta": 1e6, "m": 5, "A": 1, "B": 1, "b1": 1}"#)
                .unwrap(),
            serde_json::from_str(r#"{"name": "prox_full_gradient", "eta": 0.01}"#).unwrap(),
        ];
        cfg.seeds = vec![3];
        let summary = cmd_run(&cfg, dir.path(), dir.path()).unwrap();
        assert_eq!(summary.runs[0].status, RunStatus::Diverged);
        assert!(summary.runs[0].trace_file.is_some());
        assert_eq!(summary.runs[1].status, RunStatus::Finished);
    }
}
