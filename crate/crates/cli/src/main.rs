use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use composolve_cli::{
    cmd_check, cmd_gen, cmd_plot, cmd_run, CheckConfig, ExperimentConfig, XAxis, YAxis,
};

#[derive(Parser)]
#[command(
    name = "composolve",
    version,
    about = "Variance-reduced compositional proximal gradient experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured problem and write it as JSON.
    Gen(Common),
    /// Run the solver sweep: one CSV trace per (solver, seed) plus summary.json.
    Run(Common),
    /// Plot the traces of a finished run as SVG.
    Plot {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = XArg::Queries)]
        x_axis: XArg,
        #[arg(long, value_enum, default_value_t = YArg::Gap)]
        y: YArg,
    },
    /// Run the verification suite; exits nonzero if any check fails.
    Check {
        /// Optional check settings (seed, resamples, seeds, skip list).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scratch directory for pipeline checks.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum XArg {
    Queries,
    Wall,
}

#[derive(Clone, Copy, ValueEnum)]
enum YArg {
    Gap,
    Gradnorm,
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf, PathBuf)> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let base = common
        .config
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let out = cfg.out_dir(&base, common.out.as_deref());
    Ok((cfg, base, out))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Gen(common) => {
            let (cfg, base, out) = load(&common)?;
            println!("{}", cmd_gen(&cfg, &base, &out)?.display());
        }
        Command::Run(common) => {
            let (cfg, base, out) = load(&common)?;
            let summary = cmd_run(&cfg, &base, &out)?;
            for r in &summary.runs {
                println!(
                    "{} seed {}: {:?} ({}), eta {}, final gap {}",
                    r.label,
                    r.seed,
                    r.status,
                    r.detail,
                    r.eta.map_or("-".into(), |e| e.to_string()),
                    r.final_gap.map_or("-".into(), |g| format!("{g:.3e}"))
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Plot { common, x_axis, y } => {
            let (_, _, out) = load(&common)?;
            let x = match x_axis {
                XArg::Queries => XAxis::Queries,
                XArg::Wall => XAxis::Wall,
            };
            let y = match y {
                YArg::Gap => YAxis::Gap,
                YArg::Gradnorm => YAxis::GradNorm,
            };
            println!("{}", cmd_plot(&out, x, y)?.display());
        }
        Command::Check { config, out } => {
            let cfg = match &config {
                Some(path) => CheckConfig::load(path)?,
                None => CheckConfig::default(),
            };
            let scratch = match out {
                Some(dir) => dir,
                None => {
                    std::env::temp_dir().join(format!("composolve-check-{}", std::process::id()))
                }
            };
            let outcomes = cmd_check(&cfg, &scratch).context("running checks")?;
            for o in &outcomes {
                println!("{o}");
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            println!("{} checks, {failed} failed", outcomes.len());
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
