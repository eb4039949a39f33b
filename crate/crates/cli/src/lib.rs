//! Experiment runner behind the `composolve` binary: problem generation,
//! solver sweeps with CSV traces, SVG plots and the verification suite.

pub mod commands;
pub mod config;
pub mod svg;
pub mod trace_csv;

pub use commands::{cmd_check, cmd_gen, cmd_plot, cmd_run, Summary, XAxis, YAxis};
pub use config::{CheckConfig, ExperimentConfig};
