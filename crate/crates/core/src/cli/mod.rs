//! Experiment runner: presets, config files, artifacts.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{apply_overrides, parse_config, parse_config_str, ExperimentSpec, ForwardModel, Overrides, PenaltyChoice, Preset};
pub use experiment::{build, report_text, run_experiment, run_many, solve_experiment, write_outputs, RunReport, Setup};
pub use output::{read_pgm, read_trace_csv, trace_csv, write_pgm, write_trace_csv, TraceRow};
