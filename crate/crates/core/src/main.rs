use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lkreg::cli::{apply_overrides, parse_config, run_many, Overrides, PenaltyChoice, Preset};

#[derive(Parser)]
#[command(name = "lkreg", version, about = "Landweber-Kaczmarz reconstruction with convex penalties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more experiments described by config files.
    Solve {
        /// Config file; repeat to run several experiments.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Output directory. With several configs, one subdirectory per config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        penalty: Option<PenaltyChoice>,
        #[arg(long)]
        beta: Option<f64>,
        /// Cells per side.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        measurements: Option<usize>,
        #[arg(long)]
        max_sweeps: Option<usize>,
        /// Experiments run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let Command::Solve { configs, out, seed, preset, penalty, beta, grid, measurements, max_sweeps, jobs } =
        Cli::parse().command;

    let many = configs.len() > 1;
    let mut specs = Vec::with_capacity(configs.len());
    for path in &configs {
        let out = out.as_ref().map(|o| {
            if many {
                o.join(path.file_stem().unwrap_or_default())
            } else {
                o.clone()
            }
        });
        let overrides = Overrides { preset, out, seed, penalty, beta, grid, measurements, max_sweeps };
        match parse_config(path).and_then(|s| apply_overrides(s, &overrides)) {
            Ok(s) => specs.push(s),
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        }
    }

    let mut failed = false;
    for (spec, res) in specs.iter().zip(run_many(&specs, jobs)) {
        match res {
            Ok(rep) => println!(
                "{}: n_delta = {} ({}), relative error {:.4e}, output in {}",
                spec.preset.name(),
                rep.result.n_delta,
                rep.result.stop_reason.label(),
                rep.relative_error,
                spec.out.display()
            ),
            Err(e) => {
                eprintln!("{}: {e}", spec.out.display());
                failed = true;
            }
        }
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
