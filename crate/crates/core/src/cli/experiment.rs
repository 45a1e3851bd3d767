//! Binds an [`ExperimentSpec`] to operators, data and the solver, and
//! writes the run artifacts.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::config::{ExperimentSpec, ForwardModel};
use super::output::{write_pgm, write_trace_csv};
use crate::error::{Error, Result};
use crate::grid::{lin_comb, GridFunction, GridSpec};
use crate::operators::{CgSettings, CircularMeanOp, EllipticParamOp, ForwardOperator, RadonOp, SchlierenOp};
use crate::phantoms::{add_noise_all, synthesize, NoiseSpec};
use crate::solver::{run, Problem, SolveResult, SolverConfig};

/// Everything needed to run the solver on one experiment.
pub struct Setup {
    pub problem: Problem,
    pub truth: GridFunction,
    pub config: SolverConfig,
    /// Noise level actually applied to every `y_i`.
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub spec: ExperimentSpec,
    pub result: SolveResult,
    pub truth: GridFunction,
    pub delta: f64,
    pub relative_error: f64,
    pub wall_time: Duration,
}

fn operators(spec: &ExperimentSpec, truth: &GridFunction) -> Result<Vec<Arc<dyn ForwardOperator>>> {
    let grid = *truth.spec();
    let n = spec.measurements;
    let cg = CgSettings { tol: spec.cg_tol, ..CgSettings::default() };
    let ops: Vec<Arc<dyn ForwardOperator>> = match spec.model {
        ForwardModel::CircularMeans => (0..n)
            .map(|j| {
                // Detectors on the upper semicircle of radius R.
                let a = j as f64 * PI / n as f64;
                let center = (spec.detection_radius * a.sin(), spec.detection_radius * a.cos());
                CircularMeanOp::with_defaults(grid, center, spec.detection_radius)
                    .map(|op| Arc::new(op) as Arc<dyn ForwardOperator>)
            })
            .collect::<Result<_>>()?,
        ForwardModel::Schlieren => (0..n)
            .map(|j| {
                let theta = j as f64 * PI / n as f64;
                RadonOp::with_defaults(grid, theta).map(|r| {
                    Arc::new(SchlierenOp::new(r).with_cg(cg).with_eta(spec.eta)) as Arc<dyn ForwardOperator>
                })
            })
            .collect::<Result<_>>()?,
        ForwardModel::Elliptic => {
            let xy = GridFunction::from_fn(grid, |x, y| x + y);
            let source = GridFunction::new(
                grid,
                truth.values().iter().zip(xy.values()).map(|(c, u)| c * u).collect(),
            )?;
            let op = EllipticParamOp::new(grid, &source, |x, y| x + y)?.with_cg(cg).with_eta(spec.eta);
            vec![Arc::new(op)]
        }
    };
    Ok(ops)
}

pub fn grid_for(spec: &ExperimentSpec) -> Result<GridSpec> {
    match spec.model {
        ForwardModel::Elliptic => GridSpec::square(spec.grid, 0.0, 1.0),
        _ => GridSpec::square(spec.grid, -1.0, 1.0),
    }
}

/// Builds phantom, operators and noisy data.
pub fn build(spec: &ExperimentSpec) -> Result<Setup> {
    spec.validate()?;
    let grid = grid_for(spec)?;
    let truth = spec.phantom.rasterize(grid);
    let ops = operators(spec, &truth)?;
    let exact = synthesize(&ops, &truth)?;
    let (data, delta) = add_noise_all(&exact, NoiseSpec { mode: spec.noise, seed: spec.seed })?;
    let penalty = spec.build_penalty()?;
    let problem = Problem::new(ops, data, penalty, GridFunction::constant(grid, spec.xi0))?
        .with_reference(truth.clone())?;
    let mut config = SolverConfig::new(spec.tau, spec.mu0, delta);
    config.r = spec.r;
    config.step_rule = spec.step_rule();
    config.stop_rule = spec.stop_rule;
    config.max_sweeps = spec.max_sweeps;
    Ok(Setup { problem, truth, config, delta })
}

/// Builds and solves without writing anything.
pub fn solve_experiment(spec: &ExperimentSpec) -> Result<RunReport> {
    let start = Instant::now();
    let setup = build(spec).map_err(|e| e.in_stage("synthesis"))?;
    let result = run(&setup.problem, &setup.config).map_err(|e| e.in_stage("solve"))?;
    let tn = setup.truth.norm();
    let err = lin_comb(1.0, &result.x, -1.0, &setup.truth)?.norm();
    Ok(RunReport {
        spec: spec.clone(),
        relative_error: if tn > 0.0 { err / tn } else { err },
        result,
        truth: setup.truth,
        delta: setup.delta,
        wall_time: start.elapsed(),
    })
}

pub fn report_text(report: &RunReport) -> String {
    let r = &report.result;
    let mut s = String::new();
    let _ = writeln!(s, "n_delta = {}", r.n_delta);
    let _ = writeln!(s, "stop_reason = {}", r.stop_reason.label());
    let _ = writeln!(s, "sweeps_run = {}", r.sweeps.len());
    let _ = writeln!(s, "relative_error = {:.6e}", report.relative_error);
    let _ = writeln!(s, "delta_applied = {:.6e}", report.delta);
    let _ = writeln!(s, "c1 = {:.6e}", r.c1);
    if let Some(last) = r.sweeps.last() {
        let _ = writeln!(s, "final_R_n = {:.6e}", last.residual_sum);
        if let Some(b) = last.bregman {
            let _ = writeln!(s, "final_bregman = {b:.6e}");
        }
    }
    let _ = writeln!(s, "inexact_prox_evaluations = {}", r.inexact_prox_count);
    let _ = writeln!(s, "wall_time_s = {:.3}", report.wall_time.as_secs_f64());
    s.push_str("\n# configuration\n");
    s.push_str(&report.spec.echo());
    s
}

pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_pgm(&report.result.x, &dir.join("recon.pgm"), None)?;
    write_pgm(&report.truth, &dir.join("phantom.pgm"), None)?;
    write_trace_csv(&report.result, &dir.join("trace.csv"))?;
    std::fs::write(dir.join("report.txt"), report_text(report))?;
    Ok(())
}

/// Solves and writes `recon.pgm`, `phantom.pgm`, `trace.csv` and
/// `report.txt` into `spec.out`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunReport> {
    let report = solve_experiment(spec)?;
    write_outputs(&report, &spec.out).map_err(|e| e.in_stage("output"))?;
    Ok(report)
}

/// Runs independent experiments on up to `jobs` threads. Results keep the
/// input order.
pub fn run_many(specs: &[ExperimentSpec], jobs: usize) -> Vec<Result<RunReport>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunReport>>>> = specs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, specs.len().max(1)) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= specs.len() {
                    break;
                }
                let out = run_experiment(&specs[k]);
                *slots[k].lock().unwrap() = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| {
            m.into_inner()
                .unwrap()
                .unwrap_or_else(|| Err(Error::Config("experiment did not run".into())))
        })
        .collect()
}
