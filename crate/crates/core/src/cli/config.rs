//! Experiment specifications: presets, `key = value` config files, and
//! command-line overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::penalty::{Penalty, PenaltyKind};
use crate::phantoms::{NoiseMode, Phantom, Primitive, Shape};
use crate::solver::{StepRule, StopRule};
use crate::tvprox::TvProxOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Pat,
    EllipticId,
    Schlieren,
    Custom,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pat" => Ok(Preset::Pat),
            "ellipticid" | "elliptic" => Ok(Preset::EllipticId),
            "schlieren" => Ok(Preset::Schlieren),
            "custom" => Ok(Preset::Custom),
            _ => Err(Error::Config(format!("unknown preset '{s}' (PAT, EllipticID, Schlieren, Custom)"))),
        }
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Pat => "PAT",
            Preset::EllipticId => "EllipticID",
            Preset::Schlieren => "Schlieren",
            Preset::Custom => "Custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardModel {
    CircularMeans,
    Elliptic,
    Schlieren,
}

impl FromStr for ForwardModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "circular" | "circular_means" => Ok(ForwardModel::CircularMeans),
            "elliptic" => Ok(ForwardModel::Elliptic),
            "schlieren" => Ok(ForwardModel::Schlieren),
            _ => Err(Error::Config(format!("unknown model '{s}' (circular, elliptic, schlieren)"))),
        }
    }
}

impl ForwardModel {
    pub fn name(&self) -> &'static str {
        match self {
            ForwardModel::CircularMeans => "circular",
            ForwardModel::Elliptic => "elliptic",
            ForwardModel::Schlieren => "schlieren",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyChoice {
    Quad,
    L1L2,
    TvL2,
}

impl FromStr for PenaltyChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "quad" => Ok(PenaltyChoice::Quad),
            "l1l2" => Ok(PenaltyChoice::L1L2),
            "tvl2" => Ok(PenaltyChoice::TvL2),
            _ => Err(Error::Config(format!("unknown penalty '{s}' (quad, l1l2, tvl2)"))),
        }
    }
}

impl PenaltyChoice {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltyChoice::Quad => "quad",
            PenaltyChoice::L1L2 => "l1l2",
            PenaltyChoice::TvL2 => "tvl2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub model: ForwardModel,
    /// Cells per side of the square grid.
    pub grid: usize,
    pub measurements: usize,
    pub penalty: PenaltyChoice,
    pub beta: f64,
    pub tv_iters: usize,
    pub tv_tol: f64,
    pub tau: f64,
    pub mu0: f64,
    /// `mu0` was set explicitly and is not derived from τ and β.
    pub mu0_explicit: bool,
    pub mu1: Option<f64>,
    pub r: f64,
    pub stop_rule: StopRule,
    pub max_sweeps: usize,
    /// Nominal noise level. In absolute mode it is the noise level itself.
    pub delta: f64,
    pub noise: NoiseMode,
    pub seed: u64,
    /// Constant value of the initial dual field.
    pub xi0: f64,
    pub detection_radius: f64,
    /// Tangential-cone constant assumed for nonlinear models.
    pub eta: f64,
    pub cg_tol: f64,
    pub phantom: Phantom,
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn preset(preset: Preset) -> Self {
        let base = Self {
            preset,
            model: ForwardModel::CircularMeans,
            grid: 160,
            measurements: 80,
            penalty: PenaltyChoice::TvL2,
            beta: 1.0,
            tv_iters: TvProxOptions::default().max_iters,
            tv_tol: TvProxOptions::default().tol,
            tau: 1.2,
            mu0: 0.0,
            mu0_explicit: false,
            mu1: None,
            r: 2.0,
            stop_rule: StopRule::AllSkipped,
            max_sweeps: 10_000,
            delta: 0.01,
            noise: NoiseMode::RelativePercent(2.0),
            seed: 0,
            xi0: 0.0,
            detection_radius: 0.96,
            eta: crate::operators::DEFAULT_NONLINEAR_ETA,
            cg_tol: crate::operators::CgSettings::default().tol,
            phantom: Phantom::pat_default(),
            out: PathBuf::from("out"),
        };
        let mut spec = match preset {
            Preset::Pat | Preset::Custom => base,
            Preset::EllipticId => Self {
                model: ForwardModel::Elliptic,
                grid: 100,
                measurements: 1,
                tau: 1.1,
                mu1: Some(4000.0),
                delta: 0.5e-4,
                noise: NoiseMode::AbsoluteDelta(0.5e-4),
                phantom: Phantom::pde_coefficient(),
                ..base
            },
            Preset::Schlieren => Self {
                model: ForwardModel::Schlieren,
                grid: 120,
                measurements: 100,
                tau: 1.5,
                mu1: Some(1000.0),
                delta: 0.002,
                noise: NoiseMode::AbsoluteDelta(0.002),
                xi0: 0.01,
                phantom: Phantom::schlieren_default(),
                ..base
            },
        };
        spec.mu0 = spec.derived_mu0();
        spec
    }

    /// `(1 − 1/τ)/(β√π)` for circular means, `(1 − 1/τ)/β` otherwise.
    pub fn derived_mu0(&self) -> f64 {
        let base = (1.0 - 1.0 / self.tau) / self.beta;
        match self.model {
            ForwardModel::CircularMeans => base / std::f64::consts::PI.sqrt(),
            _ => base,
        }
    }

    pub fn step_rule(&self) -> StepRule {
        match self.mu1 {
            Some(mu1) => StepRule::Adaptive { mu1 },
            None => StepRule::Scaled,
        }
    }

    pub fn build_penalty(&self) -> Result<Penalty> {
        let kind = match self.penalty {
            PenaltyChoice::Quad => PenaltyKind::Quadratic,
            PenaltyChoice::L1L2 => PenaltyKind::L1L2,
            PenaltyChoice::TvL2 => PenaltyKind::TvL2 {
                tv: TvProxOptions { max_iters: self.tv_iters, tol: self.tv_tol },
            },
        };
        Penalty::new(kind, self.beta)
    }

    fn refresh_mu0(&mut self) {
        if !self.mu0_explicit {
            self.mu0 = self.derived_mu0();
        }
    }

    /// Checks every parameter constraint, naming the violated inequality.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.tau > 1.0) {
            return fail(format!("tau > 1 violated (tau = {})", self.tau));
        }
        if !(self.beta > 0.0) {
            return fail(format!("beta > 0 violated (beta = {})", self.beta));
        }
        if !(self.mu0 > 0.0) {
            return fail(format!("mu0 > 0 violated (mu0 = {})", self.mu0));
        }
        if let Some(mu1) = self.mu1 {
            if !(mu1 > 0.0) {
                return fail(format!("mu1 > 0 violated (mu1 = {mu1})"));
            }
        }
        if !(self.r > 1.0) {
            return fail(format!("r > 1 violated (r = {})", self.r));
        }
        if self.grid < 2 {
            return fail(format!("grid >= 2 violated (grid = {})", self.grid));
        }
        if self.measurements == 0 {
            return fail("measurements >= 1 violated".into());
        }
        if self.model == ForwardModel::Elliptic && self.measurements != 1 {
            return fail(format!("the elliptic model has exactly one equation (measurements = {})", self.measurements));
        }
        if self.max_sweeps == 0 {
            return fail("max_sweeps >= 1 violated".into());
        }
        if !(self.delta >= 0.0) {
            return fail(format!("delta >= 0 violated (delta = {})", self.delta));
        }
        match self.noise {
            NoiseMode::AbsoluteDelta(d) if !(d >= 0.0) => return fail(format!("delta >= 0 violated (delta = {d})")),
            NoiseMode::RelativePercent(p) if !(p >= 0.0) => {
                return fail(format!("noise_percent >= 0 violated (noise_percent = {p})"))
            }
            _ => {}
        }
        if self.tv_iters == 0 || !(self.tv_tol > 0.0) {
            return fail("tv_iters >= 1 and tv_tol > 0 required".into());
        }
        if !(self.detection_radius > 0.0) {
            return fail(format!("detection_radius > 0 violated ({})", self.detection_radius));
        }
        if !(0.0..1.0).contains(&self.eta) {
            return fail(format!("0 <= eta < 1 violated (eta = {})", self.eta));
        }
        if !(self.cg_tol > 0.0) {
            return fail(format!("cg_tol > 0 violated (cg_tol = {})", self.cg_tol));
        }
        if !self.xi0.is_finite() {
            return fail("xi0 must be finite".into());
        }
        Ok(())
    }

    /// Parameter echo, one `key = value` per line, re-parseable.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "preset = {}", self.preset.name());
        let _ = writeln!(s, "model = {}", self.model.name());
        let _ = writeln!(s, "grid = {}", self.grid);
        let _ = writeln!(s, "measurements = {}", self.measurements);
        let _ = writeln!(s, "penalty = {}", self.penalty.name());
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "tv_iters = {}", self.tv_iters);
        let _ = writeln!(s, "tv_tol = {}", self.tv_tol);
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "mu0 = {}", self.mu0);
        if let Some(mu1) = self.mu1 {
            let _ = writeln!(s, "mu1 = {mu1}");
        }
        let _ = writeln!(s, "r = {}", self.r);
        let stop = match self.stop_rule {
            StopRule::AllSkipped => "all_skipped",
            StopRule::ResidualSum => "residual_sum",
        };
        let _ = writeln!(s, "stop_rule = {stop}");
        let _ = writeln!(s, "max_sweeps = {}", self.max_sweeps);
        let _ = writeln!(s, "delta = {}", self.delta);
        if let NoiseMode::RelativePercent(p) = self.noise {
            let _ = writeln!(s, "noise_percent = {p}");
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "xi0 = {}", self.xi0);
        let _ = writeln!(s, "detection_radius = {}", self.detection_radius);
        let _ = writeln!(s, "eta = {}", self.eta);
        let _ = writeln!(s, "cg_tol = {}", self.cg_tol);
        for p in self.phantom.primitives() {
            let (cx, cy) = p.center;
            let line = match p.shape {
                Shape::Disc { radius } => format!("disc {cx} {cy} {radius} {}", p.value),
                Shape::Ellipse { rx, ry } => format!("ellipse {cx} {cy} {rx} {ry} {}", p.value),
                Shape::Rectangle { half_width, half_height } => {
                    format!("rect {cx} {cy} {half_width} {half_height} {}", p.value)
                }
            };
            let _ = writeln!(s, "phantom = {line}");
        }
        s
    }
}

/// Values given on the command line; each replaces the config value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub penalty: Option<PenaltyChoice>,
    pub beta: Option<f64>,
    pub grid: Option<usize>,
    pub measurements: Option<usize>,
    pub max_sweeps: Option<usize>,
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: cannot parse value '{value}' for key '{key}'")))
}

fn parse_primitive(value: &str, line: usize) -> Result<Primitive> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    let nums = parts[1..]
        .iter()
        .map(|t| parse_value::<f64>("phantom", t, line))
        .collect::<Result<Vec<f64>>>()?;
    let (shape, want) = match parts.first().copied() {
        Some("disc") if nums.len() == 4 => (Shape::Disc { radius: nums[2] }, 4),
        Some("ellipse") if nums.len() == 5 => (Shape::Ellipse { rx: nums[2], ry: nums[3] }, 5),
        Some("rect") if nums.len() == 5 => (Shape::Rectangle { half_width: nums[2], half_height: nums[3] }, 5),
        _ => {
            return Err(Error::Config(format!(
                "line {line}: phantom must be 'disc cx cy r v', 'ellipse cx cy rx ry v' or 'rect cx cy hw hh v'"
            )))
        }
    };
    Primitive::new(shape, (nums[0], nums[1]), nums[want - 1])
        .map_err(|e| Error::Config(format!("line {line}: {e}")))
}

/// Parses config text. The `preset` line is applied first wherever it
/// appears; the remaining keys override its defaults in file order.
pub fn parse_config_str(text: &str) -> Result<ExperimentSpec> {
    let mut entries = Vec::new();
    let mut preset = Preset::Custom;
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line}: expected 'key = value', got '{content}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "preset" {
            preset = parse_value(key, value, line)?;
        } else {
            entries.push((line, key.to_string(), value.to_string()));
        }
    }
    let mut spec = ExperimentSpec::preset(preset);
    let mut custom_phantom = false;
    for (line, key, value) in entries {
        let v = value.as_str();
        match key.as_str() {
            "model" => spec.model = parse_value(&key, v, line)?,
            "grid" => spec.grid = parse_value(&key, v, line)?,
            "measurements" => spec.measurements = parse_value(&key, v, line)?,
            "penalty" => spec.penalty = parse_value(&key, v, line)?,
            "beta" => spec.beta = parse_value(&key, v, line)?,
            "tv_iters" => spec.tv_iters = parse_value(&key, v, line)?,
            "tv_tol" => spec.tv_tol = parse_value(&key, v, line)?,
            "tau" => spec.tau = parse_value(&key, v, line)?,
            "mu0" => {
                spec.mu0 = parse_value(&key, v, line)?;
                spec.mu0_explicit = true;
            }
            "mu1" => {
                spec.mu1 = match v {
                    "none" => None,
                    _ => Some(parse_value(&key, v, line)?),
                }
            }
            "r" => spec.r = parse_value(&key, v, line)?,
            "stop_rule" => {
                spec.stop_rule = match v {
                    "all_skipped" => StopRule::AllSkipped,
                    "residual_sum" => StopRule::ResidualSum,
                    _ => return Err(Error::Config(format!("line {line}: stop_rule is all_skipped or residual_sum"))),
                }
            }
            "max_sweeps" => spec.max_sweeps = parse_value(&key, v, line)?,
            "delta" => {
                spec.delta = parse_value(&key, v, line)?;
                spec.noise = NoiseMode::AbsoluteDelta(spec.delta);
            }
            "noise_percent" => spec.noise = NoiseMode::RelativePercent(parse_value(&key, v, line)?),
            "seed" => spec.seed = parse_value(&key, v, line)?,
            "xi0" => spec.xi0 = parse_value(&key, v, line)?,
            "detection_radius" => spec.detection_radius = parse_value(&key, v, line)?,
            "eta" => spec.eta = parse_value(&key, v, line)?,
            "cg_tol" => spec.cg_tol = parse_value(&key, v, line)?,
            "out" => spec.out = PathBuf::from(v),
            "phantom" => {
                if !custom_phantom {
                    spec.phantom = Phantom::default();
                    custom_phantom = true;
                }
                spec.phantom.push(parse_primitive(v, line)?);
            }
            _ => return Err(Error::Config(format!("line {line}: unknown key '{key}'"))),
        }
    }
    spec.refresh_mu0();
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

/// Applies command-line overrides. A preset override restarts from that
/// preset's defaults.
pub fn apply_overrides(mut spec: ExperimentSpec, o: &Overrides) -> Result<ExperimentSpec> {
    if let Some(p) = o.preset {
        let keep = (spec.out.clone(), spec.seed);
        spec = ExperimentSpec::preset(p);
        (spec.out, spec.seed) = keep;
    }
    if let Some(v) = &o.out {
        spec.out = v.clone();
    }
    if let Some(v) = o.seed {
        spec.seed = v;
    }
    if let Some(v) = o.penalty {
        spec.penalty = v;
    }
    if let Some(v) = o.beta {
        spec.beta = v;
    }
    if let Some(v) = o.grid {
        spec.grid = v;
    }
    if let Some(v) = o.measurements {
        spec.measurements = v;
    }
    if let Some(v) = o.max_sweeps {
        spec.max_sweeps = v;
    }
    spec.refresh_mu0();
    spec.validate()?;
    Ok(spec)
}
