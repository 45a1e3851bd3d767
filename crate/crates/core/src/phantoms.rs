//! Piecewise-constant phantoms, exact data, and uniform noise scaled to an
//! exact norm.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{DataVector, GridFunction, GridSpec};
use crate::operators::ForwardOperator;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disc { radius: f64 },
    /// Axis-aligned, `((x−cx)/rx)² + ((y−cy)/ry)² ≤ 1`.
    Ellipse { rx: f64, ry: f64 },
    /// Axis-aligned, given by half-widths.
    Rectangle { half_width: f64, half_height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub center: (f64, f64),
    pub value: f64,
}

impl Primitive {
    pub fn new(shape: Shape, center: (f64, f64), value: f64) -> Result<Self> {
        let dims_ok = match shape {
            Shape::Disc { radius } => radius > 0.0 && radius.is_finite(),
            Shape::Ellipse { rx, ry } => rx > 0.0 && ry > 0.0 && rx.is_finite() && ry.is_finite(),
            Shape::Rectangle { half_width, half_height } => {
                half_width > 0.0 && half_height > 0.0 && half_width.is_finite() && half_height.is_finite()
            }
        };
        if !dims_ok {
            return Err(Error::param(format!("primitive dimensions must be positive and finite: {shape:?}")));
        }
        if !(center.0.is_finite() && center.1.is_finite() && value.is_finite()) {
            return Err(Error::param("primitive center and value must be finite"));
        }
        Ok(Self { shape, center, value })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        match self.shape {
            Shape::Disc { radius } => dx * dx + dy * dy <= radius * radius,
            Shape::Ellipse { rx, ry } => (dx / rx).powi(2) + (dy / ry).powi(2) <= 1.0,
            Shape::Rectangle { half_width, half_height } => dx.abs() <= half_width && dy.abs() <= half_height,
        }
    }
}

/// Sum of weighted indicator functions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Phantom {
    primitives: Vec<Primitive>,
}

impl Phantom {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        Self { primitives }
    }

    pub fn push(&mut self, p: Primitive) {
        self.primitives.push(p);
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.primitives.iter().filter(|p| p.contains(x, y)).map(|p| p.value).sum()
    }

    /// Evaluates at cell centers.
    pub fn rasterize(&self, spec: GridSpec) -> GridFunction {
        GridFunction::from_fn(spec, |x, y| self.eval(x, y))
    }

    /// The coefficient `c†` on `[0,1]²`: 1 on the disc of radius 0.18 at
    /// (0.65, 0.36), 0.5 on the ellipse `(x−0.35)² + 4(y−0.75)² ≤ 0.2²`.
    pub fn pde_coefficient() -> Self {
        Self::new(vec![
            Primitive { shape: Shape::Disc { radius: 0.18 }, center: (0.65, 0.36), value: 1.0 },
            Primitive { shape: Shape::Ellipse { rx: 0.2, ry: 0.1 }, center: (0.35, 0.75), value: 0.5 },
        ])
    }

    /// Fixed photoacoustic test object on `[−1,1]²`, supported in the disc
    /// of radius 0.96 with values in `[0, 1]`.
    pub fn pat_default() -> Self {
        Self::new(vec![
            Primitive { shape: Shape::Disc { radius: 0.22 }, center: (-0.3, 0.25), value: 1.0 },
            Primitive {
                shape: Shape::Rectangle { half_width: 0.18, half_height: 0.12 },
                center: (0.3, -0.2),
                value: 0.6,
            },
            Primitive { shape: Shape::Ellipse { rx: 0.25, ry: 0.1 }, center: (0.2, 0.5), value: 0.8 },
            Primitive { shape: Shape::Disc { radius: 0.12 }, center: (-0.25, -0.45), value: 0.4 },
        ])
    }

    /// Fixed Schlieren test field on `[−1,1]²`, vanishing near the boundary.
    pub fn schlieren_default() -> Self {
        Self::new(vec![
            Primitive { shape: Shape::Ellipse { rx: 0.3, ry: 0.15 }, center: (-0.35, 0.2), value: 1.0 },
            Primitive { shape: Shape::Disc { radius: 0.2 }, center: (0.35, -0.25), value: 0.7 },
            Primitive {
                shape: Shape::Rectangle { half_width: 0.12, half_height: 0.12 },
                center: (0.3, 0.4),
                value: 0.4,
            },
        ])
    }
}

/// Exact data `y_i = F_i(x_true)`.
pub fn synthesize(operators: &[Arc<dyn ForwardOperator>], x_true: &GridFunction) -> Result<Vec<DataVector>> {
    operators.iter().map(|op| op.apply(x_true)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    AbsoluteDelta(f64),
    /// Percentage of the data norm.
    RelativePercent(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub mode: NoiseMode,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let v = match self.mode {
            NoiseMode::AbsoluteDelta(d) => d,
            NoiseMode::RelativePercent(r) => r,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::param(format!("noise level must be finite and >= 0, got {v}")));
        }
        Ok(())
    }
}

/// Seed of the draw for equation `i`.
fn sub_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Uniform `[−1, 1]` perturbation with weighted norm exactly `delta`.
fn perturb(y: &DataVector, delta: f64, mut seed: u64) -> DataVector {
    if delta == 0.0 || y.is_empty() {
        return y.clone();
    }
    loop {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw: Vec<f64> = (0..y.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let noise = DataVector::from_raw(draw, y.weights().clone());
        let norm = noise.norm();
        if norm > 0.0 {
            let s = delta / norm;
            let values = y.values().iter().zip(noise.values()).map(|(a, b)| a + s * b).collect();
            return DataVector::from_raw(values, y.weights().clone());
        }
        seed = seed.wrapping_add(1);
    }
}

/// Perturbs one data vector. Returns the noisy data and its noise level.
pub fn add_noise(y: &DataVector, spec: NoiseSpec) -> Result<(DataVector, f64)> {
    spec.validate()?;
    let delta = match spec.mode {
        NoiseMode::AbsoluteDelta(d) => d,
        NoiseMode::RelativePercent(r) => r / 100.0 * y.norm(),
    };
    Ok((perturb(y, delta, spec.seed), delta))
}

/// Perturbs every `y_i` independently with norm exactly `δ`.
///
/// In relative mode `δ = ρ% · (mean_i ‖y_i‖²)^{1/2}`, so one noise level
/// serves all equations.
pub fn add_noise_all(ys: &[DataVector], spec: NoiseSpec) -> Result<(Vec<DataVector>, f64)> {
    spec.validate()?;
    let delta = match spec.mode {
        NoiseMode::AbsoluteDelta(d) => d,
        NoiseMode::RelativePercent(r) => {
            if ys.is_empty() {
                0.0
            } else {
                let ms = ys.iter().map(|y| y.norm().powi(2)).sum::<f64>() / ys.len() as f64;
                r / 100.0 * ms.sqrt()
            }
        }
    };
    let noisy = ys.iter().enumerate().map(|(i, y)| perturb(y, delta, sub_seed(spec.seed, i))).collect();
    Ok((noisy, delta))
}
