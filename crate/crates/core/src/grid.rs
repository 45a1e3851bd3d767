//! Uniform cell-centered grids and the weighted inner products that make
//! discrete norms approximate continuum `L²` norms.
//!
//! Storage is row-major with rows running along `y`: the value of cell
//! `(i, j)` (column `i` along `x`, row `j` along `y`) lives at index
//! `j * nx + i`. Cell `(i, j)` is centered at
//! `(x_min + (i + ½)·hx, y_min + (j + ½)·hy)`.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Geometry of a uniform `nx × ny` cell grid on a rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::param(format!("grid needs nx, ny >= 1, got {nx}x{ny}")));
        }
        let (x_min, x_max) = x_range;
        let (y_min, y_max) = y_range;
        if !(x_max > x_min && y_max > y_min) || ![x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::param(format!(
                "grid bounds must be finite with max > min, got x in [{x_min}, {x_max}], y in [{y_min}, {y_max}]"
            )));
        }
        Ok(Self { nx, ny, x_min, x_max, y_min, y_max })
    }

    /// `n × n` cells on the square `[lo, hi]²`.
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(n, n, (lo, hi), (lo, hi))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_min, self.x_max)
    }

    pub fn y_range(&self) -> (f64, f64) {
        (self.y_min, self.y_max)
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Center of cell `(i, j)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x_min + (i as f64 + 0.5) * self.hx(),
            self.y_min + (j as f64 + 0.5) * self.hy(),
        )
    }

    /// Midpoint of the domain.
    pub fn midpoint(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    /// Continuous cell coordinates of a point: cell `(i, j)` center maps to `(i, j)`.
    #[inline]
    pub(crate) fn to_cell_coords(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.x_min) / self.hx() - 0.5, (y - self.y_min) / self.hy() - 0.5)
    }
}

/// A scalar field sampled at the cell centers of a [`GridSpec`].
///
/// Used for primal iterates, dual iterates (identified with primal
/// coordinates through the weighted inner product), phantoms and PDE states.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::shape(format!(
                "grid {}x{} needs {} values, got {}",
                spec.nx,
                spec.ny,
                spec.len(),
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(format!("non-finite grid value at index {k}")));
        }
        Ok(Self { spec, values })
    }

    /// Caller guarantees the length; finiteness is checked in debug builds only.
    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        Self { spec, values }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self::constant(spec, 0.0)
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self { spec, values: vec![value; spec.len()] }
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(spec: GridSpec, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(spec.len());
        for j in 0..spec.ny {
            for i in 0..spec.nx {
                let (x, y) = spec.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn norm(&self) -> f64 {
        (self.spec.cell_area() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            spec: self.spec,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self += alpha * other`.
    pub(crate) fn axpy(&mut self, alpha: f64, other: &GridFunction) -> Result<()> {
        check_same_spec(&self.spec, &other.spec)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }
}

fn check_same_spec(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("grid specs differ: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// `hx·hy·Σ aₖbₖ`, the discrete `L²(Ω)` pairing.
pub fn inner_product(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    check_same_spec(&a.spec, &b.spec)?;
    let sum: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(a.spec.cell_area() * sum)
}

/// Pointwise `alpha·a + beta·b`.
pub fn lin_comb(alpha: f64, a: &GridFunction, beta: f64, b: &GridFunction) -> Result<GridFunction> {
    check_same_spec(&a.spec, &b.spec)?;
    let values = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| alpha * x + beta * y)
        .collect();
    Ok(GridFunction { spec: a.spec, values })
}

/// An element of a data space: sample values plus the quadrature weights of
/// the data-space inner product.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    values: Vec<f64>,
    weights: Arc<[f64]>,
}

impl DataVector {
    pub fn new(values: Vec<f64>, weights: Arc<[f64]>) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::shape(format!(
                "data vector has {} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("data weights must be finite and nonnegative"));
        }
        Ok(Self { values, weights })
    }

    pub(crate) fn from_raw(values: Vec<f64>, weights: Arc<[f64]>) -> Self {
        debug_assert_eq!(values.len(), weights.len());
        Self { values, weights }
    }

    pub fn zeros(weights: Arc<[f64]>) -> Self {
        Self { values: vec![0.0; weights.len()], weights }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &Arc<[f64]> {
        &self.weights
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .zip(self.weights.iter())
            .map(|(v, w)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| alpha * v).collect(),
            weights: Arc::clone(&self.weights),
        }
    }

    /// `self - other`, both living in the same data space.
    pub fn sub(&self, other: &DataVector) -> Result<DataVector> {
        check_same_weights(self, other)?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
            weights: Arc::clone(&self.weights),
        })
    }
}

fn check_same_weights(a: &DataVector, b: &DataVector) -> Result<()> {
    if a.values.len() != b.values.len() {
        return Err(Error::shape(format!(
            "data vectors have lengths {} and {}",
            a.values.len(),
            b.values.len()
        )));
    }
    if !Arc::ptr_eq(&a.weights, &b.weights) && a.weights[..] != b.weights[..] {
        return Err(Error::shape("data vectors carry different quadrature weights"));
    }
    Ok(())
}

/// `Σ wₖaₖbₖ`, the weighted data-space pairing.
pub fn data_inner_product(a: &DataVector, b: &DataVector) -> Result<f64> {
    check_same_weights(a, b)?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .zip(a.weights.iter())
        .map(|((x, y), w)| w * x * y)
        .sum())
}
