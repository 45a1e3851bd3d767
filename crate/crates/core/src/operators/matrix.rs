//! Dense linear operator on grid values, for small synthetic systems.

use std::sync::Arc;

use super::ForwardOperator;
use crate::error::{Error, Result};
use crate::grid::{DataVector, GridFunction, GridSpec};

/// `(Ax)_k = Σ_m a_{km} x_m`, rows stored contiguously.
#[derive(Debug, Clone)]
pub struct MatrixOp {
    spec: GridSpec,
    rows: usize,
    entries: Vec<f64>,
    weights: Arc<[f64]>,
}

impl MatrixOp {
    pub fn new(spec: GridSpec, rows: usize, entries: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * spec.len() {
            return Err(Error::shape(format!(
                "{} entries for a {rows}x{} matrix",
                entries.len(),
                spec.len()
            )));
        }
        if weights.len() != rows {
            return Err(Error::shape(format!("{} weights for {rows} rows", weights.len())));
        }
        if entries.iter().any(|a| !a.is_finite()) {
            return Err(Error::param("matrix entries must be finite"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::param("data weights must be finite and positive"));
        }
        Ok(Self { spec, rows, entries, weights: weights.into() })
    }

    /// Identity on grid values, data weighted like the grid.
    pub fn identity(spec: GridSpec) -> Self {
        let n = spec.len();
        let mut entries = vec![0.0; n * n];
        for k in 0..n {
            entries[k * n + k] = 1.0;
        }
        Self {
            spec,
            rows: n,
            entries,
            weights: vec![spec.cell_area(); n].into(),
        }
    }

    fn multiply(&self, x: &[f64]) -> Vec<f64> {
        self.entries
            .chunks_exact(self.spec.len())
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl ForwardOperator for MatrixOp {
    fn domain(&self) -> &GridSpec {
        &self.spec
    }

    fn data_weights(&self) -> &Arc<[f64]> {
        &self.weights
    }

    fn apply(&self, x: &GridFunction) -> Result<DataVector> {
        if x.spec() != &self.spec {
            return Err(Error::shape("field grid differs from operator grid"));
        }
        Ok(DataVector::from_raw(self.multiply(x.values()), self.weights.clone()))
    }

    fn deriv(&self, _x: &GridFunction, h: &GridFunction) -> Result<DataVector> {
        self.apply(h)
    }

    fn deriv_adjoint(&self, _x: &GridFunction, w: &DataVector) -> Result<GridFunction> {
        if w.len() != self.rows {
            return Err(Error::shape(format!("data has {} entries, matrix has {} rows", w.len(), self.rows)));
        }
        let n = self.spec.len();
        let inv_area = 1.0 / self.spec.cell_area();
        let mut out = vec![0.0; n];
        for (k, row) in self.entries.chunks_exact(n).enumerate() {
            let c = self.weights[k] * w.values()[k] * inv_area;
            for (o, a) in out.iter_mut().zip(row) {
                *o += c * a;
            }
        }
        Ok(GridFunction::from_raw(self.spec, out))
    }

    fn eta_bound(&self) -> f64 {
        0.0
    }
}
