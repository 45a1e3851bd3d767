//! Circular means `(M_i f)(r) = (1/2π) ∫_{S¹} f(x_i + rσ) dσ`.

use std::f64::consts::PI;
use std::sync::Arc;

use super::sampling::{bilinear, sample};
use super::ForwardOperator;
use crate::error::{Error, Result};
use crate::grid::{DataVector, GridFunction, GridSpec};

#[derive(Debug, Clone)]
pub struct CircularMeanOp {
    spec: GridSpec,
    center: (f64, f64),
    radii: Vec<f64>,
    weights: Arc<[f64]>,
    dirs: Vec<(f64, f64)>,
    norm_bound: f64,
}

impl CircularMeanOp {
    /// Radii `r_k = (k + ½)Δr` with `Δr = 2R / n_radii`, weights `r_k Δr`.
    pub fn new(
        spec: GridSpec,
        center: (f64, f64),
        detection_radius: f64,
        n_radii: usize,
        n_angles: usize,
    ) -> Result<Self> {
        if !(detection_radius > 0.0) || !detection_radius.is_finite() {
            return Err(Error::param(format!("detection radius must be positive, got {detection_radius}")));
        }
        if n_radii == 0 {
            return Err(Error::param("n_radii must be at least 1"));
        }
        let dr = 2.0 * detection_radius / n_radii as f64;
        let radii: Vec<f64> = (0..n_radii).map(|k| (k as f64 + 0.5) * dr).collect();
        let weights: Vec<f64> = radii.iter().map(|r| r * dr).collect();
        Self::with_radii(spec, center, radii, weights, n_angles)
    }

    /// `n_radii = max(nx, ny)`, `n_angles = 4·max(nx, ny)`.
    pub fn with_defaults(spec: GridSpec, center: (f64, f64), detection_radius: f64) -> Result<Self> {
        let n = spec.nx().max(spec.ny());
        Self::new(spec, center, detection_radius, n, 4 * n)
    }

    pub fn with_radii(
        spec: GridSpec,
        center: (f64, f64),
        radii: Vec<f64>,
        weights: Vec<f64>,
        n_angles: usize,
    ) -> Result<Self> {
        if n_angles == 0 {
            return Err(Error::param("n_angles must be at least 1"));
        }
        if radii.len() != weights.len() {
            return Err(Error::shape(format!("{} radii but {} weights", radii.len(), weights.len())));
        }
        if radii.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(Error::param("radii must be finite and nonnegative"));
        }
        if !center.0.is_finite() || !center.1.is_finite() {
            return Err(Error::param("center must be finite"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("data weights must be finite and nonnegative"));
        }
        let weights: Arc<[f64]> = weights.into();
        let dirs = (0..n_angles)
            .map(|j| {
                let phi = 2.0 * PI * j as f64 / n_angles as f64;
                (phi.cos(), phi.sin())
            })
            .collect();
        Ok(Self {
            spec,
            center,
            radii,
            weights,
            dirs,
            norm_bound: 2.0 * PI.sqrt(),
        })
    }

    /// Replaces the default bound `2√π` reported by `norm_bound`.
    pub fn with_norm_bound(mut self, bound: f64) -> Self {
        self.norm_bound = bound;
        self
    }

    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn n_angles(&self) -> usize {
        self.dirs.len()
    }

    fn mean(&self, values: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.dirs.len() as f64;
        let (cx, cy) = self.center;
        self.radii
            .iter()
            .map(|&r| {
                let s: f64 = self
                    .dirs
                    .iter()
                    .map(|&(c, s)| sample(&self.spec, values, cx + r * c, cy + r * s))
                    .sum();
                s * inv
            })
            .collect()
    }

    fn transpose(&self, g: &DataVector) -> Result<GridFunction> {
        if g.len() != self.radii.len() {
            return Err(Error::shape(format!("data has {} entries, operator has {} radii", g.len(), self.radii.len())));
        }
        let scale = 1.0 / (self.dirs.len() as f64 * self.spec.cell_area());
        let (cx, cy) = self.center;
        let mut out = vec![0.0; self.spec.len()];
        for (k, &r) in self.radii.iter().enumerate() {
            let coeff = self.weights[k] * g.values()[k] * scale;
            if coeff == 0.0 {
                continue;
            }
            for &(c, s) in &self.dirs {
                bilinear(&self.spec, cx + r * c, cy + r * s, |m, w| out[m] += coeff * w);
            }
        }
        Ok(GridFunction::from_raw(self.spec, out))
    }
}

impl ForwardOperator for CircularMeanOp {
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
        Ok(DataVector::from_raw(self.mean(x.values()), self.weights.clone()))
    }

    fn deriv(&self, _x: &GridFunction, h: &GridFunction) -> Result<DataVector> {
        self.apply(h)
    }

    fn deriv_adjoint(&self, _x: &GridFunction, w: &DataVector) -> Result<GridFunction> {
        self.transpose(w)
    }

    fn eta_bound(&self) -> f64 {
        0.0
    }

    fn norm_bound(&self) -> Option<f64> {
        Some(self.norm_bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::estimate_norm;
    use crate::operators::test_support::{adjoint_mismatch, random_field};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn op(n: usize) -> CircularMeanOp {
        let spec = GridSpec::square(n, -1.0, 1.0).unwrap();
        CircularMeanOp::with_defaults(spec, (0.96 * 0.6f64.sin(), 0.96 * 0.6f64.cos()), 0.96).unwrap()
    }

    #[test]
    fn constant_mean_inside_grid() {
        let spec = GridSpec::square(64, -3.0, 3.0).unwrap();
        let m = CircularMeanOp::new(spec, (0.2, -0.1), 0.96, 12, 256).unwrap();
        let out = m.apply(&GridFunction::constant(spec, 1.0)).unwrap();
        for v in out.values() {
            assert!((v - 1.0).abs() < 1e-3);
        }
        let zero = m.apply(&GridFunction::zeros(spec)).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weights_realize_r_dr() {
        let m = op(20);
        let total: f64 = m.data_weights().iter().sum();
        // ∫_0^{2R} r dr = 2R²
        assert!((total - 2.0 * 0.96f64.powi(2)).abs() < 1e-3);
        assert_eq!(m.radii().len(), 20);
        assert_eq!(m.n_angles(), 80);
    }

    #[test]
    fn gaussian_mean_converges_to_fine_quadrature() {
        let f = |x: f64, y: f64| (-(x * x + y * y) / 0.1).exp();
        let (center, r) = ((0.96, 0.0), 0.7);
        let n_ref = 1_000_000;
        let reference: f64 = (0..n_ref)
            .map(|j| {
                let phi = 2.0 * PI * j as f64 / n_ref as f64;
                f(center.0 + r * phi.cos(), center.1 + r * phi.sin())
            })
            .sum::<f64>()
            / n_ref as f64;
        let mut errors = Vec::new();
        for n in [64, 128, 256] {
            let spec = GridSpec::square(n, -2.0, 2.0).unwrap();
            let m = CircularMeanOp::with_radii(spec, center, vec![r], vec![1.0], 8 * n).unwrap();
            let v = m.apply(&GridFunction::from_fn(spec, f)).unwrap().values()[0];
            errors.push((v - reference).abs());
        }
        assert!(errors[2] < errors[0] / 4.0, "{errors:?}");
        assert!(errors[2] < 1e-3, "{errors:?}");
    }

    #[test]
    fn adjoint_is_transpose() {
        let m = op(24);
        let x = GridFunction::zeros(*m.domain());
        assert!(adjoint_mismatch(&m, &x, 100, 11) < 1e-10);
        let zero = m.deriv_adjoint(&x, &DataVector::zeros(m.data_weights().clone())).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn adjoint_approaches_analytic_kernel() {
        // With the 1/2π mean and r dr weights, M*g(x) = g(|x − x_i|) / 2π.
        let spec = GridSpec::square(128, -1.0, 1.0).unwrap();
        let center = (0.96, 0.0);
        let m = CircularMeanOp::new(spec, center, 0.96, 128, 1024).unwrap();
        let g = |r: f64| (2.0 * r).cos() + r;
        let data = DataVector::new(m.radii().iter().map(|&r| g(r)).collect(), m.data_weights().clone()).unwrap();
        let adj = m.deriv_adjoint(&GridFunction::zeros(spec), &data).unwrap();
        let mut worst: f64 = 0.0;
        for (i, j) in [(30, 64), (64, 64), (80, 20), (50, 100), (90, 90)] {
            let (x, y) = spec.center(i, j);
            let rho = ((x - center.0).powi(2) + (y - center.1).powi(2)).sqrt();
            let expected = g(rho) / (2.0 * PI);
            worst = worst.max((adj.at(i, j) - expected).abs() / expected.abs().max(0.1));
        }
        assert!(worst < 5e-2, "{worst}");
    }

    #[test]
    fn linear_in_the_field() {
        let m = op(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_field(*m.domain(), 1.0, &mut rng);
        let b = random_field(*m.domain(), 1.0, &mut rng);
        let comb = crate::grid::lin_comb(0.7, &a, -2.5, &b).unwrap();
        let lhs = m.apply(&comb).unwrap();
        let rhs = m.apply(&a).unwrap().scaled(0.7).sub(&m.apply(&b).unwrap().scaled(2.5)).unwrap();
        let diff = lhs.sub(&rhs).unwrap().norm();
        assert!(diff <= 1e-12 * lhs.norm().max(1e-300));
    }

    #[test]
    fn power_iteration_respects_bound() {
        let m = op(32);
        let est = estimate_norm(&m, &GridFunction::zeros(*m.domain()), 50, 1).unwrap();
        assert!(est > 0.0 && est <= 2.0 * PI.sqrt() + 0.1, "{est}");
        // Continuum bound 1/√(2π) up to discretization slack.
        assert!(est < 1.2 / (2.0 * PI).sqrt(), "{est}");
    }
}
