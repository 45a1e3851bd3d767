//! Radon projections along one direction and the squared (Schlieren) model.
//!
//! Lines are parameterized as `m + sσ + tσ⊥` around the grid midpoint `m`,
//! with `σ = (cos θ, sin θ)` and `σ⊥ = (−sin θ, cos θ)`.

use std::sync::Arc;

use super::fd::{helmholtz_apply, helmholtz_solve, CgSettings};
use super::sampling::{bilinear, sample};
use super::{ForwardOperator, DEFAULT_NONLINEAR_ETA};
use crate::error::{Error, Result};
use crate::grid::{inner_product, DataVector, GridFunction, GridSpec};

#[derive(Debug, Clone)]
pub struct RadonOp {
    spec: GridSpec,
    theta: f64,
    offsets: Vec<f64>,
    weights: Arc<[f64]>,
    ts: Vec<f64>,
    dt: f64,
}

fn half_diagonal(spec: &GridSpec) -> f64 {
    let (x0, x1) = spec.x_range();
    let (y0, y1) = spec.y_range();
    0.5 * (x1 - x0).hypot(y1 - y0)
}

impl RadonOp {
    /// `n_s` cell-centered offsets covering `[−L, L]`, `L` the half diagonal
    /// of the domain, each with weight `Δs`.
    pub fn new(spec: GridSpec, theta: f64, n_s: usize) -> Result<Self> {
        if n_s == 0 {
            return Err(Error::param("n_s must be at least 1"));
        }
        let l = half_diagonal(&spec);
        let ds = 2.0 * l / n_s as f64;
        let offsets = (0..n_s).map(|k| -l + (k as f64 + 0.5) * ds).collect();
        Self::with_offsets(spec, theta, offsets, vec![ds; n_s])
    }

    /// One offset per grid cell width along the diagonal.
    pub fn with_defaults(spec: GridSpec, theta: f64) -> Result<Self> {
        let n_s = (2.0 * half_diagonal(&spec) / spec.hx().min(spec.hy())).ceil() as usize;
        Self::new(spec, theta, n_s)
    }

    pub fn with_offsets(spec: GridSpec, theta: f64, offsets: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::param("angle must be finite"));
        }
        if offsets.len() != weights.len() {
            return Err(Error::shape(format!("{} offsets but {} weights", offsets.len(), weights.len())));
        }
        if offsets.iter().any(|s| !s.is_finite()) {
            return Err(Error::param("offsets must be finite"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::param("data weights must be finite and nonnegative"));
        }
        let l = half_diagonal(&spec);
        let step = 0.5 * spec.hx().min(spec.hy());
        let n_t = (2.0 * l / step).ceil() as usize;
        let dt = 2.0 * l / n_t as f64;
        let ts = (0..n_t).map(|k| -l + (k as f64 + 0.5) * dt).collect();
        Ok(Self {
            spec,
            theta,
            offsets,
            weights: weights.into(),
            ts,
            dt,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    fn for_each_point(&self, s: f64, mut visit: impl FnMut(f64, f64)) {
        let (mx, my) = self.spec.midpoint();
        let (c, sn) = (self.theta.cos(), self.theta.sin());
        let (bx, by) = (mx + s * c, my + s * sn);
        for &t in &self.ts {
            visit(bx - t * sn, by + t * c);
        }
    }

    fn project(&self, values: &[f64]) -> Vec<f64> {
        self.offsets
            .iter()
            .map(|&s| {
                let mut acc = 0.0;
                self.for_each_point(s, |x, y| acc += sample(&self.spec, values, x, y));
                acc * self.dt
            })
            .collect()
    }

    /// Exact transpose of the projection in the grid `L²` pairing.
    fn back_project(&self, g: &[f64]) -> Result<GridFunction> {
        if g.len() != self.offsets.len() {
            return Err(Error::shape(format!(
                "data has {} entries, operator has {} offsets",
                g.len(),
                self.offsets.len()
            )));
        }
        let scale = self.dt / self.spec.cell_area();
        let mut out = vec![0.0; self.spec.len()];
        for (k, &s) in self.offsets.iter().enumerate() {
            let coeff = self.weights[k] * g[k] * scale;
            if coeff == 0.0 {
                continue;
            }
            self.for_each_point(s, |x, y| bilinear(&self.spec, x, y, |m, w| out[m] += coeff * w));
        }
        Ok(GridFunction::from_raw(self.spec, out))
    }

    fn check(&self, x: &GridFunction) -> Result<()> {
        if x.spec() != &self.spec {
            return Err(Error::shape("field grid differs from operator grid"));
        }
        Ok(())
    }
}

impl ForwardOperator for RadonOp {
    fn domain(&self) -> &GridSpec {
        &self.spec
    }

    fn data_weights(&self) -> &Arc<[f64]> {
        &self.weights
    }

    fn apply(&self, x: &GridFunction) -> Result<DataVector> {
        self.check(x)?;
        Ok(DataVector::from_raw(self.project(x.values()), self.weights.clone()))
    }

    fn deriv(&self, _x: &GridFunction, h: &GridFunction) -> Result<DataVector> {
        self.apply(h)
    }

    fn deriv_adjoint(&self, _x: &GridFunction, w: &DataVector) -> Result<GridFunction> {
        self.back_project(w.values())
    }

    fn eta_bound(&self) -> f64 {
        0.0
    }
}

/// `F(f) = (R f)²` pointwise. The unknown lives in the `(I − Δ_h)` pairing,
/// so the adjoint ends with one Helmholtz solve.
#[derive(Debug, Clone)]
pub struct SchlierenOp {
    radon: RadonOp,
    cg: CgSettings,
    eta: f64,
}

impl SchlierenOp {
    pub fn new(radon: RadonOp) -> Self {
        Self {
            radon,
            cg: CgSettings::default(),
            eta: DEFAULT_NONLINEAR_ETA,
        }
    }

    pub fn with_cg(mut self, cg: CgSettings) -> Self {
        self.cg = cg;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn radon(&self) -> &RadonOp {
        &self.radon
    }
}

impl ForwardOperator for SchlierenOp {
    fn domain(&self) -> &GridSpec {
        &self.radon.spec
    }

    fn data_weights(&self) -> &Arc<[f64]> {
        &self.radon.weights
    }

    fn apply(&self, x: &GridFunction) -> Result<DataVector> {
        let mut r = self.radon.apply(x)?.into_values();
        r.iter_mut().for_each(|v| *v *= *v);
        Ok(DataVector::from_raw(r, self.radon.weights.clone()))
    }

    fn deriv(&self, x: &GridFunction, h: &GridFunction) -> Result<DataVector> {
        self.radon.check(h)?;
        let rf = self.radon.apply(x)?.into_values();
        let rh = self.radon.project(h.values());
        let out = rf.iter().zip(&rh).map(|(a, b)| 2.0 * a * b).collect();
        Ok(DataVector::from_raw(out, self.radon.weights.clone()))
    }

    fn deriv_adjoint(&self, x: &GridFunction, w: &DataVector) -> Result<GridFunction> {
        let rf = self.radon.apply(x)?.into_values();
        if w.len() != rf.len() {
            return Err(Error::shape("data length differs from the number of offsets"));
        }
        let g: Vec<f64> = rf.iter().zip(w.values()).map(|(a, b)| 2.0 * a * b).collect();
        let bp = self.radon.back_project(&g)?;
        helmholtz_solve(&bp, self.cg)
    }

    fn eta_bound(&self) -> f64 {
        self.eta
    }

    fn is_linear(&self) -> bool {
        false
    }

    fn domain_inner_product(&self, a: &GridFunction, b: &GridFunction) -> Result<f64> {
        inner_product(&helmholtz_apply(a), b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::test_support::{adjoint_mismatch, random_field, taylor_slope};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, SQRT_2};

    fn square(n: usize) -> GridSpec {
        GridSpec::square(n, -1.0, 1.0).unwrap()
    }

    #[test]
    fn chord_of_the_square() {
        let spec = square(40);
        let r = RadonOp::with_offsets(spec, 0.0, vec![0.0, 1.5, -1.45], vec![1.0; 3]).unwrap();
        let out = r.apply(&GridFunction::constant(spec, 1.0)).unwrap();
        assert!((out.values()[0] - 2.0).abs() < 1e-3, "{}", out.values()[0]);
        assert_eq!(out.values()[1], 0.0);
        assert_eq!(out.values()[2], 0.0);

        let sch = SchlierenOp::new(r);
        let sq = sch.apply(&GridFunction::constant(spec, 1.0)).unwrap();
        assert!((sq.values()[0] - 4.0).abs() < 4e-3);
        assert_eq!(sch.apply(&GridFunction::zeros(spec)).unwrap().values(), &[0.0; 3]);
    }

    #[test]
    fn disc_chords_converge() {
        let spec = square(256);
        let disc = GridFunction::from_fn(spec, |x, y| if x * x + y * y <= 1.0 { 1.0 } else { 0.0 });
        let offsets: Vec<f64> = vec![0.0, 0.3, -0.55, 0.8];
        for theta in [0.0, 0.4, FRAC_PI_2, 2.5] {
            let r = RadonOp::with_offsets(spec, theta, offsets.clone(), vec![1.0; 4]).unwrap();
            let out = r.apply(&disc).unwrap();
            for (v, s) in out.values().iter().zip(&offsets) {
                let exact = 2.0 * (1.0 - s * s).sqrt();
                assert!((v - exact).abs() < 5e-3 * exact.max(1.0) + 1e-2, "θ={theta} s={s}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn default_offsets_cover_the_diagonal() {
        let r = RadonOp::new(square(10), 0.3, 8).unwrap();
        let off = r.offsets();
        assert!((off[0] + SQRT_2 - SQRT_2 / 8.0).abs() < 1e-12);
        let total: f64 = r.data_weights().iter().sum();
        assert!((total - 2.0 * SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn radon_adjoint_and_linearity() {
        let spec = square(24);
        let r = RadonOp::with_defaults(spec, 0.7).unwrap();
        let x = GridFunction::zeros(spec);
        assert!(adjoint_mismatch(&r, &x, 100, 5) < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_field(spec, 1.0, &mut rng);
        let b = random_field(spec, 1.0, &mut rng);
        let lhs = r.apply(&crate::grid::lin_comb(2.0, &a, 0.5, &b).unwrap()).unwrap();
        let rhs = r.apply(&a).unwrap().scaled(2.0).sub(&r.apply(&b).unwrap().scaled(-0.5)).unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-12 * lhs.norm());
    }

    #[test]
    fn schlieren_is_radon_squared() {
        let spec = square(20);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_field(spec, 1.0, &mut rng);
        let r = RadonOp::with_defaults(spec, 1.1).unwrap();
        let rf = r.apply(&f).unwrap();
        let sf = SchlierenOp::new(r).apply(&f).unwrap();
        for (a, b) in rf.values().iter().zip(sf.values()) {
            assert!((a * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn schlieren_derivative_is_second_order() {
        let spec = square(20);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = random_field(spec, 1.0, &mut rng);
        let h = random_field(spec, 1.0, &mut rng);
        let op = SchlierenOp::new(RadonOp::with_defaults(spec, 0.9).unwrap());
        let slope = taylor_slope(&op, &f, &h, &[1e-2, 1e-3, 1e-4, 1e-5]);
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
        assert_eq!(op.deriv(&f, &GridFunction::zeros(spec)).unwrap().norm(), 0.0);
    }

    #[test]
    fn schlieren_adjoint_in_h1_pairing() {
        let spec = square(24);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let f = random_field(spec, 1.0, &mut rng);
        let op = SchlierenOp::new(RadonOp::with_defaults(spec, 2.0).unwrap());
        assert!(adjoint_mismatch(&op, &f, 20, 10) < 1e-8);
    }
}
