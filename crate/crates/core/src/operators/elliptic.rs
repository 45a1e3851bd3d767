//! Parameter-to-solution map `c ↦ u(c)` for `−Δu + cu = f`, `u = g` on `∂Ω`.

use std::sync::{Arc, Mutex};

use super::fd::{dirichlet_rhs, CgSettings, ReactionDiffusion};
use super::{ForwardOperator, DEFAULT_NONLINEAR_ETA};
use crate::error::{Error, Result};
use crate::grid::{DataVector, GridFunction, GridSpec};

/// Smallest admissible coefficient value; keeps `A(c)` positive definite.
pub const MIN_COEFFICIENT: f64 = -0.5;

#[derive(Debug)]
pub struct EllipticParamOp {
    spec: GridSpec,
    rhs: Vec<f64>,
    weights: Arc<[f64]>,
    cg: CgSettings,
    eta: f64,
    // Last (c, u(c)) pair; derivative calls at the same c reuse it.
    cache: Mutex<Option<(Vec<f64>, Vec<f64>)>>,
}

impl EllipticParamOp {
    pub fn new(spec: GridSpec, source: &GridFunction, boundary: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if source.spec() != &spec {
            return Err(Error::shape("source grid differs from operator grid"));
        }
        let mut rhs = dirichlet_rhs(&spec, boundary);
        for (r, f) in rhs.iter_mut().zip(source.values()) {
            *r += f;
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("boundary data must be finite"));
        }
        Ok(Self {
            spec,
            rhs,
            weights: vec![spec.cell_area(); spec.len()].into(),
            cg: CgSettings::default(),
            eta: DEFAULT_NONLINEAR_ETA,
            cache: Mutex::new(None),
        })
    }

    pub fn with_cg(mut self, cg: CgSettings) -> Self {
        self.cg = cg;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    fn admissible(&self, c: &GridFunction) -> Result<()> {
        if c.spec() != &self.spec {
            return Err(Error::shape("coefficient grid differs from operator grid"));
        }
        let min = c.values().iter().copied().fold(f64::INFINITY, f64::min);
        if min < MIN_COEFFICIENT {
            return Err(Error::param(format!(
                "coefficient must satisfy c >= {MIN_COEFFICIENT}, found min {min:.4e}"
            )));
        }
        Ok(())
    }

    fn state(&self, c: &GridFunction) -> Result<Vec<f64>> {
        self.admissible(c)?;
        if let Some((cc, u)) = self.cache.lock().unwrap().as_ref() {
            if cc.as_slice() == c.values() {
                return Ok(u.clone());
            }
        }
        let u = ReactionDiffusion::new(self.spec, c.values()).solve(&self.rhs, self.cg, "elliptic state solve")?;
        *self.cache.lock().unwrap() = Some((c.values().to_vec(), u.clone()));
        Ok(u)
    }

    fn solve_homogeneous(&self, c: &GridFunction, b: &[f64]) -> Result<Vec<f64>> {
        ReactionDiffusion::new(self.spec, c.values()).solve(b, self.cg, "elliptic sensitivity solve")
    }
}

impl ForwardOperator for EllipticParamOp {
    fn domain(&self) -> &GridSpec {
        &self.spec
    }

    fn data_weights(&self) -> &Arc<[f64]> {
        &self.weights
    }

    fn apply(&self, c: &GridFunction) -> Result<DataVector> {
        Ok(DataVector::from_raw(self.state(c)?, self.weights.clone()))
    }

    /// `F'(c)h = −A(c)⁻¹(h·u(c))`.
    fn deriv(&self, c: &GridFunction, h: &GridFunction) -> Result<DataVector> {
        if h.spec() != &self.spec {
            return Err(Error::shape("direction grid differs from operator grid"));
        }
        let u = self.state(c)?;
        let b: Vec<f64> = h.values().iter().zip(&u).map(|(h, u)| -h * u).collect();
        Ok(DataVector::from_raw(self.solve_homogeneous(c, &b)?, self.weights.clone()))
    }

    /// `F'(c)*w = −u(c)·A(c)⁻¹w`.
    fn deriv_adjoint(&self, c: &GridFunction, w: &DataVector) -> Result<GridFunction> {
        if w.len() != self.spec.len() {
            return Err(Error::shape(format!("data has {} entries, grid has {}", w.len(), self.spec.len())));
        }
        let u = self.state(c)?;
        let z = self.solve_homogeneous(c, w.values())?;
        Ok(GridFunction::from_raw(self.spec, z.iter().zip(&u).map(|(z, u)| -z * u).collect()))
    }

    fn eta_bound(&self) -> f64 {
        self.eta
    }

    fn is_linear(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::test_support::{adjoint_mismatch, random_field, taylor_slope};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(n: usize) -> GridSpec {
        GridSpec::square(n, 0.0, 1.0).unwrap()
    }

    fn x_plus_y_op(c: &GridFunction) -> EllipticParamOp {
        let spec = *c.spec();
        let f = GridFunction::from_fn(spec, |x, y| x + y);
        let f = GridFunction::new(spec, f.values().iter().zip(c.values()).map(|(a, b)| a * b).collect()).unwrap();
        EllipticParamOp::new(spec, &f, |x, y| x + y).unwrap()
    }

    fn max_dev_from_x_plus_y(u: &DataVector, spec: GridSpec) -> f64 {
        let target = GridFunction::from_fn(spec, |x, y| x + y);
        u.values().iter().zip(target.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn harmonic_boundary_data_is_exact() {
        let spec = unit(20);
        let c = GridFunction::zeros(spec);
        let u = x_plus_y_op(&c).apply(&c).unwrap();
        assert!(max_dev_from_x_plus_y(&u, spec) < 1e-9);
    }

    #[test]
    fn constant_and_piecewise_coefficients_keep_x_plus_y() {
        let spec = unit(32);
        let c = GridFunction::constant(spec, 2.5);
        assert!(max_dev_from_x_plus_y(&x_plus_y_op(&c).apply(&c).unwrap(), spec) < 1e-9);
        let c = GridFunction::from_fn(spec, |x, y| if (x - 0.6).hypot(y - 0.4) < 0.2 { 1.0 } else { 0.0 });
        assert!(max_dev_from_x_plus_y(&x_plus_y_op(&c).apply(&c).unwrap(), spec) < 1e-9);
    }

    #[test]
    fn rejects_inadmissible_coefficient() {
        let spec = unit(8);
        let c = GridFunction::constant(spec, -0.6);
        assert!(matches!(x_plus_y_op(&GridFunction::zeros(spec)).apply(&c), Err(Error::Parameter(_))));
    }

    #[test]
    fn derivative_is_second_order() {
        let spec = unit(24);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = GridFunction::constant(spec, 1.0);
        let op = x_plus_y_op(&c).with_cg(CgSettings { tol: 1e-14, max_iters: 20_000 });
        // Large directions keep the quadratic remainder well above solver noise.
        let h = random_field(spec, 40.0, &mut rng);
        let slope = taylor_slope(&op, &c, &h, &[1e-2, 1e-3, 1e-4, 1e-5]);
        assert!((slope - 2.0).abs() < 0.1, "slope {slope}");
        assert_eq!(op.deriv(&c, &GridFunction::zeros(spec)).unwrap().norm(), 0.0);
    }

    #[test]
    fn adjoint_pairing() {
        let spec = unit(20);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let c = GridFunction::new(spec, random_field(spec, 0.5, &mut rng).values().iter().map(|v| v + 1.0).collect())
            .unwrap();
        let op = x_plus_y_op(&GridFunction::constant(spec, 1.0));
        assert!(adjoint_mismatch(&op, &c, 20, 14) < 1e-8);
    }

    #[test]
    fn tangential_cone_holds_near_truth() {
        let spec = unit(20);
        let truth = GridFunction::from_fn(spec, |x, y| if (x - 0.65).hypot(y - 0.36) <= 0.18 { 1.0 } else { 0.0 });
        let op = x_plus_y_op(&truth);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let a = crate::grid::lin_comb(1.0, &truth, 1.0, &random_field(spec, 0.1, &mut rng)).unwrap();
            let b = crate::grid::lin_comb(1.0, &truth, 1.0, &random_field(spec, 0.1, &mut rng)).unwrap();
            let fa = op.apply(&a).unwrap();
            let fb = op.apply(&b).unwrap();
            let lin = op.deriv(&b, &crate::grid::lin_comb(1.0, &a, -1.0, &b).unwrap()).unwrap();
            let diff = fa.sub(&fb).unwrap();
            worst = worst.max(diff.sub(&lin).unwrap().norm() / diff.norm());
        }
        assert!(worst < 1.0, "η̂ = {worst}");
    }
}
