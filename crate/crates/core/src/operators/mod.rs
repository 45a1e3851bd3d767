//! Forward operators `F_i` with Fréchet derivatives and their adjoints.
//!
//! Every adjoint used by the solver is the exact transpose of the discrete
//! derivative with respect to the declared inner products: the grid `L²`
//! pairing on the domain (or the `(I − Δ_h)` pairing for [`SchlierenOp`])
//! and the weighted data pairing on the range.

mod circular;
mod elliptic;
pub mod fd;
mod matrix;
mod radon;
mod sampling;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use circular::CircularMeanOp;
pub use elliptic::EllipticParamOp;
pub use elliptic::MIN_COEFFICIENT;
pub use fd::{helmholtz_apply, helmholtz_solve, CgSettings};
pub use matrix::MatrixOp;
pub use radon::{RadonOp, SchlierenOp};

use crate::error::Result;
use crate::grid::{inner_product, DataVector, GridFunction, GridSpec};

/// Default tangential-cone constant assumed for the nonlinear operators.
pub const DEFAULT_NONLINEAR_ETA: f64 = 0.2;

pub trait ForwardOperator: Send + Sync {
    /// Grid of the unknown.
    fn domain(&self) -> &GridSpec;

    /// Quadrature weights of the data-space inner product.
    fn data_weights(&self) -> &Arc<[f64]>;

    fn apply(&self, x: &GridFunction) -> Result<DataVector>;

    /// `F'(x)h`.
    fn deriv(&self, x: &GridFunction, h: &GridFunction) -> Result<DataVector>;

    /// `F'(x)*w`.
    fn deriv_adjoint(&self, x: &GridFunction, w: &DataVector) -> Result<GridFunction>;

    /// Tangential-cone constant η; zero for linear operators.
    fn eta_bound(&self) -> f64;

    /// Known bound on `‖F'(x)‖`, if any.
    fn norm_bound(&self) -> Option<f64> {
        None
    }

    fn is_linear(&self) -> bool {
        self.eta_bound() == 0.0
    }

    /// Pairing in which [`ForwardOperator::deriv_adjoint`] is the adjoint.
    /// Defaults to the grid `L²` pairing.
    fn domain_inner_product(&self, a: &GridFunction, b: &GridFunction) -> Result<f64> {
        inner_product(a, b)
    }
}

/// Power-iteration estimate of `‖F'(x)‖` in the operator's own pairings.
///
/// The estimate approaches the norm from below.
pub fn estimate_norm(op: &dyn ForwardOperator, x: &GridFunction, iters: usize, seed: u64) -> Result<f64> {
    let spec = *op.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = GridFunction::from_raw(spec, (0..spec.len()).map(|_| rng.gen_range(-1.0..1.0)).collect());
    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let nv = op.domain_inner_product(&v, &v)?.sqrt();
        if nv == 0.0 {
            return Ok(0.0);
        }
        v = v.scaled(1.0 / nv);
        let fv = op.deriv(x, &v)?;
        estimate = fv.norm();
        v = op.deriv_adjoint(x, &fv)?;
    }
    Ok(estimate)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::grid::data_inner_product;

    pub fn random_field(spec: GridSpec, scale: f64, rng: &mut ChaCha8Rng) -> GridFunction {
        GridFunction::from_raw(spec, (0..spec.len()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect())
    }

    pub fn random_data(weights: &Arc<[f64]>, rng: &mut ChaCha8Rng) -> DataVector {
        DataVector::from_raw((0..weights.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(), weights.clone())
    }

    /// Worst relative adjoint mismatch over `trials` random pairs.
    pub fn adjoint_mismatch(op: &dyn ForwardOperator, x: &GridFunction, trials: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = *op.domain();
        let mut worst: f64 = 0.0;
        for _ in 0..trials {
            let h = random_field(spec, 1.0, &mut rng);
            let w = random_data(op.data_weights(), &mut rng);
            let lhs = data_inner_product(&op.deriv(x, &h).unwrap(), &w).unwrap();
            let adj = op.deriv_adjoint(x, &w).unwrap();
            let rhs = op.domain_inner_product(&h, &adj).unwrap();
            let scale = op.domain_inner_product(&h, &h).unwrap().sqrt() * w.norm();
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        worst
    }

    /// Least-squares slope of `log‖F(x+th) − F(x) − tF'(x)h‖` against `log t`.
    pub fn taylor_slope(op: &dyn ForwardOperator, x: &GridFunction, h: &GridFunction, ts: &[f64]) -> f64 {
        let fx = op.apply(x).unwrap();
        let dh = op.deriv(x, h).unwrap();
        let pts: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| {
                let xt = crate::grid::lin_comb(1.0, x, t, h).unwrap();
                let ft = op.apply(&xt).unwrap();
                let rem = ft.sub(&fx).unwrap().sub(&dh.scaled(t)).unwrap().norm();
                (t.ln(), rem.ln())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    }
}
