//! 2-convex penalty functionals Θ: values, conjugate minimizers
//! `x = ∇Θ*(ξ) = argmin_z {Θ(z) − ⟨ξ, z⟩}`, and Bregman distances.
//!
//! All three kinds share the quadratic part `(1/(2β))‖x‖²`, so they are
//! 2-convex with `c0 = 1/(2β)`:
//!
//! - `Quadratic(β)`: `Θ(x) = (1/(2β))‖x‖²`
//! - `L1L2(β)`: adds `‖x‖_{L¹}`
//! - `TvL2(β)`: adds the discrete total variation of [`crate::tvprox`]
//!
//! Every integral carries the cell-area weight of the grid.

use crate::error::{Error, Result};
use crate::grid::{inner_product, lin_comb, GridFunction};
use crate::tvprox::{tv_prox_detailed, tv_value, TvDual, TvProxOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    Quadratic,
    L1L2,
    TvL2 { tv: TvProxOptions },
}

/// A p-convex penalty with `p = 2` and `c0 = 1/(2β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    kind: PenaltyKind,
    beta: f64,
}

/// Result of a conjugate-minimizer evaluation.
#[derive(Debug, Clone)]
pub struct ConjugateMinimizer {
    pub x: GridFunction,
    /// The TV inner solver stopped on its iteration budget.
    pub prox_inexact: bool,
    /// Final dual field of the TV inner solver, for warm starts.
    pub tv_dual: Option<TvDual>,
}

impl Penalty {
    pub fn new(kind: PenaltyKind, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param(format!("penalty needs beta > 0, got {beta}")));
        }
        if let PenaltyKind::TvL2 { tv } = kind {
            if tv.max_iters == 0 || !(tv.tol > 0.0) {
                return Err(Error::param("TV penalty needs tv_iters >= 1 and tv_tol > 0"));
            }
        }
        Ok(Self { kind, beta })
    }

    pub fn quadratic(beta: f64) -> Result<Self> {
        Self::new(PenaltyKind::Quadratic, beta)
    }

    pub fn l1l2(beta: f64) -> Result<Self> {
        Self::new(PenaltyKind::L1L2, beta)
    }

    pub fn tvl2(beta: f64, tv_iters: usize, tv_tol: f64) -> Result<Self> {
        Self::new(PenaltyKind::TvL2 { tv: TvProxOptions { max_iters: tv_iters, tol: tv_tol } }, beta)
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Convexity exponent.
    pub fn p(&self) -> f64 {
        2.0
    }

    /// p-convexity constant, `D_ξΘ(z, x) ≥ c0‖z − x‖^p`.
    pub fn c0(&self) -> f64 {
        1.0 / (2.0 * self.beta)
    }

    /// Conjugate exponent `p* = p / (p − 1)`.
    pub fn p_conjugate(&self) -> f64 {
        self.p() / (self.p() - 1.0)
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            PenaltyKind::Quadratic => "quad",
            PenaltyKind::L1L2 => "l1l2",
            PenaltyKind::TvL2 { .. } => "tvl2",
        }
    }

    pub fn value(&self, x: &GridFunction) -> f64 {
        let quad = 0.5 / self.beta * x.norm().powi(2);
        match self.kind {
            PenaltyKind::Quadratic => quad,
            PenaltyKind::L1L2 => {
                quad + x.spec().cell_area() * x.values().iter().map(|v| v.abs()).sum::<f64>()
            }
            PenaltyKind::TvL2 { .. } => quad + tv_value(x),
        }
    }

    pub fn conjugate_minimizer(&self, xi: &GridFunction) -> Result<ConjugateMinimizer> {
        self.conjugate_minimizer_warm(xi, None)
    }

    /// As [`Penalty::conjugate_minimizer`], seeding the TV inner solver with
    /// a previous dual field. Ignored by the closed-form kinds.
    pub fn conjugate_minimizer_warm(
        &self,
        xi: &GridFunction,
        warm: Option<&TvDual>,
    ) -> Result<ConjugateMinimizer> {
        match self.kind {
            PenaltyKind::Quadratic => Ok(ConjugateMinimizer {
                x: xi.scaled(self.beta),
                prox_inexact: false,
                tv_dual: None,
            }),
            PenaltyKind::L1L2 => Ok(ConjugateMinimizer {
                x: soft_threshold(xi, self.beta)?,
                prox_inexact: false,
                tv_dual: None,
            }),
            PenaltyKind::TvL2 { tv } => {
                // (1/(2β))‖z‖² − ⟨ξ,z⟩ + TV(z) = (1/β)[½‖z − βξ‖² + β·TV(z)] + const
                let out = tv_prox_detailed(&xi.scaled(self.beta), self.beta, tv, warm)?;
                if !out.converged {
                    log::debug!(
                        "TV prox stopped after {} iterations at relative gap {:.3e}",
                        out.iterations,
                        out.relative_gap
                    );
                }
                Ok(ConjugateMinimizer {
                    x: out.z,
                    prox_inexact: !out.converged,
                    tv_dual: Some(out.dual),
                })
            }
        }
    }

    /// `D_ξΘ(z, x) = Θ(z) − Θ(x) − ⟨ξ, z − x⟩` for `ξ ∈ ∂Θ(x)`.
    ///
    /// A result below `−1e−10` (relative to the penalty values involved)
    /// means `(x, ξ)` is not a subgradient pair and is reported as an error;
    /// smaller negative round-off is clamped to zero.
    pub fn bregman_distance(&self, z: &GridFunction, x: &GridFunction, xi: &GridFunction) -> Result<f64> {
        let theta_z = self.value(z);
        let theta_x = self.value(x);
        let d = self.bregman_raw(z, x, xi)?;
        let slack = 1e-10 * (1.0 + theta_z.abs() + theta_x.abs());
        if d < -slack {
            return Err(Error::Consistency(format!(
                "negative Bregman distance {d:.3e}; (x, xi) is not a subgradient pair"
            )));
        }
        Ok(d.max(0.0))
    }

    /// The Bregman expression without the sign check. With an inexact TV
    /// prox it can dip below zero by roughly the prox tolerance.
    pub fn bregman_raw(&self, z: &GridFunction, x: &GridFunction, xi: &GridFunction) -> Result<f64> {
        Ok(self.value(z) - self.value(x) - inner_product(xi, &lin_comb(1.0, z, -1.0, x)?)?)
    }
}

/// Pointwise `β(ξ − 1)` for `ξ > 1`, `0` for `|ξ| ≤ 1`, `β(ξ + 1)` for `ξ < −1`:
/// the minimizer of `(1/(2β))t² + |t| − ξt`.
pub fn soft_threshold(xi: &GridFunction, beta: f64) -> Result<GridFunction> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param(format!("soft threshold needs beta > 0, got {beta}")));
    }
    let values = xi.values().iter().map(|&s| soft_threshold_scalar(s, beta)).collect();
    Ok(GridFunction::from_raw(*xi.spec(), values))
}

#[inline]
pub(crate) fn soft_threshold_scalar(xi: f64, beta: f64) -> f64 {
    if xi > 1.0 {
        beta * (xi - 1.0)
    } else if xi < -1.0 {
        beta * (xi + 1.0)
    } else {
        0.0
    }
}
