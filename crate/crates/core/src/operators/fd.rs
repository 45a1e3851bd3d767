//! Five-point finite differences on cell-centered grids with Dirichlet
//! boundaries, and a Jacobi-preconditioned conjugate-gradient solver.
//!
//! The boundary value is imposed at the domain edge through a ghost cell
//! `u_ghost = 2g − u_adjacent`, which keeps the matrix symmetric and
//! reproduces linear functions exactly.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

/// Tolerance and iteration cap for the inner CG solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Relative residual `‖b − Au‖ / ‖b‖` at which CG stops.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iters: 20_000 }
    }
}

/// `A(c)u = −Δ_h u + c·u` with homogeneous Dirichlet ghost cells.
pub(crate) struct ReactionDiffusion<'a> {
    spec: GridSpec,
    reaction: &'a [f64],
    ax: f64,
    ay: f64,
}

impl<'a> ReactionDiffusion<'a> {
    pub(crate) fn new(spec: GridSpec, reaction: &'a [f64]) -> Self {
        debug_assert_eq!(reaction.len(), spec.len());
        Self {
            spec,
            reaction,
            ax: 1.0 / spec.hx().powi(2),
            ay: 1.0 / spec.hy().powi(2),
        }
    }

    fn diagonal(&self, i: usize, j: usize) -> f64 {
        let (nx, ny) = (self.spec.nx(), self.spec.ny());
        let mut d = self.reaction[self.spec.index(i, j)] + 2.0 * self.ax + 2.0 * self.ay;
        if i == 0 {
            d += self.ax;
        }
        if i + 1 == nx {
            d += self.ax;
        }
        if j == 0 {
            d += self.ay;
        }
        if j + 1 == ny {
            d += self.ay;
        }
        d
    }

    pub(crate) fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.spec.nx(), self.spec.ny());
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let mut v = self.diagonal(i, j) * u[k];
                if i > 0 {
                    v -= self.ax * u[k - 1];
                }
                if i + 1 < nx {
                    v -= self.ax * u[k + 1];
                }
                if j > 0 {
                    v -= self.ay * u[k - nx];
                }
                if j + 1 < ny {
                    v -= self.ay * u[k + nx];
                }
                out[k] = v;
            }
        }
    }

    /// Solve `A u = b` by preconditioned CG starting from zero.
    pub(crate) fn solve(&self, b: &[f64], settings: CgSettings, context: &str) -> Result<Vec<f64>> {
        let n = b.len();
        let mut u = vec![0.0; n];
        let b_norm = dot(b, b).sqrt();
        if b_norm == 0.0 {
            return Ok(u);
        }
        let inv_diag: Vec<f64> = (0..self.spec.ny())
            .flat_map(|j| (0..self.spec.nx()).map(move |i| (i, j)))
            .map(|(i, j)| 1.0 / self.diagonal(i, j))
            .collect();
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        let mut res = 1.0;
        for it in 0..settings.max_iters {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::Solver {
                    context: format!("{context}: operator is not positive definite"),
                    iterations: it,
                    residual: res,
                });
            }
            let alpha = rz / pap;
            for k in 0..n {
                u[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            res = dot(&r, &r).sqrt() / b_norm;
            if res <= settings.tol {
                return Ok(u);
            }
            for k in 0..n {
                z[k] = r[k] * inv_diag[k];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::Solver {
            context: context.to_string(),
            iterations: settings.max_iters,
            residual: res,
        })
    }
}

/// Right-hand-side contribution `2g/h²` of inhomogeneous Dirichlet data `g`
/// evaluated at the edge midpoints of boundary cells.
pub(crate) fn dirichlet_rhs(spec: &GridSpec, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let (nx, ny) = (spec.nx(), spec.ny());
    let (ax, ay) = (1.0 / spec.hx().powi(2), 1.0 / spec.hy().powi(2));
    let (x_min, x_max) = spec.x_range();
    let (y_min, y_max) = spec.y_range();
    let mut out = vec![0.0; spec.len()];
    for j in 0..ny {
        for i in 0..nx {
            let (x, y) = spec.center(i, j);
            let k = spec.index(i, j);
            if i == 0 {
                out[k] += 2.0 * ax * g(x_min, y);
            }
            if i + 1 == nx {
                out[k] += 2.0 * ax * g(x_max, y);
            }
            if j == 0 {
                out[k] += 2.0 * ay * g(x, y_min);
            }
            if j + 1 == ny {
                out[k] += 2.0 * ay * g(x, y_max);
            }
        }
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(I − Δ_h)u` with homogeneous Dirichlet boundary.
pub fn helmholtz_apply(u: &GridFunction) -> GridFunction {
    let spec = *u.spec();
    let ones = vec![1.0; spec.len()];
    let mut out = vec![0.0; spec.len()];
    ReactionDiffusion::new(spec, &ones).apply(u.values(), &mut out);
    GridFunction::from_raw(spec, out)
}

/// Solve `(I − Δ_h)u = rhs` with homogeneous Dirichlet boundary by CG.
pub fn helmholtz_solve(rhs: &GridFunction, settings: CgSettings) -> Result<GridFunction> {
    let spec = *rhs.spec();
    let ones = vec![1.0; spec.len()];
    let u = ReactionDiffusion::new(spec, &ones).solve(rhs.values(), settings, "Helmholtz solve")?;
    Ok(GridFunction::from_raw(spec, u))
}
