//! Landweber-Kaczmarz iteration with a convex penalty.
//!
//! One sweep visits the equations `F_i(x) = y_i` in the order `i = 0..N`.
//! Each visit updates the dual variable
//! `ξ ← ξ − μ F_i'(x)* J_r(F_i(x) − y_i)` and recovers `x = ∇Θ*(ξ)`.
//! A visit whose residual is at most `τδ` is skipped (`μ = 0`).

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{lin_comb, DataVector, GridFunction};
use crate::operators::ForwardOperator;
use crate::penalty::Penalty;
use crate::tvprox::TvDual;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `μ = μ0 ‖res‖^{p−r}`.
    Scaled,
    /// `μ = min{μ0 ‖res‖^{p(r−1)} / ‖F'* J_r(res)‖^p, μ1} · ‖res‖^{p−r}`.
    Adaptive { mu1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Stop at the first sweep in which every step is skipped.
    AllSkipped,
    /// Stop at the first sweep with `Σ_i ‖res_i‖^p ≤ N τ^p δ^p`.
    ResidualSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub mu0: f64,
    /// Exponent of the duality mapping `J_r`.
    pub r: f64,
    pub step_rule: StepRule,
    pub stop_rule: StopRule,
    pub max_sweeps: usize,
    pub delta: f64,
    /// Skip threshold used instead of `τδ` when `δ = 0`.
    pub skip_floor: f64,
    /// Radius ρ of the ball `B_{2ρ}(x0)` the analysis assumes. Only
    /// monitored, never enforced.
    pub trust_radius: Option<f64>,
}

impl SolverConfig {
    pub fn new(tau: f64, mu0: f64, delta: f64) -> Self {
        Self {
            tau,
            mu0,
            r: 2.0,
            step_rule: StepRule::Scaled,
            stop_rule: StopRule::AllSkipped,
            max_sweeps: 10_000,
            delta,
            skip_floor: 1e-14,
            trust_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 1.0) || !self.tau.is_finite() {
            return Err(Error::param(format!("tau > 1 violated: tau = {}", self.tau)));
        }
        if !(self.mu0 > 0.0) || !self.mu0.is_finite() {
            return Err(Error::param(format!("mu0 > 0 violated: mu0 = {}", self.mu0)));
        }
        if let StepRule::Adaptive { mu1 } = self.step_rule {
            if !(mu1 > 0.0) || !mu1.is_finite() {
                return Err(Error::param(format!("mu1 > 0 violated: mu1 = {mu1}")));
            }
        }
        if !(self.r > 1.0) || !self.r.is_finite() {
            return Err(Error::param(format!("r > 1 violated: r = {}", self.r)));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::param(format!("delta >= 0 violated: delta = {}", self.delta)));
        }
        if !(self.skip_floor >= 0.0) {
            return Err(Error::param("skip_floor >= 0 violated"));
        }
        if let Some(rho) = self.trust_radius {
            if !(rho > 0.0) {
                return Err(Error::param(format!("trust radius > 0 violated: {rho}")));
            }
        }
        Ok(())
    }

    /// Residual level at or below which a step is skipped.
    pub fn skip_threshold(&self) -> f64 {
        if self.delta > 0.0 {
            self.tau * self.delta
        } else {
            self.skip_floor
        }
    }
}

/// The system `F_i(x) = y_i`, the penalty, and the starting dual field.
#[derive(Clone)]
pub struct Problem {
    operators: Vec<Arc<dyn ForwardOperator>>,
    data: Vec<DataVector>,
    penalty: Penalty,
    xi0: GridFunction,
    x_ref: Option<GridFunction>,
}

impl Problem {
    pub fn new(
        operators: Vec<Arc<dyn ForwardOperator>>,
        data: Vec<DataVector>,
        penalty: Penalty,
        xi0: GridFunction,
    ) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::param("need at least one equation"));
        }
        if operators.len() != data.len() {
            return Err(Error::shape(format!("{} operators but {} data vectors", operators.len(), data.len())));
        }
        for (i, (op, y)) in operators.iter().zip(&data).enumerate() {
            if op.domain() != xi0.spec() {
                return Err(Error::shape(format!("operator {i} lives on a different grid than xi0")));
            }
            if y.len() != op.data_weights().len() {
                return Err(Error::shape(format!(
                    "data {i} has {} entries, operator expects {}",
                    y.len(),
                    op.data_weights().len()
                )));
            }
        }
        Ok(Self { operators, data, penalty, xi0, x_ref: None })
    }

    /// Reference solution for the Bregman-distance trace.
    pub fn with_reference(mut self, x_ref: GridFunction) -> Result<Self> {
        if x_ref.spec() != self.xi0.spec() {
            return Err(Error::shape("reference lives on a different grid than xi0"));
        }
        self.x_ref = Some(x_ref);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[Arc<dyn ForwardOperator>] {
        &self.operators
    }

    pub fn data(&self) -> &[DataVector] {
        &self.data
    }

    pub fn penalty(&self) -> &Penalty {
        &self.penalty
    }

    pub fn xi0(&self) -> &GridFunction {
        &self.xi0
    }

    pub fn reference(&self) -> Option<&GridFunction> {
        self.x_ref.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub sweep: usize,
    pub index: usize,
    pub residual: f64,
    pub mu: f64,
    pub skipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub sweep: usize,
    /// `R_n = Σ_i ‖F_i(x_{n,i}) − y_i‖^p`.
    pub residual_sum: f64,
    /// `Σ_i μ_{n,i} ‖F_i(x_{n,i}) − y_i‖^r`.
    pub weighted_residual_sum: f64,
    /// Bregman distance to the reference after the sweep.
    pub bregman: Option<f64>,
    pub all_skipped: bool,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub sweep: usize,
    pub xi: GridFunction,
    pub x: GridFunction,
    tv_dual: Option<TvDual>,
    pub steps: Vec<StepRecord>,
    pub sweeps: Vec<SweepRecord>,
    /// Number of conjugate-minimizer evaluations whose inner TV solver
    /// stopped on its budget.
    pub inexact_prox_count: usize,
    /// Largest `‖x_{n,i} − x0‖` seen so far.
    pub max_distance_from_start: f64,
}

impl SolverState {
    pub fn initial(problem: &Problem) -> Result<Self> {
        let cm = problem.penalty.conjugate_minimizer(&problem.xi0)?;
        Ok(Self {
            sweep: 0,
            xi: problem.xi0.clone(),
            x: cm.x,
            tv_dual: cm.tv_dual,
            steps: Vec::new(),
            sweeps: Vec::new(),
            inexact_prox_count: usize::from(cm.prox_inexact),
            max_distance_from_start: 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    AllSkipped,
    ResidualSum,
    /// `max_sweeps` reached without meeting the stopping rule.
    BudgetExhausted,
}

impl StopReason {
    pub fn converged(&self) -> bool {
        !matches!(self, StopReason::BudgetExhausted)
    }

    pub fn label(&self) -> &'static str {
        match self {
            StopReason::AllSkipped => "all-skipped",
            StopReason::ResidualSum => "residual-sum",
            StopReason::BudgetExhausted => "budget-exhausted",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x: GridFunction,
    pub xi: GridFunction,
    /// Stopping index `n_δ`: number of sweeps whose updates are kept.
    pub n_delta: usize,
    pub stop_reason: StopReason,
    pub steps: Vec<StepRecord>,
    pub sweeps: Vec<SweepRecord>,
    /// Bregman distance from the start to the reference, when supplied.
    pub initial_bregman: Option<f64>,
    /// Admissibility constant `c1` for this problem and configuration.
    pub c1: f64,
    pub inexact_prox_count: usize,
    pub max_distance_from_start: f64,
}

pub fn step_length_scaled(residual_norm: f64, tau_delta: f64, mu0: f64, p: f64, r: f64) -> f64 {
    if residual_norm > tau_delta {
        mu0 * residual_norm.powf(p - r)
    } else {
        0.0
    }
}

/// A vanishing `grad_dual_norm` saturates at `μ1`.
pub fn step_length_adaptive(
    residual_norm: f64,
    grad_dual_norm: f64,
    tau_delta: f64,
    mu0: f64,
    mu1: f64,
    p: f64,
    r: f64,
) -> f64 {
    if residual_norm <= tau_delta {
        return 0.0;
    }
    let ratio = mu0 * residual_norm.powf(p * (r - 1.0)) / grad_dual_norm.powf(p);
    // ratio is +inf or NaN when the gradient vanishes.
    let tilde = if ratio.is_nan() { mu1 } else { ratio.min(mu1) };
    tilde * residual_norm.powf(p - r)
}

/// `J_r(w) = ‖w‖^{r−2} w`, with `J_r(0) = 0`.
fn duality_map(w: &DataVector, norm: f64, r: f64) -> DataVector {
    if r == 2.0 {
        w.clone()
    } else if norm == 0.0 {
        w.scaled(0.0)
    } else {
        w.scaled(norm.powf(r - 2.0))
    }
}

/// `c1 = 1 − η − (1+η)/τ − ((p−1)/p)(μ0 B^p / (2c0))^{1/(p−1)}`.
///
/// `η` is the largest tangential-cone constant among the operators. `B`
/// bounds `‖F_i'‖` for the scaled rule (1 when an operator reports no
/// bound); the adaptive rule builds the bound into `μ̃`, so `B = 1` there.
pub fn admissibility_constant(problem: &Problem, config: &SolverConfig) -> f64 {
    let eta = problem.operators.iter().map(|op| op.eta_bound()).fold(0.0, f64::max);
    let b = match config.step_rule {
        StepRule::Scaled => problem
            .operators
            .iter()
            .map(|op| op.norm_bound().unwrap_or(1.0))
            .fold(0.0, f64::max),
        StepRule::Adaptive { .. } => 1.0,
    };
    let p = problem.penalty.p();
    let c0 = problem.penalty.c0();
    1.0 - eta - (1.0 + eta) / config.tau - (p - 1.0) / p * (config.mu0 * b.powf(p) / (2.0 * c0)).powf(1.0 / (p - 1.0))
}

fn wrap(sweep: usize, index: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::Step { sweep, index, source: Box::new(e) }
}

/// One visit of equation `i`.
pub fn inner_step(state: &mut SolverState, problem: &Problem, config: &SolverConfig, i: usize) -> Result<StepRecord> {
    if i >= problem.len() {
        return Err(Error::param(format!("equation index {i} out of range 0..{}", problem.len())));
    }
    let n = state.sweep;
    let op = &problem.operators[i];
    let res = op.apply(&state.x).and_then(|f| f.sub(&problem.data[i])).map_err(wrap(n, i))?;
    let rn = res.norm();
    let threshold = config.skip_threshold();
    let p = problem.penalty.p();
    let mut record = StepRecord { sweep: n, index: i, residual: rn, mu: 0.0, skipped: true };
    if rn <= threshold {
        state.steps.push(record);
        return Ok(record);
    }
    let j = duality_map(&res, rn, config.r);
    let grad = op.deriv_adjoint(&state.x, &j).map_err(wrap(n, i))?;
    let mu = match config.step_rule {
        StepRule::Scaled => step_length_scaled(rn, threshold, config.mu0, p, config.r),
        StepRule::Adaptive { mu1 } => {
            let gn = op.domain_inner_product(&grad, &grad).map_err(wrap(n, i))?.max(0.0).sqrt();
            step_length_adaptive(rn, gn, threshold, config.mu0, mu1, p, config.r)
        }
    };
    record.mu = mu;
    record.skipped = false;
    state.xi.axpy(-mu, &grad).map_err(wrap(n, i))?;
    let cm = problem
        .penalty
        .conjugate_minimizer_warm(&state.xi, state.tv_dual.as_ref())
        .map_err(wrap(n, i))?;
    state.x = cm.x;
    if cm.tv_dual.is_some() {
        state.tv_dual = cm.tv_dual;
    }
    state.inexact_prox_count += usize::from(cm.prox_inexact);
    state.steps.push(record);
    Ok(record)
}

/// One full sweep `i = 0..N`. The sweep counter advances afterwards.
pub fn sweep(state: &mut SolverState, problem: &Problem, config: &SolverConfig, x0: &GridFunction) -> Result<SweepRecord> {
    let p = problem.penalty.p();
    let mut residual_sum = 0.0;
    let mut weighted = 0.0;
    let mut all_skipped = true;
    for i in 0..problem.len() {
        let rec = inner_step(state, problem, config, i)?;
        residual_sum += rec.residual.powf(p);
        weighted += rec.mu * rec.residual.powf(config.r);
        all_skipped &= rec.skipped;
        if !rec.skipped {
            let d = lin_comb(1.0, &state.x, -1.0, x0)?.norm();
            state.max_distance_from_start = state.max_distance_from_start.max(d);
        }
    }
    let bregman = match &problem.x_ref {
        Some(z) => Some(problem.penalty.bregman_raw(z, &state.x, &state.xi)?),
        None => None,
    };
    let record = SweepRecord {
        sweep: state.sweep,
        residual_sum,
        weighted_residual_sum: weighted,
        bregman,
        all_skipped,
    };
    state.sweeps.push(record);
    state.sweep += 1;
    Ok(record)
}

pub fn run(problem: &Problem, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let c1 = admissibility_constant(problem, config);
    if c1 <= 0.0 {
        log::warn!(
            "step parameters are outside the admissible range (c1 = {c1:.4e} <= 0); monotonicity is not guaranteed"
        );
    }
    let mut state = SolverState::initial(problem)?;
    let x0 = state.x.clone();
    let initial_bregman = match &problem.x_ref {
        Some(z) => Some(problem.penalty.bregman_raw(z, &state.x, &state.xi)?),
        None => None,
    };
    let n_eq = problem.len() as f64;
    let p = problem.penalty.p();
    let target = n_eq * (config.tau * config.delta).powf(p);

    let mut stop = StopReason::BudgetExhausted;
    let mut n_delta = config.max_sweeps;
    let mut kept: Option<(GridFunction, GridFunction)> = None;
    for n in 0..config.max_sweeps {
        let start = match config.stop_rule {
            StopRule::ResidualSum => Some((state.xi.clone(), state.x.clone())),
            StopRule::AllSkipped => None,
        };
        let rec = sweep(&mut state, problem, config, &x0)?;
        log::debug!("sweep {n}: R_n = {:.6e}, bregman = {:?}", rec.residual_sum, rec.bregman);
        match config.stop_rule {
            StopRule::AllSkipped if rec.all_skipped => {
                stop = StopReason::AllSkipped;
                n_delta = n;
                break;
            }
            StopRule::ResidualSum if rec.residual_sum <= target || rec.all_skipped => {
                // The criterion is evaluated along sweep n, so x_n is returned.
                stop = StopReason::ResidualSum;
                n_delta = n;
                kept = start;
                break;
            }
            _ => {}
        }
    }
    if stop == StopReason::BudgetExhausted {
        log::warn!("stopping rule not met within {} sweeps", config.max_sweeps);
    }
    if let Some(rho) = config.trust_radius {
        if state.max_distance_from_start > 2.0 * rho {
            log::warn!(
                "iterates left the ball of radius 2ρ = {} around x0 (max distance {:.4e})",
                2.0 * rho,
                state.max_distance_from_start
            );
        }
    }
    let (xi, x) = kept.unwrap_or((state.xi, state.x));
    Ok(SolveResult {
        x,
        xi,
        n_delta,
        stop_reason: stop,
        steps: state.steps,
        sweeps: state.sweeps,
        initial_bregman,
        c1,
        inexact_prox_count: state.inexact_prox_count,
        max_distance_from_start: state.max_distance_from_start,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityRow {
    pub sweep: usize,
    pub before: f64,
    pub after: f64,
    /// `c1 Σ_i μ_{n,i} ‖res_{n,i}‖^r`.
    pub required_decrease: f64,
    pub monotone: bool,
    pub decrease_ok: bool,
}

impl MonotonicityRow {
    pub fn decrease(&self) -> f64 {
        self.before - self.after
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonotonicityReport {
    pub rows: Vec<MonotonicityRow>,
    pub monotonicity_violations: usize,
    pub decrease_violations: usize,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.monotonicity_violations == 0 && self.decrease_violations == 0
    }
}

/// Checks the Bregman trace of a run against
/// `D_{n+1} ≤ D_n` and `D_n − D_{n+1} ≥ c1 Σ_i μ_{n,i}‖res_{n,i}‖^r`,
/// each with absolute slack `slack`. Runs without a reference give an
/// empty report.
pub fn verify_monotonicity(result: &SolveResult, slack: f64) -> MonotonicityReport {
    let mut report = MonotonicityReport::default();
    let Some(mut before) = result.initial_bregman else {
        return report;
    };
    for s in &result.sweeps {
        let Some(after) = s.bregman else {
            break;
        };
        let required = result.c1 * s.weighted_residual_sum;
        let row = MonotonicityRow {
            sweep: s.sweep,
            before,
            after,
            required_decrease: required,
            monotone: after <= before + slack,
            decrease_ok: before - after >= required - slack,
        };
        report.monotonicity_violations += usize::from(!row.monotone);
        report.decrease_violations += usize::from(!row.decrease_ok);
        report.rows.push(row);
        before = after;
    }
    report
}

/// `D_{ξ0}Θ(x̂, x0) / (c1 μ0 τ^p δ^p) + 1`, the a-priori bound on `n_δ`.
/// `None` when `c1 ≤ 0` or `δ = 0`.
pub fn stopping_index_bound(initial_bregman: f64, c1: f64, config: &SolverConfig, p: f64) -> Option<f64> {
    if c1 <= 0.0 || config.delta <= 0.0 {
        return None;
    }
    Some(initial_bregman / (c1 * config.mu0 * (config.tau * config.delta).powf(p)) + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::operators::MatrixOp;
    use proptest::prelude::*;

    fn scalar_problem(y: f64, beta: f64) -> Problem {
        let spec = GridSpec::square(1, 0.0, 1.0).unwrap();
        let op: Arc<dyn ForwardOperator> = Arc::new(MatrixOp::identity(spec));
        let data = DataVector::new(vec![y], op.data_weights().clone()).unwrap();
        Problem::new(vec![op], vec![data], Penalty::quadratic(beta).unwrap(), GridFunction::zeros(spec)).unwrap()
    }

    #[test]
    fn step_length_examples() {
        assert_eq!(step_length_scaled(0.5, 0.1, 0.7, 2.0, 2.0), 0.7);
        assert_eq!(step_length_scaled(0.05, 0.1, 0.7, 2.0, 2.0), 0.0);
        assert!((step_length_scaled(4.0, 0.1, 1.0, 2.0, 1.5) - 2.0).abs() < 1e-15);
        assert_eq!(step_length_adaptive(1.0, 2.0, 0.1, 1.0, 1000.0, 2.0, 2.0), 0.25);
        assert_eq!(step_length_adaptive(0.1, 2.0, 0.1, 1.0, 1000.0, 2.0, 2.0), 0.0);
        assert_eq!(step_length_adaptive(3.0, 1e-300, 0.1, 1.0, 1000.0, 2.0, 2.0), 1000.0);
        assert_eq!(step_length_adaptive(3.0, 0.0, 0.1, 1.0, 1000.0, 2.0, 2.0), 1000.0);
    }

    #[test]
    fn scalar_toy_step() {
        let problem = scalar_problem(1.0, 1.0);
        let mut cfg = SolverConfig::new(1.5, 0.5, 0.0);
        cfg.max_sweeps = 1;
        let mut state = SolverState::initial(&problem).unwrap();
        let rec = inner_step(&mut state, &problem, &cfg, 0).unwrap();
        assert_eq!(rec.mu, 0.5);
        assert_eq!(state.xi.values(), &[0.5]);
        assert_eq!(state.x.values(), &[0.5]);
    }

    #[test]
    fn quadratic_half_is_classical_landweber() {
        let spec = GridSpec::new(3, 1, (0.0, 3.0), (0.0, 1.0)).unwrap();
        let a = MatrixOp::new(spec, 2, vec![1.0, 2.0, 0.0, -1.0, 0.5, 3.0], vec![1.0, 1.0]).unwrap();
        let x = GridFunction::new(spec, vec![0.3, -0.2, 0.1]).unwrap();
        let y = DataVector::new(vec![1.0, -1.0], a.data_weights().clone()).unwrap();
        let op: Arc<dyn ForwardOperator> = Arc::new(a.clone());
        let problem = Problem::new(vec![op], vec![y.clone()], Penalty::quadratic(0.5).unwrap(), x.scaled(2.0)).unwrap();
        let cfg = SolverConfig::new(2.0, 0.3, 0.0);
        let mut state = SolverState::initial(&problem).unwrap();
        inner_step(&mut state, &problem, &cfg, 0).unwrap();
        let res = a.apply(&x).unwrap().sub(&y).unwrap();
        let expected = lin_comb(1.0, &x, -0.3 * 0.5, &a.deriv_adjoint(&x, &res).unwrap()).unwrap();
        for (u, v) in state.x.values().iter().zip(expected.values()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn two_equation_sweep_matches_manual_composition() {
        let spec = GridSpec::new(2, 1, (0.0, 2.0), (0.0, 1.0)).unwrap();
        let a0 = MatrixOp::new(spec, 1, vec![1.0, 1.0], vec![1.0]).unwrap();
        let a1 = MatrixOp::new(spec, 1, vec![1.0, -1.0], vec![1.0]).unwrap();
        let y0 = DataVector::new(vec![2.0], a0.data_weights().clone()).unwrap();
        let y1 = DataVector::new(vec![0.5], a1.data_weights().clone()).unwrap();
        let (mu, beta) = (0.4, 1.0);
        let problem = Problem::new(
            vec![Arc::new(a0.clone()), Arc::new(a1.clone())],
            vec![y0.clone(), y1.clone()],
            Penalty::quadratic(beta).unwrap(),
            GridFunction::zeros(spec),
        )
        .unwrap();
        let cfg = SolverConfig::new(2.0, mu, 0.0);
        let mut state = SolverState::initial(&problem).unwrap();
        let x0 = state.x.clone();
        sweep(&mut state, &problem, &cfg, &x0).unwrap();

        // Hand composition: x = ξ for β = 1.
        let xi = [0.0, 0.0];
        let r0 = xi[0] + xi[1] - 2.0;
        let xi = [xi[0] - mu * r0, xi[1] - mu * r0];
        let r1 = xi[0] - xi[1] - 0.5;
        let xi = [xi[0] - mu * r1, xi[1] + mu * r1];
        assert!((state.xi.values()[0] - xi[0]).abs() < 1e-15);
        assert!((state.xi.values()[1] - xi[1]).abs() < 1e-15);
        assert_eq!(state.sweeps.len(), 1);
        assert!((state.sweeps[0].residual_sum - (r0 * r0 + r1 * r1)).abs() < 1e-14);
    }

    #[test]
    fn immediate_stop_returns_start() {
        let problem = scalar_problem(0.01, 1.0);
        let cfg = SolverConfig::new(1.5, 0.5, 0.1);
        let out = run(&problem, &cfg).unwrap();
        assert_eq!(out.n_delta, 0);
        assert_eq!(out.stop_reason, StopReason::AllSkipped);
        assert_eq!(out.x.values(), &[0.0]);
        assert!(out.steps.iter().all(|s| s.skipped));

        let mut cfg = cfg;
        cfg.stop_rule = StopRule::ResidualSum;
        let out = run(&problem, &cfg).unwrap();
        assert_eq!(out.n_delta, 0);
        assert_eq!(out.x.values(), &[0.0]);
    }

    #[test]
    fn huge_noise_level_stops_fast() {
        let problem = scalar_problem(1.0, 1.0);
        let cfg = SolverConfig::new(1.5, 0.9, 0.6);
        let out = run(&problem, &cfg).unwrap();
        assert!(out.n_delta <= 2);
        assert!(out.stop_reason.converged());
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let problem = scalar_problem(1.0, 1.0);
        let mut cfg = SolverConfig::new(1.5, 1e-3, 0.0);
        cfg.max_sweeps = 3;
        let out = run(&problem, &cfg).unwrap();
        assert_eq!(out.stop_reason, StopReason::BudgetExhausted);
        assert_eq!(out.sweeps.len(), 3);
    }

    #[test]
    fn residual_sum_rule_returns_state_at_sweep_start() {
        let problem = scalar_problem(1.0, 1.0);
        let mut cfg = SolverConfig::new(1.1, 0.5, 0.05);
        cfg.stop_rule = StopRule::ResidualSum;
        let out = run(&problem, &cfg).unwrap();
        // x_n = 1 − 0.5^n; the first n with (0.5^n)² ≤ (0.055)² is 5.
        assert_eq!(out.stop_reason, StopReason::ResidualSum);
        assert_eq!(out.n_delta, 5);
        assert!((out.x.values()[0] - (1.0 - 0.5f64.powi(5))).abs() < 1e-15);
    }

    #[test]
    fn toy_run_respects_monotonicity_bounds() {
        let spec = GridSpec::new(3, 1, (0.0, 3.0), (0.0, 1.0)).unwrap();
        let ops: Vec<Arc<dyn ForwardOperator>> = vec![
            Arc::new(MatrixOp::new(spec, 1, vec![0.6, 0.0, 0.3], vec![1.0]).unwrap()),
            Arc::new(MatrixOp::new(spec, 1, vec![0.0, 0.5, -0.4], vec![1.0]).unwrap()),
            Arc::new(MatrixOp::new(spec, 1, vec![0.2, 0.2, 0.2], vec![1.0]).unwrap()),
        ];
        let truth = GridFunction::new(spec, vec![1.0, 0.0, -0.5]).unwrap();
        let delta = 1e-3;
        let data: Vec<DataVector> = ops
            .iter()
            .map(|op| {
                let y = op.apply(&truth).unwrap();
                DataVector::new(y.values().iter().map(|v| v + delta).collect(), y.weights().clone()).unwrap()
            })
            .collect();
        let problem = Problem::new(ops, data, Penalty::l1l2(1.0).unwrap(), GridFunction::zeros(spec))
            .unwrap()
            .with_reference(truth)
            .unwrap();
        let cfg = SolverConfig::new(2.0, 0.4, delta);
        let out = run(&problem, &cfg).unwrap();
        assert!(out.c1 > 0.0);
        assert!(out.stop_reason.converged());
        let report = verify_monotonicity(&out, 1e-10);
        assert!(report.is_clean(), "{report:?}");
        let bound = stopping_index_bound(out.initial_bregman.unwrap(), out.c1, &cfg, 2.0).unwrap();
        assert!((out.n_delta as f64) <= bound);
    }

    #[test]
    fn config_validation_names_the_inequality() {
        let err = SolverConfig::new(0.9, 1.0, 0.0).validate().unwrap_err();
        assert!(err.to_string().contains("tau > 1"));
        let mut c = SolverConfig::new(1.2, 1.0, 0.0);
        c.step_rule = StepRule::Adaptive { mu1: 0.0 };
        assert!(c.validate().unwrap_err().to_string().contains("mu1 > 0"));
    }

    #[test]
    fn verify_on_run_without_reference_is_empty() {
        let out = run(&scalar_problem(0.0, 1.0), &SolverConfig::new(1.5, 0.5, 0.0)).unwrap();
        assert!(verify_monotonicity(&out, 1e-10).rows.is_empty());
    }

    proptest! {
        #[test]
        fn scaled_step_is_zero_iff_within_threshold(res in 0.0..10.0f64, td in 0.0..10.0f64, mu0 in 1e-3..5.0f64) {
            let mu = step_length_scaled(res, td, mu0, 2.0, 2.0);
            prop_assert_eq!(mu == 0.0, res <= td);
        }

        #[test]
        fn adaptive_step_is_capped(res in 1e-3..10.0f64, g in 0.0..10.0f64, mu0 in 1e-3..5.0f64, mu1 in 1e-3..1e4f64) {
            let mu = step_length_adaptive(res, g, 0.0, mu0, mu1, 2.0, 2.0);
            prop_assert!(mu > 0.0 && mu <= mu1 * (1.0 + 1e-12));
        }

        #[test]
        fn skipped_sweep_leaves_state_bitwise(y in -1e-3..1e-3f64) {
            let problem = scalar_problem(y, 0.7);
            let cfg = SolverConfig::new(1.5, 0.5, 1e-2);
            let mut state = SolverState::initial(&problem).unwrap();
            let before = (state.xi.clone(), state.x.clone());
            let x0 = state.x.clone();
            let rec = sweep(&mut state, &problem, &cfg, &x0).unwrap();
            prop_assert!(rec.all_skipped);
            prop_assert_eq!(&before.0, &state.xi);
            prop_assert_eq!(&before.1, &state.x);
        }

        #[test]
        fn primal_tracks_dual(y in -3.0..3.0f64, beta in 0.1..4.0f64) {
            let spec = GridSpec::square(1, 0.0, 1.0).unwrap();
            let op: Arc<dyn ForwardOperator> = Arc::new(MatrixOp::identity(spec));
            let data = DataVector::new(vec![y], op.data_weights().clone()).unwrap();
            let penalty = Penalty::l1l2(beta).unwrap();
            let problem = Problem::new(vec![op], vec![data], penalty, GridFunction::zeros(spec)).unwrap();
            let mut cfg = SolverConfig::new(1.5, 0.3, 0.0);
            cfg.max_sweeps = 5;
            let out = run(&problem, &cfg).unwrap();
            let x = penalty.conjugate_minimizer(&out.xi).unwrap().x;
            prop_assert_eq!(x.values(), out.x.values());
        }
    }
}
