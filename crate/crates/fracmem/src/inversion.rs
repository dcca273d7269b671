//! Tikhonov-regularized source reconstruction.
//!
//! Cost J(q) = 1/2 ||u(q) - data||^2 over the observation subdomain and
//! time (trapezoid in time, mass-weighted in space) + reg/2 ||q||^2. The
//! gradient comes from one adjoint solve,
//!
//!   grad J(q) = int_0^T p(t) v(t) dt + reg * q,
//!
//! returned as nodal values of an L2 function: inner products against it go
//! through the full mass matrix. The loop is Polak-Ribière CG with Armijo
//! backtracking and a steepest-descent reset when the PR direction fails to
//! descend.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::fem2d::{
    assemble_observation_mass, ObservationMask, SparseMatrix,
};
use crate::solver::{
    adjoint_with_ops, build_stepping_operators, forward_with_ops, ProblemSpec, SpaceTimeField,
    SteppingOperators,
};

/// Everything one reconstruction needs; operators are assembled and factored
/// once here and reused by every cost/gradient evaluation.
#[derive(Debug, Clone)]
pub struct InverseSetup {
    pub spec: ProblemSpec,
    pub ops: SteppingOperators,
    pub obs_mask: ObservationMask,
    pub obs_mass: SparseMatrix,
    pub data: SpaceTimeField,
    pub reg_weight: f64,
    pub full_mass: SparseMatrix,
}

impl InverseSetup {
    pub fn new(
        spec: ProblemSpec,
        obs_mask: ObservationMask,
        data: SpaceTimeField,
        reg_weight: f64,
    ) -> Result<Self> {
        if reg_weight < 0.0 {
            return Err(Error::invalid(format!(
                "regularization weight must be nonnegative, got {reg_weight}"
            )));
        }
        if data.n_rows() != spec.grid.n_steps() + 1 || data.ndof() != spec.mesh.n_nodes() {
            return Err(Error::invalid("data field does not match grid/mesh"));
        }
        let ops = build_stepping_operators(&spec)?;
        let obs_mass = assemble_observation_mass(spec.mesh.as_ref(), &obs_mask)?;
        let full_mass = ops.load_mass.clone();
        Ok(InverseSetup {
            spec,
            ops,
            obs_mask,
            obs_mass,
            data,
            reg_weight,
            full_mass,
        })
    }

    /// L2(Omega) inner product of nodal functions.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.full_mass.quad_form(a, b)
    }

    /// L2(Omega) norm of a nodal function.
    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }
}

/// Line-search and stopping parameters.
#[derive(Debug, Clone, Copy)]
pub struct StopCriteria {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub armijo_c1: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            grad_tol: 1e-7,
            max_iter: 100,
            armijo_c1: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
        }
    }
}

impl StopCriteria {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::invalid("gradient tolerance must be positive"));
        }
        if !(self.armijo_c1 > 0.0 && self.armijo_c1 < 1.0) {
            return Err(Error::invalid("armijo constant must lie in (0, 1)"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid("backtrack factor must lie in (0, 1)"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::invalid("initial step must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Gradient norm fell under the tolerance.
    GradientTolerance,
    /// Iteration budget exhausted.
    MaxIterations,
    /// Armijo backtracking stalled even along steepest descent.
    LineSearchFailure,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::GradientTolerance => "gradient-tolerance",
            StopReason::MaxIterations => "max-iterations",
            StopReason::LineSearchFailure => "line-search-failure",
        }
    }
}

/// Iteration record returned next to the reconstructed source.
#[derive(Debug, Clone)]
pub struct CgState {
    pub iterations: usize,
    pub q: Vec<f64>,
    pub grad: Vec<f64>,
    pub grad_prev: Vec<f64>,
    pub direction: Vec<f64>,
    pub cost_history: Vec<f64>,
    pub grad_norm_history: Vec<f64>,
    pub step_history: Vec<f64>,
    pub wall_ms_history: Vec<u128>,
    pub stop: StopReason,
}

/// Cost and the forward state it was computed from (reused by the gradient).
pub fn evaluate_cost(setup: &InverseSetup, q: &[f64]) -> Result<(f64, SpaceTimeField)> {
    let mut spec = setup.spec.clone();
    spec.source = q.to_vec();
    let state = forward_with_ops(&spec, &setup.ops)?;
    let residual = state.sub(&setup.data)?;
    let misfit = 0.5 * crate::solver::space_time_inner(&residual, &residual, &setup.obs_mass);
    let reg = 0.5 * setup.reg_weight * setup.full_mass.quad_form(q, q);
    Ok((misfit + reg, state))
}

/// Adjoint gradient at q given the forward state for this q.
pub fn evaluate_gradient(
    setup: &InverseSetup,
    q: &[f64],
    state: &SpaceTimeField,
) -> Result<Vec<f64>> {
    let residual = state.sub(&setup.data)?;
    let mut spec = setup.spec.clone();
    spec.source = q.to_vec();
    let v = adjoint_with_ops(&spec, &setup.ops, &residual, &setup.obs_mass)?;
    let grid = &setup.spec.grid;
    let tau = grid.tau();
    let w = grid.trapezoid_weights();
    let p = &setup.spec.time_signal;
    let ndof = setup.spec.mesh.n_nodes();
    let mut grad = vec![0.0; ndof];
    for n in 0..v.n_rows() {
        let scale = tau * w[n] * p[n];
        for (g, vi) in grad.iter_mut().zip(v.row(n)) {
            *g += scale * vi;
        }
    }
    for (g, qi) in grad.iter_mut().zip(q) {
        *g += setup.reg_weight * qi;
    }
    Ok(grad)
}

/// Polak-Ribière direction with descent safeguard.
///
/// zeta = <g_k, g_k - g_{k-1}> / ||g_{k-1}||^2 in L2(Omega); the direction
/// resets to steepest descent whenever the update fails to descend.
pub fn pr_direction(
    grad: &[f64],
    grad_prev: &[f64],
    dir_prev: &[f64],
    mass: &SparseMatrix,
) -> Result<Vec<f64>> {
    let prev_sq = mass.quad_form(grad_prev, grad_prev);
    if prev_sq <= 0.0 {
        return Err(Error::invalid(
            "previous gradient vanishes; iteration should have stopped",
        ));
    }
    let diff: Vec<f64> = grad.iter().zip(grad_prev).map(|(a, b)| a - b).collect();
    let zeta = mass.quad_form(grad, &diff) / prev_sq;
    let mut dir: Vec<f64> = grad
        .iter()
        .zip(dir_prev)
        .map(|(g, d)| -g + zeta * d)
        .collect();
    if mass.quad_form(&dir, grad) >= 0.0 {
        dir = grad.iter().map(|g| -g).collect();
    }
    Ok(dir)
}

/// Result of one accepted Armijo step.
#[derive(Debug, Clone)]
pub struct ArmijoStep {
    pub step: f64,
    pub q_next: Vec<f64>,
    pub cost_next: f64,
    pub state_next: SpaceTimeField,
    pub backtracks: usize,
}

const MAX_BACKTRACKS: usize = 60;

/// Backtracking line search enforcing the sufficient-decrease condition
/// J(q + s d) <= J(q) + c1 s <g, d>.
pub fn armijo_search(
    setup: &InverseSetup,
    q: &[f64],
    dir: &[f64],
    grad: &[f64],
    cost: f64,
    crit: &StopCriteria,
) -> Result<ArmijoStep> {
    let slope = setup.inner(grad, dir);
    if !(slope < 0.0) {
        return Err(Error::invalid(format!(
            "line search needs a descent direction, got slope {slope}"
        )));
    }
    let mut step = crit.initial_step;
    for backtracks in 0..=MAX_BACKTRACKS {
        let trial: Vec<f64> = q.iter().zip(dir).map(|(a, d)| a + step * d).collect();
        let (trial_cost, trial_state) = evaluate_cost(setup, &trial)?;
        if trial_cost <= cost + crit.armijo_c1 * step * slope {
            return Ok(ArmijoStep {
                step,
                q_next: trial,
                cost_next: trial_cost,
                state_next: trial_state,
                backtracks,
            });
        }
        step *= crit.backtrack_factor;
    }
    Err(Error::LineSearchFailure {
        backtracks: MAX_BACKTRACKS,
    })
}

/// Full reconstruction loop: forward solve, adjoint gradient, stop check,
/// PR direction, Armijo step, update. Returns the final iterate with the
/// complete iteration history.
pub fn reconstruct(
    setup: &InverseSetup,
    q0: &[f64],
    crit: &StopCriteria,
) -> Result<(Vec<f64>, CgState)> {
    crit.validate()?;
    let t_start = Instant::now();
    let mut q = q0.to_vec();
    let (mut cost, mut state) = evaluate_cost(setup, &q)?;
    let mut grad = evaluate_gradient(setup, &q, &state)?;
    let mut grad_prev = vec![0.0; q.len()];
    let mut dir = vec![0.0; q.len()];
    let mut cost_history = vec![cost];
    let mut grad_norm_history = vec![setup.norm(&grad)];
    let mut step_history = Vec::new();
    let mut wall_ms_history = vec![t_start.elapsed().as_millis()];
    let mut stop = StopReason::MaxIterations;
    let mut k = 0usize;
    while k < crit.max_iter {
        if grad_norm_history[k] < crit.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        dir = if k == 0 {
            grad.iter().map(|g| -g).collect()
        } else {
            pr_direction(&grad, &grad_prev, &dir, &setup.full_mass)?
        };
        let accepted = match armijo_search(setup, &q, &dir, &grad, cost, crit) {
            Ok(step) => step,
            Err(Error::LineSearchFailure { .. }) => {
                // one steepest-descent retry, then give up
                let steepest: Vec<f64> = grad.iter().map(|g| -g).collect();
                let already_steepest = dir
                    .iter()
                    .zip(&steepest)
                    .all(|(a, b)| (a - b).abs() <= 1e-300);
                if already_steepest {
                    stop = StopReason::LineSearchFailure;
                    break;
                }
                match armijo_search(setup, &q, &steepest, &grad, cost, crit) {
                    Ok(step) => {
                        dir = steepest;
                        step
                    }
                    Err(Error::LineSearchFailure { .. }) => {
                        stop = StopReason::LineSearchFailure;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(e) => return Err(e),
        };
        q = accepted.q_next;
        cost = accepted.cost_next;
        state = accepted.state_next;
        grad_prev = std::mem::replace(&mut grad, evaluate_gradient(setup, &q, &state)?);
        k += 1;
        cost_history.push(cost);
        grad_norm_history.push(setup.norm(&grad));
        step_history.push(accepted.step);
        wall_ms_history.push(t_start.elapsed().as_millis());
    }
    let cg = CgState {
        iterations: k,
        q: q.clone(),
        grad,
        grad_prev,
        direction: dir,
        cost_history,
        grad_norm_history,
        step_history,
        wall_ms_history,
        stop,
    };
    Ok((q, cg))
}
