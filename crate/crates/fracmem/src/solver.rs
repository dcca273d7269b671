//! Time marching for the fully discrete membrane problem
//!
//!   eta u_tt + mu D^alpha u + A u = p(t) q(x),   du/dA + sigma u = 0,
//!
//! and for its adjoint. Each step solves
//!
//!   S u^n = p(t_n) M q + (1/tau^2) M_eta (2u^{n-1} - u^{n-2})
//!           - tau^-alpha M_mu sum_{k=1..n} w_k u^{n-k},
//!
//! with S = (1/tau^2) M_eta + tau^-alpha M_mu + K factored once and shared by
//! every step. The backward adjoint problem has vanishing terminal data, so
//! it is marched as a forward problem in reversed time with the transposed
//! stiffness; the same factorization serves it through transpose solves.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem2d::{
    assemble_observation_mass, assemble_stiffness, assemble_weighted_mass, EllipticCoeffs, Mesh,
    ObservationMask, ScalarField, SparseMatrix,
};
use crate::fracops::{gl_weights, FracOrder, GlWeights, TimeGrid};

/// Extra separable right-hand-side term: signal[n] * vector added to the
/// load at step n. Used for manufactured forcing with boundary flux.
#[derive(Debug, Clone)]
pub struct SeparableLoad {
    pub signal: Vec<f64>,
    pub vector: Vec<f64>,
}

/// Full description of one forward problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mesh: Arc<Mesh>,
    pub grid: TimeGrid,
    pub alpha: FracOrder,
    /// Inertial coefficient eta(x) > 0.
    pub density: ScalarField,
    /// Viscoelastic coefficient mu(x) > 0 in front of the fractional term.
    pub viscosity: ScalarField,
    pub elliptic: EllipticCoeffs,
    /// Temporal source factor sampled at the grid nodes (length N+1).
    pub time_signal: Vec<f64>,
    /// Spatial source q as nodal dof values.
    pub source: Vec<f64>,
    /// Initial displacement / velocity as dof vectors (already projected).
    pub initial_displacement: Vec<f64>,
    pub initial_velocity: Vec<f64>,
    /// Additional separable loads (empty in the standard problem).
    pub extra_loads: Vec<SeparableLoad>,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        let ndof = self.mesh.n_nodes();
        let n = self.grid.n_steps();
        if self.time_signal.len() != n + 1 {
            return Err(Error::invalid(format!(
                "time signal has {} samples, expected {}",
                self.time_signal.len(),
                n + 1
            )));
        }
        for (name, v) in [
            ("source", &self.source),
            ("initial displacement", &self.initial_displacement),
            ("initial velocity", &self.initial_velocity),
        ] {
            if v.len() != ndof {
                return Err(Error::invalid(format!(
                    "{name} vector has {} dofs, expected {ndof}",
                    v.len()
                )));
            }
        }
        for load in &self.extra_loads {
            if load.signal.len() != n + 1 || load.vector.len() != ndof {
                return Err(Error::invalid("extra load dimensions do not match"));
            }
        }
        Ok(())
    }
}

/// Nodal values over all time steps; row n holds the solution at t_n.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: TimeGrid,
    ndof: usize,
    data: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: &TimeGrid, ndof: usize) -> Self {
        SpaceTimeField {
            grid: grid.clone(),
            ndof,
            data: vec![0.0; (grid.n_steps() + 1) * ndof],
        }
    }

    pub fn from_rows(grid: &TimeGrid, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != grid.n_steps() + 1 {
            return Err(Error::invalid("row count does not match grid"));
        }
        let ndof = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * ndof);
        for r in &rows {
            if r.len() != ndof {
                return Err(Error::invalid("ragged space-time rows"));
            }
            data.extend_from_slice(r);
        }
        Ok(SpaceTimeField {
            grid: grid.clone(),
            ndof,
            data,
        })
    }

    #[inline]
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    #[inline]
    pub fn ndof(&self) -> usize {
        self.ndof
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.grid.n_steps() + 1
    }

    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.ndof..(n + 1) * self.ndof]
    }

    #[inline]
    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.ndof..(n + 1) * self.ndof]
    }

    /// self - other, elementwise.
    pub fn sub(&self, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        if self.ndof != other.ndof || self.n_rows() != other.n_rows() {
            return Err(Error::invalid("field shapes differ"));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(SpaceTimeField {
            grid: self.grid.clone(),
            ndof: self.ndof,
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Max absolute value restricted to the given dof indices (all rows).
    pub fn max_abs_over(&self, dofs: &[usize]) -> f64 {
        let mut m = 0.0f64;
        for n in 0..self.n_rows() {
            let row = self.row(n);
            for &d in dofs {
                m = m.max(row[d].abs());
            }
        }
        m
    }

    /// Reverse the time direction in place.
    pub fn reverse_time(&mut self) {
        let rows = self.n_rows();
        for n in 0..rows / 2 {
            let (a, b) = (n, rows - 1 - n);
            for i in 0..self.ndof {
                self.data.swap(a * self.ndof + i, b * self.ndof + i);
            }
        }
    }
}

/// Space-time L2 inner product sum_n tau w_n x_n^T M y_n with trapezoid
/// weights in time.
pub fn space_time_inner(a: &SpaceTimeField, b: &SpaceTimeField, m: &SparseMatrix) -> f64 {
    let grid = a.grid();
    let w = grid.trapezoid_weights();
    let tau = grid.tau();
    let mut acc = 0.0;
    for n in 0..a.n_rows() {
        acc += w[n] * m.quad_form(a.row(n), b.row(n));
    }
    acc * tau
}

/// L2(0,T; L2) norm of a field.
pub fn l2l2_norm(a: &SpaceTimeField, m: &SparseMatrix) -> f64 {
    space_time_inner(a, a, m).max(0.0).sqrt()
}

/// Assembled operators shared by every time step of a run.
#[derive(Debug, Clone)]
pub struct SteppingOperators {
    /// Mass weighted by the inertial coefficient eta.
    pub mass_density: SparseMatrix,
    /// Mass weighted by the viscoelastic coefficient mu.
    pub mass_viscosity: SparseMatrix,
    /// Elliptic stiffness including the Robin boundary term.
    pub stiffness: SparseMatrix,
    /// Plain mass matrix applying interior loads.
    pub load_mass: SparseMatrix,
    /// System matrix S = (1/tau^2) M_eta + tau^-alpha M_mu + K.
    pub system: SparseMatrix,
    pub gl: GlWeights,
}

pub fn build_stepping_operators(spec: &ProblemSpec) -> Result<SteppingOperators> {
    spec.validate()?;
    let mesh = spec.mesh.as_ref();
    let mass_density = assemble_weighted_mass(mesh, &spec.density)
        .map_err(|e| Error::invalid(format!("inertial coefficient: {e}")))?;
    let mass_viscosity = assemble_weighted_mass(mesh, &spec.viscosity)
        .map_err(|e| Error::invalid(format!("viscoelastic coefficient: {e}")))?;
    let stiffness = assemble_stiffness(mesh, &spec.elliptic)?;
    let load_mass = assemble_weighted_mass(mesh, &ScalarField::Constant(1.0))?;
    let tau = spec.grid.tau();
    let alpha = spec.alpha.value();
    let gl = gl_weights(spec.alpha, spec.grid.n_steps());
    let masses = mass_density.add_scaled(1.0 / (tau * tau), &mass_viscosity, tau.powf(-alpha))?;
    let system = masses.add_scaled(1.0, &stiffness, 1.0)?;
    // fail fast if the step matrix cannot be factored
    system.factorize()?;
    Ok(SteppingOperators {
        mass_density,
        mass_viscosity,
        stiffness,
        load_mass,
        system,
        gl,
    })
}

/// March the two-step recursion with the given per-step load vectors.
///
/// `transpose` solves against S^T (adjoint marching); `history_window`
/// truncates the fractional memory sum to the most recent k terms and exists
/// only so tests can demonstrate that dropping history changes the answer.
pub fn march(
    ops: &SteppingOperators,
    grid: &TimeGrid,
    loads: &[Vec<f64>],
    u0: &[f64],
    u1: &[f64],
    transpose: bool,
    history_window: Option<usize>,
) -> Result<SpaceTimeField> {
    let n_steps = grid.n_steps();
    let ndof = u0.len();
    if loads.len() != n_steps + 1 {
        return Err(Error::invalid("need one load vector per grid node"));
    }
    let tau = grid.tau();
    let alpha = ops.gl.alpha();
    let gl_scale = tau.powf(-alpha);
    let inv_tau2 = 1.0 / (tau * tau);
    let lu = ops.system.factorize()?;
    let mut field = SpaceTimeField::zeros(grid, ndof);
    field.row_mut(0).copy_from_slice(u0);
    field.row_mut(1).copy_from_slice(u1);
    let weights = ops.gl.weights();
    let mut hist_sum = vec![0.0; ndof];
    let mut rhs = vec![0.0; ndof];
    for n in 2..=n_steps {
        hist_sum.iter_mut().for_each(|v| *v = 0.0);
        let k_max = history_window.map_or(n, |w| w.min(n));
        for k in 1..=k_max {
            let wk = weights[k];
            let prev = field.row(n - k);
            for (h, p) in hist_sum.iter_mut().zip(prev) {
                *h += wk * p;
            }
        }
        // rhs = load + (1/tau^2) M_eta (2u^{n-1} - u^{n-2}) - tau^-alpha M_mu hist
        let lead: Vec<f64> = field
            .row(n - 1)
            .iter()
            .zip(field.row(n - 2))
            .map(|(a, b)| 2.0 * a - b)
            .collect();
        let m_lead = ops.mass_density.matvec(&lead);
        let m_hist = ops.mass_viscosity.matvec(&hist_sum);
        for i in 0..ndof {
            rhs[i] = loads[n][i] + inv_tau2 * m_lead[i] - gl_scale * m_hist[i];
        }
        let x = if transpose {
            lu.solve_transposed(&rhs)
        } else {
            lu.solve(&rhs)
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite solution component at time step {n}"
            )));
        }
        field.row_mut(n).copy_from_slice(&x);
    }
    Ok(field)
}

/// Per-step loads of the forward problem: p(t_n) * (M q) plus extra terms.
fn forward_loads(spec: &ProblemSpec, ops: &SteppingOperators) -> Vec<Vec<f64>> {
    let mq = ops.load_mass.matvec(&spec.source);
    let n = spec.grid.n_steps();
    (0..=n)
        .map(|step| {
            let mut l: Vec<f64> = mq.iter().map(|v| spec.time_signal[step] * v).collect();
            for extra in &spec.extra_loads {
                for (li, vi) in l.iter_mut().zip(&extra.vector) {
                    *li += extra.signal[step] * vi;
                }
            }
            l
        })
        .collect()
}

/// Solve the forward problem with operators already built.
pub fn forward_with_ops(spec: &ProblemSpec, ops: &SteppingOperators) -> Result<SpaceTimeField> {
    spec.validate()?;
    let tau = spec.grid.tau();
    let u0 = spec.initial_displacement.clone();
    let u1: Vec<f64> = spec
        .initial_displacement
        .iter()
        .zip(&spec.initial_velocity)
        .map(|(d, v)| d + tau * v)
        .collect();
    let loads = forward_loads(spec, ops);
    march(ops, &spec.grid, &loads, &u0, &u1, false, None)
}

pub fn solve_forward(spec: &ProblemSpec) -> Result<SpaceTimeField> {
    let ops = build_stepping_operators(spec)?;
    forward_with_ops(spec, &ops)
}

/// March the recursion without prescribed starting rows: every step from
/// j = 0 on is solved, with the two ghost rows before the start read as
/// zero. This is the exact transpose of the forward march (whose first two
/// rows are data, so its adjoint has no equations there but free ones at
/// the terminal end).
pub fn march_free(
    ops: &SteppingOperators,
    grid: &TimeGrid,
    loads: &[Vec<f64>],
    transpose: bool,
) -> Result<Vec<Vec<f64>>> {
    let tau = grid.tau();
    let alpha = ops.gl.alpha();
    let gl_scale = tau.powf(-alpha);
    let inv_tau2 = 1.0 / (tau * tau);
    let lu = ops.system.factorize()?;
    let weights = ops.gl.weights();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(loads.len());
    for (j, load) in loads.iter().enumerate() {
        let ndof = load.len();
        let mut hist_sum = vec![0.0; ndof];
        for k in 1..=j {
            let wk = weights[k];
            for (h, p) in hist_sum.iter_mut().zip(&rows[j - k]) {
                *h += wk * p;
            }
        }
        let mut lead = vec![0.0; ndof];
        if j >= 1 {
            for (l, a) in lead.iter_mut().zip(&rows[j - 1]) {
                *l += 2.0 * a;
            }
        }
        if j >= 2 {
            for (l, b) in lead.iter_mut().zip(&rows[j - 2]) {
                *l -= b;
            }
        }
        let m_lead = ops.mass_density.matvec(&lead);
        let m_hist = ops.mass_viscosity.matvec(&hist_sum);
        let rhs: Vec<f64> = (0..ndof)
            .map(|i| load[i] + inv_tau2 * m_lead[i] - gl_scale * m_hist[i])
            .collect();
        let x = if transpose {
            lu.solve_transposed(&rhs)
        } else {
            lu.solve(&rhs)
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "non-finite adjoint component at reversed step {j}"
            )));
        }
        rows.push(x);
    }
    Ok(rows)
}

/// Solve the backward adjoint problem driven by the masked residual.
///
/// Realized as the exact transpose of the forward march: reversed time,
/// transpose solves against the same factorization, loads tau w_n Mo r^n
/// read backward (w_n the trapezoid weights of the misfit quadrature), and
/// a free start (zero ghost history) standing in for the vanishing terminal
/// data. Rows are re-reversed before returning and unscaled by tau w_n, so
/// row n approximates the continuous adjoint state at t_n while the
/// trapezoid-weighted pairing with p(t) reproduces the discrete-cost
/// gradient exactly. Rows 0 and 1 (where the forward scheme has data, not
/// equations) are zero.
pub fn adjoint_with_ops(
    spec: &ProblemSpec,
    ops: &SteppingOperators,
    residual: &SpaceTimeField,
    obs_mass: &SparseMatrix,
) -> Result<SpaceTimeField> {
    let n = spec.grid.n_steps();
    if residual.n_rows() != n + 1 || residual.ndof() != spec.mesh.n_nodes() {
        return Err(Error::invalid("residual field does not match grid/mesh"));
    }
    let tau = spec.grid.tau();
    let w = spec.grid.trapezoid_weights();
    // reversed loads for m = N - j, only down to m = 2
    let loads: Vec<Vec<f64>> = (0..=n.saturating_sub(2))
        .map(|j| {
            let m = n - j;
            let mut l = obs_mass.matvec(residual.row(m));
            let scale = tau * w[m];
            l.iter_mut().for_each(|v| *v *= scale);
            l
        })
        .collect();
    let reversed = march_free(ops, &spec.grid, &loads, true)?;
    let mut v = SpaceTimeField::zeros(&spec.grid, spec.mesh.n_nodes());
    for (j, row) in reversed.into_iter().enumerate() {
        let m = n - j;
        let unscale = 1.0 / (tau * w[m]);
        let out = v.row_mut(m);
        for (o, r) in out.iter_mut().zip(&row) {
            *o = unscale * r;
        }
    }
    Ok(v)
}

pub fn solve_adjoint(
    spec: &ProblemSpec,
    residual: &SpaceTimeField,
    obs_mass: &SparseMatrix,
) -> Result<SpaceTimeField> {
    let ops = build_stepping_operators(spec)?;
    adjoint_with_ops(spec, &ops, residual, obs_mass)
}

/// Observation mass matrix for a mask on the problem mesh.
pub fn observation_operator(spec: &ProblemSpec, mask: &ObservationMask) -> Result<SparseMatrix> {
    assemble_observation_mass(spec.mesh.as_ref(), mask)
}
