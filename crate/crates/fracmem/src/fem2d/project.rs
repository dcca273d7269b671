//! Ritz projection of a smooth function onto the P1 space.
//!
//! Solves A[P v, chi] = A[v, chi] for all basis functions chi. When the
//! elliptic form is singular on constants (pure Neumann with c = 0,
//! sigma = 0) the projection is not well defined and the routine falls back
//! to the plain L2 projection, reporting which path it took.

use super::assemble::{assemble_volume_load, assemble_weighted_mass};
use super::coeffs::{EllipticCoeffs, ScalarField};
use super::mesh::Mesh;
use super::sparse::{sparse_solve, SolveMode, SparseMatrix};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionPath {
    /// Elliptic-form orthogonal projection.
    Ritz,
    /// Stiffness was singular on constants; plain L2 projection used instead.
    L2Fallback,
}

/// Right-hand side A[v, phi_i] with coefficients frozen exactly like the
/// assembled stiffness (centroid per element, midpoint per boundary edge)
/// and v, grad v sampled at the edge midpoints. Exact whenever v is P1.
fn elliptic_load(
    mesh: &Mesh,
    coeffs: &EllipticCoeffs,
    v: &dyn Fn(f64, f64) -> f64,
    grad_v: &dyn Fn(f64, f64) -> [f64; 2],
) -> Vec<f64> {
    let mut load = vec![0.0; mesh.n_nodes()];
    for t in 0..mesh.n_triangles() {
        let c = mesh.tri_centroid(t);
        let a = coeffs.diffusion.eval(c[0], c[1]);
        let b = coeffs.convection.eval(c[0], c[1]);
        let react = coeffs.reaction.eval(c[0], c[1]);
        let area = mesh.tri_area(t);
        let grads = mesh.tri_gradients(t);
        let nodes = mesh.triangles()[t];
        for (point, basis) in mesh.tri_edge_midpoints(t) {
            let gv = grad_v(point[0], point[1]);
            let vv = v(point[0], point[1]);
            let ag = [
                a[0][0] * gv[0] + a[0][1] * gv[1],
                a[1][0] * gv[0] + a[1][1] * gv[1],
            ];
            let bg = b[0] * gv[0] + b[1] * gv[1];
            for i in 0..3 {
                let diffusion = ag[0] * grads[i][0] + ag[1] * grads[i][1];
                let lower = (bg + react * vv) * basis[i];
                load[nodes[i]] += area / 3.0 * (diffusion + lower);
            }
        }
    }
    for edge in mesh.boundary_edges() {
        let pa = mesh.node(edge.nodes[0]);
        let pb = mesh.node(edge.nodes[1]);
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        let sigma = coeffs.robin_sigma.eval(mid[0], mid[1]);
        if sigma == 0.0 {
            continue;
        }
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        // Simpson of sigma_mid * v * phi along the edge
        let va = v(pa[0], pa[1]);
        let vm = v(mid[0], mid[1]);
        let vb = v(pb[0], pb[1]);
        load[edge.nodes[0]] += sigma * len / 6.0 * (va + 2.0 * vm);
        load[edge.nodes[1]] += sigma * len / 6.0 * (2.0 * vm + vb);
    }
    load
}

pub fn ritz_project(
    mesh: &Mesh,
    coeffs: &EllipticCoeffs,
    stiffness: &SparseMatrix,
    v: &dyn Fn(f64, f64) -> f64,
    grad_v: &dyn Fn(f64, f64) -> [f64; 2],
) -> Result<(Vec<f64>, ProjectionPath)> {
    let ones = vec![1.0; mesh.n_nodes()];
    let k_ones = stiffness.matvec(&ones);
    let singular_on_constants = k_ones
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        < 1e-10 * stiffness.max_abs();
    if singular_on_constants {
        let mass = assemble_weighted_mass(mesh, &ScalarField::Constant(1.0))?;
        let rhs = assemble_volume_load(mesh, v);
        let x = sparse_solve(&mass, &rhs, SolveMode::DirectFactorReuse)?;
        return Ok((x, ProjectionPath::L2Fallback));
    }
    let rhs = elliptic_load(mesh, coeffs, v, grad_v);
    let x = sparse_solve(stiffness, &rhs, SolveMode::DirectFactorReuse)?;
    Ok((x, ProjectionPath::Ritz))
}
