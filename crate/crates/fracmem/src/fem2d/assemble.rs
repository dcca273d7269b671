//! Element-wise assembly of mass, stiffness, boundary and observation
//! operators for P1 elements.
//!
//! P1 x P1 products are integrated exactly; coefficient fields are frozen at
//! the element centroid (edge midpoint for the Robin term), which is exact
//! for the constant coefficients used in all experiments.

use super::coeffs::{EllipticCoeffs, ScalarField};
use super::mesh::Mesh;
use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

/// Exact element mass pattern: integral of phi_i phi_j over T = area/12 * (1 + delta_ij).
const MASS_PATTERN: [[f64; 3]; 3] = [[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]];

/// Weighted mass matrix: M_ij = integral of w phi_i phi_j.
pub fn assemble_weighted_mass(mesh: &Mesh, w: &ScalarField) -> Result<SparseMatrix> {
    let mut triplets = Vec::with_capacity(mesh.n_triangles() * 9);
    for t in 0..mesh.n_triangles() {
        let c = mesh.tri_centroid(t);
        let wc = w.eval(c[0], c[1]);
        if !(wc > 0.0) {
            return Err(Error::invalid(format!(
                "mass weight must be strictly positive, got {wc} at ({}, {})",
                c[0], c[1]
            )));
        }
        let scale = wc * mesh.tri_area(t) / 12.0;
        let nodes = mesh.triangles()[t];
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((nodes[i], nodes[j], scale * MASS_PATTERN[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.n_nodes(), &triplets)
}

/// Stiffness of the elliptic operator plus the Robin boundary term:
///
///   K_ij = int_Omega { A grad(phi_j) . grad(phi_i) + (b . grad(phi_j) + c phi_j) phi_i }
///        + int_bdry sigma phi_j phi_i.
pub fn assemble_stiffness(mesh: &Mesh, coeffs: &EllipticCoeffs) -> Result<SparseMatrix> {
    let mut triplets = Vec::with_capacity(mesh.n_triangles() * 9 + mesh.boundary_edges().len() * 4);
    for t in 0..mesh.n_triangles() {
        let c = mesh.tri_centroid(t);
        let a = coeffs.diffusion.eval(c[0], c[1]);
        check_spd(&a, c)?;
        let b = coeffs.convection.eval(c[0], c[1]);
        let react = coeffs.reaction.eval(c[0], c[1]);
        let area = mesh.tri_area(t);
        let grads = mesh.tri_gradients(t);
        let nodes = mesh.triangles()[t];
        for j in 0..3 {
            let ag = [
                a[0][0] * grads[j][0] + a[0][1] * grads[j][1],
                a[1][0] * grads[j][0] + a[1][1] * grads[j][1],
            ];
            let bg = b[0] * grads[j][0] + b[1] * grads[j][1];
            for i in 0..3 {
                let diffusion = area * (ag[0] * grads[i][0] + ag[1] * grads[i][1]);
                // int of phi_i over T is area/3
                let convection = bg * area / 3.0;
                let reaction = react * area / 12.0 * MASS_PATTERN[i][j];
                triplets.push((nodes[i], nodes[j], diffusion + convection + reaction));
            }
        }
    }
    for edge in mesh.boundary_edges() {
        let pa = mesh.node(edge.nodes[0]);
        let pb = mesh.node(edge.nodes[1]);
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        let sigma = coeffs.robin_sigma.eval(mid[0], mid[1]);
        if sigma < 0.0 {
            return Err(Error::invalid(format!(
                "Robin coefficient must be nonnegative, got {sigma} at ({}, {})",
                mid[0], mid[1]
            )));
        }
        if sigma == 0.0 {
            continue;
        }
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let scale = sigma * len / 6.0;
        let [na, nb] = edge.nodes;
        triplets.push((na, na, 2.0 * scale));
        triplets.push((nb, nb, 2.0 * scale));
        triplets.push((na, nb, scale));
        triplets.push((nb, na, scale));
    }
    SparseMatrix::from_triplets(mesh.n_nodes(), &triplets)
}

fn check_spd(a: &[[f64; 2]; 2], at: [f64; 2]) -> Result<()> {
    let sym = (a[0][1] - a[1][0]).abs() <= 1e-12 * (1.0 + a[0][1].abs().max(a[1][0].abs()));
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if !sym || a[0][0] <= 0.0 || det <= 0.0 {
        return Err(Error::invalid(format!(
            "diffusion tensor not symmetric positive definite at ({}, {})",
            at[0], at[1]
        )));
    }
    Ok(())
}

/// Subdomain of observed elements, flagged by centroid membership.
#[derive(Debug, Clone)]
pub struct ObservationMask {
    element_flags: Vec<bool>,
}

impl ObservationMask {
    pub fn from_predicate(mesh: &Mesh, inside: impl Fn(f64, f64) -> bool) -> Result<Self> {
        let flags: Vec<bool> = (0..mesh.n_triangles())
            .map(|t| {
                let c = mesh.tri_centroid(t);
                inside(c[0], c[1])
            })
            .collect();
        if !flags.iter().any(|f| *f) {
            return Err(Error::invalid(
                "observation subdomain contains no element centroid",
            ));
        }
        Ok(ObservationMask {
            element_flags: flags,
        })
    }

    /// Frame of width `margin` along the boundary of the mesh rectangle:
    /// everything outside the inner box shrunk by `margin` on each side.
    pub fn frame(mesh: &Mesh, margin: f64) -> Result<Self> {
        let (x0, x1) = mesh.x_range();
        let (y0, y1) = mesh.y_range();
        if !(margin > 0.0)
            || 2.0 * margin >= (x1 - x0)
            || 2.0 * margin >= (y1 - y0)
        {
            return Err(Error::invalid(format!(
                "frame margin {margin} must lie in (0, half the domain width)"
            )));
        }
        Self::from_predicate(mesh, move |x, y| {
            !(x >= x0 + margin && x <= x1 - margin && y >= y0 + margin && y <= y1 - margin)
        })
    }

    /// Whole domain observed.
    pub fn full(mesh: &Mesh) -> Self {
        ObservationMask {
            element_flags: vec![true; mesh.n_triangles()],
        }
    }

    #[inline]
    pub fn flags(&self) -> &[bool] {
        &self.element_flags
    }

    #[inline]
    pub fn is_flagged(&self, t: usize) -> bool {
        self.element_flags[t]
    }

    pub fn flagged_area(&self, mesh: &Mesh) -> f64 {
        (0..mesh.n_triangles())
            .filter(|t| self.element_flags[*t])
            .map(|t| mesh.tri_area(t))
            .sum()
    }

    /// Sorted indices of the nodes touched by any flagged element.
    pub fn node_set(&self, mesh: &Mesh) -> Vec<usize> {
        let mut seen = vec![false; mesh.n_nodes()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            if self.element_flags[t] {
                for n in tri {
                    seen[*n] = true;
                }
            }
        }
        (0..mesh.n_nodes()).filter(|i| seen[*i]).collect()
    }
}

/// Mass matrix restricted to the flagged elements; realizes the inner
/// product over the observation subdomain.
pub fn assemble_observation_mass(mesh: &Mesh, mask: &ObservationMask) -> Result<SparseMatrix> {
    if mask.flags().len() != mesh.n_triangles() {
        return Err(Error::invalid("mask does not match mesh"));
    }
    if !mask.flags().iter().any(|f| *f) {
        return Err(Error::invalid("observation mask flags no element"));
    }
    let mut triplets = Vec::new();
    for t in 0..mesh.n_triangles() {
        if !mask.is_flagged(t) {
            continue;
        }
        let scale = mesh.tri_area(t) / 12.0;
        let nodes = mesh.triangles()[t];
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((nodes[i], nodes[j], scale * MASS_PATTERN[i][j]));
            }
        }
    }
    SparseMatrix::from_triplets(mesh.n_nodes(), &triplets)
}

/// Volume load vector l_i = integral of f phi_i, edge-midpoint rule
/// (exact for quadratic integrands).
pub fn assemble_volume_load(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.n_nodes()];
    for t in 0..mesh.n_triangles() {
        let area = mesh.tri_area(t);
        let nodes = mesh.triangles()[t];
        for (point, basis) in mesh.tri_edge_midpoints(t) {
            let fv = f(point[0], point[1]);
            for i in 0..3 {
                load[nodes[i]] += area / 3.0 * fv * basis[i];
            }
        }
    }
    load
}

/// Boundary load vector l_i = integral of g phi_i over the boundary,
/// Simpson rule per edge (exact for cubic integrands).
pub fn assemble_boundary_load(mesh: &Mesh, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.n_nodes()];
    for edge in mesh.boundary_edges() {
        let pa = mesh.node(edge.nodes[0]);
        let pb = mesh.node(edge.nodes[1]);
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let ga = g(pa[0], pa[1]);
        let gm = g(mid[0], mid[1]);
        let gb = g(pb[0], pb[1]);
        load[edge.nodes[0]] += len / 6.0 * (ga + 2.0 * gm);
        load[edge.nodes[1]] += len / 6.0 * (2.0 * gm + gb);
    }
    load
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem2d::coeffs::{MatrixField, VectorField};
    use crate::fem2d::mesh::triangulate_rectangle;
    use proptest::prelude::*;

    fn unit_mesh(n: usize) -> Mesh {
        triangulate_rectangle((0.0, 1.0), (0.0, 1.0), n, n).unwrap()
    }

    #[test]
    fn mass_partition_of_unity() {
        let mesh = unit_mesh(4);
        let m = assemble_weighted_mass(&mesh, &ScalarField::Constant(1.0)).unwrap();
        assert!((m.sum_entries() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mass_diagonal_single_element_contribution() {
        // one cell = two right triangles with legs h; a corner node belongs to
        // a single triangle, so its diagonal entry is area/6
        let mesh = triangulate_rectangle((0.0, 0.5), (0.0, 0.5), 1, 1).unwrap();
        let m = assemble_weighted_mass(&mesh, &ScalarField::Constant(1.0)).unwrap();
        let area = 0.5 * 0.5 * 0.5;
        // node 1 = (0.5, 0) sits in exactly one triangle
        assert!((m.get(1, 1) - area / 6.0).abs() < 1e-14);
    }

    #[test]
    fn mass_scales_linearly_in_weight() {
        let mesh = unit_mesh(3);
        let m1 = assemble_weighted_mass(&mesh, &ScalarField::Constant(1.0)).unwrap();
        let m2 = assemble_weighted_mass(&mesh, &ScalarField::Constant(2.0)).unwrap();
        for i in 0..mesh.n_nodes() {
            let (cols, vals) = m1.row(i);
            for (c, v) in cols.iter().zip(vals) {
                assert!((m2.get(i, *c) - 2.0 * v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mass_rejects_nonpositive_weight() {
        let mesh = unit_mesh(2);
        assert!(assemble_weighted_mass(&mesh, &ScalarField::Constant(0.0)).is_err());
        assert!(assemble_weighted_mass(&mesh, &ScalarField::Constant(-1.0)).is_err());
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let mesh = unit_mesh(5);
        let k = assemble_stiffness(&mesh, &EllipticCoeffs::laplace()).unwrap();
        let ones = vec![1.0; mesh.n_nodes()];
        let k1 = k.matvec(&ones);
        let bound = 1e-10 * k.max_abs();
        for v in &k1 {
            assert!(v.abs() < bound, "{v}");
        }
    }

    /// Independent assembly oracle: refine each triangle into s^2 subtriangles
    /// and apply the centroid rule — converges O(1/s^2) to the exact element
    /// integrals without reusing the closed-form patterns.
    fn brute_force_matrix(mesh: &Mesh, reaction: f64, s: usize) -> Vec<Vec<f64>> {
        let n = mesh.n_nodes();
        let mut dense = vec![vec![0.0; n]; n];
        for t in 0..mesh.n_triangles() {
            let area = mesh.tri_area(t);
            let grads = mesh.tri_gradients(t);
            let nodes = mesh.triangles()[t];
            let sub_area = area / (s * s) as f64;
            let f = 1.0 / s as f64;
            for i in 0..s {
                for j in 0..(s - i) {
                    // centroids of the up-triangle and (if present) down-triangle
                    let mut centroids = vec![[
                        (i as f64 + 1.0 / 3.0) * f,
                        (j as f64 + 1.0 / 3.0) * f,
                    ]];
                    if j < s - i - 1 {
                        centroids.push([(i as f64 + 2.0 / 3.0) * f, (j as f64 + 2.0 / 3.0) * f]);
                    }
                    for lc in centroids {
                        let bary = [1.0 - lc[0] - lc[1], lc[0], lc[1]];
                        for bi in 0..3 {
                            for bj in 0..3 {
                                let grad_term =
                                    grads[bi][0] * grads[bj][0] + grads[bi][1] * grads[bj][1];
                                let mass_term = reaction * bary[bi] * bary[bj];
                                dense[nodes[bi]][nodes[bj]] +=
                                    sub_area * (grad_term + mass_term);
                            }
                        }
                    }
                }
            }
        }
        dense
    }

    #[test]
    fn stiffness_with_reaction_matches_brute_force() {
        let mesh = unit_mesh(2);
        let coeffs = EllipticCoeffs {
            diffusion: MatrixField::identity(),
            convection: VectorField::zero(),
            reaction: ScalarField::Constant(1.0),
            robin_sigma: ScalarField::Constant(0.0),
        };
        let k = assemble_stiffness(&mesh, &coeffs).unwrap();
        let oracle = brute_force_matrix(&mesh, 1.0, 128);
        for i in 0..mesh.n_nodes() {
            for j in 0..mesh.n_nodes() {
                assert!(
                    (k.get(i, j) - oracle[i][j]).abs() < 5e-5,
                    "entry ({i},{j}): {} vs {}",
                    k.get(i, j),
                    oracle[i][j]
                );
            }
        }
        // row sums of laplacian+mass equal the mass row sums
        let mass = assemble_weighted_mass(&mesh, &ScalarField::Constant(1.0)).unwrap();
        for (a, b) in k.row_sums().iter().zip(mass.row_sums()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn convection_is_the_only_asymmetry() {
        // K(b) - K(-b) = 2 * convection part. With natural boundary
        // conditions its symmetric part is exactly the boundary flux mass
        // int_bdry (b.nu) phi_i phi_j (divergence theorem, constant b);
        // away from the boundary the difference is antisymmetric.
        let mesh = unit_mesh(3);
        let b = [1.0, -2.0];
        let with_b = |b: [f64; 2]| EllipticCoeffs {
            diffusion: MatrixField::identity(),
            convection: VectorField::Constant(b),
            reaction: ScalarField::Constant(0.5),
            robin_sigma: ScalarField::Constant(0.0),
        };
        let kp = assemble_stiffness(&mesh, &with_b(b)).unwrap();
        let km = assemble_stiffness(&mesh, &with_b([-b[0], -b[1]])).unwrap();
        assert!(!kp.is_symmetric(1e-12));
        let diff = kp.add_scaled(1.0, &km, -1.0).unwrap();
        let sym = diff.add_scaled(0.5, &diff.transpose(), 0.5).unwrap();
        // boundary flux mass, edge by edge
        let mut flux = vec![vec![0.0; mesh.n_nodes()]; mesh.n_nodes()];
        for edge in mesh.boundary_edges() {
            let pa = mesh.node(edge.nodes[0]);
            let pb = mesh.node(edge.nodes[1]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let bn = b[0] * edge.normal[0] + b[1] * edge.normal[1];
            let [na, nb] = edge.nodes;
            flux[na][na] += 2.0 * bn * len / 6.0;
            flux[nb][nb] += 2.0 * bn * len / 6.0;
            flux[na][nb] += bn * len / 6.0;
            flux[nb][na] += bn * len / 6.0;
        }
        let mut boundary = vec![false; mesh.n_nodes()];
        for edge in mesh.boundary_edges() {
            boundary[edge.nodes[0]] = true;
            boundary[edge.nodes[1]] = true;
        }
        for i in 0..mesh.n_nodes() {
            for j in 0..mesh.n_nodes() {
                assert!(
                    (sym.get(i, j) - flux[i][j]).abs() < 1e-12,
                    "symmetric part mismatch at ({i},{j})"
                );
                if !boundary[i] && !boundary[j] {
                    assert!(
                        (diff.get(i, j) + diff.get(j, i)).abs() < 1e-12,
                        "interior pair ({i},{j}) not antisymmetric"
                    );
                }
            }
        }
    }

    #[test]
    fn stiffness_rejects_indefinite_tensor() {
        let mesh = unit_mesh(2);
        let coeffs = EllipticCoeffs {
            diffusion: MatrixField::Constant([[1.0, 3.0], [3.0, 1.0]]),
            convection: VectorField::zero(),
            reaction: ScalarField::Constant(0.0),
            robin_sigma: ScalarField::Constant(0.0),
        };
        assert!(assemble_stiffness(&mesh, &coeffs).is_err());
    }

    #[test]
    fn robin_term_adds_boundary_mass() {
        let mesh = unit_mesh(2);
        let mut coeffs = EllipticCoeffs::laplace();
        coeffs.robin_sigma = ScalarField::Constant(1.0);
        let k = assemble_stiffness(&mesh, &coeffs).unwrap();
        // with A-part annihilating constants, 1^T K 1 = sigma * perimeter
        let ones = vec![1.0; mesh.n_nodes()];
        let val = k.quad_form(&ones, &ones);
        assert!((val - 4.0).abs() < 1e-10, "{val}");
    }

    #[test]
    fn observation_full_mask_equals_mass() {
        let mesh = unit_mesh(4);
        let mask = ObservationMask::full(&mesh);
        let mo = assemble_observation_mass(&mesh, &mask).unwrap();
        let m = assemble_weighted_mass(&mesh, &ScalarField::Constant(1.0)).unwrap();
        for i in 0..mesh.n_nodes() {
            let (cols, vals) = m.row(i);
            for (c, v) in cols.iter().zip(vals) {
                assert!((mo.get(i, *c) - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn observation_frame_area() {
        let mesh = unit_mesh(20);
        let mask = ObservationMask::frame(&mesh, 0.05).unwrap();
        let mo = assemble_observation_mass(&mesh, &mask).unwrap();
        let flagged_area = mask.flagged_area(&mesh);
        assert!((mo.sum_entries() - flagged_area).abs() < 1e-12);
        // cell-aligned frame: exactly the outer ring of cells
        assert!((flagged_area - 0.19).abs() < 1e-12);
    }

    #[test]
    fn observation_empty_mask_rejected() {
        let mesh = unit_mesh(4);
        assert!(ObservationMask::from_predicate(&mesh, |_, _| false).is_err());
        assert!(ObservationMask::frame(&mesh, 0.6).is_err());
    }

    #[test]
    fn mass_integrals_second_order_consistent() {
        // integral of x^2 * y over the unit square is 1/6
        let f = |x: f64, _y: f64| x * x;
        let g = |_x: f64, y: f64| y;
        let exact = 1.0 / 6.0;
        let errs: Vec<f64> = [4usize, 8, 16]
            .iter()
            .map(|&n| {
                let mesh = unit_mesh(n);
                let m = assemble_weighted_mass(&mesh, &ScalarField::Constant(1.0)).unwrap();
                let fv = mesh.interpolate(f);
                let gv = mesh.interpolate(g);
                (m.quad_form(&fv, &gv) - exact).abs()
            })
            .collect();
        for win in errs.windows(2) {
            let order = (win[0] / win[1]).log2();
            assert!(order > 1.8, "observed order {order}");
        }
    }

    proptest! {
        #[test]
        fn observation_form_bounded_by_full_mass(seed in 0u64..500) {
            let mesh = unit_mesh(5);
            let mask = ObservationMask::frame(&mesh, 0.2).unwrap();
            let mo = assemble_observation_mass(&mesh, &mask).unwrap();
            let m = assemble_weighted_mass(&mesh, &ScalarField::Constant(1.0)).unwrap();
            let mut s = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(11);
            let mut rand = move || {
                s ^= s >> 30; s = s.wrapping_mul(0xBF58476D1CE4E5B9); s ^= s >> 27;
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let x: Vec<f64> = (0..mesh.n_nodes()).map(|_| rand()).collect();
            prop_assert!(mo.quad_form(&x, &x) <= m.quad_form(&x, &x) + 1e-12);
        }

        #[test]
        fn symmetric_assembly_without_convection(c in 0.0f64..3.0, sigma in 0.0f64..2.0) {
            let mesh = unit_mesh(3);
            let coeffs = EllipticCoeffs {
                diffusion: MatrixField::Constant([[2.0, 0.5], [0.5, 1.0]]),
                convection: VectorField::zero(),
                reaction: ScalarField::Constant(c),
                robin_sigma: ScalarField::Constant(sigma),
            };
            let k = assemble_stiffness(&mesh, &coeffs).unwrap();
            prop_assert!(k.is_symmetric(1e-12));
        }
    }
}
