//! Structured P1 triangulation of an axis-aligned rectangle.
//!
//! Every grid cell is split along the same diagonal (lower-left to
//! upper-right), nodes are numbered lexicographically, and boundary edges
//! carry their outward normal.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    /// Endpoint node indices, oriented so the domain lies on the left.
    pub nodes: [usize; 2],
    pub normal: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    nx: usize,
    ny: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Mesh {
    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    #[inline]
    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    #[inline]
    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    #[inline]
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    #[inline]
    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    #[inline]
    pub fn subdivisions(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn x_range(&self) -> (f64, f64) {
        self.x_range
    }

    #[inline]
    pub fn y_range(&self) -> (f64, f64) {
        self.y_range
    }

    /// Lexicographic node index of grid point (i, j).
    #[inline]
    pub fn grid_node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Signed area of triangle `t` (positive for counter-clockwise).
    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pc = self.nodes[c];
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn tri_centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pc = self.nodes[c];
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    /// Constant gradients of the three P1 hat functions on triangle `t`.
    pub fn tri_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pc = self.nodes[c];
        let inv2a = 1.0 / (2.0 * self.tri_area(t));
        [
            [(pb[1] - pc[1]) * inv2a, (pc[0] - pb[0]) * inv2a],
            [(pc[1] - pa[1]) * inv2a, (pa[0] - pc[0]) * inv2a],
            [(pa[1] - pb[1]) * inv2a, (pb[0] - pa[0]) * inv2a],
        ]
    }

    /// Midpoints of the three edges of triangle `t`, with the P1 basis values
    /// at each midpoint.
    pub fn tri_edge_midpoints(&self, t: usize) -> [([f64; 2], [f64; 3]); 3] {
        let [a, b, c] = self.triangles[t];
        let pa = self.nodes[a];
        let pb = self.nodes[b];
        let pc = self.nodes[c];
        let mid = |p: [f64; 2], q: [f64; 2]| [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        [
            (mid(pa, pb), [0.5, 0.5, 0.0]),
            (mid(pb, pc), [0.0, 0.5, 0.5]),
            (mid(pc, pa), [0.5, 0.0, 0.5]),
        ]
    }

    /// Nodal values of a scalar function.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|p| f(p[0], p[1])).collect()
    }
}

/// Structured triangulation of `x_range` x `y_range` with nx-by-ny cells,
/// each cell split along its lower-left/upper-right diagonal.
pub fn triangulate_rectangle(
    x_range: (f64, f64),
    y_range: (f64, f64),
    nx: usize,
    ny: usize,
) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::invalid(format!(
            "subdivision counts must be at least 1, got nx={nx}, ny={ny}"
        )));
    }
    if !(x_range.1 > x_range.0) || !(y_range.1 > y_range.0) {
        return Err(Error::invalid(format!(
            "degenerate ranges x={x_range:?}, y={y_range:?}"
        )));
    }
    let (x0, x1) = x_range;
    let (y0, y1) = y_range;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = y0 + (y1 - y0) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * i as f64 / nx as f64;
            nodes.push([x, y]);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let n00 = idx(i, j);
            let n10 = idx(i + 1, j);
            let n01 = idx(i, j + 1);
            let n11 = idx(i + 1, j + 1);
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [idx(i, 0), idx(i + 1, 0)],
            normal: [0.0, -1.0],
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [idx(i + 1, ny), idx(i, ny)],
            normal: [0.0, 1.0],
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            nodes: [idx(nx, j), idx(nx, j + 1)],
            normal: [1.0, 0.0],
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [idx(0, j + 1), idx(0, j)],
            normal: [-1.0, 0.0],
        });
    }
    let mesh = Mesh {
        nodes,
        triangles,
        boundary_edges,
        nx,
        ny,
        x_range,
        y_range,
    };
    debug_assert!((0..mesh.n_triangles()).all(|t| mesh.tri_area(t) > 0.0));
    Ok(mesh)
}
