//! P1 finite elements on a structured triangulation of a rectangle:
//! mesh construction, operator assembly, projections, and sparse solves.

mod assemble;
mod coeffs;
mod mesh;
mod project;
mod sparse;

pub use assemble::{
    assemble_boundary_load, assemble_observation_mass, assemble_stiffness, assemble_volume_load,
    assemble_weighted_mass, ObservationMask,
};
pub use coeffs::{EllipticCoeffs, MatrixField, ScalarField, VectorField};
pub use mesh::{triangulate_rectangle, BoundaryEdge, Mesh};
pub use project::{ritz_project, ProjectionPath};
pub use sparse::{sparse_solve, BandLu, SolveMode, SparseMatrix};
