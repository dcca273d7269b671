//! Coefficient fields of the elliptic operator
//!
//!   A u = -div(A grad u) + b . grad u + c u,    dA u + sigma u = 0 on the boundary.
//!
//! Fields evaluate pointwise; assembly samples them once per element
//! (centroid) or per boundary edge (midpoint).

use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl ScalarField {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Function(f) => f(x, y),
        }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(c) => write!(f, "ScalarField::Constant({c})"),
            ScalarField::Function(_) => write!(f, "ScalarField::Function(..)"),
        }
    }
}

impl From<f64> for ScalarField {
    fn from(c: f64) -> Self {
        ScalarField::Constant(c)
    }
}

#[derive(Clone)]
pub enum VectorField {
    Constant([f64; 2]),
    Function(Arc<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>),
}

impl VectorField {
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        match self {
            VectorField::Constant(v) => *v,
            VectorField::Function(f) => f(x, y),
        }
    }

    pub fn zero() -> Self {
        VectorField::Constant([0.0, 0.0])
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorField::Constant(v) => write!(f, "VectorField::Constant({v:?})"),
            VectorField::Function(_) => write!(f, "VectorField::Function(..)"),
        }
    }
}

#[derive(Clone)]
pub enum MatrixField {
    Constant([[f64; 2]; 2]),
    Function(Arc<dyn Fn(f64, f64) -> [[f64; 2]; 2] + Send + Sync>),
}

impl MatrixField {
    pub fn eval(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        match self {
            MatrixField::Constant(m) => *m,
            MatrixField::Function(f) => f(x, y),
        }
    }

    pub fn identity() -> Self {
        MatrixField::Constant([[1.0, 0.0], [0.0, 1.0]])
    }
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixField::Constant(m) => write!(f, "MatrixField::Constant({m:?})"),
            MatrixField::Function(_) => write!(f, "MatrixField::Function(..)"),
        }
    }
}

/// Coefficient bundle of the elliptic operator and its Robin boundary term.
#[derive(Debug, Clone)]
pub struct EllipticCoeffs {
    pub diffusion: MatrixField,
    pub convection: VectorField,
    pub reaction: ScalarField,
    pub robin_sigma: ScalarField,
}

impl EllipticCoeffs {
    /// Pure Laplacian with natural boundary condition: A = I, b = 0, c = 0, sigma = 0.
    pub fn laplace() -> Self {
        EllipticCoeffs {
            diffusion: MatrixField::identity(),
            convection: VectorField::zero(),
            reaction: ScalarField::Constant(0.0),
            robin_sigma: ScalarField::Constant(0.0),
        }
    }
}
