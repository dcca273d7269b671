//! Square sparse matrices in CSR form with a banded direct factorization.
//!
//! The assembled operators here are narrow-banded (lexicographic node
//! numbering on a structured mesh), so the direct path stores the band and
//! runs an in-band LU without pivoting; the system matrices have positive
//! definite symmetric part, which keeps that stable. One factorization per
//! matrix is cached and shared; transpose solves come from the same factors.

use std::sync::OnceLock;

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    lu: OnceLock<std::result::Result<BandLu, Error>>,
}

impl Clone for SparseMatrix {
    fn clone(&self) -> Self {
        SparseMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.clone(),
            lu: OnceLock::new(),
        }
    }
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::invalid(format!(
                    "triplet ({r}, {c}) outside {n}x{n} matrix"
                )));
            }
            entries.push((r, c, v));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut col_idx: Vec<usize> = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut counts = vec![0usize; n];
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                counts[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for r in 0..n {
            row_ptr[r + 1] = row_ptr[r] + counts[r];
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
            lu: OnceLock::new(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        SparseMatrix::from_triplets(n, &triplets).unwrap()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
        y
    }

    /// x^T A y.
    pub fn quad_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((*c, i, *v));
            }
        }
        SparseMatrix::from_triplets(self.n, &triplets).unwrap()
    }

    /// a * self + b * other, pattern union.
    pub fn add_scaled(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<SparseMatrix> {
        if self.n != other.n {
            return Err(Error::invalid("dimension mismatch in matrix addition"));
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((i, *c, a * v));
            }
            let (cols, vals) = other.row(i);
            for (c, v) in cols.iter().zip(vals) {
                triplets.push((i, *c, b * v));
            }
        }
        SparseMatrix::from_triplets(self.n, &triplets)
    }

    pub fn sum_entries(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if (v - self.get(*c, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn bandwidth(&self) -> usize {
        let mut bw = 0usize;
        for i in 0..self.n {
            let (cols, _) = self.row(i);
            for c in cols {
                bw = bw.max(i.abs_diff(*c));
            }
        }
        bw
    }

    /// Banded LU factors, computed once and cached; subsequent calls and
    /// concurrent readers share the same factorization.
    pub fn factorize(&self) -> Result<&BandLu> {
        self.lu
            .get_or_init(|| BandLu::compute(self))
            .as_ref()
            .map_err(|e| e.clone())
    }
}

/// In-band LU factors (no pivoting, unit lower diagonal).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandLu {
    fn compute(m: &SparseMatrix) -> std::result::Result<BandLu, Error> {
        let n = m.dim();
        let bw = m.bandwidth();
        let width = 2 * bw + 1;
        let mut data = vec![0.0; n * width];
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (c, v) in cols.iter().zip(vals) {
                data[i * width + (c + bw - i)] = *v;
            }
        }
        let pivot_tol = m.max_abs() * 1e-13;
        for k in 0..n {
            let piv = data[k * width + bw];
            if piv.abs() <= pivot_tol {
                return Err(Error::numeric(format!(
                    "zero pivot at row {k} during banded LU (matrix singular or indefinite)"
                )));
            }
            let imax = (k + bw).min(n - 1);
            for i in (k + 1)..=imax {
                let off = bw - (i - k);
                let l = data[i * width + off] / piv;
                data[i * width + off] = l;
                if l != 0.0 {
                    let jmax = (k + bw).min(n - 1);
                    for j in (k + 1)..=jmax {
                        let a_kj = data[k * width + (j + bw - k)];
                        if a_kj != 0.0 {
                            data[i * width + (j + bw - i)] -= l * a_kj;
                        }
                    }
                }
            }
        }
        Ok(BandLu { n, bw, data })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (2 * self.bw + 1) + (j + self.bw - i)]
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let bw = self.bw;
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut acc = x[i];
            for j in lo..i {
                acc -= self.at(i, j) * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut acc = x[i];
            for j in (i + 1)..=hi {
                acc -= self.at(i, j) * x[j];
            }
            x[i] = acc / self.at(i, i);
        }
        x
    }

    /// Solve A^T x = b from the same factors (A^T = U^T L^T).
    pub fn solve_transposed(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let bw = self.bw;
        let mut x = b.to_vec();
        // U^T z = b (forward, diagonal from U)
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut acc = x[i];
            for j in lo..i {
                acc -= self.at(j, i) * x[j];
            }
            x[i] = acc / self.at(i, i);
        }
        // L^T x = z (backward, unit diagonal)
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut acc = x[i];
            for j in (i + 1)..=hi {
                acc -= self.at(j, i) * x[j];
            }
            x[i] = acc;
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    /// Banded LU, factored once per matrix and cached for reuse.
    DirectFactorReuse,
    /// Jacobi-preconditioned conjugate gradients (symmetric matrices).
    Iterative,
}

/// Solve M x = rhs to a residual of at most 1e-10 * ||rhs||.
pub fn sparse_solve(m: &SparseMatrix, rhs: &[f64], mode: SolveMode) -> Result<Vec<f64>> {
    if rhs.len() != m.dim() {
        return Err(Error::invalid(format!(
            "rhs length {} does not match dimension {}",
            rhs.len(),
            m.dim()
        )));
    }
    let x = match mode {
        SolveMode::DirectFactorReuse => m.factorize()?.solve(rhs),
        SolveMode::Iterative => {
            if !m.is_symmetric(1e-12 * (1.0 + m.max_abs())) {
                return Err(Error::invalid(
                    "iterative mode requires a symmetric matrix",
                ));
            }
            conjugate_gradient(m, rhs)?
        }
    };
    let rhs_norm = norm(rhs);
    let res = residual_norm(m, &x, rhs);
    if !res.is_finite() || res > 1e-10 * rhs_norm.max(f64::MIN_POSITIVE) {
        return Err(Error::numeric(format!(
            "linear solve residual {res:.3e} exceeds tolerance for rhs norm {rhs_norm:.3e}"
        )));
    }
    Ok(x)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn residual_norm(m: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = m.matvec(x);
    ax.iter()
        .zip(b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn conjugate_gradient(m: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.dim();
    let diag = m.diagonal();
    if diag.iter().any(|d| *d <= 0.0) {
        return Err(Error::numeric("nonpositive diagonal in CG preconditioner"));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let tol = 1e-12 * b_norm;
    for _ in 0..20 * n {
        let ap = m.matvec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::numeric("CG breakdown: matrix not positive definite"));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol {
            return Ok(x);
        }
        z = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::numeric("CG did not converge"))
}
