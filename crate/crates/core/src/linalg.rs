//! Small dense matrices and a cyclic Jacobi eigensolver.
//!
//! Everything here targets the dimensions that arise in compositional work
//! (tens of parts, not thousands), so the implementations favour exactness
//! and determinism over asymptotic speed: fixed iteration order, no
//! threading, no fused heuristics. Given the same input bytes they produce
//! the same output bytes on every run.

use thiserror::Error;

use crate::scalar::Scalar;

/// Hard cap on Jacobi sweeps. A sweep visits every off-diagonal pair once;
/// well-conditioned symmetric matrices of the sizes used here converge in
/// well under ten sweeps, so hitting the cap indicates non-finite input.
pub const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix dimension must be at least 1")]
    EmptyDimension,
    #[error("expected {expected} entries for the given dimensions, got {got}")]
    BadLength { expected: usize, got: usize },
    #[error("entries ({i},{j}) and ({j},{i}) differ; symmetric storage requires exact equality")]
    Asymmetric { i: usize, j: usize },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: &'static str },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

/// Dense rectangular matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        Ok(Self { rows, cols, data: vec![F::zero(); rows * cols] })
    }

    /// Builds a matrix from an entry function evaluated in row-major order.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> F,
    ) -> Result<Self, LinalgError> {
        let mut m = Self::zeros(rows, cols)?;
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        Ok(m)
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self, LinalgError> {
        let r = rows.len();
        if r == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        let c = rows[0].len();
        if c == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        for row in &rows {
            if row.len() != c {
                return Err(LinalgError::BadLength { expected: c, got: row.len() });
            }
        }
        Ok(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        assert!(i < self.rows && j < self.cols, "matrix index out of range");
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: F) {
        assert!(i < self.rows && j < self.cols, "matrix index out of range");
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// Computes `A x` (length `rows`).
    pub fn mul_vec(&self, x: &[F]) -> Result<Vec<F>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch { context: "A*x needs len(x) == cols(A)" });
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * x[j]).sum())
            .collect())
    }

    /// Computes `A' x` (length `cols`).
    pub fn tr_mul_vec(&self, x: &[F]) -> Result<Vec<F>, LinalgError> {
        if x.len() != self.rows {
            return Err(LinalgError::DimensionMismatch { context: "A'*x needs len(x) == rows(A)" });
        }
        Ok((0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.get(i, j) * x[i]).sum())
            .collect())
    }
}

/// Symmetric matrix with full row-major storage; `entry(i,j) == entry(j,i)`
/// holds exactly as stored because every constructor writes each unordered
/// pair once.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix<F> {
    dim: usize,
    data: Vec<F>,
}

impl<F: Scalar> SymmetricMatrix<F> {
    /// Validates dense row-major entries; rejects anything not exactly
    /// symmetric rather than silently averaging.
    pub fn new(dim: usize, data: Vec<F>) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        if data.len() != dim * dim {
            return Err(LinalgError::BadLength { expected: dim * dim, got: data.len() });
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(LinalgError::Asymmetric { i, j });
                }
            }
        }
        Ok(Self { dim, data })
    }

    /// Builds from an entry function evaluated only for `i <= j` and
    /// mirrored, so the result is symmetric by construction.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> F) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::EmptyDimension);
        }
        let mut data = vec![F::zero(); dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                data[i * dim + j] = v;
                data[j * dim + i] = v;
            }
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Result<Self, LinalgError> {
        Self::from_fn(dim, |i, j| if i == j { F::one() } else { F::zero() })
    }

    pub fn diagonal(entries: &[F]) -> Result<Self, LinalgError> {
        Self::from_fn(entries.len(), |i, j| if i == j { entries[i] } else { F::zero() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> F {
        assert!(i < self.dim && j < self.dim, "matrix index out of range");
        self.data[i * self.dim + j]
    }

    pub fn scaled(&self, factor: F) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&v| v * factor).collect() }
    }

    pub fn diag(&self) -> Vec<F> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> F {
        self.data.iter().map(|&v| v * v).sum::<F>().sqrt()
    }

    fn off_diagonal_norm(&self) -> F {
        let mut acc = F::zero();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let v = self.get(i, j);
                acc += v * v;
            }
        }
        (acc + acc).sqrt()
    }
}

/// Eigendecomposition of a symmetric matrix: `eigenvalues` descending,
/// `vectors` holding the matching orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenResult<F> {
    pub eigenvalues: Vec<F>,
    pub vectors: Matrix<F>,
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps the strict upper triangle in row order, rotating every pair, until
/// the off-diagonal Frobenius norm falls below
/// [`Scalar::JACOBI_OFF_TOL`] times the Frobenius norm of the input.
/// Ties between equal eigenvalues keep the order the rotations produced
/// (the final sort is stable), so repeated runs give identical output.
pub fn sym_eigen<F: Scalar>(s: &SymmetricMatrix<F>) -> Result<EigenResult<F>, LinalgError> {
    let n = s.dim;
    let mut a = s.clone();
    let mut q = Matrix::from_fn(n, n, |i, j| if i == j { F::one() } else { F::zero() })?;
    let threshold = F::JACOBI_OFF_TOL * s.frobenius_norm();

    let mut sweeps = 0;
    while a.off_diagonal_norm() > threshold {
        if sweeps >= MAX_JACOBI_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps });
        }
        for p in 0..n {
            for r in (p + 1)..n {
                rotate(&mut a, &mut q, p, r);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(j, j).partial_cmp(&a.get(i, i)).expect("non-finite eigenvalue")
    });
    let eigenvalues = order.iter().map(|&i| a.get(i, i)).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| q.get(i, order[j]))?;
    Ok(EigenResult { eigenvalues, vectors })
}

/// One Jacobi rotation annihilating `a[p][r]`, using the stable
/// half-angle formulation to avoid cancellation.
fn rotate<F: Scalar>(a: &mut SymmetricMatrix<F>, q: &mut Matrix<F>, p: usize, r: usize) {
    let apr = a.get(p, r);
    if apr == F::zero() {
        return;
    }
    let n = a.dim;
    let theta = (a.get(r, r) - a.get(p, p)) / (F::of(2.0) * apr);
    let t = {
        let abs_t = F::one() / (theta.abs() + (theta * theta + F::one()).sqrt());
        if theta < F::zero() {
            -abs_t
        } else {
            abs_t
        }
    };
    let c = F::one() / (t * t + F::one()).sqrt();
    let s = t * c;
    let tau = s / (F::one() + c);

    let app = a.get(p, p);
    let arr = a.get(r, r);
    set_sym(a, p, p, app - t * apr);
    set_sym(a, r, r, arr + t * apr);
    set_sym(a, p, r, F::zero());
    for i in 0..n {
        if i == p || i == r {
            continue;
        }
        let aip = a.get(i, p);
        let air = a.get(i, r);
        set_sym(a, i, p, aip - s * (air + tau * aip));
        set_sym(a, i, r, air + s * (aip - tau * air));
    }
    for i in 0..n {
        let qip = q.get(i, p);
        let qir = q.get(i, r);
        q.set(i, p, qip - s * (qir + tau * qip));
        q.set(i, r, qir + s * (qip - tau * qir));
    }
}

fn set_sym<F: Scalar>(a: &mut SymmetricMatrix<F>, i: usize, j: usize, v: F) {
    let n = a.dim;
    a.data[i * n + j] = v;
    a.data[j * n + i] = v;
}

/// Computes `A' diag(d) A`. Each entry of the result is accumulated once per
/// unordered index pair and mirrored, which is the exact symmetrization of
/// the product.
pub fn quadratic_form<F: Scalar>(
    a: &Matrix<F>,
    d: &[F],
) -> Result<SymmetricMatrix<F>, LinalgError> {
    if d.len() != a.rows {
        return Err(LinalgError::DimensionMismatch {
            context: "quadratic form needs len(d) == rows(A)",
        });
    }
    SymmetricMatrix::from_fn(a.cols, |k, l| {
        (0..a.rows).map(|j| d[j] * a.get(j, k) * a.get(j, l)).sum()
    })
}

/// Computes the three-factor sandwich `A' diag(d) S diag(d) A`, symmetric by
/// the same once-per-pair construction as [`quadratic_form`].
pub fn sandwich_form<F: Scalar>(
    a: &Matrix<F>,
    d: &[F],
    s: &SymmetricMatrix<F>,
) -> Result<SymmetricMatrix<F>, LinalgError> {
    if d.len() != a.rows || s.dim != a.rows {
        return Err(LinalgError::DimensionMismatch {
            context: "sandwich form needs len(d) == dim(S) == rows(A)",
        });
    }
    // w[j][l] = sum_m s[j][m] d[m] a[m][l].
    let w = Matrix::from_fn(a.rows, a.cols, |j, l| {
        (0..a.rows).map(|m| s.get(j, m) * d[m] * a.get(m, l)).sum()
    })?;
    SymmetricMatrix::from_fn(a.cols, |k, l| {
        (0..a.rows).map(|j| d[j] * a.get(j, k) * w.get(j, l)).sum()
    })
}
