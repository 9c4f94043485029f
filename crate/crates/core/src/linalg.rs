//! Small dense linear algebra for the per-step frame computations.
//!
//! Dimensions are expected to be small (a handful of factors), so everything
//! here is plain `O(d^3)` code over row-major `Vec<f64>` storage.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows. Panics if the rows are not square.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix rows must be square");
            data.extend_from_slice(r);
        }
        Matrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (0..self.n).map(|j| self[(i, j)] * v[j]).sum();
        }
    }

    /// Largest `|m_ij - m_ji|` divided by the largest absolute entry.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// Replaces the matrix by `(M + M^T) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Rank-3 array `t[(i, j, k)]` with all three indices in `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Largest `|t_ijk - t_ikj|`: asymmetry in the last two indices.
    pub fn trailing_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in (j + 1)..n {
                    worst = worst.max((self[(i, j, k)] - self[(i, k, j)]).abs());
                }
            }
        }
        worst
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[(i * self.n + j) * self.n + k]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    #[inline]
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(i * self.n + j) * self.n + k]
    }
}

/// Lower-triangular factor `L` with strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(Matrix);

impl LowerTriangular {
    /// Wraps a matrix, checking the shape invariants.
    pub fn new(m: Matrix) -> Result<Self> {
        let n = m.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                if m[(i, j)] != 0.0 {
                    return Err(Error::Domain(format!(
                        "entry ({i},{j}) above the diagonal is non-zero"
                    )));
                }
            }
        }
        Ok(LowerTriangular(m))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> Matrix {
        self.0.mul(&self.0.transpose())
    }
}

impl Index<(usize, usize)> for LowerTriangular {
    type Output = f64;
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Asymmetry (relative) above which [`cholesky`] logs a warning before
/// symmetrizing its input.
pub const ASYMMETRY_WARNING: f64 = 1e-9;

/// Cholesky factorization `C = L L^T` of a symmetric positive-definite matrix.
///
/// The input is symmetrized first. A pivot that is not strictly positive
/// yields [`Error::NotPositiveDefinite`].
pub fn cholesky(c: &Matrix) -> Result<LowerTriangular> {
    let mut l = Matrix::zeros(c.dim());
    cholesky_into(c, &mut l)?;
    Ok(LowerTriangular(l))
}

/// Allocation-free variant of [`cholesky`] writing into `l`.
pub(crate) fn cholesky_into(c: &Matrix, l: &mut Matrix) -> Result<()> {
    let n = c.dim();
    debug_assert_eq!(l.dim(), n);
    let asym = c.relative_asymmetry();
    if asym > ASYMMETRY_WARNING {
        log::warn!("covariance asymmetry {asym:e} exceeds {ASYMMETRY_WARNING:e}; symmetrizing");
    }
    let sym = |i: usize, j: usize| 0.5 * (c[(i, j)] + c[(j, i)]);
    l.fill(0.0);
    for j in 0..n {
        let mut pivot = sym(j, j);
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: pivot,
                context: String::new(),
            });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = sym(i, j);
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(())
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub fn invert_lower_triangular(l: &LowerTriangular) -> Result<Matrix> {
    let mut inv = Matrix::zeros(l.dim());
    invert_lower_into(l.matrix(), &mut inv)?;
    Ok(inv)
}

pub(crate) fn invert_lower_into(l: &Matrix, inv: &mut Matrix) -> Result<()> {
    let n = l.dim();
    inv.fill(0.0);
    for i in 0..n {
        if l[(i, i)] == 0.0 {
            return Err(Error::Singular(i));
        }
    }
    for j in 0..n {
        inv[(j, j)] = 1.0 / l[(j, j)];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s += l[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / l[(i, i)];
        }
    }
    Ok(())
}

/// A change-of-coordinates Jacobian `e^α_a` together with its inverse `e^a_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub e: Matrix,
    pub e_inv: Matrix,
}

impl Frame {
    /// Frame whose Jacobian is the Cholesky factor itself.
    pub fn from_factor(l: &LowerTriangular) -> Result<Self> {
        Ok(Frame {
            e: l.matrix().clone(),
            e_inv: invert_lower_triangular(l)?,
        })
    }

    /// Largest entry of `|e · e_inv - I|`.
    pub fn identity_defect(&self) -> f64 {
        self.e
            .mul(&self.e_inv)
            .max_abs_diff(&Matrix::identity(self.e.dim()))
    }
}
