//! Small dense linear algebra: Householder least squares, Cholesky, and a
//! Jacobi eigensolver for symmetric matrices. Problem sizes here are a few
//! hundred rows by at most a dozen columns.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    /// `AᵀA`.
    pub fn gram(&self) -> Self {
        let mut g = Self::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                for j in i..self.cols {
                    g[(i, j)] = g[(i, j)] + row[i] * row[j];
                }
            }
        }
        for i in 0..self.cols {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        g
    }

    /// `Aᵀv`.
    pub fn t_mul_vec(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            for j in 0..self.cols {
                out[j] = out[j] + row[j] * v[r];
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Minimizes `‖A·x − b‖₂` by Householder QR. Fails with
/// [`Error::RankDeficient`] when a column is numerically dependent on the
/// preceding ones.
pub fn lstsq<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>> {
    let (m, n) = (a.rows, a.cols);
    assert_eq!(b.len(), m);
    if n == 0 {
        return Ok(Vec::new());
    }
    if m < n {
        return Err(Error::RankDeficient);
    }
    // Column-major working copy so every reflector touches contiguous slices.
    let mut cols: Vec<T> = Vec::with_capacity(m * n);
    for j in 0..n {
        cols.extend((0..m).map(|i| a.data[i * n + j]));
    }
    let mut qtb = b.to_vec();
    let col_norms: Vec<T> = cols.chunks_exact(m).map(|c| dot(c, c).sqrt()).collect();
    let two = T::lit(2.0);

    for k in 0..n {
        let (done, rest) = cols.split_at_mut((k + 1) * m);
        let v = &mut done[k * m + k..];
        let norm = dot(v, v).sqrt();
        if norm == T::zero() {
            return Err(Error::RankDeficient);
        }
        let alpha = if v[0] > T::zero() { -norm } else { norm };
        // Column k becomes the reflector; its diagonal entry is restored below.
        v[0] = v[0] - alpha;
        let vnorm2 = dot(v, v);
        if vnorm2 > T::zero() {
            for c in rest.chunks_exact_mut(m) {
                reflect(v, &mut c[k..], two / vnorm2);
            }
            reflect(v, &mut qtb[k..], two / vnorm2);
        }
        v[0] = alpha;
    }

    let r = |i: usize, j: usize| cols[j * m + i];
    let tol = T::epsilon() * T::lit((m.max(n) * 10) as f64);
    for k in 0..n {
        if r(k, k).abs() <= tol * col_norms[k] || !r(k, k).is_finite() {
            return Err(Error::RankDeficient);
        }
    }

    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = qtb[k];
        for j in k + 1..n {
            s = s - r(k, j) * x[j];
        }
        x[k] = s / r(k, k);
    }
    Ok(x)
}

/// `y ← y − scale·(v·y)·v`.
#[inline]
pub(crate) fn reflect<T: Scalar>(v: &[T], y: &mut [T], scale: T) {
    let f = scale * dot(v, y);
    for (yi, &vi) in y.iter_mut().zip(v) {
        *yi = *yi - f * vi;
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.rows;
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= T::zero() || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves `A·x = b` for symmetric positive definite `A`.
pub fn cholesky_solve<T: Scalar>(a: &Matrix<T>, b: &[T]) -> Option<Vec<T>> {
    let l = cholesky(a)?;
    let n = a.rows;
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    Some(x)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.rows;
    let mut inv = Matrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        let col = cholesky_solve(a, &e)?;
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    // Symmetrize rounding noise.
    for i in 0..n {
        for j in 0..i {
            let avg = (inv[(i, j)] + inv[(j, i)]) / T::lit(2.0);
            inv[(i, j)] = avg;
            inv[(j, i)] = avg;
        }
    }
    Some(inv)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the matrix whose columns are the eigenvectors.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let n = a.rows;
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .fold(T::zero(), |acc, (i, j)| acc + m[(i, j)] * m[(i, j)]);
        let scale = (0..n).fold(T::zero(), |acc, i| acc + m[(i, i)] * m[(i, i)]);
        if off <= T::epsilon() * T::epsilon() * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (m.diagonal(), v)
}

/// Moore-Penrose pseudo-inverse of a symmetric positive semi-definite matrix.
pub fn psd_pseudo_inverse<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    let n = a.rows;
    let (vals, vecs) = symmetric_eigen(a);
    let max = vals.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    let cutoff = max * T::epsilon() * T::lit((n * 10) as f64);
    let mut inv = Matrix::zeros(n, n);
    for (k, &lambda) in vals.iter().enumerate() {
        if lambda <= cutoff {
            continue;
        }
        let w = T::one() / lambda;
        for i in 0..n {
            for j in 0..n {
                inv[(i, j)] = inv[(i, j)] + w * vecs[(i, k)] * vecs[(j, k)];
            }
        }
    }
    inv
}
