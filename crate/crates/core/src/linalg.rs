//! Small dense and banded linear algebra used by the regression engine and
//! the trend filter.

use alloc::vec;
use alloc::vec::Vec;

// Shadowed by inherent methods whenever std is in the crate graph.
#[allow(unused_imports)]
use num_traits::Float;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given slices (all the same length).
    pub fn from_columns(columns: &[&[f64]]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.len());
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, &v) in c.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in matvec");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn sub_assign(&mut self, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
    }

    /// `self += s * v v'`.
    pub fn add_outer(&mut self, v: &[f64], s: f64) {
        let n = v.len();
        assert_eq!((self.rows, self.cols), (n, n));
        for i in 0..n {
            for j in 0..n {
                self[(i, j)] += s * v[i] * v[j];
            }
        }
    }

    /// `self += s * (u v' + v u')`.
    pub fn add_sym_outer(&mut self, u: &[f64], v: &[f64], s: f64) {
        let n = u.len();
        for i in 0..n {
            for j in 0..n {
                self[(i, j)] += s * (u[i] * v[j] + v[i] * u[j]);
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder QR factorization of a tall matrix, kept in compact form.
#[derive(Debug, Clone)]
pub struct Qr {
    /// Upper-triangular factor, `k x k`.
    r: Matrix,
    /// Householder vectors, one per column, each of length `n`.
    reflectors: Vec<Vec<f64>>,
    n: usize,
}

/// Relative size below which a diagonal entry of `R` marks a collinear column.
pub const RANK_TOLERANCE: f64 = 1e-10;

impl Qr {
    /// Factorizes `x`. On rank deficiency returns the indices of columns that
    /// are (numerically) linear combinations of earlier columns.
    pub fn factor(x: &Matrix) -> core::result::Result<Qr, Vec<usize>> {
        let n = x.rows();
        let k = x.cols();
        let mut a = x.clone();
        let col_norms: Vec<f64> = (0..k)
            .map(|j| (0..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt())
            .collect();
        let mut reflectors = Vec::with_capacity(k);
        let mut collinear = Vec::new();
        // `p` is the next pivot row; collinear columns do not consume a pivot.
        let mut p = 0;
        for j in 0..k {
            let norm: f64 = (p..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>().sqrt();
            if p >= n || col_norms[j] == 0.0 || norm <= RANK_TOLERANCE * col_norms[j] {
                collinear.push(j);
                continue;
            }
            let alpha = if a[(p, j)] > 0.0 { -norm } else { norm };
            let mut v = vec![0.0; n];
            for i in p..n {
                v[i] = a[(i, j)];
            }
            v[p] -= alpha;
            let vnorm2: f64 = v[p..].iter().map(|x| x * x).sum();
            if vnorm2 > 0.0 {
                for c in j..k {
                    let dot: f64 = (p..n).map(|i| v[i] * a[(i, c)]).sum();
                    let f = 2.0 * dot / vnorm2;
                    for i in p..n {
                        a[(i, c)] -= f * v[i];
                    }
                }
            }
            reflectors.push(v);
            p += 1;
        }
        if !collinear.is_empty() {
            return Err(collinear);
        }
        let mut r = Matrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                r[(i, j)] = a[(i, j)];
            }
        }
        Ok(Qr { r, reflectors, n })
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    /// Computes `Q' y`.
    pub fn qt_mul(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n);
        let mut out = y.to_vec();
        for (j, v) in self.reflectors.iter().enumerate() {
            let vnorm2: f64 = v[j..].iter().map(|x| x * x).sum();
            if vnorm2 == 0.0 {
                continue;
            }
            let dot: f64 = (j..self.n).map(|i| v[i] * out[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in j..self.n {
                out[i] -= f * v[i];
            }
        }
        out
    }

    /// Least-squares coefficients `argmin ||X b - y||`.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let qty = self.qt_mul(y);
        back_substitute(&self.r, &qty[..self.r.rows()])
    }

    /// `R^{-1}`.
    pub fn r_inverse(&self) -> Matrix {
        upper_triangular_inverse(&self.r)
    }

    /// `(X'X)^{-1} = R^{-1} R^{-T}`.
    pub fn xtx_inverse(&self) -> Matrix {
        let ri = self.r_inverse();
        ri.matmul(&ri.transpose())
    }
}

/// Solves `R x = b` for upper-triangular `R`.
pub fn back_substitute(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let k = r.rows();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = b[i];
        for j in i + 1..k {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}

pub fn upper_triangular_inverse(r: &Matrix) -> Matrix {
    let k = r.rows();
    let mut inv = Matrix::zeros(k, k);
    for c in 0..k {
        let mut e = vec![0.0; k];
        e[c] = 1.0;
        let col = back_substitute(r, &e);
        for i in 0..k {
            inv[(i, c)] = col[i];
        }
    }
    inv
}

/// Solves a symmetric positive-definite pentadiagonal system by banded
/// Cholesky (`A = L D L'`).
///
/// `d` is the main diagonal, `e` the first super-diagonal (length `n-1`) and
/// `f` the second super-diagonal (length `n-2`). Returns `None` when a pivot
/// is not strictly positive.
pub fn solve_spd_pentadiagonal(d: &[f64], e: &[f64], f: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = d.len();
    assert_eq!(rhs.len(), n);
    if n == 0 {
        return Some(Vec::new());
    }
    assert!(e.len() + 1 >= n && f.len() + 2 >= n);
    // L has unit diagonal and two sub-diagonals l1, l2.
    let mut piv = vec![0.0; n];
    let mut l1 = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    for i in 0..n {
        let a_i_im1 = if i >= 1 { e[i - 1] } else { 0.0 };
        let a_i_im2 = if i >= 2 { f[i - 2] } else { 0.0 };
        if i >= 2 {
            l2[i] = a_i_im2 / piv[i - 2];
        }
        if i >= 1 {
            let mut s = a_i_im1;
            if i >= 2 {
                s -= l2[i] * piv[i - 2] * l1[i - 1];
            }
            l1[i] = s / piv[i - 1];
        }
        let mut p = d[i];
        if i >= 1 {
            p -= l1[i] * l1[i] * piv[i - 1];
        }
        if i >= 2 {
            p -= l2[i] * l2[i] * piv[i - 2];
        }
        if !(p > 0.0) || !p.is_finite() {
            return None;
        }
        piv[i] = p;
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        if i >= 1 {
            s -= l1[i] * z[i - 1];
        }
        if i >= 2 {
            s -= l2[i] * z[i - 2];
        }
        z[i] = s;
    }
    for i in 0..n {
        z[i] /= piv[i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        if i + 1 < n {
            s -= l1[i + 1] * x[i + 1];
        }
        if i + 2 < n {
            s -= l2[i + 2] * x[i + 2];
        }
        x[i] = s;
    }
    Some(x)
}
