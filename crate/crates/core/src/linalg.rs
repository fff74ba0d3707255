//! Small dense row-major matrices with LU and Cholesky factorizations.
//!
//! The systems handled here are at most a few hundred rows, so a plain
//! `Vec`-backed matrix is enough and keeps the numeric code generic over
//! [`Scalar`].

use std::fmt;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Dimension {
                expected: format!("{} entries", rows * cols),
                got: format!("{} entries", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(LinalgError::Dimension {
                    expected: format!("row {i} of length {cols}"),
                    got: format!("length {}", r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn diagonal(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product. Panics if the inner dimensions disagree.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul inner dimension");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let lhs_row = self.row(i);
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in lhs_row.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * v`. Panics on length mismatch.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "mul_vec length");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `selfᵀ * v`. Panics on length mismatch.
    pub fn tr_mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "tr_mul_vec length");
        let mut out = vec![T::zero(); self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape(), "sub shape");
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape(), rhs.shape(), "add shape");
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: T) -> Self {
        let data = self.data.iter().map(|&a| a * s).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let data = self.data.iter().map(|&a| f(a)).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).iter().copied().sum()).collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &a| m.max(a.abs()))
    }

    pub fn min_entry(&self) -> Option<T> {
        self.data.iter().copied().reduce(T::min)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&a| a == T::zero())
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Copies the block starting at `(r0, c0)` with the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "block out of range");
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn hcat(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "hcat rows");
        Self::from_fn(self.rows, self.cols + rhs.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                rhs[(i, j - self.cols)]
            }
        })
    }

    /// Rows selected (and reordered) by `order`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        Self::from_fn(order.len(), self.cols, |i, j| self[(order[i], j)])
    }

    pub fn select_cols(&self, order: &[usize]) -> Self {
        Self::from_fn(self.rows, order.len(), |i, j| self[(i, order[j])])
    }

    pub fn pow(&self, k: u32) -> Self {
        assert!(self.is_square(), "pow of non-square matrix");
        let mut acc = Self::identity(self.rows);
        for _ in 0..k {
            acc = acc.matmul(self);
        }
        acc
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", &self.data[i * self.cols..(i + 1) * self.cols])?;
        }
        write!(f, "]")
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    norm_one: T,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::Dimension {
                expected: "square matrix".into(),
                got: format!("{}x{}", a.rows, a.cols),
            });
        }
        let n = a.rows;
        let norm_one = a.norm_one();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot == T::zero() {
                return Err(LinalgError::Singular);
            }
            if p != k {
                for j in 0..n {
                    lu.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let ukj = lu[(k, j)];
                        lu[(i, j)] -= f * ukj;
                    }
                }
            }
        }
        Ok(Self { lu, perm, norm_one })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn solve_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "solve_vec length");
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[(i, j)] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.lu[(i, j)] * y[j];
            }
            y[i] = s / self.lu[(i, i)];
        }
        y
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose_vec(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "solve_transpose_vec length");
        // Aᵀ = Uᵀ Lᵀ P, so solve Uᵀ z = b, Lᵀ w = z, x = Pᵀ w.
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[(j, i)] * z[j];
            }
            z[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.lu[(j, i)] * z[j];
            }
            z[i] = s;
        }
        let mut x = vec![T::zero(); n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_mat(&self, b: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(b.rows, self.dim(), "solve_mat rows");
        let mut out = DenseMatrix::zeros(b.rows, b.cols);
        let mut col = vec![T::zero(); b.rows];
        for j in 0..b.cols {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[(i, j)];
            }
            let x = self.solve_vec(&col);
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Estimate of the 1-norm condition number (Hager's method).
    pub fn condition_estimate(&self) -> T {
        let n = self.dim();
        if n == 0 {
            return T::one();
        }
        let inv_n = T::one() / T::from_usize(n).unwrap();
        let mut x = vec![inv_n; n];
        let mut est = T::zero();
        for _ in 0..5 {
            let y = self.solve_vec(&x);
            let y_norm: T = y.iter().map(|v| v.abs()).sum();
            if !y_norm.is_finite() {
                return T::infinity();
            }
            if y_norm <= est {
                break;
            }
            est = y_norm;
            let xi: Vec<T> = y.iter().map(|&v| if v >= T::zero() { T::one() } else { -T::one() }).collect();
            let z = self.solve_transpose_vec(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, T::zero()), |b, (j, &v)| if v.abs() > b.1 { (j, v.abs()) } else { b });
            let ztx: T = z.iter().zip(&x).map(|(&a, &b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![T::zero(); n];
            x[jmax] = T::one();
        }
        est * self.norm_one
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    lower: DenseMatrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn factor(a: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::Dimension {
                expected: "square matrix".into(),
                got: format!("{}x{}", a.rows, a.cols),
            });
        }
        let n = a.rows;
        let tol = T::lit(1e-12) * (T::one() + a.max_abs());
        for i in 0..n {
            for j in 0..i {
                if (a[(i, j)] - a[(j, i)]).abs() > tol {
                    return Err(LinalgError::NotPositiveDefinite);
                }
            }
        }
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if d <= T::zero() || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite);
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(Self { lower: l })
    }

    /// `vᵀ A⁻¹ v` through one forward substitution.
    pub fn inverse_quadratic_form(&self, v: &[T]) -> T {
        let n = self.lower.rows;
        assert_eq!(v.len(), n, "quadratic form length");
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = v[i];
            for k in 0..i {
                s -= self.lower[(i, k)] * y[k];
            }
            y[i] = s / self.lower[(i, i)];
        }
        y.iter().map(|&a| a * a).sum()
    }
}

/// `‖a − b‖∞` for equally long slices.
pub fn inf_norm_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    assert_eq!(a.len(), b.len(), "inf_norm_diff length");
    a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}
