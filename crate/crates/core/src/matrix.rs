//! Row-major dense matrix, the carrier for features, embeddings, dictionaries
//! and codes throughout the crate.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S: Scalar> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    /// Construct from row-major data. Rejects empty shapes, length mismatches
    /// and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        for (i, v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i / cols,
                    col: i % cols,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == S::zero() {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// self^T * other without materializing the transpose.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::shape(
                "t_matmul",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.get(k, i);
                if a == S::zero() {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// self * other^T without materializing the transpose.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::shape(
                "matmul_t",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let arow = self.row(i);
            for j in 0..other.rows {
                let brow = other.row(j);
                let mut acc = S::zero();
                for (&a, &b) in arow.iter().zip(brow) {
                    acc += a * b;
                }
                out.data[i * other.rows + j] = acc;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, context: &str, f: impl Fn(S, S) -> S) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::shape(
                context,
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, s: S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn frob_norm_sq(&self) -> S {
        self.data.iter().map(|&v| v * v).sum()
    }

    pub fn frob_norm(&self) -> S {
        self.frob_norm_sq().sqrt()
    }

    pub fn col_norm_sq(&self, c: usize) -> S {
        (0..self.rows).map(|r| self.get(r, c) * self.get(r, c)).sum()
    }

    pub fn max_abs(&self) -> S {
        self.data
            .iter()
            .fold(S::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> S {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    /// Adds `eps` to the diagonal in place. Square matrices only.
    pub fn add_ridge(&mut self, eps: S) {
        debug_assert_eq!(self.rows, self.cols);
        for i in 0..self.rows {
            self.data[i * self.cols + i] += eps;
        }
    }

    pub fn mean_abs_diag(&self) -> S {
        debug_assert_eq!(self.rows, self.cols);
        let sum: S = (0..self.rows).map(|i| self.get(i, i).abs()).sum();
        sum / S::from_f64(self.rows as f64)
    }

    /// Solves `self * X = rhs` for symmetric positive definite `self` via
    /// Cholesky. The factorization is recomputed per call.
    pub fn solve_spd(&self, rhs: &Self, context: &str) -> Result<Self> {
        if self.rows != self.cols {
            return Err(Error::Dimension(format!(
                "solve_spd({context}): matrix {}x{} not square",
                self.rows, self.cols
            )));
        }
        if self.rows != rhs.rows {
            return Err(Error::shape(
                format!("solve_spd({context})"),
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", rhs.rows, rhs.cols),
            ));
        }
        let n = self.rows;
        let mut l = vec![S::zero(); n * n];
        let mut min_piv = S::infinity();
        let mut max_piv = S::zero();
        for j in 0..n {
            let mut diag = self.get(j, j);
            for k in 0..j {
                diag -= l[j * n + k] * l[j * n + k];
            }
            if diag <= S::zero() || !diag.is_finite() {
                let cond = if min_piv > S::zero() && min_piv.is_finite() {
                    (max_piv / min_piv).as_f64()
                } else {
                    f64::INFINITY
                };
                return Err(Error::Singular {
                    context: context.to_string(),
                    cond,
                });
            }
            min_piv = min_piv.min(diag);
            max_piv = max_piv.max(diag);
            let root = diag.sqrt();
            l[j * n + j] = root;
            for i in (j + 1)..n {
                let mut v = self.get(i, j);
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / root;
            }
        }
        // Forward and back substitution, one rhs column at a time.
        let mut out = DenseMatrix::zeros(n, rhs.cols);
        let mut y = vec![S::zero(); n];
        for c in 0..rhs.cols {
            for i in 0..n {
                let mut v = rhs.get(i, c);
                for k in 0..i {
                    v -= l[i * n + k] * y[k];
                }
                y[i] = v / l[i * n + i];
            }
            for i in (0..n).rev() {
                let mut v = y[i];
                for k in (i + 1)..n {
                    v -= l[k * n + i] * out.get(k, c);
                }
                out.set(i, c, v / l[i * n + i]);
            }
        }
        Ok(out)
    }

    /// Solves `X * self = rhs` for symmetric positive definite `self`.
    pub fn solve_spd_right(&self, rhs: &Self, context: &str) -> Result<Self> {
        Ok(self.solve_spd(&rhs.transpose(), context)?.transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = DenseMatrix<f64>;

    #[test]
    fn rejects_nan_and_inf() {
        assert!(matches!(
            M::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            M::new(2, 1, vec![f64::INFINITY, 0.0]),
            Err(Error::NonFinite { row: 0, col: 0 })
        ));
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(M::new(0, 3, vec![]).is_err());
        assert!(M::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn matmul_small() {
        let a = M::new(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = M::new(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58., 64., 139., 154.]);
    }

    #[test]
    fn transpose_variants_agree() {
        let a = M::from_fn(3, 4, |r, c| (r * 7 + c) as f64 * 0.5 - 1.0);
        let b = M::from_fn(3, 5, |r, c| (r + c * 3) as f64 * 0.25);
        let via_t = a.transpose().matmul(&b).unwrap();
        assert!(a.t_matmul(&b).unwrap().max_abs_diff(&via_t) < 1e-14);
        let c = M::from_fn(2, 4, |r, c| (r as f64 - c as f64) * 0.3);
        let via_t2 = a.matmul(&c.transpose()).unwrap();
        assert!(a.matmul_t(&c).unwrap().max_abs_diff(&via_t2) < 1e-14);
    }

    #[test]
    fn spd_solve_roundtrip() {
        // A = G G^T + I is SPD.
        let g = M::from_fn(4, 4, |r, c| ((r * 5 + c * 3) % 7) as f64 * 0.3 - 0.8);
        let mut a = g.matmul_t(&g).unwrap();
        a.add_ridge(1.0);
        let x_true = M::from_fn(4, 2, |r, c| (r + 2 * c) as f64 * 0.7 - 1.1);
        let rhs = a.matmul(&x_true).unwrap();
        let x = a.solve_spd(&rhs, "test").unwrap();
        assert!(x.max_abs_diff(&x_true) < 1e-10);
    }

    #[test]
    fn spd_solve_right_roundtrip() {
        let g = M::from_fn(3, 3, |r, c| ((r * 2 + c) % 5) as f64 - 1.5);
        let mut a = g.matmul_t(&g).unwrap();
        a.add_ridge(0.5);
        let x_true = M::from_fn(2, 3, |r, c| (r as f64 + 0.1) * (c as f64 - 1.2));
        let rhs = x_true.matmul(&a).unwrap();
        let x = a.solve_spd_right(&rhs, "test").unwrap();
        assert!(x.max_abs_diff(&x_true) < 1e-10);
    }

    #[test]
    fn singular_matrix_reports_condition() {
        let a = M::new(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let rhs = M::identity(2);
        match a.solve_spd(&rhs, "rank-deficient") {
            Err(Error::Singular { context, .. }) => assert_eq!(context, "rank-deficient"),
            other => panic!("expected Singular, got {other:?}"),
        }
    }
}
