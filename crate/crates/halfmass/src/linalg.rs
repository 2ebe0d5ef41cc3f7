//! Small dense linear algebra for dimensions up to [`MAX_DIM`](crate::MAX_DIM).
//!
//! Symmetric matrices are stored packed (upper triangle, row major), so
//! `g_ij = g_ji` holds by shared storage rather than by bookkeeping.

use crate::MAX_DIM;

pub const PACKED_LEN: usize = MAX_DIM * (MAX_DIM + 1) / 2;

/// Index of `(i, j)` with `i ≤ j` in the packed upper triangle of an `n × n`
/// symmetric matrix.
#[inline]
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// Number of packed entries of an `n × n` symmetric matrix.
#[inline]
pub fn sym_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Symmetric `n × n` matrix with packed stack storage.
#[derive(Clone, Copy, Debug)]
pub struct SymMat {
    pub n: usize,
    a: [f64; PACKED_LEN],
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM);
        SymMat { n, a: [0.0; PACKED_LEN] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[sym_index(self.n, i, j)]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[sym_index(self.n, i, j)]
    }

    #[inline]
    pub fn packed(&self) -> &[f64] {
        &self.a[..sym_len(self.n)]
    }

    #[inline]
    pub fn packed_mut(&mut self) -> &mut [f64] {
        let len = sym_len(self.n);
        &mut self.a[..len]
    }

    pub fn add_scaled(&mut self, other: &SymMat, s: f64) {
        debug_assert_eq!(self.n, other.n);
        for k in 0..sym_len(self.n) {
            self.a[k] += s * other.a[k];
        }
    }

    pub fn scale(&mut self, s: f64) {
        for k in 0..sym_len(self.n) {
            self.a[k] *= s;
        }
    }

    /// Dense copy, mostly for interfacing with the generic routines below.
    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                *m.at_mut(i, j) = self.at(i, j);
            }
        }
        m
    }

    /// Inverse as a symmetric matrix. Errors when the matrix is numerically
    /// singular.
    pub fn inverse(&self) -> Result<SymMat, SingularMatrix> {
        let inv = self.to_dense().inverse()?;
        let mut out = SymMat::zeros(self.n);
        for i in 0..self.n {
            for j in i..self.n {
                // symmetrize to wash out the asymmetry of the LU path
                *out.at_mut(i, j) = 0.5 * (inv.at(i, j) + inv.at(j, i));
            }
        }
        Ok(out)
    }

    pub fn determinant(&self) -> f64 {
        self.to_dense().determinant()
    }

    /// Positive definiteness via Cholesky.
    pub fn is_positive_definite(&self) -> bool {
        let n = self.n;
        let mut l = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s -= l.at(i, k) * l.at(j, k);
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return false;
                    }
                    *l.at_mut(i, i) = s.sqrt();
                } else {
                    *l.at_mut(i, j) = s / l.at(j, j);
                }
            }
        }
        true
    }

    /// Eigenvalues by cyclic Jacobi rotations, ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = self.to_dense();
        for _sweep in 0..64 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += a.at(i, j) * a.at(i, j);
                }
            }
            if off.sqrt() < 1e-15 * (1.0 + a.frobenius()) {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.at(p, q);
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.at(k, p);
                        let akq = a.at(k, q);
                        *a.at_mut(k, p) = c * akp - s * akq;
                        *a.at_mut(k, q) = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a.at(p, k);
                        let aqk = a.at(q, k);
                        *a.at_mut(p, k) = c * apk - s * aqk;
                        *a.at_mut(q, k) = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a.at(i, i)).collect();
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ev
    }
}

#[derive(Debug, Clone, Copy, thiserror::Error)]
#[error("matrix is numerically singular")]
pub struct SingularMatrix;

/// Dense row-major matrix used by the helpers above and by rigid motions.
#[derive(Clone, Debug)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *t.at_mut(j, i) = self.at(i, j);
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows);
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.at(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    *out.at_mut(i, j) += aik * other.at(k, j);
                }
            }
        }
        out
    }

    /// In-place Gauss–Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Mat, SingularMatrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a.at(r, col).abs() > a.at(piv, col).abs() {
                    piv = r;
                }
            }
            let pval = a.at(piv, col);
            if pval.abs() < 1e-300 || !pval.is_finite() {
                return Err(SingularMatrix);
            }
            if piv != col {
                for j in 0..n {
                    let t = a.at(col, j);
                    *a.at_mut(col, j) = a.at(piv, j);
                    *a.at_mut(piv, j) = t;
                    let t = inv.at(col, j);
                    *inv.at_mut(col, j) = inv.at(piv, j);
                    *inv.at_mut(piv, j) = t;
                }
            }
            let d = 1.0 / a.at(col, col);
            for j in 0..n {
                *a.at_mut(col, j) *= d;
                *inv.at_mut(col, j) *= d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.at(r, col);
                if f == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let v = a.at(col, j);
                    *a.at_mut(r, j) -= f * v;
                    let v = inv.at(col, j);
                    *inv.at_mut(r, j) -= f * v;
                }
            }
        }
        Ok(inv)
    }

    pub fn determinant(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a.at(r, col).abs() > a.at(piv, col).abs() {
                    piv = r;
                }
            }
            if a.at(piv, col) == 0.0 {
                return 0.0;
            }
            if piv != col {
                det = -det;
                for j in 0..n {
                    let t = a.at(col, j);
                    *a.at_mut(col, j) = a.at(piv, j);
                    *a.at_mut(piv, j) = t;
                }
            }
            det *= a.at(col, col);
            for r in (col + 1)..n {
                let f = a.at(r, col) / a.at(col, col);
                if f == 0.0 {
                    continue;
                }
                for j in col..n {
                    let v = a.at(col, j);
                    *a.at_mut(r, j) -= f * v;
                }
            }
        }
        det
    }
}

/// Euclidean norm of a coordinate vector.
#[inline]
pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
