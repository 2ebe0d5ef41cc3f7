//! Minimal CSR matrix and a Jacobi-preconditioned BiCGSTAB solve. The module
//! contract is the achieved residual, not the algorithm.

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row (col, val) lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(u32, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut v = row[k].1;
                let mut k2 = k + 1;
                while k2 < row.len() && row[k2].0 == c {
                    v += row[k2].1;
                    k2 += 1;
                }
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
                k = k2;
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        use rayon::prelude::*;
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = s;
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[k] as usize == i {
                    d[i] = self.vals[k];
                }
            }
        }
        d
    }

    pub fn residual_inf(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        b.iter().zip(&y).map(|(bi, yi)| (bi - yi).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// BiCGSTAB with Jacobi (diagonal) preconditioning; iterates until
/// ‖b - Ax‖₂ ≤ tol·‖b‖₂ measured on the true residual.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, SolveStats) {
    let n = a.n;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return (
            vec![0.0; n],
            SolveStats { iterations: 0, relative_residual: 0.0, converged: true },
        );
    }
    let diag = a.diagonal();
    let minv: Vec<f64> =
        diag.iter().map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 1.0 }).collect();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut iterations = 0;

    for it in 0..max_iter {
        iterations = it + 1;
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        if it == 0 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho_new / rho) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        rho = rho_new;
        for i in 0..n {
            phat[i] = minv[i] * p[i];
        }
        a.matvec(&phat, &mut v);
        alpha = rho / dot(&r0, &v);
        let mut s = r.clone();
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            break;
        }
        for i in 0..n {
            shat[i] = minv[i] * s[i];
        }
        a.matvec(&shat, &mut t);
        let tt = dot(&t, &t);
        if tt.abs() < 1e-300 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
        }
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= tol * bnorm {
            break;
        }
        if omega.abs() < 1e-300 {
            break;
        }
    }
    // true residual, not the recursive one
    let mut ax = vec![0.0; n];
    a.matvec(&x, &mut ax);
    let true_res =
        (b.iter().zip(&ax).map(|(bi, axi)| (bi - axi) * (bi - axi)).sum::<f64>()).sqrt();
    let rel = true_res / bnorm;
    let converged = rel <= tol * 10.0;
    (x, SolveStats { iterations, relative_residual: rel, converged })
}
