//! Second-order forward jets: value, gradient and Hessian propagated exactly
//! through arithmetic and the elementary functions of the expression grammar.
//!
//! The Hessian is stored packed (upper triangle), so it is symmetric by
//! construction. All storage is stack arrays sized for [`MAX_DIM`](crate::MAX_DIM);
//! jets are `Copy` and cheap to pass around in the quadrature loops.

use crate::linalg::{sym_index, sym_len, PACKED_LEN};
use crate::MAX_DIM;

use super::EvalError;

#[derive(Clone, Copy, Debug)]
pub struct Jet2 {
    pub n: usize,
    pub value: f64,
    grad: [f64; MAX_DIM],
    hess: [f64; PACKED_LEN],
}

impl Jet2 {
    pub fn constant(n: usize, value: f64) -> Self {
        assert!(n <= MAX_DIM);
        Jet2 { n, value, grad: [0.0; MAX_DIM], hess: [0.0; PACKED_LEN] }
    }

    /// Jet of the coordinate function `x_i` (0-based index).
    pub fn coordinate(n: usize, i: usize, xi: f64) -> Self {
        let mut j = Self::constant(n, xi);
        j.grad[i] = 1.0;
        j
    }

    /// Jet of `r = |x|`; requires `r > 0`.
    pub fn radius(x: &[f64]) -> Result<Self, EvalError> {
        let n = x.len();
        let r = crate::linalg::norm(x);
        if r == 0.0 {
            return Err(EvalError::RadiusZero);
        }
        let mut j = Self::constant(n, r);
        for i in 0..n {
            j.grad[i] = x[i] / r;
        }
        // ∂_i∂_j r = (δ_ij - x_i x_j / r²) / r
        for i in 0..n {
            for k in i..n {
                let d = if i == k { 1.0 } else { 0.0 };
                j.hess[sym_index(n, i, k)] = (d - x[i] * x[k] / (r * r)) / r;
            }
        }
        Ok(j)
    }

    #[inline]
    pub fn grad(&self, i: usize) -> f64 {
        self.grad[i]
    }

    #[inline]
    pub fn grad_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.grad[i]
    }

    #[inline]
    pub fn hess(&self, i: usize, j: usize) -> f64 {
        self.hess[sym_index(self.n, i, j)]
    }

    #[inline]
    pub fn hess_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.hess[sym_index(self.n, i, j)]
    }

    pub fn gradient_vec(&self) -> Vec<f64> {
        self.grad[..self.n].to_vec()
    }

    /// Trace of the Hessian (the flat Laplacian of the underlying function).
    pub fn laplacian(&self) -> f64 {
        (0..self.n).map(|i| self.hess(i, i)).sum()
    }

    pub fn add(&self, o: &Jet2) -> Jet2 {
        debug_assert_eq!(self.n, o.n);
        let mut out = *self;
        out.value += o.value;
        for i in 0..self.n {
            out.grad[i] += o.grad[i];
        }
        for k in 0..sym_len(self.n) {
            out.hess[k] += o.hess[k];
        }
        out
    }

    pub fn sub(&self, o: &Jet2) -> Jet2 {
        debug_assert_eq!(self.n, o.n);
        let mut out = *self;
        out.value -= o.value;
        for i in 0..self.n {
            out.grad[i] -= o.grad[i];
        }
        for k in 0..sym_len(self.n) {
            out.hess[k] -= o.hess[k];
        }
        out
    }

    pub fn neg(&self) -> Jet2 {
        let mut out = *self;
        out.value = -out.value;
        for i in 0..self.n {
            out.grad[i] = -out.grad[i];
        }
        for k in 0..sym_len(self.n) {
            out.hess[k] = -out.hess[k];
        }
        out
    }

    pub fn scale(&self, s: f64) -> Jet2 {
        let mut out = *self;
        out.value *= s;
        for i in 0..self.n {
            out.grad[i] *= s;
        }
        for k in 0..sym_len(self.n) {
            out.hess[k] *= s;
        }
        out
    }

    pub fn mul(&self, o: &Jet2) -> Jet2 {
        debug_assert_eq!(self.n, o.n);
        let n = self.n;
        let mut out = Jet2::constant(n, self.value * o.value);
        for i in 0..n {
            out.grad[i] = self.grad[i] * o.value + self.value * o.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                out.hess[sym_index(n, i, j)] = self.hess(i, j) * o.value
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i]
                    + self.value * o.hess(i, j);
            }
        }
        out
    }

    pub fn div(&self, o: &Jet2) -> Result<Jet2, EvalError> {
        if o.value == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        let inv = o.chain(1.0 / o.value, -1.0 / (o.value * o.value), 2.0 / (o.value * o.value * o.value));
        Ok(self.mul(&inv))
    }

    /// Composition with a scalar function given its value and first two
    /// derivatives at `self.value`.
    pub fn chain(&self, f: f64, fp: f64, fpp: f64) -> Jet2 {
        let n = self.n;
        let mut out = Jet2::constant(n, f);
        for i in 0..n {
            out.grad[i] = fp * self.grad[i];
        }
        for i in 0..n {
            for j in i..n {
                out.hess[sym_index(n, i, j)] = fpp * self.grad[i] * self.grad[j] + fp * self.hess(i, j);
            }
        }
        out
    }

    pub fn sqrt(&self) -> Result<Jet2, EvalError> {
        if self.value <= 0.0 {
            return Err(EvalError::SqrtNonPositive { value: self.value });
        }
        let s = self.value.sqrt();
        Ok(self.chain(s, 0.5 / s, -0.25 / (s * self.value)))
    }

    pub fn exp(&self) -> Jet2 {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Result<Jet2, EvalError> {
        if self.value <= 0.0 {
            return Err(EvalError::LogNonPositive { value: self.value });
        }
        Ok(self.chain(self.value.ln(), 1.0 / self.value, -1.0 / (self.value * self.value)))
    }

    /// Integer power by repeated squaring on jets; exact for polynomial bases.
    pub fn powi(&self, p: i32) -> Result<Jet2, EvalError> {
        if p < 0 {
            if self.value == 0.0 {
                return Err(EvalError::DivisionByZero);
            }
            let pos = self.powi(-p)?;
            return Jet2::constant(self.n, 1.0).div(&pos);
        }
        let mut acc = Jet2::constant(self.n, 1.0);
        let mut base = *self;
        let mut e = p as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(acc)
    }

    /// Real power with constant exponent; the base must be positive unless the
    /// exponent is an integer (then [`powi`](Self::powi) applies).
    pub fn powf(&self, p: f64) -> Result<Jet2, EvalError> {
        if p == p.trunc() && p.abs() <= 64.0 {
            return self.powi(p as i32);
        }
        if self.value <= 0.0 {
            return Err(EvalError::PowDomain { base: self.value, exponent: p });
        }
        let f = self.value.powf(p);
        let fp = p * self.value.powf(p - 1.0);
        let fpp = p * (p - 1.0) * self.value.powf(p - 2.0);
        Ok(self.chain(f, fp, fpp))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_jet_is_exact() {
        // f = x1 * x3 at (1,2,3)
        let x = [1.0, 2.0, 3.0];
        let j = Jet2::coordinate(3, 0, x[0]).mul(&Jet2::coordinate(3, 2, x[2]));
        assert_eq!(j.value, 3.0);
        assert_eq!(j.gradient_vec(), vec![3.0, 0.0, 1.0]);
        assert_eq!(j.hess(0, 2), 1.0);
        assert_eq!(j.hess(2, 0), 1.0);
        assert_eq!(j.hess(0, 0), 0.0);
        assert_eq!(j.hess(1, 1), 0.0);
    }

    #[test]
    fn inverse_radius_is_harmonic_in_three_dims() {
        let x = [3.0, 0.0, 4.0];
        let r = Jet2::radius(&x).unwrap();
        let f = r.powi(-1).unwrap();
        assert!((f.value - 0.2).abs() < 1e-15);
        assert!(f.laplacian().abs() < 1e-15);
    }

    #[test]
    fn chain_rule_matches_closed_form() {
        // f = exp(r) at a point: ∂_i f = e^r x_i/r
        let x = [1.0, 2.0, 2.0];
        let r = Jet2::radius(&x).unwrap();
        let f = r.exp();
        let er = 3.0f64.exp();
        for i in 0..3 {
            assert!((f.grad(i) - er * x[i] / 3.0).abs() < 1e-12);
        }
    }
}
