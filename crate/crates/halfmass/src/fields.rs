//! Scalar fields on the exterior half-space region.
//!
//! A [`ScalarField`] is queryable for value, gradient and Hessian at a point;
//! implementations are immutable and thread-safe. Parsed [`Expression`]s are
//! the common case; the programmatic fields here cover what the grammar cannot
//! express in closed form (C^∞ cutoffs and bumps, Newtonian shell potentials).

use std::sync::Arc;

use crate::expr::{EvalError, Expression, Jet2};

pub type FieldRef = Arc<dyn ScalarField>;

pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    /// Value with exact gradient and Hessian at `x`.
    fn jet(&self, x: &[f64]) -> Result<Jet2, EvalError>;

    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.jet(x).map(|j| j.value)
    }
}

impl ScalarField for Expression {
    fn dim(&self) -> usize {
        Expression::dim(self)
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2, EvalError> {
        self.eval_jet(x)
    }
}

pub struct ConstField {
    pub n: usize,
    pub value: f64,
}

impl ScalarField for ConstField {
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2, EvalError> {
        Ok(Jet2::constant(x.len(), self.value))
    }
}

pub fn constant(n: usize, value: f64) -> FieldRef {
    Arc::new(ConstField { n, value })
}

pub struct SumField(pub FieldRef, pub FieldRef);

impl ScalarField for SumField {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2, EvalError> {
        Ok(self.0.jet(x)?.add(&self.1.jet(x)?))
    }
}

pub struct ProductField(pub FieldRef, pub FieldRef);

impl ScalarField for ProductField {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2, EvalError> {
        Ok(self.0.jet(x)?.mul(&self.1.jet(x)?))
    }
}

pub struct ScaledField(pub FieldRef, pub f64);

impl ScalarField for ScaledField {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2, EvalError> {
        Ok(self.0.jet(x)?.scale(self.1))
    }
}

/// Second-order dual number over one variable; the 1-D analogue of [`Jet2`],
/// used to derive radial profiles without hand-written derivatives.
#[derive(Clone, Copy, Debug)]
pub struct D2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl D2 {
    pub fn var(v: f64) -> Self {
        D2 { v, d1: 1.0, d2: 0.0 }
    }

    pub fn con(v: f64) -> Self {
        D2 { v, d1: 0.0, d2: 0.0 }
    }

    pub fn add(self, o: D2) -> D2 {
        D2 { v: self.v + o.v, d1: self.d1 + o.d1, d2: self.d2 + o.d2 }
    }

    pub fn sub(self, o: D2) -> D2 {
        D2 { v: self.v - o.v, d1: self.d1 - o.d1, d2: self.d2 - o.d2 }
    }

    pub fn mul(self, o: D2) -> D2 {
        D2 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }

    pub fn recip(self) -> D2 {
        let iv = 1.0 / self.v;
        self.compose(iv, -iv * iv, 2.0 * iv * iv * iv)
    }

    pub fn exp(self) -> D2 {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    fn compose(self, f: f64, fp: f64, fpp: f64) -> D2 {
        D2 { v: f, d1: fp * self.d1, d2: fpp * self.d1 * self.d1 + fp * self.d2 }
    }
}

/// exp(-1/s) for s > 0, identically 0 for s ≤ 0; C^∞ across the seam.
fn spline_e(s: D2) -> D2 {
    if s.v <= 0.0 {
        D2::con(0.0)
    } else {
        s.recip().mul(D2::con(-1.0)).exp()
    }
}

/// Radial profiles f(r) turned into fields f(|x|) by the chain rule.
pub trait RadialProfile: Send + Sync {
    /// (f, f', f'') at radius r > 0.
    fn value_d2(&self, r: f64) -> (f64, f64, f64);
}

pub struct RadialField {
    pub n: usize,
    pub profile: Arc<dyn RadialProfile>,
}

impl ScalarField for RadialField {
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2, EvalError> {
        let r = Jet2::radius(x)?;
        let (f, fp, fpp) = self.profile.value_d2(r.value);
        Ok(r.chain(f, fp, fpp))
    }
}

pub fn radial(n: usize, profile: Arc<dyn RadialProfile>) -> FieldRef {
    Arc::new(RadialField { n, profile })
}

/// The standard C^∞ cutoff: χ(t) = 1 for t ≤ 1, χ(t) = 0 for t ≥ 2,
/// built from exp(-1/s) splines. [`CutoffProfile`] evaluates χ(r / scale).
#[derive(Clone)]
pub struct CutoffProfile {
    pub scale: f64,
}

impl RadialProfile for CutoffProfile {
    fn value_d2(&self, r: f64) -> (f64, f64, f64) {
        let t = r / self.scale;
        if t <= 1.0 {
            return (1.0, 0.0, 0.0);
        }
        if t >= 2.0 {
            return (0.0, 0.0, 0.0);
        }
        let td = D2 { v: t, d1: 1.0 / self.scale, d2: 0.0 };
        let up = spline_e(D2::con(2.0).sub(td));
        let dn = spline_e(td.sub(D2::con(1.0)));
        let chi = up.mul(up.add(dn).recip());
        (chi.v, chi.d1, chi.d2)
    }
}

/// C^∞ bump supported on [a, b]: exp(-1/u)·exp(-1/(1-u)) with u the affine
/// parameter, normalized to peak value `amplitude`.
pub struct BumpProfile {
    pub a: f64,
    pub b: f64,
    pub amplitude: f64,
    peak: f64,
}

impl BumpProfile {
    pub fn new(a: f64, b: f64, amplitude: f64) -> Self {
        assert!(b > a);
        // raw peak at u = 1/2: exp(-2)·exp(-2)
        let peak = (-4.0f64).exp();
        BumpProfile { a, b, amplitude, peak }
    }
}

impl RadialProfile for BumpProfile {
    fn value_d2(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.a || r >= self.b {
            return (0.0, 0.0, 0.0);
        }
        let w = self.b - self.a;
        let u = D2 { v: (r - self.a) / w, d1: 1.0 / w, d2: 0.0 };
        let raw = spline_e(u).mul(spline_e(D2::con(1.0).sub(u)));
        let s = self.amplitude / self.peak;
        (raw.v * s, raw.d1 * s, raw.d2 * s)
    }
}

/// Polynomial bump amp·[(r-a)(b-r)]^p / [((b-a)/2)^{2p}] supported on [a, b];
/// C^{p-1} at the endpoints and exactly integrable by Gauss panels, which the
/// variational check needs (the exp-spline bump is not analytic at its
/// endpoints and its residual quadrature error would mask the O(dt²) term).
pub struct PolyBumpProfile {
    pub a: f64,
    pub b: f64,
    pub amplitude: f64,
    pub p: i32,
}

impl RadialProfile for PolyBumpProfile {
    fn value_d2(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.a || r >= self.b {
            return (0.0, 0.0, 0.0);
        }
        let half = 0.5 * (self.b - self.a);
        let scale = self.amplitude / half.powi(2 * self.p);
        let rd = D2::var(r);
        let core = rd.sub(D2::con(self.a)).mul(D2::con(self.b).sub(rd));
        let mut acc = D2::con(scale);
        for _ in 0..self.p {
            acc = acc.mul(core);
        }
        (acc.v, acc.d1, acc.d2)
    }
}

/// Newtonian potential of the C¹ radial shell density
/// ρ(s) = amplitude·(s-a)²(b-s)² on [a, b]:  Δw = -ρ, w = Q/r for r ≥ b.
///
/// Constant inside the shell, so a field `1 + m/(2r) + q·w` stays exactly
/// half-Schwarzschild outside r = b — the compact-perturbation fixture with
/// nonnegative scalar curvature used by the flattening pipeline.
pub struct ShellPotentialProfile {
    a: f64,
    b: f64,
    /// coefficients of (s-a)²(b-s)² scaled by amplitude, powers s^0..s^4
    c: [f64; 5],
}

impl ShellPotentialProfile {
    pub fn new(a: f64, b: f64, amplitude: f64) -> Self {
        assert!(0.0 < a && a < b);
        // (s-a)² = a² - 2as + s²;  (b-s)² = b² - 2bs + s²
        let p = [a * a, -2.0 * a, 1.0];
        let q = [b * b, -2.0 * b, 1.0];
        let mut c = [0.0; 5];
        for (i, pi) in p.iter().enumerate() {
            for (j, qj) in q.iter().enumerate() {
                c[i + j] += amplitude * pi * qj;
            }
        }
        ShellPotentialProfile { a, b, c }
    }

    /// The shell density ρ(s); −Δw = ρ.
    pub fn density(&self, s: f64) -> f64 {
        if s <= self.a || s >= self.b {
            return 0.0;
        }
        self.c.iter().rev().fold(0.0, |acc, ck| acc * s + ck)
    }

    /// ∫_a^r ρ(s) s² ds
    fn m2(&self, r: f64) -> f64 {
        let anti = |s: f64| -> f64 {
            (0..5).map(|k| self.c[k] * s.powi(k as i32 + 3) / (k as f64 + 3.0)).sum()
        };
        let r = r.clamp(self.a, self.b);
        anti(r) - anti(self.a)
    }

    /// ∫_r^b ρ(s) s ds
    fn m1(&self, r: f64) -> f64 {
        let anti = |s: f64| -> f64 {
            (0..5).map(|k| self.c[k] * s.powi(k as i32 + 2) / (k as f64 + 2.0)).sum()
        };
        let r = r.clamp(self.a, self.b);
        anti(self.b) - anti(r)
    }

    /// Total charge ∫ ρ s² ds, the coefficient of the far-field Q/r tail.
    pub fn total_charge(&self) -> f64 {
        self.m2(self.b)
    }
}

impl RadialProfile for ShellPotentialProfile {
    fn value_d2(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.a {
            return (self.m1(self.a), 0.0, 0.0);
        }
        let m2 = self.m2(r);
        if r >= self.b {
            return (m2 / r, -m2 / (r * r), 2.0 * m2 / (r * r * r));
        }
        let w = m2 / r + self.m1(r);
        let wp = -m2 / (r * r);
        let wpp = -self.density(r) + 2.0 * m2 / (r * r * r);
        (w, wp, wpp)
    }
}

/// u∞ + C r^{2-n}, the matched far-field form of solver output.
pub struct MonopoleProfile {
    pub u_infinity: f64,
    pub coefficient: f64,
    pub n: usize,
}

impl RadialProfile for MonopoleProfile {
    fn value_d2(&self, r: f64) -> (f64, f64, f64) {
        let p = 2.0 - self.n as f64;
        let c = self.coefficient;
        (
            self.u_infinity + c * r.powf(p),
            c * p * r.powf(p - 1.0),
            c * p * (p - 1.0) * r.powf(p - 2.0),
        )
    }
}

/// Field defined by an arbitrary jet closure; test scaffolding mostly.
pub struct FnField<F>(pub usize, pub F);

impl<F> ScalarField for FnField<F>
where
    F: Fn(&[f64]) -> Result<Jet2, EvalError> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.0
    }

    fn jet(&self, x: &[f64]) -> Result<Jet2, EvalError> {
        (self.1)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check_radial(p: &dyn RadialProfile, r: f64, tol: f64) {
        let h = 1e-5 * r.max(1.0);
        let (v, d1, d2) = p.value_d2(r);
        let (vp, _, _) = p.value_d2(r + h);
        let (vm, _, _) = p.value_d2(r - h);
        assert!(
            ((vp - vm) / (2.0 * h) - d1).abs() <= tol * (1.0 + d1.abs()),
            "d1 mismatch at r={r}"
        );
        assert!(
            ((vp - 2.0 * v + vm) / (h * h) - d2).abs() <= 1e3 * tol * (1.0 + d2.abs()),
            "d2 mismatch at r={r}"
        );
    }

    #[test]
    fn cutoff_shape_and_derivatives() {
        let chi = CutoffProfile { scale: 8.0 };
        assert_eq!(chi.value_d2(7.9), (1.0, 0.0, 0.0));
        assert_eq!(chi.value_d2(16.1), (0.0, 0.0, 0.0));
        let (v, _, _) = chi.value_d2(12.0);
        assert!(v > 0.0 && v < 1.0);
        for r in [8.5, 10.0, 12.0, 14.0, 15.5] {
            fd_check_radial(&chi, r, 1e-7);
        }
    }

    #[test]
    fn bump_support_and_derivatives() {
        let b = BumpProfile::new(2.0, 6.0, 0.5);
        assert_eq!(b.value_d2(1.9).0, 0.0);
        assert_eq!(b.value_d2(6.0).0, 0.0);
        assert!((b.value_d2(4.0).0 - 0.5).abs() < 1e-15);
        for r in [2.5, 3.0, 4.0, 5.0, 5.6] {
            fd_check_radial(&b, r, 1e-6);
        }
    }

    #[test]
    fn poly_bump_support_and_derivatives() {
        let b = PolyBumpProfile { a: 2.0, b: 6.0, amplitude: 0.5, p: 4 };
        assert_eq!(b.value_d2(2.0).0, 0.0);
        assert_eq!(b.value_d2(6.5).0, 0.0);
        assert!((b.value_d2(4.0).0 - 0.5).abs() < 1e-15);
        for r in [2.5, 3.0, 4.0, 5.0, 5.6] {
            fd_check_radial(&b, r, 1e-6);
        }
    }

    #[test]
    fn shell_potential_solves_poisson() {
        let w = ShellPotentialProfile::new(1.0, 2.0, 0.7);
        // Δw = w'' + 2 w'/r = -ρ in three dimensions
        for r in [1.1, 1.3, 1.5, 1.8, 1.95] {
            let (_, wp, wpp) = w.value_d2(r);
            let lap = wpp + 2.0 * wp / r;
            assert!((lap + w.density(r)).abs() < 1e-12 * (1.0 + w.density(r).abs()));
            fd_check_radial(&w, r, 1e-6);
        }
        // harmonic tail with charge Q
        let q = w.total_charge();
        let (v, _, _) = w.value_d2(5.0);
        assert!((v - q / 5.0).abs() < 1e-14);
        // constant inside
        let (v_in, d1, d2) = w.value_d2(0.5);
        assert_eq!((d1, d2), (0.0, 0.0));
        assert!(v_in > 0.0);
    }

    #[test]
    fn radial_field_jets_match_expression_route() {
        // 1 + C r^{-1} via MonopoleProfile against the parsed expression
        let f = radial(3, Arc::new(MonopoleProfile { u_infinity: 1.0, coefficient: 0.25, n: 3 }));
        let e = crate::expr::parse_scalar_field("1 + 0.25*r^(-1)", 3).unwrap();
        let x = [1.0, -2.0, 2.0];
        let a = f.jet(&x).unwrap();
        let b = e.eval_jet(&x).unwrap();
        assert!((a.value - b.value).abs() < 1e-15);
        for i in 0..3 {
            assert!((a.grad(i) - b.grad(i)).abs() < 1e-14);
            for j in 0..3 {
                assert!((a.hess(i, j) - b.hess(i, j)).abs() < 1e-14);
            }
        }
    }
}
