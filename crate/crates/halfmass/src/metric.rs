//! Asymptotically flat metrics on the exterior half-space region
//! `{x ∈ ℝⁿ₊ : |x| ≥ r0}`.
//!
//! A [`MetricField`] carries its coefficients together with declared decay
//! rate, inner radius of validity and structural flags. Coefficient values and
//! their first two derivatives come from exact jets, never finite differences,
//! which keeps the decay diagnostics free of discretization noise. All
//! quantitative claims live in the asymptotic region, so there is no interior
//! topology anywhere: "the manifold" is always ℝⁿ₊ minus a half-ball.

use std::sync::Arc;

use crate::expr::{parse_with_params, EvalError, Jet2, ParseError};
use crate::fields::{ConstField, FieldRef};
use crate::fitting::fit_log_decay;
use crate::linalg::{norm, sym_index, sym_len, Mat, SymMat, PACKED_LEN};
use crate::quadrature::HemisphereRule;
use crate::{sphere_area, MAX_DIM};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("dimension {0} unsupported (3 ≤ n ≤ {MAX_DIM})")]
    BadDimension(usize),
    #[error("mass parameter must be positive, got {0}")]
    BadMassParameter(f64),
    #[error("metric is not positive definite at {x:?}")]
    NotPositiveDefinite { x: Vec<f64> },
    #[error("conformal factor is not positive at {x:?} (u = {value})")]
    FactorNotPositive { x: Vec<f64>, value: f64 },
    #[error("measured decay {fitted:.3} is slower than the declared rate {declared:.3}")]
    DecaySlowerThanDeclared { declared: f64, fitted: f64 },
    #[error("matrix is not orthogonal to 1e-12")]
    NotOrthogonal,
    #[error("rotation does not fix the x_n axis direction")]
    NormalNotFixed,
    #[error("translation must be tangent to the boundary (b_n = 0)")]
    TranslationNotTangent,
    #[error("corner radius {0} must be at least the inner radius {1}")]
    BadCornerRadius(f64, f64),
    #[error("coefficient evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("coefficient expression error: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Quadrature(#[from] crate::quadrature::QuadratureError),
}

/// Coefficients g_ij with exact first and second derivatives at a point.
#[derive(Clone, Debug)]
pub struct MetricJet {
    pub n: usize,
    /// g_ij
    pub g: SymMat,
    /// dg[k] = ∂_k g
    pub dg: [SymMat; MAX_DIM],
    /// d2g[sym_index(n,k,l)] = ∂_k ∂_l g
    pub d2g: [SymMat; PACKED_LEN],
}

impl MetricJet {
    pub fn flat(n: usize) -> Self {
        MetricJet {
            n,
            g: SymMat::identity(n),
            dg: [SymMat::zeros(n); MAX_DIM],
            d2g: [SymMat::zeros(n); PACKED_LEN],
        }
    }

    /// View the (i, j) coefficient with its derivatives as a scalar jet.
    pub fn coeff_jet(&self, i: usize, j: usize) -> Jet2 {
        let n = self.n;
        let mut jet = Jet2::constant(n, self.g.at(i, j));
        for k in 0..n {
            *jet.grad_mut(k) = self.dg[k].at(i, j);
        }
        for k in 0..n {
            for l in k..n {
                *jet.hess_mut(k, l) = self.d2g[sym_index(n, k, l)].at(i, j);
            }
        }
        jet
    }

    pub fn set_coeff_jet(&mut self, i: usize, j: usize, jet: &Jet2) {
        let n = self.n;
        *self.g.at_mut(i, j) = jet.value;
        for k in 0..n {
            *self.dg[k].at_mut(i, j) = jet.grad(k);
        }
        for k in 0..n {
            for l in k..n {
                *self.d2g[sym_index(n, k, l)].at_mut(i, j) = jet.hess(k, l);
            }
        }
    }

    /// Jet of the sheet-1 metric of a doubled manifold: all tensor slots
    /// reflected through x_n ↦ -x_n with the matching index signs.
    pub fn reflected(&self) -> MetricJet {
        let n = self.n;
        let s = |i: usize| if i == n - 1 { -1.0 } else { 1.0 };
        let mut out = MetricJet::flat(n);
        for i in 0..n {
            for j in i..n {
                *out.g.at_mut(i, j) = s(i) * s(j) * self.g.at(i, j);
                for k in 0..n {
                    *out.dg[k].at_mut(i, j) = s(i) * s(j) * s(k) * self.dg[k].at(i, j);
                    for l in k..n {
                        *out.d2g[sym_index(n, k, l)].at_mut(i, j) =
                            s(i) * s(j) * s(k) * s(l) * self.d2g[sym_index(n, k, l)].at(i, j);
                    }
                }
            }
        }
        out
    }
}

/// Symmetric 2-tensor field with optional (zero) components; perturbations
/// and variation directions.
#[derive(Clone)]
pub struct SymTensorField {
    pub n: usize,
    comps: Vec<Option<FieldRef>>,
}

impl SymTensorField {
    pub fn zeros(n: usize) -> Self {
        SymTensorField { n, comps: vec![None; sym_len(n)] }
    }

    pub fn set(&mut self, i: usize, j: usize, f: FieldRef) {
        self.comps[sym_index(self.n, i, j)] = Some(f);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&FieldRef> {
        self.comps[sym_index(self.n, i, j)].as_ref()
    }

    pub fn jet(&self, x: &[f64]) -> Result<MetricJet, EvalError> {
        let n = self.n;
        let mut out = MetricJet::flat(n);
        out.g = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                if let Some(f) = self.get(i, j) {
                    let jet = f.jet(x)?;
                    out.set_coeff_jet(i, j, &jet);
                }
            }
        }
        Ok(out)
    }

    /// Component values only.
    pub fn values(&self, x: &[f64]) -> Result<SymMat, EvalError> {
        let n = self.n;
        let mut m = SymMat::zeros(n);
        for i in 0..n {
            for j in i..n {
                if let Some(f) = self.get(i, j) {
                    *m.at_mut(i, j) = f.value(x)?;
                }
            }
        }
        Ok(m)
    }
}

#[derive(Clone)]
enum MetricKind {
    /// Packed upper-triangle coefficient fields.
    Coeffs(Vec<FieldRef>),
    /// u^{4/(n-2)} · base
    Conformal { base: Box<MetricField>, factor: FieldRef },
    /// χ·base + (1-χ)·δ with a radial cutoff χ
    Blend { base: Box<MetricField>, cutoff: FieldRef },
    /// base + t·k
    Perturbed { base: Box<MetricField>, k: SymTensorField, t: f64 },
    /// Φ*g for the rigid motion Φ(x) = Qx + b
    Pullback { base: Box<MetricField>, q: Arc<Mat>, b: Vec<f64> },
}

/// A metric g_ij on `{x ∈ ℝⁿ₊ : |x| ≥ r0}` with declared decay rate τ.
#[derive(Clone)]
pub struct MetricField {
    pub n: usize,
    /// Declared decay rate; `f64::INFINITY` sentinel for the flat model.
    pub tau: f64,
    /// Inner radius of validity.
    pub r0: f64,
    pub conformally_flat: bool,
    /// g_{αn} = 0 on {x_n = 0, r ≥ r0}.
    pub boundary_orthogonal: bool,
    /// Known exact mass, carried by constructors that know it; never inferred.
    pub exact_mass: Option<f64>,
    kind: MetricKind,
}

impl MetricField {
    /// The model space: ℝⁿ₊ with the standard flat metric.
    pub fn flat_half_space(n: usize) -> Result<Self, MetricError> {
        check_dim(n)?;
        let mut coeffs: Vec<FieldRef> = Vec::with_capacity(sym_len(n));
        for i in 0..n {
            for j in i..n {
                let v = if i == j { 1.0 } else { 0.0 };
                coeffs.push(Arc::new(ConstField { n, value: v }));
            }
        }
        Ok(MetricField {
            n,
            tau: f64::INFINITY,
            r0: 1.0,
            conformally_flat: true,
            boundary_orthogonal: true,
            exact_mass: Some(0.0),
            kind: MetricKind::Coeffs(coeffs),
        })
    }

    /// Half-Schwarzschild: (1 + (m/2) r^{2-n})^{4/(n-2)} δ on r ≥ (m/2)^{1/(n-2)};
    /// scalar-flat with totally geodesic boundary and mass (n-1) ω_{n-1} m.
    pub fn half_schwarzschild(n: usize, m: f64) -> Result<Self, MetricError> {
        check_dim(n)?;
        if m <= 0.0 {
            return Err(MetricError::BadMassParameter(m));
        }
        let u = parse_with_params("1 + (m/2)*r^(2-n)", n, &[("m", m)])?;
        let flat = Self::flat_half_space(n)?;
        let r0 = (m / 2.0).powf(1.0 / (n as f64 - 2.0));
        let exact = (n as f64 - 1.0) * sphere_area(n - 1) * m;
        Ok(MetricField {
            n,
            tau: n as f64 - 2.0,
            r0,
            conformally_flat: true,
            boundary_orthogonal: true,
            exact_mass: Some(exact),
            kind: MetricKind::Conformal { base: Box::new(flat), factor: Arc::new(u) },
        })
    }

    /// Conformal change ḡ = u^{4/(n-2)} g. Positivity of u is sampled on
    /// dyadic spheres; the decay of u - 1 is fitted and folded into τ.
    pub fn conformal(base: MetricField, factor: FieldRef) -> Result<Self, MetricError> {
        let n = base.n;
        for (_, pts) in &sample_points(n, base.r0) {
            for x in pts {
                let v = factor.value(x)?;
                if v <= 0.0 {
                    return Err(MetricError::FactorNotPositive { x: x.clone(), value: v });
                }
            }
        }
        let mut radii = Vec::new();
        let mut sups = Vec::new();
        for (r, pts) in &decay_shells(n, base.r0) {
            let mut sup = 0.0f64;
            for x in pts {
                let v = factor.value(x)?;
                if v <= 0.0 {
                    return Err(MetricError::FactorNotPositive { x: x.clone(), value: v });
                }
                sup = sup.max((v - 1.0).abs());
            }
            radii.push(*r);
            sups.push(sup);
        }
        let (fitted, _) = fit_log_decay(&radii, &sups, 1e-250);
        let tau = base.tau.min(fitted);
        Ok(MetricField {
            n,
            tau,
            r0: base.r0,
            conformally_flat: base.conformally_flat,
            boundary_orthogonal: base.boundary_orthogonal,
            exact_mass: None,
            kind: MetricKind::Conformal { base: Box::new(base), factor },
        })
    }

    /// g = δ + a with declared decay τ. Positive definiteness and the decay of
    /// a are sampled; slower measured decay is a (warning-grade) error.
    pub fn perturbation(n: usize, a: SymTensorField, tau: f64) -> Result<Self, MetricError> {
        Self::perturbation_with_r0(n, a, tau, 1.0)
    }

    pub fn perturbation_with_r0(
        n: usize,
        a: SymTensorField,
        tau: f64,
        r0: f64,
    ) -> Result<Self, MetricError> {
        check_dim(n)?;
        for (_, pts) in &sample_points(n, r0) {
            for x in pts {
                let m = a.values(x)?;
                let mut g = SymMat::identity(n);
                g.add_scaled(&m, 1.0);
                if !g.is_positive_definite() {
                    return Err(MetricError::NotPositiveDefinite { x: x.clone() });
                }
            }
        }
        let mut radii = Vec::new();
        let mut sups = Vec::new();
        for (r, pts) in &decay_shells(n, r0) {
            let mut sup = 0.0f64;
            for x in pts {
                let m = a.values(x)?;
                for i in 0..n {
                    for j in i..n {
                        sup = sup.max(m.at(i, j).abs());
                    }
                }
            }
            radii.push(*r);
            sups.push(sup);
        }
        let (fitted, _) = fit_log_decay(&radii, &sups, 1e-250);
        if fitted < tau - 0.25 {
            return Err(MetricError::DecaySlowerThanDeclared { declared: tau, fitted });
        }
        // boundary orthogonality: a_{αn} on boundary ring samples
        let ring = boundary_ring(n, 2.0 * r0);
        let mut orth = true;
        for x in &ring {
            let m = a.values(x)?;
            for alpha in 0..n - 1 {
                if m.at(alpha, n - 1).abs() > 1e-13 {
                    orth = false;
                }
            }
        }
        let mut coeffs: Vec<FieldRef> = Vec::with_capacity(sym_len(n));
        for i in 0..n {
            for j in i..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                let f: FieldRef = match a.get(i, j) {
                    Some(field) => Arc::new(crate::fields::SumField(
                        Arc::new(ConstField { n, value: delta }),
                        field.clone(),
                    )),
                    None => Arc::new(ConstField { n, value: delta }),
                };
                coeffs.push(f);
            }
        }
        Ok(MetricField {
            n,
            tau,
            r0,
            conformally_flat: false,
            boundary_orthogonal: orth,
            exact_mass: None,
            kind: MetricKind::Coeffs(coeffs),
        })
    }

    /// χ_R g + (1 - χ_R) δ: the interpolation used by the flattening
    /// pipeline; `cutoff` is χ_R as a scalar field.
    pub fn blend_with_flat(base: MetricField, cutoff: FieldRef) -> Self {
        MetricField {
            n: base.n,
            tau: base.tau,
            r0: base.r0,
            conformally_flat: base.conformally_flat,
            boundary_orthogonal: base.boundary_orthogonal,
            exact_mass: None,
            kind: MetricKind::Blend { base: Box::new(base), cutoff },
        }
    }

    /// g + t·k along a variation direction k.
    pub fn perturbed_along(base: MetricField, k: SymTensorField, t: f64) -> Self {
        MetricField {
            n: base.n,
            tau: base.tau,
            r0: base.r0,
            conformally_flat: false,
            boundary_orthogonal: base.boundary_orthogonal,
            exact_mass: None,
            kind: MetricKind::Perturbed { base: Box::new(base), k, t },
        }
    }

    /// Pullback under the rigid motion Φ(x) = Qx + b with Q orthogonal fixing
    /// e_n and b tangent to the boundary.
    pub fn pullback_rigid(base: MetricField, q: Mat, b: Vec<f64>) -> Result<Self, MetricError> {
        let n = base.n;
        assert_eq!(q.rows, n);
        assert_eq!(b.len(), n);
        let qt = q.transpose();
        let prod = qt.matmul(&q);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (prod.at(i, j) - expect).abs() > 1e-12 {
                    return Err(MetricError::NotOrthogonal);
                }
            }
        }
        for i in 0..n {
            let expect = if i == n - 1 { 1.0 } else { 0.0 };
            if (q.at(i, n - 1) - expect).abs() > 1e-12 || (q.at(n - 1, i) - expect).abs() > 1e-12 {
                return Err(MetricError::NormalNotFixed);
            }
        }
        if b[n - 1].abs() > 1e-12 {
            return Err(MetricError::TranslationNotTangent);
        }
        let shift = norm(&b);
        Ok(MetricField {
            n,
            tau: base.tau,
            r0: base.r0 + shift,
            conformally_flat: base.conformally_flat,
            boundary_orthogonal: base.boundary_orthogonal,
            exact_mass: base.exact_mass,
            kind: MetricKind::Pullback { base: Box::new(base), q: Arc::new(q), b },
        })
    }

    /// Double along Σ with corner set Σ ∩ {r ≤ r_corner}.
    pub fn double(self, r_corner: f64) -> Result<DoubledMetric, MetricError> {
        if r_corner < self.r0 {
            return Err(MetricError::BadCornerRadius(r_corner, self.r0));
        }
        Ok(DoubledMetric { base: self, r_corner })
    }

    /// Coefficients with exact first and second derivatives at x.
    pub fn jet(&self, x: &[f64]) -> Result<MetricJet, EvalError> {
        let n = self.n;
        match &self.kind {
            MetricKind::Coeffs(coeffs) => {
                let mut out = MetricJet::flat(n);
                let mut idx = 0;
                for i in 0..n {
                    for j in i..n {
                        let jet = coeffs[idx].jet(x)?;
                        out.set_coeff_jet(i, j, &jet);
                        idx += 1;
                    }
                }
                Ok(out)
            }
            MetricKind::Conformal { base, factor } => {
                let g = base.jet(x)?;
                let u = factor.jet(x)?;
                let p = 4.0 / (n as f64 - 2.0);
                let phi = u.powf(p)?;
                let mut out = MetricJet::flat(n);
                for i in 0..n {
                    for j in i..n {
                        let jet = g.coeff_jet(i, j).mul(&phi);
                        out.set_coeff_jet(i, j, &jet);
                    }
                }
                Ok(out)
            }
            MetricKind::Blend { base, cutoff } => {
                let g = base.jet(x)?;
                let chi = cutoff.jet(x)?;
                let mut out = MetricJet::flat(n);
                for i in 0..n {
                    for j in i..n {
                        // δ_ij + χ (g_ij - δ_ij)
                        let delta = if i == j { 1.0 } else { 0.0 };
                        let dev = g.coeff_jet(i, j).sub(&Jet2::constant(n, delta));
                        let jet = Jet2::constant(n, delta).add(&chi.mul(&dev));
                        out.set_coeff_jet(i, j, &jet);
                    }
                }
                Ok(out)
            }
            MetricKind::Perturbed { base, k, t } => {
                let mut g = base.jet(x)?;
                let kj = k.jet(x)?;
                for i in 0..n {
                    for j in i..n {
                        let jet = g.coeff_jet(i, j).add(&kj.coeff_jet(i, j).scale(*t));
                        g.set_coeff_jet(i, j, &jet);
                    }
                }
                Ok(g)
            }
            MetricKind::Pullback { base, q, b } => {
                let mut y = vec![0.0; n];
                for a in 0..n {
                    y[a] = b[a];
                    for i in 0..n {
                        y[a] += q.at(a, i) * x[i];
                    }
                }
                let gj = base.jet(&y)?;
                let mut out = MetricJet::flat(n);
                // (Φ*g)_{ij,kl}(x) = Q^a_i Q^b_j Q^c_k Q^d_l g_{ab,cd}(Φx)
                for i in 0..n {
                    for j in i..n {
                        let mut v = 0.0;
                        let mut dv = [0.0; MAX_DIM];
                        let mut d2v = [0.0; PACKED_LEN];
                        for a in 0..n {
                            let qa = q.at(a, i);
                            if qa == 0.0 {
                                continue;
                            }
                            for bb in 0..n {
                                let f = qa * q.at(bb, j);
                                if f == 0.0 {
                                    continue;
                                }
                                v += f * gj.g.at(a, bb);
                                for c in 0..n {
                                    let gc = gj.dg[c].at(a, bb);
                                    if gc != 0.0 {
                                        for kk in 0..n {
                                            dv[kk] += f * gc * q.at(c, kk);
                                        }
                                    }
                                    for d in 0..n {
                                        let g2 = gj.d2g[sym_index(n, c, d)].at(a, bb);
                                        if g2 == 0.0 {
                                            continue;
                                        }
                                        for kk in 0..n {
                                            let qc = q.at(c, kk);
                                            if qc == 0.0 {
                                                continue;
                                            }
                                            for ll in kk..n {
                                                d2v[sym_index(n, kk, ll)] +=
                                                    f * g2 * qc * q.at(d, ll);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        *out.g.at_mut(i, j) = v;
                        for kk in 0..n {
                            *out.dg[kk].at_mut(i, j) = dv[kk];
                        }
                        for kk in 0..n {
                            for ll in kk..n {
                                *out.d2g[sym_index(n, kk, ll)].at_mut(i, j) =
                                    d2v[sym_index(n, kk, ll)];
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Coefficient values only; avoids the jet machinery on the hot paths
    /// (face-centered coefficients of the conservative stencil).
    pub fn values(&self, x: &[f64]) -> Result<SymMat, EvalError> {
        let n = self.n;
        match &self.kind {
            MetricKind::Coeffs(coeffs) => {
                let mut out = SymMat::zeros(n);
                let mut idx = 0;
                for i in 0..n {
                    for j in i..n {
                        *out.at_mut(i, j) = coeffs[idx].value(x)?;
                        idx += 1;
                    }
                }
                Ok(out)
            }
            MetricKind::Conformal { base, factor } => {
                let mut out = base.values(x)?;
                let u = factor.value(x)?;
                if u <= 0.0 {
                    return Err(EvalError::PowDomain { base: u, exponent: 4.0 / (n as f64 - 2.0) });
                }
                out.scale(u.powf(4.0 / (n as f64 - 2.0)));
                Ok(out)
            }
            MetricKind::Blend { base, cutoff } => {
                let g = base.values(x)?;
                let chi = cutoff.value(x)?;
                let mut out = SymMat::identity(n);
                for i in 0..n {
                    for j in i..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        *out.at_mut(i, j) = delta + chi * (g.at(i, j) - delta);
                    }
                }
                Ok(out)
            }
            MetricKind::Perturbed { base, k, t } => {
                let mut out = base.values(x)?;
                let kv = k.values(x)?;
                out.add_scaled(&kv, *t);
                Ok(out)
            }
            MetricKind::Pullback { .. } => Ok(self.jet(x)?.g),
        }
    }

    /// Eigenvalue-based positive definiteness over the standard sample set.
    pub fn check_positive_definite(&self) -> Result<(), MetricError> {
        for (_, pts) in sample_points(self.n, self.r0) {
            for x in pts {
                if !self.values(&x)?.is_positive_definite() {
                    return Err(MetricError::NotPositiveDefinite { x });
                }
            }
        }
        Ok(())
    }

    /// Sampled decay report: sup over dyadic test spheres of |g-δ|, |∂g|,
    /// |∂²g| with fitted decay exponents.
    pub fn decay_report(&self) -> Result<DecayReport, MetricError> {
        let n = self.n;
        let mut radii = Vec::new();
        let mut sup0 = Vec::new();
        let mut sup1 = Vec::new();
        let mut sup2 = Vec::new();
        for (r, pts) in decay_shells(n, self.r0) {
            let mut s0 = 0.0f64;
            let mut s1 = 0.0f64;
            let mut s2 = 0.0f64;
            for x in &pts {
                let jet = self.jet(x)?;
                for i in 0..n {
                    for j in i..n {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        s0 = s0.max((jet.g.at(i, j) - delta).abs());
                        for k in 0..n {
                            s1 = s1.max(jet.dg[k].at(i, j).abs());
                            for l in k..n {
                                s2 = s2.max(jet.d2g[sym_index(n, k, l)].at(i, j).abs());
                            }
                        }
                    }
                }
            }
            radii.push(r);
            sup0.push(s0);
            sup1.push(s1);
            sup2.push(s2);
        }
        let (d0, _) = fit_log_decay(&radii, &sup0, 1e-250);
        let (d1, _) = fit_log_decay(&radii, &sup1, 1e-250);
        let (d2, _) = fit_log_decay(&radii, &sup2, 1e-250);
        Ok(DecayReport { radii, sup0, sup1, sup2, fitted: [d0, d1, d2] })
    }

    /// Weighted sups r^τ|g-δ|, r^{τ+1}|∂g|, r^{τ+2}|∂²g| per dyadic sphere;
    /// finite and stable under radius doubling when the declared τ holds.
    pub fn weighted_decay_sups(&self) -> Result<Vec<[f64; 3]>, MetricError> {
        let report = self.decay_report()?;
        let tau = if self.tau.is_finite() { self.tau } else { 0.0 };
        Ok(report
            .radii
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                [
                    report.sup0[k] * r.powf(tau),
                    report.sup1[k] * r.powf(tau + 1.0),
                    report.sup2[k] * r.powf(tau + 2.0),
                ]
            })
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    pub radii: Vec<f64>,
    pub sup0: Vec<f64>,
    pub sup1: Vec<f64>,
    pub sup2: Vec<f64>,
    /// Fitted decay exponents of |g-δ|, |∂g|, |∂²g|.
    pub fitted: [f64; 3],
}

/// Two copies of the base glued along Σ; sheet 1 carries the reflected
/// metric, so coefficients on {x_n < 0} come from x_n ↦ -x_n with the
/// index signs twisted accordingly.
#[derive(Clone)]
pub struct DoubledMetric {
    pub base: MetricField,
    /// Radius bounding the corner set Σ_K = Σ ∩ {r ≤ r_corner}.
    pub r_corner: f64,
}

impl DoubledMetric {
    pub fn n(&self) -> usize {
        self.base.n
    }

    /// Jet of the doubled metric at any x ∈ ℝⁿ with |x| ≥ r0.
    pub fn jet(&self, x: &[f64]) -> Result<MetricJet, EvalError> {
        let n = self.base.n;
        if x[n - 1] >= 0.0 {
            self.base.jet(x)
        } else {
            let mut xr = x.to_vec();
            xr[n - 1] = -xr[n - 1];
            Ok(self.base.jet(&xr)?.reflected())
        }
    }

    /// Mean curvatures of the gluing hypersurface seen from the two sheets at
    /// corner samples. With the normal η continued across the corner the pair
    /// must satisfy H⁻ = -H⁺.
    pub fn corner_report(&self, count: usize) -> Result<Vec<CornerSample>, MetricError> {
        let n = self.base.n;
        let ring = HemisphereRule::new(n, 1.0, 6)?;
        let mut out = Vec::new();
        let radii = [1.5 * self.base.r0, 0.5 * (self.base.r0 + self.r_corner), self.r_corner];
        'outer: for r in radii {
            for i in 0..ring.equator.len() {
                let mut x = ring.equator.node(i).to_vec();
                for c in x.iter_mut() {
                    *c *= r;
                }
                let upper = self.base.jet(&x)?;
                let lower = upper.reflected();
                let h_plus = crate::geometry::boundary_from_jet(&upper)
                    .map_err(|_| MetricError::NotPositiveDefinite { x: x.clone() })?
                    .mean_curvature;
                let h_minus = crate::geometry::boundary_from_jet(&lower)
                    .map_err(|_| MetricError::NotPositiveDefinite { x: x.clone() })?
                    .mean_curvature;
                out.push(CornerSample { x, h_plus, h_minus });
                if out.len() >= count {
                    break 'outer;
                }
            }
        }
        Ok(out)
    }

    /// Worst disagreement of the induced metrics from the two sheets on the
    /// gluing hypersurface.
    pub fn sheet_agreement(&self, count: usize) -> Result<f64, MetricError> {
        let n = self.base.n;
        let ring = HemisphereRule::new(n, self.r_corner, 6)?;
        let mut worst = 0.0f64;
        for i in 0..ring.equator.len().min(count) {
            let x = ring.equator.node(i);
            let upper = self.base.jet(x)?;
            let lower = upper.reflected();
            for a in 0..n - 1 {
                for b in a..n - 1 {
                    worst = worst.max((upper.g.at(a, b) - lower.g.at(a, b)).abs());
                }
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug)]
pub struct CornerSample {
    pub x: Vec<f64>,
    pub h_plus: f64,
    pub h_minus: f64,
}

fn check_dim(n: usize) -> Result<(), MetricError> {
    if !(3..=MAX_DIM).contains(&n) {
        return Err(MetricError::BadDimension(n));
    }
    Ok(())
}

/// Dyadic test spheres r0·2^k with a deterministic direction set, used by the
/// sampling-based validity checks (a diagnostic, not a proof).
pub fn sample_points(n: usize, r0: f64) -> Vec<(f64, Vec<Vec<f64>>)> {
    let rule = HemisphereRule::new(n, 1.0, 4).expect("dimension checked by callers");
    let mut out = Vec::new();
    for k in 1..=5 {
        let r = r0 * (2.0f64).powi(k);
        let mut pts = Vec::new();
        for i in (0..rule.nodes.len()).step_by(2) {
            let mut x = rule.nodes.node(i).to_vec();
            for c in x.iter_mut() {
                *c *= r;
            }
            pts.push(x);
        }
        for i in (0..rule.equator.len()).step_by(2) {
            let mut x = rule.equator.node(i).to_vec();
            for c in x.iter_mut() {
                *c *= r;
            }
            pts.push(x);
        }
        out.push((r, pts));
    }
    out
}

/// Dyadic shells starting inside the asymptotic regime; the decay fits use
/// these so the pre-asymptotic region does not bend the log-log slope.
pub fn decay_shells(n: usize, r0: f64) -> Vec<(f64, Vec<Vec<f64>>)> {
    let rule = HemisphereRule::new(n, 1.0, 4).expect("dimension checked by callers");
    let base = (4.0 * r0).max(4.0);
    let mut out = Vec::new();
    for k in 0..5 {
        let r = base * (2.0f64).powi(k);
        let mut pts = Vec::new();
        for i in (0..rule.nodes.len()).step_by(2) {
            let mut x = rule.nodes.node(i).to_vec();
            for c in x.iter_mut() {
                *c *= r;
            }
            pts.push(x);
        }
        for i in (0..rule.equator.len()).step_by(2) {
            let mut x = rule.equator.node(i).to_vec();
            for c in x.iter_mut() {
                *c *= r;
            }
            pts.push(x);
        }
        out.push((r, pts));
    }
    out
}

fn boundary_ring(n: usize, r: f64) -> Vec<Vec<f64>> {
    let rule = HemisphereRule::new(n, r, 4).expect("dimension checked by callers");
    (0..rule.equator.len()).map(|i| rule.equator.node(i).to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_scalar_field;

    #[test]
    fn flat_is_identity_everywhere() {
        for n in [3usize, 7] {
            let g = MetricField::flat_half_space(n).unwrap();
            let x: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
            let jet = g.jet(&x).unwrap();
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(jet.g.at(i, j), expect);
                }
            }
            assert!(jet.g.is_positive_definite());
            assert_eq!(g.exact_mass, Some(0.0));
        }
    }

    #[test]
    fn half_schwarzschild_values() {
        let g = MetricField::half_schwarzschild(3, 1.0).unwrap();
        // g11 at (0,0,2): u = 1.25, u⁴ = 2.44140625
        let jet = g.jet(&[0.0, 0.0, 2.0]).unwrap();
        assert!((jet.g.at(0, 0) - 2.44140625).abs() < 1e-13);
        assert!((g.exact_mass.unwrap() - 8.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((g.tau - 1.0).abs() < 1e-15);
        // r0 for n=4, m=2 is 1
        let g = MetricField::half_schwarzschild(4, 2.0).unwrap();
        assert!((g.r0 - 1.0).abs() < 1e-15);
        assert!(MetricField::half_schwarzschild(3, -1.0).is_err());
    }

    #[test]
    fn conformal_identity_factor_is_identity() {
        let flat = MetricField::flat_half_space(3).unwrap();
        let one = crate::fields::constant(3, 1.0);
        let g = MetricField::conformal(flat.clone(), one).unwrap();
        let x = [1.0, 2.0, 0.5];
        let a = g.values(&x).unwrap();
        let b = flat.values(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.at(i, j) - b.at(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn conformal_matches_half_schwarzschild_pointwise() {
        let flat = MetricField::flat_half_space(3).unwrap();
        let u: FieldRef = Arc::new(parse_scalar_field("1 + 0.5/r", 3).unwrap());
        let g = MetricField::conformal(flat, u).unwrap();
        let hs = MetricField::half_schwarzschild(3, 1.0).unwrap();
        for x in [[1.0, 0.0, 1.0], [0.0, 3.0, 0.0], [2.0, -1.0, 4.0]] {
            let a = g.jet(&x).unwrap();
            let b = hs.jet(&x).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    assert!((a.g.at(i, j) - b.g.at(i, j)).abs() < 1e-13);
                    for k in 0..3 {
                        assert!((a.dg[k].at(i, j) - b.dg[k].at(i, j)).abs() < 1e-13);
                    }
                }
            }
        }
        assert!((g.tau - 1.0).abs() < 0.05, "fitted decay of u-1 should be ~1, got {}", g.tau);
    }

    #[test]
    fn conformal_rejects_nonpositive_factor() {
        let flat = MetricField::flat_half_space(3).unwrap();
        let u: FieldRef = Arc::new(parse_scalar_field("1 - 8/r", 3).unwrap());
        assert!(matches!(
            MetricField::conformal(flat, u),
            Err(MetricError::FactorNotPositive { .. })
        ));
    }

    #[test]
    fn conformal_composition_agrees_with_product() {
        let flat = MetricField::flat_half_space(3).unwrap();
        let u: FieldRef = Arc::new(parse_scalar_field("1 + 0.3/r", 3).unwrap());
        let v: FieldRef = Arc::new(parse_scalar_field("1 + 0.2*x1/r^2", 3).unwrap());
        let two_step = MetricField::conformal(
            MetricField::conformal(flat.clone(), u.clone()).unwrap(),
            v.clone(),
        )
        .unwrap();
        let uv: FieldRef = Arc::new(crate::fields::ProductField(u, v));
        let one_step = MetricField::conformal(flat, uv).unwrap();
        for x in [[2.0, 1.0, 1.0], [0.5, -0.5, 3.0], [4.0, 0.0, 0.0]] {
            let a = two_step.values(&x).unwrap();
            let b = one_step.values(&x).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let rel = (a.at(i, j) - b.at(i, j)).abs() / (1.0 + b.at(i, j).abs());
                    assert!(rel < 1e-12);
                }
            }
        }
    }

    #[test]
    fn perturbation_flags_and_decay() {
        // off-diagonal a13 breaks boundary orthogonality
        let mut a = SymTensorField::zeros(3);
        a.set(0, 2, Arc::new(parse_scalar_field("0.1*x1/r^2", 3).unwrap()) as FieldRef);
        let g = MetricField::perturbation(3, a, 1.0).unwrap();
        assert!(!g.boundary_orthogonal);

        // a = 0 is flat
        let g = MetricField::perturbation(3, SymTensorField::zeros(3), 1.0).unwrap();
        let jet = g.jet(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(jet.g.at(0, 0), 1.0);
        assert_eq!(jet.g.at(0, 1), 0.0);

        // r^{-1} coefficient: declared τ=1 accepted, τ=2 rejected
        let mut a = SymTensorField::zeros(3);
        a.set(0, 0, Arc::new(parse_scalar_field("r^(-1)", 3).unwrap()) as FieldRef);
        assert!(MetricField::perturbation(3, a.clone(), 1.0).is_ok());
        assert!(matches!(
            MetricField::perturbation(3, a, 2.0),
            Err(MetricError::DecaySlowerThanDeclared { .. })
        ));
    }

    #[test]
    fn pullback_validation_and_eigenvalues() {
        let hs = MetricField::half_schwarzschild(3, 1.0).unwrap();
        // rotation by π/3 about the x3 axis plus a tangential shift
        let th = std::f64::consts::PI / 3.0;
        let mut q = Mat::identity(3);
        *q.at_mut(0, 0) = th.cos();
        *q.at_mut(0, 1) = -th.sin();
        *q.at_mut(1, 0) = th.sin();
        *q.at_mut(1, 1) = th.cos();
        let b = vec![0.5, -0.25, 0.0];
        let pulled = MetricField::pullback_rigid(hs.clone(), q.clone(), b.clone()).unwrap();
        let x = [2.0, 1.0, 1.5];
        let mut y = vec![0.0; 3];
        for a in 0..3 {
            y[a] = b[a];
            for i in 0..3 {
                y[a] += q.at(a, i) * x[i];
            }
        }
        let ev_pulled = pulled.values(&x).unwrap().eigenvalues();
        let ev_base = hs.values(&y).unwrap().eigenvalues();
        for (l1, l2) in ev_pulled.iter().zip(&ev_base) {
            assert!((l1 - l2).abs() < 1e-12);
        }

        // identity motion reproduces the metric
        let id = MetricField::pullback_rigid(hs.clone(), Mat::identity(3), vec![0.0; 3]).unwrap();
        let a = id.values(&x).unwrap();
        let c = hs.values(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.at(i, j) - c.at(i, j)).abs() < 1e-14);
            }
        }

        // rejected motions
        let mut skew = Mat::identity(3);
        *skew.at_mut(0, 1) = 0.1;
        assert!(matches!(
            MetricField::pullback_rigid(hs.clone(), skew, vec![0.0; 3]),
            Err(MetricError::NotOrthogonal)
        ));
        let mut tilt = Mat::identity(3);
        *tilt.at_mut(0, 0) = 0.0;
        *tilt.at_mut(0, 2) = 1.0;
        *tilt.at_mut(2, 0) = 1.0;
        *tilt.at_mut(2, 2) = 0.0;
        assert!(matches!(
            MetricField::pullback_rigid(hs.clone(), tilt, vec![0.0; 3]),
            Err(MetricError::NormalNotFixed)
        ));
        assert!(matches!(
            MetricField::pullback_rigid(hs, Mat::identity(3), vec![0.0, 0.0, 1.0]),
            Err(MetricError::TranslationNotTangent)
        ));
    }

    #[test]
    fn pullback_of_flat_is_flat() {
        let flat = MetricField::flat_half_space(3).unwrap();
        let th = 0.7f64;
        let mut q = Mat::identity(3);
        *q.at_mut(0, 0) = th.cos();
        *q.at_mut(0, 1) = -th.sin();
        *q.at_mut(1, 0) = th.sin();
        *q.at_mut(1, 1) = th.cos();
        let pulled = MetricField::pullback_rigid(flat, q, vec![1.0, 2.0, 0.0]).unwrap();
        let jet = pulled.jet(&[3.0, -1.0, 2.0]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((jet.g.at(i, j) - expect).abs() < 1e-14);
                for k in 0..3 {
                    assert!(jet.dg[k].at(i, j).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn doubled_metric_reflects_coefficients() {
        let mut a = SymTensorField::zeros(3);
        a.set(0, 2, Arc::new(parse_scalar_field("0.05*x1*x3/r^3", 3).unwrap()) as FieldRef);
        let g = MetricField::perturbation(3, a, 1.0).unwrap();
        let d = g.double(4.0).unwrap();
        let up = d.jet(&[2.0, 1.0, 0.7]).unwrap();
        let dn = d.jet(&[2.0, 1.0, -0.7]).unwrap();
        // tangential block matches, mixed components flip sign
        assert!((up.g.at(0, 0) - dn.g.at(0, 0)).abs() < 1e-15);
        assert!((up.g.at(0, 2) + dn.g.at(0, 2)).abs() < 1e-15);
        // induced metrics from the sheets agree on the gluing hypersurface
        assert!(d.sheet_agreement(32).unwrap() < 1e-15);
    }

    #[test]
    fn decay_report_tracks_half_schwarzschild() {
        let g = MetricField::half_schwarzschild(3, 1.0).unwrap();
        let rep = g.decay_report().unwrap();
        assert!((rep.fitted[0] - 1.0).abs() < 0.1, "fitted {:?}", rep.fitted);
        assert!((rep.fitted[1] - 2.0).abs() < 0.15);
        assert!((rep.fitted[2] - 3.0).abs() < 0.2);
        // weighted sups stable under radius doubling
        let sups = g.weighted_decay_sups().unwrap();
        for w in sups.windows(2) {
            for c in 0..3 {
                assert!(w[1][c] < w[0][c] * 1.5 + 1e-12);
            }
        }
    }
}
