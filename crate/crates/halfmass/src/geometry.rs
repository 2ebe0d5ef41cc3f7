//! Pointwise tensor calculus from exact metric jets: Christoffel symbols,
//! Ricci and scalar curvature, boundary normal / shape operator / mean
//! curvature, the ADM mass density, and asymptotic-expansion residuals.
//!
//! Index conventions follow the half-space setup: α, β range over 1..n-1
//! tangent to Σ = {x_n = 0}, ∂_n points inwards, and the outward unit normal
//! is η = -(g^{nn})^{-1/2} g^{ni} ∂_i, so H = div η is zero on totally
//! geodesic boundaries (half-Schwarzschild is the sign fixture).

use crate::expr::EvalError;
use crate::linalg::{sym_index, SymMat};
use crate::metric::{MetricField, MetricJet};
use crate::quadrature::HemisphereRule;
use crate::MAX_DIM;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("metric not invertible at {x:?}")]
    NotInvertible { x: Vec<f64> },
    #[error("point {x:?} is outside the region of validity (r ≥ {r0})")]
    OutsideRegion { x: Vec<f64>, r0: f64 },
    #[error("point {x:?} is not on the boundary Σ = {{x_n = 0}}")]
    NotOnBoundary { x: Vec<f64> },
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Quadrature(#[from] crate::quadrature::QuadratureError),
}

/// Curvature data at a point.
pub struct CurvaturePoint {
    pub x: Vec<f64>,
    /// christoffel[k] holds Γ^k_{ij}, symmetric in (i, j).
    pub christoffel: [SymMat; MAX_DIM],
    pub ricci: SymMat,
    pub scalar: f64,
    pub inverse_metric: SymMat,
}

/// Boundary data at a point of Σ.
pub struct BoundaryPoint {
    pub x: Vec<f64>,
    /// Outward unit normal components η^i.
    pub eta: [f64; MAX_DIM],
    /// Shape operator A_{αβ} of Σ, an (n-1)×(n-1) symmetric matrix.
    pub shape: SymMat,
    /// Induced metric h_{αβ}.
    pub induced: SymMat,
    /// H = h^{αβ} A_{αβ}.
    pub mean_curvature: f64,
    /// The closed first-derivative route ½ (g^{nn})^{1/2} h^{αβ} (2 g_{nα,β}
    /// - g_{αβ,n}), which avoids the Christoffel symbols entirely. In
    /// coordinates adapted at the point (h = δ there) this is the familiar
    /// ½ (g^{nn})^{1/2} (2 g_{nα,α} - g_{αα,n}); it is an exact identity with
    /// the trace route wherever g_{αn} = 0 on Σ.
    pub mean_curvature_closed: f64,
}

fn check_region(g: &MetricField, x: &[f64]) -> Result<(), GeometryError> {
    let r = crate::linalg::norm(x);
    if r < g.r0 * (1.0 - 1e-9) || x[g.n - 1] < -1e-12 * (1.0 + r) {
        return Err(GeometryError::OutsideRegion { x: x.to_vec(), r0: g.r0 });
    }
    Ok(())
}

/// Christoffel symbols, Ricci and scalar curvature at x, all from exact
/// first and second coefficient derivatives (no nested finite differencing).
pub fn curvature_at(g: &MetricField, x: &[f64]) -> Result<CurvaturePoint, GeometryError> {
    check_region(g, x)?;
    let jet = g.jet(x)?;
    curvature_from_jet(&jet).map(|mut c| {
        c.x = x.to_vec();
        c
    })
}

pub fn curvature_from_jet(jet: &MetricJet) -> Result<CurvaturePoint, GeometryError> {
    let n = jet.n;
    let ginv = jet.g.inverse().map_err(|_| GeometryError::NotInvertible { x: vec![] })?;

    // Christoffel symbols of the first kind Γ_{l,ij} and their derivatives
    let gamma_fst = |l: usize, i: usize, j: usize| -> f64 {
        0.5 * (jet.dg[j].at(i, l) + jet.dg[i].at(j, l) - jet.dg[l].at(i, j))
    };
    // ∂_m Γ_{l,ij} from second derivatives
    let dgamma_fst = |l: usize, i: usize, j: usize, m: usize| -> f64 {
        0.5 * (jet.d2g[sym_index(n, j, m)].at(i, l) + jet.d2g[sym_index(n, i, m)].at(j, l)
            - jet.d2g[sym_index(n, l, m)].at(i, j))
    };

    let mut christoffel = [SymMat::zeros(n); MAX_DIM];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += ginv.at(k, l) * gamma_fst(l, i, j);
                }
                *christoffel[k].at_mut(i, j) = s;
            }
        }
    }

    // ∂_m g^{kl} = -g^{ka} g_{ab,m} g^{bl}
    let dginv = |k: usize, l: usize, m: usize| -> f64 {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s -= ginv.at(k, a) * jet.dg[m].at(a, b) * ginv.at(b, l);
            }
        }
        s
    };
    // ∂_m Γ^k_{ij}
    let dgamma = |k: usize, i: usize, j: usize, m: usize| -> f64 {
        let mut s = 0.0;
        for l in 0..n {
            s += dginv(k, l, m) * gamma_fst(l, i, j) + ginv.at(k, l) * dgamma_fst(l, i, j, m);
        }
        s
    };

    // R_ij = ∂_k Γ^k_{ij} - ∂_i Γ^k_{kj} + Γ^k_{km} Γ^m_{ij} - Γ^k_{im} Γ^m_{kj}
    let mut ricci = SymMat::zeros(n);
    for i in 0..n {
        for j in i..n {
            let mut s = 0.0;
            for k in 0..n {
                s += dgamma(k, i, j, k) - dgamma(k, k, j, i);
                for m in 0..n {
                    s += christoffel[k].at(k, m) * christoffel[m].at(i, j)
                        - christoffel[k].at(i, m) * christoffel[m].at(k, j);
                }
            }
            *ricci.at_mut(i, j) = s;
        }
    }
    let mut scalar = 0.0;
    for i in 0..n {
        for j in 0..n {
            scalar += ginv.at(i, j) * ricci.at(i, j);
        }
    }

    Ok(CurvaturePoint { x: vec![], christoffel, ricci, scalar, inverse_metric: ginv })
}

/// Boundary normal, shape operator, induced metric an mean curvature at a
/// point of Σ.
pub fn boundary_at(g: &MetricField, x: &[f64]) -> Result<BoundaryPoint, GeometryError> {
    let n = g.n;
    let r = crate::linalg::norm(x);
    if x[n - 1].abs() > 1e-12 * (1.0 + r) {
        return Err(GeometryError::NotOnBoundary { x: x.to_vec() });
    }
    check_region(g, x)?;
    let jet = g.jet(x)?;
    boundary_from_jet(&jet).map(|mut b| {
        b.x = x.to_vec();
        b
    })
}

pub fn boundary_from_jet(jet: &MetricJet) -> Result<BoundaryPoint, GeometryError> {
    let n = jet.n;
    let ginv = jet.g.inverse().map_err(|_| GeometryError::NotInvertible { x: vec![] })?;
    let gnn = ginv.at(n - 1, n - 1);
    let s = gnn.sqrt();

    let mut eta = [0.0; MAX_DIM];
    for i in 0..n {
        eta[i] = -ginv.at(n - 1, i) / s;
    }

    // Γ^n_{αβ} without assembling the full symbol table
    let gamma_fst = |l: usize, i: usize, j: usize| -> f64 {
        0.5 * (jet.dg[j].at(i, l) + jet.dg[i].at(j, l) - jet.dg[l].at(i, j))
    };
    let mut shape = SymMat::zeros(n - 1);
    for a in 0..n - 1 {
        for b in a..n - 1 {
            let mut gn = 0.0;
            for l in 0..n {
                gn += ginv.at(n - 1, l) * gamma_fst(l, a, b);
            }
            *shape.at_mut(a, b) = gn / s;
        }
    }

    let mut induced = SymMat::zeros(n - 1);
    for a in 0..n - 1 {
        for b in a..n - 1 {
            *induced.at_mut(a, b) = jet.g.at(a, b);
        }
    }
    let hinv = induced.inverse().map_err(|_| GeometryError::NotInvertible { x: vec![] })?;
    let mut mean = 0.0;
    for a in 0..n - 1 {
        for b in 0..n - 1 {
            mean += hinv.at(a, b) * shape.at(a, b);
        }
    }

    let mut closed = 0.0;
    for a in 0..n - 1 {
        for b in 0..n - 1 {
            closed += hinv.at(a, b) * (2.0 * jet.dg[b].at(n - 1, a) - jet.dg[n - 1].at(a, b));
        }
    }
    closed *= 0.5 * s;

    Ok(BoundaryPoint {
        x: vec![],
        eta,
        shape,
        induced,
        mean_curvature: mean,
        mean_curvature_closed: closed,
    })
}

/// The ADM mass density 𝒞_i = g_{ij,j} - g_{jj,i}.
pub fn mass_density(g: &MetricField, x: &[f64]) -> Result<[f64; MAX_DIM], GeometryError> {
    check_region(g, x)?;
    Ok(mass_density_from_jet(&g.jet(x)?))
}

pub fn mass_density_from_jet(jet: &MetricJet) -> [f64; MAX_DIM] {
    let n = jet.n;
    let mut c = [0.0; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            c[i] += jet.dg[j].at(i, j) - jet.dg[i].at(j, j);
        }
    }
    c
}

/// Divergence 𝒞_{i,i} = g_{ij,ji} - g_{jj,ii} from exact second derivatives.
pub fn mass_density_divergence(jet: &MetricJet) -> f64 {
    let n = jet.n;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += jet.d2g[sym_index(n, i, j)].at(i, j) - jet.d2g[sym_index(n, i, i)].at(j, j);
        }
    }
    s
}

/// Sup residuals of the two asymptotic expansions at radius r:
/// Θ = R - 𝒞_{i,i} over the hemisphere and
/// Θ' = H - ½(-⟨𝒞,η⟩ + g_{nα,α}) over the equator.
pub struct ExpansionResiduals {
    pub theta_sup: f64,
    pub theta_prime_sup: f64,
}

pub fn expansion_residuals(
    g: &MetricField,
    r: f64,
    order: usize,
) -> Result<ExpansionResiduals, GeometryError> {
    assert!(r >= 2.0 * g.r0, "expansion residuals need r ≥ 2 r0");
    let n = g.n;
    let rule = HemisphereRule::new(n, r, order)?;
    let mut theta_sup = 0.0f64;
    for i in 0..rule.nodes.len() {
        let x = rule.nodes.node(i);
        let jet = g.jet(x)?;
        let curv = curvature_from_jet(&jet)?;
        let div = mass_density_divergence(&jet);
        theta_sup = theta_sup.max((curv.scalar - div).abs());
    }
    let mut theta_prime_sup = 0.0f64;
    for i in 0..rule.equator.len() {
        let x = rule.equator.node(i);
        let jet = g.jet(x)?;
        let b = boundary_from_jet(&jet)?;
        let c = mass_density_from_jet(&jet);
        let mut c_eta = 0.0;
        for k in 0..n {
            c_eta += c[k] * b.eta[k];
        }
        let mut g_na_a = 0.0;
        for a in 0..n - 1 {
            g_na_a += jet.dg[a].at(n - 1, a);
        }
        let expansion = 0.5 * (-c_eta + g_na_a);
        theta_prime_sup = theta_prime_sup.max((b.mean_curvature - expansion).abs());
    }
    Ok(ExpansionResiduals { theta_sup, theta_prime_sup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_scalar_field;
    use crate::fields::FieldRef;
    use crate::metric::SymTensorField;
    use rand::Rng;
    use rand::SeedableRng;
    use std::sync::Arc;

    fn random_point(rng: &mut impl Rng, n: usize, rmin: f64, rmax: f64) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..n)
                .map(|i| {
                    if i == n - 1 {
                        rng.gen_range(0.0..rmax)
                    } else {
                        rng.gen_range(-rmax..rmax)
                    }
                })
                .collect();
            let r = crate::linalg::norm(&x);
            if r >= rmin && r <= rmax {
                return x;
            }
        }
    }

    #[test]
    fn flat_annihilation_at_random_points() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = MetricField::flat_half_space(3).unwrap();
        for _ in 0..200 {
            let x = random_point(&mut rng, 3, 1.5, 50.0);
            let c = curvature_at(&g, &x).unwrap();
            assert!(c.scalar.abs() <= 1e-13);
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        assert!(c.christoffel[k].at(i, j).abs() <= 1e-13);
                    }
                    assert!(c.ricci.at(k, i).abs() <= 1e-13);
                }
            }
            let d = mass_density(&g, &x).unwrap();
            assert!(d.iter().all(|v| v.abs() <= 1e-13));
        }
    }

    #[test]
    fn flat_boundary_data() {
        let g = MetricField::flat_half_space(3).unwrap();
        let b = boundary_at(&g, &[1.0, 0.0, 0.0]).unwrap();
        assert!((b.eta[2] + 1.0).abs() < 1e-15);
        assert!(b.eta[0].abs() < 1e-15 && b.eta[1].abs() < 1e-15);
        assert!(b.mean_curvature.abs() < 1e-15);
        assert!(b.mean_curvature_closed.abs() < 1e-15);
        for a in 0..2 {
            for bb in 0..2 {
                assert!(b.shape.at(a, bb).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn half_schwarzschild_is_scalar_flat_with_geodesic_boundary() {
        let g = MetricField::half_schwarzschild(3, 1.0).unwrap();
        let c = curvature_at(&g, &[0.0, 0.0, 3.0]).unwrap();
        assert!(c.scalar.abs() < 1e-10, "scalar = {}", c.scalar);
        let b = boundary_at(&g, &[2.0, 0.0, 0.0]).unwrap();
        assert!(b.mean_curvature.abs() < 1e-10, "H = {}", b.mean_curvature);
        assert!(b.mean_curvature_closed.abs() < 1e-10);
        // normal is unit: g_ij η^i η^j = 1
        let jet = g.jet(&[2.0, 0.0, 0.0]).unwrap();
        let mut norm2 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                norm2 += jet.g.at(i, j) * b.eta[i] * b.eta[j];
            }
        }
        assert!((norm2 - 1.0).abs() < 1e-12);
        // in higher dimension too
        let g = MetricField::half_schwarzschild(5, 0.7).unwrap();
        let c = curvature_at(&g, &[0.0, 1.0, 0.0, 0.0, 2.0]).unwrap();
        assert!(c.scalar.abs() < 1e-10);
    }

    #[test]
    fn round_sphere_scalar_curvature_fixes_the_sign_convention() {
        // stereographic metric 4/(1+r²)² δ on ℝ³ has R = n(n-1) = 6
        let flat = MetricField::flat_half_space(3).unwrap();
        let u: FieldRef =
            Arc::new(parse_scalar_field("sqrt(2/(1+r^2))", 3).unwrap());
        let g = MetricField::conformal(flat, u).unwrap();
        let c = curvature_at(&g, &[1.0, 0.5, 1.0]).unwrap();
        assert!((c.scalar - 6.0).abs() < 1e-9, "R = {}", c.scalar);
    }

    #[test]
    fn conformal_scalar_curvature_law() {
        // R = -a_n u^{-(n+2)/(n-2)} Δu for g = u^{4/(n-2)} δ
        let flat = MetricField::flat_half_space(3).unwrap();
        let expr = parse_scalar_field("1 + r^(-2)", 3).unwrap();
        let u: FieldRef = Arc::new(expr.clone());
        let g = MetricField::conformal(flat, u).unwrap();
        let x = [0.0, 0.0, 2.0];
        let c = curvature_at(&g, &x).unwrap();
        let uj = expr.eval_jet(&x).unwrap();
        let a3 = 8.0; // 4(n-1)/(n-2) at n = 3
        let expect = -a3 * uj.value.powf(-5.0) * uj.laplacian();
        assert!(
            (c.scalar - expect).abs() <= 1e-8 * expect.abs(),
            "R = {} expected {}",
            c.scalar,
            expect
        );
        // frozen closed-form value: Δ(r^{-2}) = 2 r^{-4}, u = 1.25 at r = 2
        let frozen = -8.0 * 1.25f64.powf(-5.0) * (2.0 / 16.0);
        assert!((expect - frozen).abs() < 1e-14);
    }

    #[test]
    fn conformal_boundary_mean_curvature_law() {
        // H = b_n u^{-n/(n-2)} ∂u/∂η for g = u^{4/(n-2)} δ, η = -e_n at flat
        let flat = MetricField::flat_half_space(3).unwrap();
        let expr = parse_scalar_field("1 + 0.3/r + 0.1*x3/r^2", 3).unwrap();
        let u: FieldRef = Arc::new(expr.clone());
        let g = MetricField::conformal(flat, u).unwrap();
        let x = [2.0, 1.0, 0.0];
        let b = boundary_at(&g, &x).unwrap();
        let uj = expr.eval_jet(&x).unwrap();
        let b3 = 4.0; // 2(n-1)/(n-2) at n = 3
        let expect = b3 * uj.value.powf(-3.0) * (-uj.grad(2));
        let rel = (b.mean_curvature - expect).abs() / (1.0 + expect.abs());
        assert!(rel <= 1e-8, "H = {} expected {}", b.mean_curvature, expect);
        // trace and closed-formula routes agree (boundary-orthogonal metric)
        let rel2 = (b.mean_curvature - b.mean_curvature_closed).abs()
            / (1.0 + b.mean_curvature.abs());
        assert!(rel2 <= 1e-10);
    }

    #[test]
    fn perturbation_mean_curvature_linearization() {
        // a11 = ε x3/r²: H at (1,0,0) ≈ -½ ∂₃ a11 = -ε/2, linear in ε
        let h_of = |eps: f64| -> f64 {
            let mut a = SymTensorField::zeros(3);
            let f = parse_scalar_field(&format!("{eps}*x3/r^2"), 3).unwrap();
            a.set(0, 0, Arc::new(f) as FieldRef);
            let g = MetricField::perturbation(3, a, 1.0).unwrap();
            boundary_at(&g, &[1.0, 0.0, 0.0]).unwrap().mean_curvature
        };
        let e1 = 1e-4;
        let e2 = 1e-5;
        let h1 = h_of(e1);
        let h2 = h_of(e2);
        assert!((h1 - (-0.5 * e1)).abs() < 1e-2 * e1, "h1 = {h1}");
        assert!((h2 - (-0.5 * e2)).abs() < 1e-2 * e2);
        // linearity of the ratio
        assert!((h1 / h2 - 10.0).abs() < 1e-2);
    }

    #[test]
    fn mass_density_conformally_flat_closed_form() {
        // g = u⁴δ (n=3), u = 1+C/r: ⟨𝒞, x/r⟩ = 8 u³ C/r²
        let c0 = 0.35;
        let flat = MetricField::flat_half_space(3).unwrap();
        let u: FieldRef = Arc::new(parse_scalar_field(&format!("1+{c0}/r"), 3).unwrap());
        let g = MetricField::conformal(flat, u).unwrap();
        for x in [[3.0, 0.0, 1.0], [0.0, 0.0, 5.0], [2.0, -2.0, 1.0]] {
            let r = crate::linalg::norm(&x);
            let c = mass_density(&g, &x).unwrap();
            let radial: f64 = (0..3).map(|i| c[i] * x[i] / r).sum();
            let u_val = 1.0 + c0 / r;
            let expect = 8.0 * u_val.powi(3) * c0 / (r * r);
            assert!(
                (radial - expect).abs() < 1e-12 * expect.abs().max(1.0),
                "radial = {radial} expect {expect}"
            );
        }
    }

    #[test]
    fn mass_density_ignores_constant_offsets() {
        // constant a: derivatives vanish identically; the honest declared
        // decay for a constant is the τ the sampler will accept, 0.25
        let mut a = SymTensorField::zeros(3);
        a.set(0, 1, crate::fields::constant(3, 0.05));
        let g = MetricField::perturbation(3, a, 0.25).unwrap();
        let c = mass_density(&g, &[2.0, 1.0, 1.0]).unwrap();
        assert!(c.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn trace_and_closed_mean_curvature_agree_on_boundary_orthogonal_samples() {
        // a diagonal perturbation keeps g_{αn} = 0 on Σ
        let mut a = SymTensorField::zeros(3);
        a.set(0, 0, Arc::new(parse_scalar_field("0.2*x3/r^2 + 0.1/r", 3).unwrap()) as FieldRef);
        a.set(1, 1, Arc::new(parse_scalar_field("0.1*x1/r^2", 3).unwrap()) as FieldRef);
        let g = MetricField::perturbation(3, a, 1.0).unwrap();
        assert!(g.boundary_orthogonal);
        let rule = HemisphereRule::new(3, 4.0, 8).unwrap();
        for i in 0..rule.equator.len() {
            let x = rule.equator.node(i);
            let b = boundary_at(&g, x).unwrap();
            let rel = (b.mean_curvature - b.mean_curvature_closed).abs()
                / (1.0 + b.mean_curvature.abs());
            assert!(rel < 1e-10, "trace {} closed {}", b.mean_curvature, b.mean_curvature_closed);
        }
    }

    #[test]
    fn rigid_motion_covariance_of_curvature() {
        let mut a = SymTensorField::zeros(3);
        a.set(0, 0, Arc::new(parse_scalar_field("0.3/r", 3).unwrap()) as FieldRef);
        a.set(0, 1, Arc::new(parse_scalar_field("0.1*x2/r^2", 3).unwrap()) as FieldRef);
        let g = MetricField::perturbation(3, a, 1.0).unwrap();
        let th = 1.1f64;
        let mut q = crate::linalg::Mat::identity(3);
        *q.at_mut(0, 0) = th.cos();
        *q.at_mut(0, 1) = -th.sin();
        *q.at_mut(1, 0) = th.sin();
        *q.at_mut(1, 1) = th.cos();
        let b = vec![0.4, -0.2, 0.0];
        let pulled = MetricField::pullback_rigid(g.clone(), q.clone(), b.clone()).unwrap();
        for x in [[3.0, 1.0, 2.0], [5.0, 0.0, 0.5]] {
            let mut y = vec![0.0; 3];
            for a_ in 0..3 {
                y[a_] = b[a_];
                for i in 0..3 {
                    y[a_] += q.at(a_, i) * x[i];
                }
            }
            let c1 = curvature_at(&pulled, &x).unwrap();
            let c2 = curvature_at(&g, &y).unwrap();
            let rel = (c1.scalar - c2.scalar).abs() / (1.0 + c2.scalar.abs());
            assert!(rel < 1e-10, "scalar {} vs {}", c1.scalar, c2.scalar);
        }
    }

    #[test]
    fn expansion_residuals_flat_and_decay() {
        let flat = MetricField::flat_half_space(3).unwrap();
        let res = expansion_residuals(&flat, 8.0, 8).unwrap();
        assert_eq!(res.theta_sup, 0.0);
        assert_eq!(res.theta_prime_sup, 0.0);

        // half-Schwarzschild: Θ ~ r^{-4} so dyadic ratio ≈ 2^{-4}
        let g = MetricField::half_schwarzschild(3, 1.0).unwrap();
        let t1 = expansion_residuals(&g, 16.0, 8).unwrap().theta_sup;
        let t2 = expansion_residuals(&g, 32.0, 8).unwrap().theta_sup;
        let ratio = t2 / t1;
        assert!((ratio - 1.0 / 16.0).abs() < 0.015, "ratio = {ratio}");
    }
}
