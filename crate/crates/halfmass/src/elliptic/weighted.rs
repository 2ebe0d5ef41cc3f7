//! Weighted-norm diagnostics: sampled C^k_γ sups on dyadic shells, an
//! integral-mode L^q norm, and the asymptotic-coefficient fit
//! u = u∞ + C r^{2-n} + O(r^{1-n}).

use crate::expr::EvalError;
use crate::fields::ScalarField;
use crate::fitting::fit_log_decay;
use crate::linalg::norm;
use crate::quadrature::{composite_gauss, HemisphereRule, QuadratureError};

#[derive(Debug, thiserror::Error)]
pub enum WeightedError {
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("derivative order k ≤ 2 required, got {0}")]
    BadOrder(usize),
}

/// Shell sampling specification for the weighted norms.
#[derive(Clone, Debug)]
pub struct ShellSpec {
    pub r_first: f64,
    pub r_last: f64,
    pub shells: usize,
    pub order: usize,
}

impl Default for ShellSpec {
    fn default() -> Self {
        ShellSpec { r_first: 4.0, r_last: 64.0, shells: 5, order: 8 }
    }
}

impl ShellSpec {
    /// Geometrically spaced shell radii from r_first to r_last.
    pub fn radii(&self) -> Vec<f64> {
        let m = self.shells.max(2);
        (0..m)
            .map(|j| {
                self.r_first
                    * (self.r_last / self.r_first).powf(j as f64 / (m as f64 - 1.0))
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct WeightedNormReport {
    pub gamma: f64,
    pub k: usize,
    /// max over shells of Σ_{i≤k} r^{-γ+i} |∇^i u|; infinite when the
    /// per-shell sups grow with the radius.
    pub estimated_norm: f64,
    /// Fitted decay exponent of sup |u| on the shells.
    pub fitted_decay: f64,
    pub diverging: bool,
    /// Per-shell (radius, weighted sup).
    pub shell_sups: Vec<(f64, f64)>,
}

/// Sampled ‖u‖_{C^k_γ} over dyadic hemispheres r_first·2^j.
pub fn weighted_norm(
    u: &dyn ScalarField,
    gamma: f64,
    k: usize,
    spec: &ShellSpec,
) -> Result<WeightedNormReport, WeightedError> {
    if k > 2 {
        return Err(WeightedError::BadOrder(k));
    }
    let n = u.dim();
    let mut shell_sups = Vec::new();
    let mut raw_sups = Vec::new();
    let mut radii = Vec::new();
    for r in spec.radii() {
        let rule = HemisphereRule::new(n, r, spec.order)?;
        let mut sup = 0.0f64;
        let mut sup_u = 0.0f64;
        let mut consider = |x: &[f64]| -> Result<(), WeightedError> {
            let jet = u.jet(x)?;
            let mut total = r.powf(-gamma) * jet.value.abs();
            if k >= 1 {
                let g = norm(&jet.gradient_vec());
                total += r.powf(-gamma + 1.0) * g;
            }
            if k >= 2 {
                let mut frob = 0.0;
                for i in 0..n {
                    for l in 0..n {
                        frob += jet.hess(i, l) * jet.hess(i, l);
                    }
                }
                total += r.powf(-gamma + 2.0) * frob.sqrt();
            }
            sup = sup.max(total);
            sup_u = sup_u.max(jet.value.abs());
            Ok(())
        };
        for i in (0..rule.nodes.len()).step_by(2) {
            consider(rule.nodes.node(i))?;
        }
        for i in (0..rule.equator.len()).step_by(2) {
            consider(rule.equator.node(i))?;
        }
        shell_sups.push((r, sup));
        raw_sups.push(sup_u);
        radii.push(r);
    }
    // divergence flag: weighted sups strictly increasing over the last shells
    let m = shell_sups.len();
    let diverging = m >= 3
        && shell_sups[m - 1].1 > shell_sups[m - 2].1 * 1.05
        && shell_sups[m - 2].1 > shell_sups[m - 3].1 * 1.05;
    let estimated_norm = if diverging {
        f64::INFINITY
    } else {
        shell_sups.iter().map(|p| p.1).fold(0.0, f64::max)
    };
    let (fitted_decay, _) = fit_log_decay(&radii, &raw_sups, 1e-250);
    Ok(WeightedNormReport { gamma, k, estimated_norm, fitted_decay, diverging, shell_sups })
}

/// Integral-mode weighted Lebesgue norm
/// ‖u‖_{q,0,β} = (∫ |r^{-β} u|^q r^{-n} dV)^{1/q} over the annulus
/// [r_first, r_first·2^shells], with the flat coordinate volume.
pub fn lq_norm(
    u: &dyn ScalarField,
    q: f64,
    beta: f64,
    spec: &ShellSpec,
) -> Result<f64, WeightedError> {
    let n = u.dim();
    let radial = composite_gauss(8, 4 * spec.shells.max(1), spec.r_first, spec.r_last);
    let shell = HemisphereRule::new(n, 1.0, spec.order)?;
    let mut acc = 0.0;
    for (&r, &wr) in radial.nodes.iter().zip(&radial.weights) {
        for i in 0..shell.nodes.len() {
            let xi = shell.nodes.node(i);
            let x: Vec<f64> = xi.iter().map(|c| c * r).collect();
            let v = u.value(&x)?;
            acc += wr
                * shell.nodes.weights[i]
                * r.powi(n as i32 - 1)
                * (r.powf(-beta) * v.abs()).powf(q)
                * r.powf(-(n as f64));
        }
    }
    Ok(acc.powf(1.0 / q))
}

/// Least-squares fit of (u - u∞)·r^{n-2} over dyadic shells.
#[derive(Clone, Debug)]
pub struct CoefficientEstimate {
    pub coefficient: f64,
    /// Relative spread of the per-shell estimates; flagged above 5%.
    pub relative_residual: f64,
    pub flagged: bool,
    pub shell_means: Vec<(f64, f64)>,
}

/// Fit C in u = u∞ + C r^{2-n} + O(r^{1-n}) by averaging (u-u∞) r^{n-2}
/// over dyadic shells; `sample` is any point evaluator (an interpolated grid
/// solution or a closed-form field).
pub fn asymptotic_coefficient<F>(
    sample: F,
    u_infinity: f64,
    n: usize,
    spec: &ShellSpec,
) -> Result<CoefficientEstimate, WeightedError>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    let mut shell_means = Vec::new();
    for r in spec.radii() {
        let rule = HemisphereRule::new(n, r, spec.order)?;
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..rule.nodes.len() {
            let x = rule.nodes.node(i);
            if let Some(v) = sample(x) {
                acc += (v - u_infinity) * r.powi(n as i32 - 2);
                count += 1;
            }
        }
        if count > 0 {
            shell_means.push((r, acc / count as f64));
        }
    }
    let m = shell_means.len().max(1) as f64;
    let coefficient = shell_means.iter().map(|p| p.1).sum::<f64>() / m;
    let spread = shell_means
        .iter()
        .map(|p| (p.1 - coefficient).abs())
        .fold(0.0, f64::max);
    let relative_residual = if coefficient.abs() > 1e-14 { spread / coefficient.abs() } else { spread };
    Ok(CoefficientEstimate {
        coefficient,
        relative_residual,
        flagged: relative_residual > 0.05,
        shell_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_scalar_field;

    #[test]
    fn weighted_norm_of_inverse_radius() {
        // u = r^{-1}, γ = -1, k = 1: |u| r¹ = 1 and |∇u| r² = 1, norm ≈ 2
        let u = parse_scalar_field("r^(-1)", 3).unwrap();
        let rep = weighted_norm(&u, -1.0, 1, &ShellSpec::default()).unwrap();
        assert!(!rep.diverging);
        assert!((rep.estimated_norm - 2.0).abs() < 1e-12, "norm {}", rep.estimated_norm);
        assert!((rep.fitted_decay - 1.0).abs() < 1e-10);

        // wrong weight γ = -2 diverges with the outer radius
        let rep = weighted_norm(&u, -2.0, 0, &ShellSpec::default()).unwrap();
        assert!(rep.diverging);
        assert!(rep.estimated_norm.is_infinite());

        // zero field
        let z = parse_scalar_field("0*x1", 3).unwrap();
        let rep = weighted_norm(&z, -1.0, 2, &ShellSpec::default()).unwrap();
        assert_eq!(rep.estimated_norm, 0.0);
    }

    #[test]
    fn weighted_norm_monotonicity() {
        // nondecreasing in k, nonincreasing in γ (samples at r ≥ 1)
        let u = parse_scalar_field("(1 + 0.3*x1/r^2)/r", 3).unwrap();
        let spec = ShellSpec::default();
        let n01 = weighted_norm(&u, -1.0, 0, &spec).unwrap().estimated_norm;
        let n11 = weighted_norm(&u, -1.0, 1, &spec).unwrap().estimated_norm;
        let n21 = weighted_norm(&u, -1.0, 2, &spec).unwrap().estimated_norm;
        assert!(n01 <= n11 && n11 <= n21);
        let lo = weighted_norm(&u, -1.2, 1, &spec).unwrap().estimated_norm;
        assert!(lo >= n11);
    }

    #[test]
    fn lq_norm_of_a_power() {
        // |u| = r^{-2}, q = 2, β = -2: integrand |r^{2}·r^{-2}|²·... = r^{-n},
        // ∫ r^{-n} dV over the half annulus = ½ω₂ ln(r_out/r_in)
        let u = parse_scalar_field("r^(-2)", 3).unwrap();
        let spec = ShellSpec { r_first: 2.0, r_last: 16.0, shells: 3, order: 8 };
        let v = lq_norm(&u, 2.0, -2.0, &spec).unwrap();
        let expect = (0.5 * crate::sphere_area(2) * (8.0f64).ln()).sqrt();
        assert!((v - expect).abs() < 1e-9 * expect, "{v} vs {expect}");
    }

    #[test]
    fn coefficient_of_exact_monopole() {
        let u = parse_scalar_field("1 + 0.5/r", 3).unwrap();
        let est = asymptotic_coefficient(
            |x| u.eval(x).ok(),
            1.0,
            3,
            &ShellSpec { r_first: 8.0, r_last: 16.0, shells: 4, order: 8 },
        )
        .unwrap();
        assert!((est.coefficient - 0.5).abs() < 1e-12);
        assert!(!est.flagged);

        // zero coefficient stays at fit-noise scale
        let z = parse_scalar_field("1 + 0*x1", 3).unwrap();
        let est = asymptotic_coefficient(
            |x| z.eval(x).ok(),
            1.0,
            3,
            &ShellSpec { r_first: 8.0, r_last: 16.0, shells: 4, order: 8 },
        )
        .unwrap();
        assert!(est.coefficient.abs() < 1e-13);
    }
}
