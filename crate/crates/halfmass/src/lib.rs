//! Numerical toolkit for the mass invariant of asymptotically flat manifolds
//! with a non-compact boundary.
//!
//! The model space is the flat half-space `ℝⁿ₊ = {x_n ≥ 0}`; a metric in this
//! class approaches `δ` at rate `r^{-τ}` on the exterior region `r ≥ r0`. The
//! crate evaluates the mass
//!
//! ```text
//! 𝔪 = lim_{r→∞} [ ∫_{S^{n-1}_{r,+}} (g_{ij,j} - g_{jj,i}) μ^i dS + ∫_{S^{n-2}_r} g_{αn} ϑ^α dS ]
//! ```
//!
//! together with the pointwise curvature machinery behind it, the doubling
//! construction across `x_n = 0`, a variational identity check, and a
//! conformal-flattening pipeline backed by a finite-difference solver on a
//! truncated half-annulus with an independent method-of-images oracle.
//!
//! Modules follow the pipeline order:
//!
//! * [`expr`] — expression parser and exact second-order jets
//! * [`fields`] — scalar-field trait and programmatic fields (bumps, cutoffs)
//! * [`metric`] — metric families, conformal change, doubling, rigid pullback
//! * [`geometry`] — Christoffel/Ricci/scalar curvature, boundary data, mass density
//! * [`quadrature`] — hemisphere/equator/sphere rules and surface integrals
//! * [`mass`] — finite-radius mass samples, extrapolation, ADM mass of doubles
//! * [`elliptic`] — half-annulus grids, sparse solver, image-kernel oracle,
//!   conformal flattening, weighted-norm diagnostics
//! * [`cli`] — metric files, commands and machine-readable reports

pub mod cli;
pub mod elliptic;
pub mod expr;
pub mod fields;
pub mod fitting;
pub mod geometry;
pub mod linalg;
pub mod mass;
pub mod metric;
pub mod quadrature;

/// Largest ambient dimension handled by the stack-allocated tensor types.
pub const MAX_DIM: usize = 7;

/// Area of the unit sphere S^{d} ⊂ ℝ^{d+1}.
///
/// `sphere_area(n - 1)` is the ω_{n-1} appearing in the mass normalization.
pub fn sphere_area(d: usize) -> f64 {
    // ω_0 = 2, ω_1 = 2π, ω_d = (2π / (d-1)) ω_{d-2}.
    match d {
        0 => 2.0,
        1 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI / (d as f64 - 1.0) * sphere_area(d - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas_match_closed_forms() {
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
        assert!((sphere_area(5) - PI * PI * PI).abs() < 1e-13);
        assert!((sphere_area(6) - 16.0 * PI.powi(3) / 15.0).abs() < 1e-13);
    }
}
