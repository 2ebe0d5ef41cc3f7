//! Method-of-images Neumann kernel of the half-space,
//! φ(x, y) = |x - y|^{2-n} + |x - ỹ|^{2-n} with ỹ = (y₁..y_{n-1}, -y_n),
//! and the inversion map of the compactified exterior (an optional domain
//! mapping, not wired into the solver by default).

use crate::expr::{EvalError, Jet2};
use crate::linalg::norm;

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("kernel evaluated at coincident points (|x - y| = {dist:.3e})")]
    CoincidentPoints { dist: f64 },
}

/// φ(x, y); x and y in the closed half-space, x ∉ {y, ỹ}.
pub fn image_kernel(x: &[f64], y: &[f64], n: usize) -> Result<f64, KernelError> {
    let p = 2.0 - n as f64;
    let d1 = dist(x, y, false);
    let d2 = dist(x, y, true);
    let tol = 1e-12 * (1.0 + norm(x).max(norm(y)));
    if d1 < tol || d2 < tol {
        return Err(KernelError::CoincidentPoints { dist: d1.min(d2) });
    }
    Ok(d1.powf(p) + d2.powf(p))
}

/// ∂φ/∂x_i; the normal derivative ∂φ/∂x_n vanishes identically on x_n = 0.
pub fn image_kernel_grad_x(x: &[f64], y: &[f64], n: usize) -> Result<Vec<f64>, KernelError> {
    let p = 2.0 - n as f64;
    let d1 = dist(x, y, false);
    let d2 = dist(x, y, true);
    let tol = 1e-12 * (1.0 + norm(x).max(norm(y)));
    if d1 < tol || d2 < tol {
        return Err(KernelError::CoincidentPoints { dist: d1.min(d2) });
    }
    let mut g = vec![0.0; n];
    for i in 0..n {
        let yi = y[i];
        let yi_ref = if i == n - 1 { -y[i] } else { y[i] };
        g[i] = p * d1.powf(p - 2.0) * (x[i] - yi) + p * d2.powf(p - 2.0) * (x[i] - yi_ref);
    }
    Ok(g)
}

/// Jet of y ↦ φ(x, y) at fixed source x: the oracle differentiates the
/// representation formula through the kernel, so solutions come back with
/// exact-quadrature gradients and Hessians.
pub fn image_kernel_jet_y(x: &[f64], y: &[f64], n: usize) -> Result<Jet2, EvalError> {
    // |y - x|^{2-n} as a jet in y
    let term = |reflect: bool| -> Result<Jet2, EvalError> {
        let mut diff = vec![0.0; n];
        for i in 0..n {
            let xi = if reflect && i == n - 1 { -x[i] } else { x[i] };
            diff[i] = y[i] - xi;
        }
        let r = Jet2::radius(&diff)?;
        // gradient/hessian of r(y - x) in y equal those of r at the shifted point
        r.powf(2.0 - n as f64)
    };
    Ok(term(false)?.add(&term(true)?))
}

fn dist(x: &[f64], y: &[f64], reflect: bool) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        let yi = if reflect && i == n - 1 { -y[i] } else { y[i] };
        let d = x[i] - yi;
        s += d * d;
    }
    s.sqrt()
}

/// The inversion x ↦ x/|x|² mapping the exterior region onto a punctured
/// half-ball; it extends to a coordinate system at the puncture.
pub fn invert_point(x: &[f64]) -> Vec<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    x.iter().map(|v| v / r2).collect()
}

/// Kelvin transform (K u)(x) = |x|^{2-n} u(x/|x|²); harmonic functions map to
/// harmonic functions and the half-space maps to itself, preserving Neumann
/// data on the boundary.
pub fn kelvin_transform<F>(u: F, n: usize) -> impl Fn(&[f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    move |x: &[f64]| {
        let r = norm(x);
        r.powf(2.0 - n as f64) * u(&invert_point(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn kernel_value_example() {
        // n=3, x=(0,0,1), y=(0,0,2): 1/1 + 1/3 = 4/3
        let v = image_kernel(&[0.0, 0.0, 1.0], &[0.0, 0.0, 2.0], 3).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn coincident_points_error() {
        let y = [0.5, -0.25, 2.0];
        assert!(matches!(
            image_kernel(&y, &y, 3),
            Err(KernelError::CoincidentPoints { .. })
        ));
        // hitting the image point is just as singular
        let ytilde = [0.5, -0.25, -2.0];
        assert!(image_kernel(&ytilde, &y, 3).is_err());
    }

    #[test]
    fn neumann_property_on_the_boundary() {
        // ∂φ/∂x_n = 0 for x_n = 0 at 10⁴ random pairs
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let x = [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.0];
            let y = [
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(0.1..5.0),
            ];
            let g = image_kernel_grad_x(&x, &y, 3).unwrap();
            assert!(g[2].abs() <= 1e-12 * (1.0 + g[0].abs() + g[1].abs()), "∂φ/∂x_3 = {}", g[2]);
        }
    }

    #[test]
    fn kernel_jet_is_harmonic_in_y() {
        let x = [1.0, 0.5, 2.0];
        for y in [[0.0, 0.0, 1.0], [3.0, -1.0, 0.5], [-2.0, 2.0, 3.0]] {
            let j = image_kernel_jet_y(&x, &y, 3).unwrap();
            assert!(j.laplacian().abs() < 1e-12, "Δφ = {}", j.laplacian());
            let v = image_kernel(&y, &x, 3).unwrap(); // symmetric kernel
            assert!((j.value - v).abs() < 1e-13);
        }
    }

    #[test]
    fn kelvin_preserves_harmonicity_and_neumann_data() {
        // u = 1/|x - p| + 1/|x - p̃| harmonic away from p with ∂₃u|Σ = 0:
        // K u must be harmonic (checked by second differences) and keep
        // ∂₃(K u)|Σ = 0
        let p = [0.4, -0.2, 0.7];
        let u = move |x: &[f64]| image_kernel(x, &p, 3).unwrap();
        let ku = kelvin_transform(u, 3);
        let h = 1e-4;
        for x in [[0.3, 0.2, 0.25], [0.5, -0.1, 0.1], [-0.3, 0.3, 0.2]] {
            // second-difference Laplacian of K u
            let mut lap = 0.0;
            for ax in 0..3 {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[ax] += h;
                xm[ax] -= h;
                lap += (ku(&xp) - 2.0 * ku(&x) + ku(&xm)) / (h * h);
            }
            assert!(lap.abs() < 1e-4, "ΔKu = {lap} at {x:?}");
        }
        for x in [[0.3, 0.2, 0.0], [-0.2, 0.4, 0.0]] {
            let mut xp = x.to_vec();
            xp[2] += h;
            let mut xpp = x.to_vec();
            xpp[2] += 2.0 * h;
            let dn = (-3.0 * ku(&x) + 4.0 * ku(&xp) - ku(&xpp)) / (2.0 * h);
            assert!(dn.abs() < 1e-6, "∂₃Ku = {dn} at {x:?}");
        }
    }
}
