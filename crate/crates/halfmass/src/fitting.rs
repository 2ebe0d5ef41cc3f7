//! Power-law fits shared by the mass extrapolation and the decay diagnostics.

/// Least-squares fit of `v(r) = limit + c·r^{-s}` over the given samples.
///
/// The exponent is found by a coarse scan plus golden-section refinement of
/// the profiled residual; `limit` and `c` come from the 2×2 normal equations
/// at fixed `s`. The paper-style guarantee is convergence only, not a rate,
/// so `s` is fitted rather than assumed.
#[derive(Clone, Debug)]
pub struct PowerLawFit {
    pub limit: f64,
    pub coefficient: f64,
    /// Decay exponent `s` (positive for decaying corrections).
    pub exponent: f64,
    /// Root-mean-square residual of the fit.
    pub residual_rms: f64,
    /// max - min of the input samples.
    pub spread: f64,
    /// True when the samples were constant to machine scale and no power law
    /// was fitted.
    pub degenerate: bool,
}

pub fn fit_power_law(radii: &[f64], values: &[f64]) -> PowerLawFit {
    assert_eq!(radii.len(), values.len());
    assert!(radii.len() >= 3, "power-law fit needs at least 3 samples");
    let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = vmax - vmin;
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if spread <= 1e-12 * (1.0 + scale) {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        return PowerLawFit {
            limit: mean,
            coefficient: 0.0,
            exponent: f64::INFINITY,
            residual_rms: spread,
            spread,
            degenerate: true,
        };
    }

    let residual_at = |s: f64| -> (f64, f64, f64) {
        // basis { 1, r^{-s} }, profiled linear least squares
        let m = radii.len() as f64;
        let mut sb = 0.0;
        let mut sbb = 0.0;
        let mut sv = 0.0;
        let mut sbv = 0.0;
        for (&r, &v) in radii.iter().zip(values) {
            let b = r.powf(-s);
            sb += b;
            sbb += b * b;
            sv += v;
            sbv += b * v;
        }
        let det = m * sbb - sb * sb;
        if det.abs() < 1e-300 {
            return (f64::INFINITY, 0.0, 0.0);
        }
        let limit = (sbb * sv - sb * sbv) / det;
        let c = (m * sbv - sb * sv) / det;
        let mut rr = 0.0;
        for (&r, &v) in radii.iter().zip(values) {
            let e = v - limit - c * r.powf(-s);
            rr += e * e;
        }
        ((rr / m).sqrt(), limit, c)
    };

    // coarse scan in log-space, then golden-section refinement
    let (s_lo, s_hi) = (0.05f64, 24.0f64);
    let mut best_s = s_lo;
    let mut best_r = f64::INFINITY;
    let scan = 240;
    for i in 0..=scan {
        let s = s_lo * (s_hi / s_lo).powf(i as f64 / scan as f64);
        let (r, _, _) = residual_at(s);
        if r < best_r {
            best_r = r;
            best_s = s;
        }
    }
    let mut a = best_s / 1.15;
    let mut b = best_s * 1.15;
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = residual_at(x1).0;
    let mut f2 = residual_at(x2).0;
    for _ in 0..60 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = residual_at(x1).0;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = residual_at(x2).0;
        }
    }
    let s = 0.5 * (a + b);
    let (rms, limit, c) = residual_at(s);
    PowerLawFit {
        limit,
        coefficient: c,
        exponent: s,
        residual_rms: rms,
        spread,
        degenerate: false,
    }
}

/// Linear regression of `ln(value)` against `ln(r)`.
///
/// Returns the decay exponent `s` such that `value ~ C r^{-s}`, together with
/// the rms residual in log space. Values at or below `floor` are dropped; if
/// fewer than two survive, the decay is reported as `+∞` (faster than any
/// power — typically an identically-zero quantity).
pub fn fit_log_decay(radii: &[f64], values: &[f64], floor: f64) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > floor)
        .map(|(&r, &v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return (f64::INFINITY, 0.0);
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    let icept = (sy - slope * sx) / m;
    let rms = (pts.iter().map(|p| (p.1 - slope * p.0 - icept).powi(2)).sum::<f64>() / m).sqrt();
    (-slope, rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let radii = [20.0, 40.0, 80.0, 160.0];
        let values: Vec<f64> = radii.iter().map(|r| 5.0 + 3.0 / r).collect();
        let fit = fit_power_law(&radii, &values);
        assert!((fit.limit - 5.0).abs() < 1e-10);
        assert!((fit.exponent - 1.0).abs() < 1e-5);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn constant_samples_degenerate() {
        let radii = [8.0, 16.0, 32.0, 64.0];
        let values = [2.0, 2.0, 2.0 + 1e-15, 2.0];
        let fit = fit_power_law(&radii, &values);
        assert!(fit.degenerate);
        assert!((fit.limit - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mixed_power_law_extrapolates_to_the_limit() {
        // r^{-1} leading with an r^{-2} contamination, as the mass samples have
        let radii = [20.0, 40.0, 80.0, 160.0];
        let values: Vec<f64> = radii.iter().map(|r| 1.0 + 1.5 / r + 0.75 / (r * r)).collect();
        let fit = fit_power_law(&radii, &values);
        // residual model error of the single power law on this sample is 2.8e-4
        assert!((fit.limit - 1.0).abs() < 5e-4);
        assert!(fit.exponent > 0.9 && fit.exponent < 1.2);
    }

    #[test]
    fn log_decay_slope() {
        let radii = [8.0, 16.0, 32.0, 64.0];
        let values: Vec<f64> = radii.iter().map(|r: &f64| 7.0 * r.powf(-4.0)).collect();
        let (s, rms) = fit_log_decay(&radii, &values, 1e-250);
        assert!((s - 4.0).abs() < 1e-10);
        assert!(rms < 1e-12);
        // identically zero quantity: +inf sentinel
        let zeros = [0.0, 0.0, 0.0, 0.0];
        let (s, _) = fit_log_decay(&radii, &zeros, 1e-250);
        assert!(s.is_infinite());
    }
}
