use halfmass::elliptic::{conformal_flatten, FlattenOptions};
use halfmass::elliptic::weighted::{asymptotic_coefficient, ShellSpec};
use halfmass::expr::parse_with_params;
use halfmass::fields::{radial, FieldRef, ShellPotentialProfile, SumField};
use halfmass::metric::MetricField;
use std::sync::Arc;

fn main() {
    let q = 0.6;
    let base: FieldRef = Arc::new(parse_with_params("1 + 0.5/r", 3, &[]).unwrap());
    let w: FieldRef = radial(3, Arc::new(ShellPotentialProfile::new(1.0, 2.0, q)));
    let u: FieldRef = Arc::new(SumField(base, w));
    let flat = MetricField::flat_half_space(3).unwrap();
    let mut g = MetricField::conformal(flat, u).unwrap();
    g.r0 = 0.5;
    g.exact_mass = Some(8.0 * std::f64::consts::PI * (1.0 + 2.0 * q * 0.0761904761904762));
    let mut opts = FlattenOptions::new(16.0);
    opts.r_in = Some(2.0);
    opts.r_out = Some(96.0);
    opts.grid_h = Some(1.25);
    let res = conformal_flatten(&g, &opts).unwrap();
    println!("default C = {:.6}", res.coefficient.coefficient);
    for (a, b) in [(34.0, 54.0), (44.0, 64.0), (54.0, 74.0), (67.0, 89.0), (75.0, 90.0)] {
        let est = asymptotic_coefficient(
            |x| res.grid.interpolate(&res.u_values, [x[0], x[1], x[2]]).ok(),
            1.0, 3,
            &ShellSpec { r_first: a, r_last: b, shells: 4, order: 8 },
        ).unwrap();
        println!("window [{a},{b}]: C = {:.6} (spread {:.2e})", est.coefficient, est.relative_residual);
    }
    // v·r along the axis at several radii
    for r in [36.0f64, 48.0, 60.0, 72.0, 84.0, 92.0] {
        let v = res.grid.interpolate(&res.u_values, [0.0, 0.0, r]).unwrap() - 1.0;
        println!("  v({r})·r = {:.6}", v * r);
    }
}
