use halfmass::elliptic::{conformal_flatten, FlattenOptions};
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
    let res = conformal_flatten(&g, &FlattenOptions::new(16.0)).unwrap();
    println!("C = {:.6}", res.coefficient.coefficient);
    for r in [4.0f64, 12.0, 20.0, 28.0, 40.0, 56.0] {
        let axis = res.grid.interpolate(&res.u_values, [0.0, 0.0, r]).unwrap() - 1.0;
        let sigma = res.grid.interpolate(&res.u_values, [r, 0.0, 0.0]).unwrap() - 1.0;
        let diag = {
            let c = r / (3.0f64).sqrt();
            res.grid.interpolate(&res.u_values, [c, c, c]).unwrap() - 1.0
        };
        println!("r={r:5.1}: axis={axis:+.5e} sigma={sigma:+.5e} diag={diag:+.5e}");
    }
}
