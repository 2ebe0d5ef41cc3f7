use halfmass::elliptic::{solve_bvp, BvpData, DiscreteHalfAnnulus};
use halfmass::expr::EvalError;
use halfmass::fields::{RadialProfile, ShellPotentialProfile};
use halfmass::metric::MetricField;
use std::sync::Arc;

fn zero(_: &[f64]) -> Result<f64, EvalError> { Ok(0.0) }

fn main() {
    let shell = Arc::new(ShellPotentialProfile::new(1.8, 3.0, 0.9));
    let flat = MetricField::flat_half_space(3).unwrap();
    for &h in &[0.25f64, 0.125, 0.0625] {
        let grid = DiscreteHalfAnnulus::new(1.0, 4.0, h).unwrap();
        let s2 = shell.clone();
        let f = move |x: &[f64]| -> Result<f64, EvalError> {
            Ok(s2.density(halfmass::linalg::norm(x)))
        };
        let data = BvpData { metric: &flat, h: &zero, hbar: &zero, f: &f, fbar: &zero, u_infinity: 1.0 };
        let t0 = std::time::Instant::now();
        let sol = solve_bvp(&grid, &data, 1e-11, 8000).unwrap();
        let mut sup = 0.0f64; let mut scale = 0.0f64;
        for (idx, &nd) in grid.nodes.iter().enumerate() {
            let p = grid.position(nd);
            let r = halfmass::linalg::norm(&p);
            let exact = 1.0 + shell.value_d2(r).0;
            sup = sup.max((sol.values[idx] - exact).abs());
            scale = scale.max((exact - 1.0).abs());
        }
        println!("h={h}: unknowns={} rel_sup={:.4e} iters={} t={:?} res_int={:.2e} res_bdy={:.2e}",
            grid.unknown_count(), sup/scale, sol.stats.iterations, t0.elapsed(),
            sol.interior_residual_sup, sol.boundary_residual_sup);
    }
}
