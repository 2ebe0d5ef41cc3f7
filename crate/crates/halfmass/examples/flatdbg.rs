use halfmass::elliptic::{conformal_flatten, FlattenOptions};
use halfmass::expr::parse_with_params;
use halfmass::fields::{radial, FieldRef, ShellPotentialProfile, SumField};
use halfmass::metric::MetricField;
use std::sync::Arc;

fn main() {
    // U = 1 + 0.5/r + q·w with w the shell potential of a nonnegative density
    // on [1,2]: R_g = 8 U^{-5} q ρ ≥ 0, H_g = 0 (radial U), and outside r = 2
    // the metric is exactly half-Schwarzschild with m' = 1 + 2qQ
    let q = 0.6;
    let shell = ShellPotentialProfile::new(1.0, 2.0, 1.0);
    let total_q = shell.total_charge();
    let m_eff = 1.0 + 2.0 * q * total_q;
    println!("shell charge Q = {total_q:.6}, effective m' = {m_eff:.6}");
    let base: FieldRef = Arc::new(parse_with_params("1 + 0.5/r", 3, &[]).unwrap());
    let w: FieldRef = radial(3, Arc::new(ShellPotentialProfile::new(1.0, 2.0, q)));
    let u: FieldRef = Arc::new(SumField(base, w));
    let flat = MetricField::flat_half_space(3).unwrap();
    let mut g = MetricField::conformal(flat, u).unwrap();
    g.r0 = 0.5;
    let exact_mass = 8.0 * std::f64::consts::PI * m_eff;
    g.exact_mass = Some(exact_mass);
    println!("exact mass = {exact_mass:.6}");
    // sanity: mass module on the input
    let est = halfmass::mass::mass(&g, &[20.0, 40.0, 80.0, 160.0], 12).unwrap();
    println!("mass(g) extrapolated = {:.6} (converged {})", est.extrapolated, est.converged);

    for r_cut in [16.0f64, 32.0] {
        let t = std::time::Instant::now();
        let mut opts = FlattenOptions::new(r_cut);
        // pinned grid across the runs: only the cutoff moves
        opts.r_in = Some(2.0);
        opts.r_out = Some(96.0);
        opts.grid_h = Some(1.25);
        let res = conformal_flatten(&g, &opts).unwrap();
        println!(
            "R_cut={r_cut}: C={:.6} (16πC={:.6}) min_u={:.6} mass_in={:.6} mass_flat={:.6} delta={:.4e} resR={:.2e} resH={:.2e} scale={:.2e} iters={} warn={:?} t={:.1?}",
            res.coefficient.coefficient,
            16.0 * std::f64::consts::PI * res.coefficient.coefficient,
            res.min_u,
            res.mass_input,
            res.mass_flattened,
            res.mass_delta,
            res.residual_scalar_sup,
            res.residual_mean_curvature_sup,
            res.solver_residual_scale,
            res.solve.stats.iterations,
            res.hypothesis_warning,
            t.elapsed()
        );
    }
}
