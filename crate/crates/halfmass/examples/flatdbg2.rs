use halfmass::elliptic::{conformal_flatten, FlattenOptions};
use halfmass::expr::parse_with_params;
use halfmass::fields::{radial, FieldRef, ShellPotentialProfile, SumField};
use halfmass::metric::MetricField;
use std::sync::Arc;

fn main() {
    // U = 1 + 0.5/r - 0.3 r^{-1.5} + 0.6 w_shell: R_g ≥ 0 everywhere,
    // H_g ≡ 0, exactly mass 8π(1 + 2qQ)... the tail does not carry mass
    let q = 0.6;
    let shell = ShellPotentialProfile::new(1.0, 2.0, 1.0);
    let m_eff = 1.0 + 2.0 * q * shell.total_charge();
    let base: FieldRef = Arc::new(parse_with_params("1 + 0.5/r - 0.3*r^(-1.5)", 3, &[]).unwrap());
    let w: FieldRef = radial(3, Arc::new(ShellPotentialProfile::new(1.0, 2.0, q)));
    let u: FieldRef = Arc::new(SumField(base, w));
    let flat = MetricField::flat_half_space(3).unwrap();
    let mut g = MetricField::conformal(flat, u).unwrap();
    g.r0 = 0.5;
    let exact = 8.0 * std::f64::consts::PI * m_eff;
    g.exact_mass = Some(exact);
    println!("exact mass = {exact:.6}, tau = {:.3}", g.tau);

    // hypothesis sanity via geometry
    let c = halfmass::geometry::curvature_at(&g, &[0.0, 0.0, 3.0]).unwrap();
    println!("R_g(0,0,3) = {:+.4e} (должно ≥ 0)", c.scalar);

    for r_cut in [16.0f64, 32.0] {
        let t = std::time::Instant::now();
        let opts = FlattenOptions::new(r_cut);
        let res = conformal_flatten(&g, &opts).unwrap();
        println!(
            "R_cut={r_cut}: C={:.6} mass_flat={:.5} delta={:.5} min_u={:.6} resR={:.2e} scale={:.2e} warn={} t={:.0?}",
            res.coefficient.coefficient, res.mass_flattened, res.mass_delta, res.min_u,
            res.residual_scalar_sup, res.solver_residual_scale,
            res.hypothesis_warning.is_some(), t.elapsed()
        );
    }
}
