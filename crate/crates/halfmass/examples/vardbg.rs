use halfmass::fields::{radial, BumpProfile};
use halfmass::mass::*;
use halfmass::metric::{MetricField, SymTensorField};
use std::sync::Arc;

fn main() {
    let g = MetricField::half_schwarzschild(3, 1.0).unwrap();
    let mut k = SymTensorField::zeros(3);
    k.set(0, 0, radial(3, Arc::new(BumpProfile::new(2.0, 6.0, 0.4))));
    for dt in [2e-3, 1e-3, 5e-4, 2.5e-4] {
        let mut o = VariationalOptions::default();
        o.dt = dt;
        let r = variational_check(&g, &k, &o).unwrap();
        println!(
            "dt={dt:.1e} lhs={:+.12e} rhs={:+.12e} mism={:.3e} bulk={:+.6e} bdry={:+.6e}",
            r.lhs, r.rhs, r.mismatch, r.bulk_rhs, r.boundary_rhs
        );
    }
    let gf = MetricField::flat_half_space(3).unwrap();
    for dt in [1e-3, 5e-4] {
        let mut o = VariationalOptions::default();
        o.dt = dt;
        let r = variational_check(&gf, &k, &o).unwrap();
        println!("FLAT dt={dt:.1e} lhs={:+.6e} rhs={:+.6e}", r.lhs, r.rhs);
    }
}
