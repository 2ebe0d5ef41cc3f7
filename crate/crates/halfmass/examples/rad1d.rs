use halfmass::expr::parse_with_params;
use halfmass::fields::{radial, CutoffProfile, FieldRef, RadialProfile, ShellPotentialProfile, SumField};
use halfmass::geometry::curvature_from_jet;
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
    let r_cut: f64 = std::env::args().nth(2).and_then(|v| v.parse().ok()).unwrap_or(16.0);
    let chi = CutoffProfile { scale: r_cut };
    let g_r = MetricField::blend_with_flat(g.clone(), radial(3, Arc::new(CutoffProfile { scale: r_cut })));
    let r_in = 2.0f64;
    let r_out: f64 = std::env::args().nth(3).and_then(|v| v.parse().ok()).unwrap_or(64.0);
    let m: usize = std::env::args().nth(1).and_then(|v| v.parse().ok()).unwrap_or(6200);
    let dr = (r_out - r_in) / m as f64;
    let rr = |i: usize| r_in + i as f64 * dr;
    let mut vcoef = vec![0.0; m + 1];
    let mut dvcoef = vec![0.0; m + 1];
    let mut gam = vec![0.0; m + 1];
    for i in 0..=m {
        let x = [0.0, 0.0, rr(i)];
        let jet = g_r.jet(&x).unwrap();
        vcoef[i] = jet.g.at(0, 0);
        dvcoef[i] = jet.dg[2].at(0, 0);
        let r = rr(i);
        gam[i] = if r > r_cut && r < 2.0 * r_cut {
            let rgr = curvature_from_jet(&jet).unwrap().scalar;
            let jg = g.jet(&x).unwrap();
            let rg = curvature_from_jet(&jg).unwrap().scalar;
            rgr - chi.value_d2(r).0 * rg
        } else { 0.0 };
    }
    let n = m + 1;
    let mut mat = vec![vec![0.0; n]; n];
    let mut rhs = vec![0.0; n];
    mat[0][0] = -3.0; mat[0][1] = 4.0; mat[0][2] = -1.0;
    for i in 1..m {
        let r = rr(i);
        let vi = vcoef[i];
        let dvi = dvcoef[i];
        let c2 = -1.0 / vi;
        let c1 = -2.0 / (vi * r) - 0.5 * dvi / (vi * vi);
        mat[i][i-1] = c2 / (dr * dr) - c1 / (2.0 * dr);
        mat[i][i] = -2.0 * c2 / (dr * dr) + gam[i] / 8.0;
        mat[i][i+1] = c2 / (dr * dr) + c1 / (2.0 * dr);
        rhs[i] = -gam[i] / 8.0;
    }
    mat[m][m] = 3.0/(2.0*dr) + 1.0/r_out; mat[m][m-1] = -4.0/(2.0*dr); mat[m][m-2] = 1.0/(2.0*dr);
    // full dense gaussian elimination, no banding shortcuts
    for col in 0..n {
        let piv = (col..n).max_by(|&x,&y| mat[x][col].abs().partial_cmp(&mat[y][col].abs()).unwrap()).unwrap();
        mat.swap(col, piv); rhs.swap(col, piv);
        let p = mat[col][col];
        for r2 in (col+1)..n {
            let f = mat[r2][col] / p;
            if f != 0.0 {
                for k in col..n { let v = mat[col][k]; mat[r2][k] -= f*v; }
                rhs[r2] -= f*rhs[col];
            }
        }
    }
    let mut v = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for k in (i+1)..n { s -= mat[i][k]*v[k]; }
        v[i] = s / mat[i][i];
    }
    println!("m={m} dr={dr:.4}: C_1d = {:.6}  v(r_in)={:.3e}", v[m-m/20]*rr(m-m/20), v[0]);
}
