use halfmass::expr::parse_scalar_field;
use halfmass::fields::FieldRef;
use halfmass::geometry::curvature_at;
use halfmass::metric::{MetricField, SymTensorField};
use std::sync::Arc;

// independent route: scalar curvature from finite differences of metric VALUES
fn scalar_fd(g: &MetricField, x: &[f64], h: f64) -> f64 {
    let n = 3usize;
    let gv = |x: &[f64]| {
        let m = g.values(x).unwrap();
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 { for j in 0..3 { out[i][j] = m.at(i, j); } }
        out
    };
    let inv3 = |m: [[f64;3];3]| {
        let det = m[0][0]*(m[1][1]*m[2][2]-m[1][2]*m[2][1]) - m[0][1]*(m[1][0]*m[2][2]-m[1][2]*m[2][0]) + m[0][2]*(m[1][0]*m[2][1]-m[1][1]*m[2][0]);
        let mut inv = [[0.0;3];3];
        inv[0][0] = (m[1][1]*m[2][2]-m[1][2]*m[2][1])/det;
        inv[0][1] = (m[0][2]*m[2][1]-m[0][1]*m[2][2])/det;
        inv[0][2] = (m[0][1]*m[1][2]-m[0][2]*m[1][1])/det;
        inv[1][0] = (m[1][2]*m[2][0]-m[1][0]*m[2][2])/det;
        inv[1][1] = (m[0][0]*m[2][2]-m[0][2]*m[2][0])/det;
        inv[1][2] = (m[0][2]*m[1][0]-m[0][0]*m[1][2])/det;
        inv[2][0] = (m[1][0]*m[2][1]-m[1][1]*m[2][0])/det;
        inv[2][1] = (m[0][1]*m[2][0]-m[0][0]*m[2][1])/det;
        inv[2][2] = (m[0][0]*m[1][1]-m[0][1]*m[1][0])/det;
        inv
    };
    // Γ^k_ij at a point via FD first derivatives
    let gamma = |x: &[f64]| {
        let mut dg = [[[0.0;3];3];3]; // dg[k][i][j] = ∂_k g_ij
        for k in 0..n {
            let mut xp = x.to_vec(); xp[k] += h;
            let mut xm = x.to_vec(); xm[k] -= h;
            let gp = gv(&xp); let gm = gv(&xm);
            for i in 0..3 { for j in 0..3 { dg[k][i][j] = (gp[i][j]-gm[i][j])/(2.0*h); } }
        }
        let gi = inv3(gv(x));
        let mut gam = [[[0.0;3];3];3];
        for k in 0..3 { for i in 0..3 { for j in 0..3 {
            let mut s = 0.0;
            for l in 0..3 { s += gi[k][l]*0.5*(dg[j][i][l]+dg[i][j][l]-dg[l][i][j]); }
            gam[k][i][j] = s;
        }}}
        gam
    };
    // R_ij = ∂_k Γ^k_ij − ∂_i Γ^k_kj + Γ^k_km Γ^m_ij − Γ^k_im Γ^m_kj  (FD on Γ)
    let g0 = gamma(x);
    let mut dgam = [[[[0.0;3];3];3];3]; // dgam[m][k][i][j] = ∂_m Γ^k_ij
    for m in 0..3 {
        let mut xp = x.to_vec(); xp[m] += h;
        let mut xm = x.to_vec(); xm[m] -= h;
        let gp = gamma(&xp); let gm = gamma(&xm);
        for k in 0..3 { for i in 0..3 { for j in 0..3 {
            dgam[m][k][i][j] = (gp[k][i][j]-gm[k][i][j])/(2.0*h);
        }}}
    }
    let gi = inv3(gv(x));
    let mut scalar = 0.0;
    for i in 0..3 { for j in 0..3 {
        let mut rij = 0.0;
        for k in 0..3 {
            rij += dgam[k][k][i][j] - dgam[i][k][k][j];
            for m in 0..3 {
                rij += g0[k][k][m]*g0[m][i][j] - g0[k][i][m]*g0[m][k][j];
            }
        }
        scalar += gi[i][j]*rij;
    }}
    scalar
}

fn main() {
    // anisotropic metric: δ + a11(x) with angular structure
    let mut a = SymTensorField::zeros(3);
    a.set(0, 0, Arc::new(parse_scalar_field("0.3/r + 0.1*x2/r^2", 3).unwrap()) as FieldRef);
    a.set(0, 1, Arc::new(parse_scalar_field("0.05*x3/r^2", 3).unwrap()) as FieldRef);
    let g = MetricField::perturbation(3, a, 1.0).unwrap();
    for x in [[2.0, 1.0, 1.5], [3.0, -1.0, 0.5], [1.5, 2.0, 2.0]] {
        let mine = curvature_at(&g, &x).unwrap().scalar;
        let fd = scalar_fd(&g, &x, 1e-4);
        println!("x={x:?}: mine={mine:+.10e} fd={fd:+.10e} diff={:.2e}", (mine-fd).abs());
    }
    // and Ricci of half-Schwarzschild should NOT be zero
    let hs = MetricField::half_schwarzschild(3, 1.0).unwrap();
    let c = curvature_at(&hs, &[2.0, 1.0, 1.5]).unwrap();
    println!("hS Ric11 = {:+.6e}, Ric13 = {:+.6e}, R = {:+.3e}", c.ricci.at(0,0), c.ricci.at(0,2), c.scalar);
}
