//! Uniform Cartesian grid on the truncated half-annulus
//! {r_in ≤ |x| ≤ r_out, x₃ ≥ 0} with node classification.
//!
//! Grids are three-dimensional only; higher dimensions stay in closed-form
//! (non-grid) operations. Interior nodes carry the PDE stencil (including the
//! cross-derivative diagonals a variable metric needs), sigma nodes the
//! boundary operator, and the nodes whose stencils would leave the annulus
//! become inner/outer cut nodes closed by radial-ray conditions.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Excluded,
    Interior,
    /// On the physical boundary Σ = {x₃ = 0}.
    Sigma,
    /// Near |x| = r_in; homogeneous Neumann ∂_r u = 0.
    InnerCut,
    /// Near |x| = r_out; Robin closure matching u = u∞ + C/r.
    OuterCut,
}

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("grid needs r_out ≥ 4 r_in, got r_in = {r_in}, r_out = {r_out}")]
    BadAspect { r_in: f64, r_out: f64 },
    #[error("spacing {h} too coarse for the annulus [{r_in}, {r_out}]")]
    TooCoarse { h: f64, r_in: f64, r_out: f64 },
    #[error("no valid interpolation window for the ray through node {node:?}")]
    RayBlocked { node: (i32, i32, i32) },
}

pub struct DiscreteHalfAnnulus {
    pub h: f64,
    pub r_in: f64,
    pub r_out: f64,
    /// Lattice half-width m: i, j ∈ [-m, m], k ∈ [0, m].
    pub m: i32,
    class: Vec<NodeClass>,
    unknown_of: Vec<i32>,
    /// Lattice coordinates of each unknown.
    pub nodes: Vec<(i32, i32, i32)>,
}

impl DiscreteHalfAnnulus {
    pub fn new(r_in: f64, r_out: f64, h: f64) -> Result<Self, GridError> {
        if r_out < 4.0 * r_in {
            return Err(GridError::BadAspect { r_in, r_out });
        }
        if (r_out - r_in) / h < 8.0 {
            return Err(GridError::TooCoarse { h, r_in, r_out });
        }
        let m = (r_out / h).floor() as i32;
        let side = (2 * m + 1) as usize;
        let height = (m + 1) as usize;
        let total = side * side * height;
        let mut class = vec![NodeClass::Excluded; total];

        let idx = |i: i32, j: i32, k: i32| -> usize {
            (((i + m) as usize * side) + (j + m) as usize) * height + k as usize
        };
        let r2_of = |i: i32, j: i32, k: i32| -> f64 {
            let x = i as f64 * h;
            let y = j as f64 * h;
            let z = k as f64 * h;
            x * x + y * y + z * z
        };
        let rin2 = r_in * r_in;
        let rout2 = r_out * r_out;
        let active =
            |i: i32, j: i32, k: i32| -> bool {
                if i.abs() > m || j.abs() > m || k < 0 || k > m {
                    return false;
                }
                let r2 = r2_of(i, j, k);
                r2 >= rin2 && r2 <= rout2
            };

        // first pass: classify
        for i in -m..=m {
            for j in -m..=m {
                for k in 0..=m {
                    if !active(i, j, k) {
                        continue;
                    }
                    let c = if k == 0 {
                        // sigma needs the vertical one-sided stencil and the
                        // in-plane neighbors for possible tangential terms
                        let ok = active(i, j, 1)
                            && active(i, j, 2)
                            && active(i + 1, j, 0)
                            && active(i - 1, j, 0)
                            && active(i, j + 1, 0)
                            && active(i, j - 1, 0);
                        if ok {
                            NodeClass::Sigma
                        } else {
                            cut_side(r2_of(i, j, k), r_in, r_out)
                        }
                    } else {
                        let mut ok = true;
                        for (di, dj, dk) in AXIS_NEIGHBORS {
                            ok &= active(i + di, j + dj, k + dk);
                        }
                        for (di, dj, dk) in DIAGONAL_NEIGHBORS {
                            ok &= active(i + di, j + dj, k + dk);
                        }
                        if ok {
                            NodeClass::Interior
                        } else {
                            cut_side(r2_of(i, j, k), r_in, r_out)
                        }
                    };
                    class[idx(i, j, k)] = c;
                }
            }
        }

        // unknown numbering in lattice order
        let mut unknown_of = vec![-1i32; total];
        let mut nodes = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                for k in 0..=m {
                    if class[idx(i, j, k)] != NodeClass::Excluded {
                        unknown_of[idx(i, j, k)] = nodes.len() as i32;
                        nodes.push((i, j, k));
                    }
                }
            }
        }

        Ok(DiscreteHalfAnnulus { h, r_in, r_out, m, class, unknown_of, nodes })
    }

    #[inline]
    fn lin(&self, i: i32, j: i32, k: i32) -> Option<usize> {
        let m = self.m;
        if i.abs() > m || j.abs() > m || k < 0 || k > m {
            return None;
        }
        let side = (2 * m + 1) as usize;
        let height = (m + 1) as usize;
        Some((((i + m) as usize * side) + (j + m) as usize) * height + k as usize)
    }

    pub fn class_of(&self, i: i32, j: i32, k: i32) -> NodeClass {
        self.lin(i, j, k).map(|l| self.class[l]).unwrap_or(NodeClass::Excluded)
    }

    pub fn unknown(&self, i: i32, j: i32, k: i32) -> Option<usize> {
        self.lin(i, j, k).and_then(|l| {
            let u = self.unknown_of[l];
            if u >= 0 {
                Some(u as usize)
            } else {
                None
            }
        })
    }

    pub fn unknown_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn position(&self, node: (i32, i32, i32)) -> [f64; 3] {
        [node.0 as f64 * self.h, node.1 as f64 * self.h, node.2 as f64 * self.h]
    }

    pub fn count_class(&self, c: NodeClass) -> usize {
        self.nodes.iter().filter(|&&(i, j, k)| self.class_of(i, j, k) == c).count()
    }

    /// Tri-quadratic interpolation weights for an arbitrary point, with the
    /// 3×3×3 window shifted toward `lean` (in lattice steps) until every node
    /// in it is active. Weights are tensor-product quadratic Lagrange.
    pub fn interpolation_weights(
        &self,
        p: [f64; 3],
        lean: [i32; 3],
    ) -> Result<Vec<(usize, f64)>, GridError> {
        let fp = [p[0] / self.h, p[1] / self.h, p[2] / self.h];
        // natural window base per axis
        let natural = |t: f64| -> i32 { t.round() as i32 - 1 };
        let mut base = [natural(fp[0]), natural(fp[1]), natural(fp[2])];
        // clamp k-axis to the half-space
        if base[2] < 0 {
            base[2] = 0;
        }
        let window_ok = |b: [i32; 3]| -> bool {
            for di in 0..3 {
                for dj in 0..3 {
                    for dk in 0..3 {
                        if self.class_of(b[0] + di, b[1] + dj, b[2] + dk) == NodeClass::Excluded {
                            return false;
                        }
                    }
                }
            }
            true
        };
        let range = |l: i32| if l == 0 { 0..1 } else { 0..4 };
        let mut found = None;
        'search: for s0 in range(lean[0]) {
            for s1 in range(lean[1]) {
                for s2 in range(lean[2]) {
                    let cand = [
                        base[0] + s0 * lean[0],
                        base[1] + s1 * lean[1],
                        (base[2] + s2 * lean[2]).max(0),
                    ];
                    if window_ok(cand) {
                        found = Some(cand);
                        break 'search;
                    }
                }
            }
        }
        match found {
            Some(b) => base = b,
            None => {
                return Err(GridError::RayBlocked {
                    node: (fp[0].round() as i32, fp[1].round() as i32, fp[2].round() as i32),
                })
            }
        }
        // quadratic Lagrange weights per axis at s = fp - base
        let axis_w = |s: f64| -> [f64; 3] {
            [0.5 * (s - 1.0) * (s - 2.0), -s * (s - 2.0), 0.5 * s * (s - 1.0)]
        };
        let w0 = axis_w(fp[0] - base[0] as f64);
        let w1 = axis_w(fp[1] - base[1] as f64);
        let w2 = axis_w(fp[2] - base[2] as f64);
        let mut out = Vec::with_capacity(27);
        for (di, wi) in w0.iter().enumerate() {
            for (dj, wj) in w1.iter().enumerate() {
                for (dk, wk) in w2.iter().enumerate() {
                    let w = wi * wj * wk;
                    if w.abs() < 1e-300 {
                        continue;
                    }
                    let u = self
                        .unknown(base[0] + di as i32, base[1] + dj as i32, base[2] + dk as i32)
                        .expect("window checked active");
                    out.push((u, w));
                }
            }
        }
        Ok(out)
    }

    /// Interpolate a solution vector at an arbitrary point of the annulus.
    pub fn interpolate(&self, values: &[f64], p: [f64; 3]) -> Result<f64, GridError> {
        // lean inward radially: away from whichever cut is closer
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let toward_origin = r > 0.5 * (self.r_in + self.r_out);
        let lean = [
            lean_dir(p[0], self.h, toward_origin),
            lean_dir(p[1], self.h, toward_origin),
            if toward_origin { lean_dir(p[2], self.h, true) } else { 1 },
        ];
        let w = self.interpolation_weights(p, lean)?;
        Ok(w.iter().map(|&(u, c)| c * values[u]).sum())
    }
}

fn lean_dir(coord: f64, h: f64, toward_origin: bool) -> i32 {
    let s = if coord >= 0.5 * h {
        -1
    } else if coord <= -0.5 * h {
        1
    } else {
        0
    };
    if toward_origin {
        s
    } else {
        -s
    }
}

fn cut_side(r2: f64, r_in: f64, r_out: f64) -> NodeClass {
    let r = r2.sqrt();
    if r - r_in < r_out - r {
        NodeClass::InnerCut
    } else {
        NodeClass::OuterCut
    }
}

pub const AXIS_NEIGHBORS: [(i32, i32, i32); 6] =
    [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)];

pub const DIAGONAL_NEIGHBORS: [(i32, i32, i32); 12] = [
    (1, 1, 0),
    (1, -1, 0),
    (-1, 1, 0),
    (-1, -1, 0),
    (1, 0, 1),
    (1, 0, -1),
    (-1, 0, 1),
    (-1, 0, -1),
    (0, 1, 1),
    (0, 1, -1),
    (0, -1, 1),
    (0, -1, -1),
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_covers_the_annulus() {
        let g = DiscreteHalfAnnulus::new(1.0, 4.0, 0.25).unwrap();
        assert!(g.unknown_count() > 0);
        let interior = g.count_class(NodeClass::Interior);
        let sigma = g.count_class(NodeClass::Sigma);
        let inner = g.count_class(NodeClass::InnerCut);
        let outer = g.count_class(NodeClass::OuterCut);
        assert!(interior > sigma && sigma > 0 && inner > 0 && outer > 0);
        assert_eq!(interior + sigma + inner + outer, g.unknown_count());
        // volume sanity: count ≈ half-annulus volume / h³
        let vol = 2.0 * std::f64::consts::PI / 3.0 * (64.0 - 1.0);
        let approx = vol / (0.25f64.powi(3));
        let count = g.unknown_count() as f64;
        assert!((count - approx).abs() < 0.15 * approx, "count {count} vs {approx}");
    }

    #[test]
    fn interior_nodes_have_full_stencils() {
        let g = DiscreteHalfAnnulus::new(1.0, 4.0, 0.25).unwrap();
        for &(i, j, k) in &g.nodes {
            if g.class_of(i, j, k) != NodeClass::Interior {
                continue;
            }
            for (di, dj, dk) in AXIS_NEIGHBORS {
                assert_ne!(g.class_of(i + di, j + dj, k + dk), NodeClass::Excluded);
            }
            for (di, dj, dk) in DIAGONAL_NEIGHBORS {
                assert_ne!(g.class_of(i + di, j + dj, k + dk), NodeClass::Excluded);
            }
        }
    }

    #[test]
    fn rejects_bad_aspect() {
        assert!(matches!(
            DiscreteHalfAnnulus::new(2.0, 6.0, 0.25),
            Err(GridError::BadAspect { .. })
        ));
    }

    #[test]
    fn interpolation_reproduces_quadratics() {
        let g = DiscreteHalfAnnulus::new(1.0, 4.0, 0.25).unwrap();
        // fill values with a quadratic polynomial; tri-quadratic interpolation
        // must reproduce it exactly
        let f = |x: [f64; 3]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] + x[0] * x[1] + x[2] * x[2];
        let vals: Vec<f64> = g.nodes.iter().map(|&nd| f(g.position(nd))).collect();
        for p in [[2.0, 1.1, 0.8], [-1.3, 2.2, 0.4], [3.1, 0.9, 1.7], [0.1, 2.4, 0.05]] {
            let v = g.interpolate(&vals, p).unwrap();
            assert!((v - f(p)).abs() < 1e-11, "at {p:?}: {v} vs {}", f(p));
        }
    }
}
