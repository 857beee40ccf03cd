use super::MeshComplex;
use crate::numkit::CsrMatrix;

/// Integer incidence matrices of the slice complex.
///
/// The full complex carries no boundary conditions:
/// `P -> (Wx, Wz) -> Q` through grad and rot, and `P -> (U_par, U_perp) -> Q`
/// through curl and div. The wall complex removes the wall rows of the
/// vertical flux and the wall nodes of P, which is the complex the solver
/// actually uses.
#[derive(Clone, Debug)]
pub struct Incidence {
    pub grad: CsrMatrix<i64>,
    pub rot: CsrMatrix<i64>,
    pub curl: CsrMatrix<i64>,
    /// Horizontal part of the divergence, Q by U_par.
    pub div_par: CsrMatrix<i64>,
    /// Vertical part of the divergence with every U_perp row (walls included).
    pub div_perp_full: CsrMatrix<i64>,
    /// Curl restricted to streamfunctions vanishing on the walls, mapped to
    /// the wall-free flux space.
    pub curl_wall: CsrMatrix<i64>,
    /// Vertical divergence acting on interior vertical fluxes only.
    pub div_perp: CsrMatrix<i64>,
}

/// Outcome of checking every composite product of the complex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NilpotencyReport {
    pub rot_grad_zero: bool,
    pub div_curl_zero: bool,
    pub div_curl_wall_zero: bool,
    /// Largest absolute entry across the composite products.
    pub max_entry: i64,
}

impl NilpotencyReport {
    pub fn passed(&self) -> bool {
        self.rot_grad_zero && self.div_curl_zero && self.div_curl_wall_zero
    }
}

impl Incidence {
    pub fn build(m: &MeshComplex) -> Self {
        let nxn = m.nx_nodes();
        let nxe = m.nx_edges();
        let nzn = m.nz_nodes();
        let nze = m.nz_edges();
        let p_idx = |i: usize, j: usize| i * nzn + j;
        let wx_idx = |k: usize, j: usize| k * nzn + j;
        let wz_idx = |i: usize, j: usize| nxe * nzn + i * nze + j;
        let v_idx = |i: usize, j: usize| i * nze + j;
        let w_idx = |k: usize, j: usize| k * nzn + j;
        let q_idx = |k: usize, j: usize| k * nze + j;
        let right = |k: usize| (k + 1) % nxn;

        let n_p = nxn * nzn;
        let n_w = nxe * nzn + nxn * nze;
        let n_q = nxe * nze;
        let n_v = nxn * nze;
        let n_wf = nxe * nzn;

        let mut t = Vec::new();
        for k in 0..nxe {
            for j in 0..nzn {
                t.push((wx_idx(k, j), p_idx(right(k), j), 1));
                t.push((wx_idx(k, j), p_idx(k, j), -1));
            }
        }
        for i in 0..nxn {
            for j in 0..nze {
                t.push((wz_idx(i, j), p_idx(i, j + 1), 1));
                t.push((wz_idx(i, j), p_idx(i, j), -1));
            }
        }
        let grad = CsrMatrix::from_triplets(n_w, n_p, &t);

        t.clear();
        for k in 0..nxe {
            for j in 0..nze {
                t.push((q_idx(k, j), wz_idx(right(k), j), 1));
                t.push((q_idx(k, j), wz_idx(k, j), -1));
                t.push((q_idx(k, j), wx_idx(k, j + 1), -1));
                t.push((q_idx(k, j), wx_idx(k, j), 1));
            }
        }
        let rot = CsrMatrix::from_triplets(n_q, n_w, &t);

        // curl psi = (d psi/dz, -d psi/dx), flux rows ordered [U_par; U_perp]
        t.clear();
        for i in 0..nxn {
            for j in 0..nze {
                t.push((v_idx(i, j), p_idx(i, j + 1), 1));
                t.push((v_idx(i, j), p_idx(i, j), -1));
            }
        }
        for k in 0..nxe {
            for j in 0..nzn {
                t.push((n_v + w_idx(k, j), p_idx(right(k), j), -1));
                t.push((n_v + w_idx(k, j), p_idx(k, j), 1));
            }
        }
        let curl = CsrMatrix::from_triplets(n_v + n_wf, n_p, &t);

        t.clear();
        for k in 0..nxe {
            for j in 0..nze {
                t.push((q_idx(k, j), v_idx(right(k), j), 1));
                t.push((q_idx(k, j), v_idx(k, j), -1));
            }
        }
        let div_par = CsrMatrix::from_triplets(n_q, n_v, &t);

        t.clear();
        for k in 0..nxe {
            for j in 0..nze {
                t.push((q_idx(k, j), w_idx(k, j + 1), 1));
                t.push((q_idx(k, j), w_idx(k, j), -1));
            }
        }
        let div_perp_full = CsrMatrix::from_triplets(n_q, n_wf, &t);

        let interior_w: Vec<usize> = (0..nxe)
            .flat_map(|k| (1..nzn - 1).map(move |j| w_idx(k, j)))
            .collect();
        let interior_p: Vec<usize> = (0..nxn)
            .flat_map(|i| (1..nzn - 1).map(move |j| p_idx(i, j)))
            .collect();
        let div_perp = div_perp_full.select_cols(&interior_w);
        let flux_rows: Vec<usize> = (0..n_v).chain(interior_w.iter().map(|&r| n_v + r)).collect();
        let curl_wall = curl.select_rows(&flux_rows).select_cols(&interior_p);

        Self {
            grad,
            rot,
            curl,
            div_par,
            div_perp_full,
            curl_wall,
            div_perp,
        }
    }

    /// Full divergence `[div_par | div_perp_full]`.
    pub fn div_full(&self) -> CsrMatrix<i64> {
        hstack(&self.div_par, &self.div_perp_full)
    }

    /// Wall divergence `[div_par | div_perp]`.
    pub fn div_wall(&self) -> CsrMatrix<i64> {
        hstack(&self.div_par, &self.div_perp)
    }
}

fn hstack(a: &CsrMatrix<i64>, b: &CsrMatrix<i64>) -> CsrMatrix<i64> {
    assert_eq!(a.nrows(), b.nrows());
    let mut t: Vec<_> = a.iter().collect();
    t.extend(b.iter().map(|(i, j, v)| (i, j + a.ncols(), v)));
    CsrMatrix::from_triplets(a.nrows(), a.ncols() + b.ncols(), &t)
}

fn max_entry(m: &CsrMatrix<i64>) -> i64 {
    m.values().iter().map(|v| v.abs()).max().unwrap_or(0)
}

/// Multiplies every composite pair in exact integer arithmetic.
pub fn nilpotency_report(inc: &Incidence) -> NilpotencyReport {
    let rg = inc.rot.matmul(&inc.grad);
    let dc = inc.div_full().matmul(&inc.curl);
    let dcw = inc.div_wall().matmul(&inc.curl_wall);
    NilpotencyReport {
        rot_grad_zero: rg.is_zero(),
        div_curl_zero: dc.is_zero(),
        div_curl_wall_zero: dcw.is_zero(),
        max_entry: max_entry(&rg).max(max_entry(&dc)).max(max_entry(&dcw)),
    }
}

impl MeshComplex {
    pub fn incidence(&self) -> Incidence {
        Incidence::build(self)
    }

    /// True when every composite incidence product is the zero matrix.
    pub fn incidence_nilpotency_check(&self) -> bool {
        nilpotency_report(&self.incidence()).passed()
    }
}
