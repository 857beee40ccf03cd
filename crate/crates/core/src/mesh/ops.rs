use super::{FieldCoefficients, Incidence, MeshComplex, Rule, Space};
use crate::error::{Error, Result};
use crate::numkit::{cg_solve, BlockSolver, CsrMatrix};

const PROJECTION_CG_TOL: f64 = 1e-15;
const PROJECTION_CG_MAX_ITER: usize = 2000;

/// Mesh together with the unweighted mass matrices, their factorisations
/// and the real valued divergence operators used by the time stepper.
#[derive(Clone, Debug)]
pub struct MeshOperators {
    pub mesh: MeshComplex,
    pub incidence: Incidence,
    /// Horizontal divergence, Q by U_par.
    pub e_par: CsrMatrix<f64>,
    /// Vertical divergence, Q by U_perp.
    pub e_perp: CsrMatrix<f64>,
    /// Curl from all of P into `[U_par; U_perp]`.
    pub curl: CsrMatrix<f64>,
    pub m_par: CsrMatrix<f64>,
    pub m_perp: CsrMatrix<f64>,
    pub m_q: CsrMatrix<f64>,
    pub m_par_inv: BlockSolver,
    pub m_perp_inv: BlockSolver,
    pub m_q_inv: BlockSolver,
}

impl MeshOperators {
    pub fn new(mesh: MeshComplex) -> Result<Self> {
        let incidence = mesh.incidence();
        let to_f = |m: &CsrMatrix<i64>| m.map(|v| v as f64);
        let n_v = mesh.dim(Space::Upar);
        let nxe = mesh.nx_edges();
        let nzn = mesh.nz_nodes();
        let flux_rows: Vec<usize> = (0..n_v)
            .chain((0..nxe).flat_map(|k| (1..nzn - 1).map(move |j| n_v + k * nzn + j)))
            .collect();
        let curl = to_f(&incidence.curl.select_rows(&flux_rows));
        let m_par = mesh.assemble(Space::Upar, Space::Upar, None, Rule::Collocated)?;
        let m_perp = mesh.assemble(Space::Uperp, Space::Uperp, None, Rule::Collocated)?;
        let m_q = mesh.assemble(Space::Q, Space::Q, None, Rule::Collocated)?;
        Ok(Self {
            e_par: to_f(&incidence.div_par),
            e_perp: to_f(&incidence.div_perp),
            curl,
            m_par_inv: BlockSolver::new(&m_par)?,
            m_perp_inv: BlockSolver::new(&m_perp)?,
            m_q_inv: BlockSolver::new(&m_q)?,
            m_par,
            m_perp,
            m_q,
            incidence,
            mesh,
        })
    }

    /// Values at collocated quadrature points.
    pub fn at_points(&self, space: Space, c: &[f64]) -> Vec<f64> {
        self.mesh
            .eval(space, c, Rule::Collocated)
            .expect("coefficient length checked by caller")
    }

    /// Collocated load vector.
    pub fn load(&self, space: Space, f: &[f64]) -> Vec<f64> {
        self.mesh
            .integrate(space, f, Rule::Collocated)
            .expect("one value per quadrature point")
    }

    /// L2 projection of pointwise values into Q.
    pub fn project_q(&self, f: &[f64]) -> Vec<f64> {
        self.m_q_inv.solve(&self.load(Space::Q, f))
    }
}

/// Galerkin projection of a pointwise vector field onto the flux space.
///
/// `raw` holds `(u_x, u_z)` at every collocated quadrature point. Returns
/// the horizontal and vertical flux coefficients.
pub fn project_div(
    ops: &MeshOperators,
    raw: &[(f64, f64)],
) -> Result<(FieldCoefficients, FieldCoefficients)> {
    let n = ops.mesh.n_points(Rule::Collocated);
    if raw.len() != n {
        return Err(Error::Dimension {
            what: "project_div samples",
            expected: n,
            got: raw.len(),
        });
    }
    let fx: Vec<f64> = raw.iter().map(|r| r.0).collect();
    let fz: Vec<f64> = raw.iter().map(|r| r.1).collect();
    let bx = ops.load(Space::Upar, &fx);
    let bz = ops.load(Space::Uperp, &fz);
    let v = cg_solve(&ops.m_par, &bx, PROJECTION_CG_TOL, PROJECTION_CG_MAX_ITER)?;
    let w = cg_solve(&ops.m_perp, &bz, PROJECTION_CG_TOL, PROJECTION_CG_MAX_ITER)?;
    Ok((
        FieldCoefficients::new(Space::Upar, v.x, "m2/s"),
        FieldCoefficients::new(Space::Uperp, w.x, "m2/s"),
    ))
}

/// Potential vorticity `q` in P from `<psi, rho q> = <dpsi/dz, v> - <dpsi/dx, w>`.
///
/// Under collocated quadrature the density weighted P mass matrix is
/// diagonal, so the solve is a division.
pub fn weak_curl_pv(ops: &MeshOperators, v: &[f64], w: &[f64], rho: &[f64]) -> Result<FieldCoefficients> {
    let rho_q = ops.mesh.eval(Space::Q, rho, Rule::Collocated)?;
    if let Some(bad) = rho_q.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::Degenerate(format!("density {bad:e} is not positive")));
    }
    Ok(FieldCoefficients::new(
        Space::P,
        weak_curl_pv_points(ops, v, w, &rho_q)?,
        "1/s",
    ))
}

pub(crate) fn weak_curl_pv_points(
    ops: &MeshOperators,
    v: &[f64],
    w: &[f64],
    rho_q: &[f64],
) -> Result<Vec<f64>> {
    let mut mu = ops.m_par.matvec(v);
    mu.extend(ops.m_perp.matvec(w));
    let rhs = ops.curl.tmatvec(&mu);
    let diag = ops.load(Space::P, rho_q);
    rhs.iter()
        .zip(&diag)
        .map(|(r, d)| {
            if *d > 0.0 {
                Ok(r / d)
            } else {
                Err(Error::Degenerate("singular density weighted P mass".into()))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;

    fn ops(nx: usize, nz: usize, p: usize) -> MeshOperators {
        MeshOperators::new(build_mesh(nx, nz, p, 2.0, 1.5).unwrap()).unwrap()
    }

    #[test]
    fn mass_blocks_are_small() {
        let o = ops(3, 4, 3);
        assert_eq!(o.m_par_inv.largest_block(), 3);
        assert_eq!(o.m_perp_inv.largest_block(), 3);
        assert_eq!(o.m_q_inv.largest_block(), 9);
    }

    #[test]
    fn rigid_shear_gives_unit_vorticity() {
        let o = ops(2, 3, 3);
        let m = &o.mesh;
        let v = m.reduce(Space::Upar, |_, z| z);
        let w = vec![0.0; m.dim(Space::Uperp)];
        let rho = m.reduce(Space::Q, |_, _| 1.0);
        let q = weak_curl_pv(&o, &v, &w, &rho).unwrap();
        let nzn = m.nz_nodes();
        for ix in 0..m.nx_nodes() {
            for iz in 1..nzn - 1 {
                let val = q.values[m.index(Space::P, ix, iz)];
                assert!((val + 1.0).abs() < 1e-10, "{val}");
            }
        }
    }

    #[test]
    fn zero_flow_zero_vorticity_and_density_scaling() {
        let o = ops(2, 2, 2);
        let m = &o.mesh;
        let rho = m.reduce(Space::Q, |x, z| 1.0 + 0.1 * x + 0.2 * z);
        let zero = weak_curl_pv(&o, &vec![0.0; m.dim(Space::Upar)], &vec![0.0; m.dim(Space::Uperp)], &rho).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        let v = m.reduce(Space::Upar, |x, z| (x * 3.0).sin() * z);
        let w = m.reduce(Space::Uperp, |x, z| x.cos() * z * (1.5 - z));
        let q1 = weak_curl_pv(&o, &v, &w, &rho).unwrap();
        let rho2: Vec<f64> = rho.iter().map(|r| 4.0 * r).collect();
        let q2 = weak_curl_pv(&o, &v, &w, &rho2).unwrap();
        for (a, b) in q1.values.iter().zip(&q2.values) {
            assert!((a - 4.0 * b).abs() <= 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn projection_of_zero_is_zero() {
        let o = ops(2, 2, 2);
        let raw = vec![(0.0, 0.0); o.mesh.n_points(Rule::Collocated)];
        let (v, w) = project_div(&o, &raw).unwrap();
        assert!(v.values.iter().chain(&w.values).all(|x| *x == 0.0));
    }
}
