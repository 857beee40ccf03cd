//! Equation of state, energy, potential temperature diagnosis and entropy.

use crate::error::{Error, Result};
use crate::mesh::{MeshComplex, MeshOperators, Rule, Space};
use crate::numkit::{BandedMatrix, CompensatedSum};

/// Thermodynamic and gravitational constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysConstants {
    pub cp: f64,
    pub cv: f64,
    pub r: f64,
    pub p0: f64,
    pub g: f64,
}

impl Default for PhysConstants {
    fn default() -> Self {
        Self {
            cp: 1004.5,
            cv: 717.5,
            r: 287.0,
            p0: 1.0e5,
            g: 9.80616,
        }
    }
}

impl PhysConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("cp", self.cp), ("cv", self.cv), ("R", self.r), ("p0", self.p0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::Config(format!("g must be non-negative, got {}", self.g)));
        }
        if (self.r - (self.cp - self.cv)).abs() > 1e-9 * self.cp {
            return Err(Error::Config(format!(
                "R = {} differs from cp - cv = {}",
                self.r,
                self.cp - self.cv
            )));
        }
        Ok(())
    }

    /// Exner function `cp (R Theta / p0)^(R/cv)` of density weighted
    /// potential temperature.
    pub fn exner_point(&self, theta_d: f64) -> f64 {
        self.cp * (self.r * theta_d / self.p0).powf(self.r / self.cv)
    }

    /// Derivative of [`Self::exner_point`] with respect to its argument.
    pub fn exner_derivative(&self, theta_d: f64) -> f64 {
        self.r / self.cv * self.exner_point(theta_d) / theta_d
    }

    /// Internal energy density `(cv/cp) Theta Pi(Theta)`.
    pub fn internal_energy_density(&self, theta_d: f64) -> f64 {
        self.cv / self.cp * theta_d * self.exner_point(theta_d)
    }

    /// Exner pressure at pressure `p`.
    pub fn exner_of_pressure(&self, p: f64) -> f64 {
        self.cp * (p / self.p0).powf(self.r / self.cp)
    }
}

fn check_positive(what: &str, vals: &[f64]) -> Result<()> {
    match vals.iter().position(|v| !(*v > 0.0)) {
        None => Ok(()),
        Some(k) => Err(Error::Thermodynamic(format!(
            "{what} = {:e} at quadrature point {k}",
            vals[k]
        ))),
    }
}

/// Load vector `<gamma, Pi(Theta_h)>` from Theta at quadrature points.
pub(crate) fn exner_load_points(ops: &MeshOperators, theta_d_q: &[f64], c: &PhysConstants) -> Result<Vec<f64>> {
    check_positive("Theta", theta_d_q)?;
    let pi: Vec<f64> = theta_d_q.iter().map(|&t| c.exner_point(t)).collect();
    Ok(ops.load(Space::Q, &pi))
}

/// L2 projection of the Exner function into Q.
pub fn exner(ops: &MeshOperators, theta_d: &[f64], c: &PhysConstants) -> Result<Vec<f64>> {
    let tq = ops.mesh.eval(Space::Q, theta_d, Rule::Collocated)?;
    Ok(ops.m_q_inv.solve(&exner_load_points(ops, &tq, c)?))
}

/// L2 projection of `|u|^2 / 2 + g z` into Q. `zfield` holds the Q
/// coefficients of height.
pub fn bernoulli(ops: &MeshOperators, v: &[f64], w: &[f64], zfield: &[f64], g: f64) -> Result<Vec<f64>> {
    let m = &ops.mesh;
    let vq = m.eval(Space::Upar, v, Rule::Collocated)?;
    let wq = m.eval(Space::Uperp, w, Rule::Collocated)?;
    let zq = m.eval(Space::Q, zfield, Rule::Collocated)?;
    let f: Vec<f64> = (0..vq.len())
        .map(|k| 0.5 * (vq[k] * vq[k] + wq[k] * wq[k]) + g * zq[k])
        .collect();
    Ok(ops.project_q(&f))
}

/// Kinetic, potential and internal energy of a state.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub internal: f64,
    pub total: f64,
}

/// Energy integrals by quadrature of the three densities.
pub fn total_energy(
    mesh: &MeshComplex,
    v: &[f64],
    w: &[f64],
    rho: &[f64],
    theta_d: &[f64],
    c: &PhysConstants,
    rule: Rule,
) -> Result<EnergyBreakdown> {
    let vq = mesh.eval(Space::Upar, v, rule)?;
    let wq = mesh.eval(Space::Uperp, w, rule)?;
    let rq = mesh.eval(Space::Q, rho, rule)?;
    let tq = mesh.eval(Space::Q, theta_d, rule)?;
    check_positive("density", &rq)?;
    check_positive("Theta", &tq)?;
    let [mut k, mut p, mut i] = [CompensatedSum::default(); 3];
    for (n, q) in mesh.quad_points(rule).iter().enumerate() {
        k.add(q.weight * 0.5 * rq[n] * (vq[n] * vq[n] + wq[n] * wq[n]));
        p.add(q.weight * rq[n] * c.g * q.z);
        i.add(q.weight * c.internal_energy_density(tq[n]));
    }
    let total: CompensatedSum = [k.value(), p.value(), i.value()].into_iter().collect();
    Ok(EnergyBreakdown {
        kinetic: k.value(),
        potential: p.value(),
        internal: i.value(),
        total: total.value(),
    })
}

/// Downwind reference coordinate `zeta + fraction dt w_local(zeta)`, clamped
/// to the element. `w_nodal` are local nodal values of the reference
/// vertical velocity `d zeta / dt`.
pub fn downwind_coords(
    basis: &crate::polybasis::NodalBasis,
    zeta: f64,
    w_nodal: &[f64],
    dt: f64,
    fraction: f64,
) -> f64 {
    let w = basis.interpolate(w_nodal, zeta);
    (zeta + fraction * dt * w).clamp(-1.0, 1.0)
}

/// Settings for the vertically upwinded potential temperature diagnosis.
#[derive(Clone, Copy, Debug)]
pub struct Upwind<'a> {
    /// Vertical flux coefficients (U_perp).
    pub w: &'a [f64],
    pub dt: f64,
    pub fraction: f64,
}

/// Dense per element column systems of the theta diagnosis.
struct ThetaColumns {
    p: usize,
    nzn: usize,
}

impl ThetaColumns {
    fn local(&self, iz: usize, a: usize) -> usize {
        iz * self.p + a
    }
    fn size(&self) -> usize {
        self.nzn * self.p
    }
    fn band(&self) -> usize {
        self.p * (self.p + 1) - 1
    }
}

/// Shifted vertical reference coordinates of every collocated quadrature
/// point, or `None` when upwinding is off.
fn shifted_eta(ops: &MeshOperators, upwind: Option<Upwind<'_>>) -> Result<Option<Vec<f64>>> {
    let Some(u) = upwind else { return Ok(None) };
    let m = &ops.mesh;
    let wq = m.eval(Space::Uperp, u.w, Rule::Collocated)?;
    let r = m.rule_1d(Rule::Collocated);
    let nq = r.len();
    let mut out = vec![0.0; wq.len()];
    for e in 0..m.element_count() {
        for qx in 0..nq {
            for qz in 0..nq {
                let k = e * nq * nq + qx * nq + qz;
                let w_ref = 2.0 * wq[k] / m.dz;
                out[k] = (r.points[qz] + u.fraction * u.dt * w_ref).clamp(-1.0, 1.0);
            }
        }
    }
    Ok(Some(out))
}

/// Assembles `<test, rho trial>` and `<test, Theta_h>` for one element
/// column and solves it.
fn solve_theta_column(
    ops: &MeshOperators,
    ex: usize,
    rho_q: &[f64],
    theta_d_q: &[f64],
    eta_d: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let m = &ops.mesh;
    let p = m.p;
    let cols = ThetaColumns { p, nzn: m.nz_nodes() };
    let r = m.rule_1d(Rule::Collocated);
    let nq = r.len();
    let basis = m.nodal_basis();
    let edge = m.edge_basis();
    let ex_tab: Vec<Vec<f64>> = r.points.iter().map(|&x| edge.eval(x)).collect();
    let jac = m.jacobian();
    let mut a = BandedMatrix::zeros(cols.size(), cols.band(), cols.band());
    let mut rhs = vec![0.0; cols.size()];
    for ez in 0..m.nz {
        let e = m.element(ex, ez);
        for qx in 0..nq {
            for qz in 0..nq {
                let k = e * nq * nq + qx * nq + qz;
                let wgt = r.weights[qx] * r.weights[qz] * jac;
                let test_z = match eta_d {
                    Some(eta) => basis.eval(eta[k]),
                    None => {
                        let mut t = vec![0.0; p + 1];
                        t[qz] = 1.0;
                        t
                    }
                };
                let ex_vals = &ex_tab[qx];
                for (bi, tz) in test_z.iter().enumerate() {
                    if *tz == 0.0 {
                        continue;
                    }
                    for (ai, txv) in ex_vals.iter().enumerate() {
                        let ti = txv * tz * wgt;
                        let row = cols.local(ez * p + bi, ai);
                        rhs[row] += ti * theta_d_q[k];
                        // trial functions are collocated: only b = qz is non-zero
                        for (aj, trv) in ex_vals.iter().enumerate() {
                            a.add(row, cols.local(ez * p + qz, aj), ti * rho_q[k] * trv);
                        }
                    }
                }
            }
        }
    }
    let lu = a.lu().map_err(|e| Error::Degenerate(format!("theta diagnosis column {ex}: {e}")))?;
    Ok(lu.solve(&rhs))
}

/// Potential temperature in the theta space from `rho` and `Theta`.
///
/// Solves `<b^u, rho b> theta = <b^u, Theta_h>`; with upwinding the test
/// functions `b^u` are evaluated at vertically downwind points.
pub fn diagnose_theta(
    ops: &MeshOperators,
    rho: &[f64],
    theta_d: &[f64],
    upwind: Option<Upwind<'_>>,
) -> Result<Vec<f64>> {
    let rq = ops.mesh.eval(Space::Q, rho, Rule::Collocated)?;
    let tq = ops.mesh.eval(Space::Q, theta_d, Rule::Collocated)?;
    check_positive("density", &rq)?;
    diagnose_theta_points(ops, &rq, &tq, upwind)
}

pub(crate) fn diagnose_theta_points(
    ops: &MeshOperators,
    rho_q: &[f64],
    theta_d_q: &[f64],
    upwind: Option<Upwind<'_>>,
) -> Result<Vec<f64>> {
    let m = &ops.mesh;
    let eta = shifted_eta(ops, upwind)?;
    let p = m.p;
    let nzn = m.nz_nodes();
    let mut out = vec![0.0; m.dim(Space::Theta)];
    for ex in 0..m.nx {
        let col = solve_theta_column(ops, ex, rho_q, theta_d_q, eta.as_deref())?;
        for iz in 0..nzn {
            for a in 0..p {
                out[(ex * p + a) * nzn + iz] = col[iz * p + a];
            }
        }
    }
    Ok(out)
}

/// `int rho (cp ln theta + s0)` by collocated quadrature.
pub fn entropy_diagnostic(
    mesh: &MeshComplex,
    theta: &[f64],
    rho: &[f64],
    c: &PhysConstants,
    s0: f64,
) -> Result<f64> {
    let th = mesh.eval(Space::Theta, theta, Rule::Collocated)?;
    let rq = mesh.eval(Space::Q, rho, Rule::Collocated)?;
    check_positive("potential temperature", &th)?;
    Ok(mesh
        .quad_points(Rule::Collocated)
        .iter()
        .enumerate()
        .map(|(k, q)| q.weight * rq[k] * (c.cp * th[k].ln() + s0))
        .sum())
}
