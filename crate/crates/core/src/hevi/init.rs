use super::state::StateVector;
use crate::error::{Error, Result};
use crate::mesh::{MeshOperators, Rule, Space};
use crate::numkit::BlockSolver;
use crate::thermo::PhysConstants;

const HYDROSTATIC_TOL: f64 = 1e-15;
const HYDROSTATIC_MAX_ITER: usize = 50;

/// Theta of the discretely balanced isentropic atmosphere at rest.
///
/// Solves `<gamma, Pi(Theta_h)> = <gamma, cp - g z / theta0>` element by
/// element with Newton's method. With `rho = Theta / theta0` the vertical
/// momentum forcing of this state vanishes exactly, since the Bernoulli and
/// Exner loads then sum to a constant.
pub fn hydrostatic_theta_d(ops: &MeshOperators, c: &PhysConstants, theta0: f64) -> Result<Vec<f64>> {
    if !(theta0 > 0.0) {
        return Err(Error::Config(format!("theta0 must be positive, got {theta0}")));
    }
    let m = &ops.mesh;
    let zq: Vec<f64> = m.quad_points(Rule::Collocated).iter().map(|q| q.z).collect();
    let target = ops.load(Space::Q, &zq.iter().map(|z| c.cp - c.g * z / theta0).collect::<Vec<_>>());
    let top = c.cp - c.g * m.lz / theta0;
    if !(top > 0.0) {
        return Err(Error::Thermodynamic(format!("the isentropic atmosphere ends below the lid ({top:e})")));
    }
    let theta_of_pi = |pi: f64| c.p0 / c.r * (pi / c.cp).powf(c.cv / c.r);
    let mut td = m.reduce(Space::Q, |_, z| theta_of_pi(c.cp - c.g * z / theta0));
    let scale = target.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut res = f64::INFINITY;
    for _ in 0..HYDROSTATIC_MAX_ITER {
        let tq = ops.at_points(Space::Q, &td);
        if let Some(k) = tq.iter().position(|t| !(*t > 0.0)) {
            return Err(Error::Thermodynamic(format!("Theta = {:e} at quadrature point {k}", tq[k])));
        }
        let pi: Vec<f64> = tq.iter().map(|&t| c.exner_point(t)).collect();
        let r: Vec<f64> = ops.load(Space::Q, &pi).iter().zip(&target).map(|(a, b)| a - b).collect();
        res = r.iter().fold(0.0f64, |a, b| a.max(b.abs())) / scale;
        if res <= HYDROSTATIC_TOL {
            return Ok(td);
        }
        let dpi: Vec<f64> = tq.iter().map(|&t| c.exner_derivative(t)).collect();
        let jac = BlockSolver::new(&m.assemble(Space::Q, Space::Q, Some(&dpi), Rule::Collocated)?)?;
        for (t, d) in td.iter_mut().zip(jac.solve(&r)) {
            *t -= d;
        }
    }
    if res <= 1e3 * HYDROSTATIC_TOL {
        return Ok(td);
    }
    Err(Error::Convergence {
        what: "hydrostatic balance",
        iterations: HYDROSTATIC_MAX_ITER,
        residual: res,
        history: vec![res],
    })
}

/// Balanced isentropic state at rest with potential temperature `theta0`.
pub fn isentropic_state(ops: &MeshOperators, c: &PhysConstants, theta0: f64) -> Result<StateVector> {
    let td = hydrostatic_theta_d(ops, c, theta0)?;
    let rho = td.iter().map(|t| t / theta0).collect();
    Ok(StateVector::at_rest(&ops.mesh, rho, td))
}

/// Balanced background with a potential temperature perturbation
/// `theta'(x, z)` carried by the density, so the Exner pressure is left
/// unchanged.
pub fn perturbed_state(
    ops: &MeshOperators,
    c: &PhysConstants,
    theta0: f64,
    perturbation: impl Fn(f64, f64) -> f64,
) -> Result<StateVector> {
    let mut s = isentropic_state(ops, c, theta0)?;
    let tq = ops.at_points(Space::Q, &s.theta_d);
    let pts = ops.mesh.quad_points(Rule::Collocated);
    let mut f = Vec::with_capacity(pts.len());
    for (q, t) in pts.iter().zip(&tq) {
        let theta = theta0 + perturbation(q.x, q.z);
        if !(theta > 0.0) {
            return Err(Error::Thermodynamic(format!("potential temperature {theta} at ({}, {})", q.x, q.z)));
        }
        f.push(t * (1.0 / theta - 1.0 / theta0));
    }
    for (r, d) in s.rho.iter_mut().zip(ops.project_q(&f)) {
        *r += d;
    }
    s.check(&ops.mesh)?;
    Ok(s)
}

/// Warm bubble parameters: a cosine bump of amplitude `dtheta` and radius
/// `radius` centred at `(xc, zc)` on top of `theta0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BubbleParams {
    pub theta0: f64,
    pub dtheta: f64,
    pub radius: f64,
    pub xc: f64,
    pub zc: f64,
}

impl Default for BubbleParams {
    fn default() -> Self {
        Self {
            theta0: 300.0,
            dtheta: 0.5,
            radius: 250.0,
            xc: 500.0,
            zc: 350.0,
        }
    }
}

impl BubbleParams {
    pub fn perturbation(&self, x: f64, z: f64) -> f64 {
        let r = ((x - self.xc).powi(2) + (z - self.zc).powi(2)).sqrt();
        if r <= self.radius {
            0.5 * self.dtheta * (1.0 + (std::f64::consts::PI * r / self.radius).cos())
        } else {
            0.0
        }
    }
}

pub fn bubble_state(ops: &MeshOperators, c: &PhysConstants, b: &BubbleParams) -> Result<StateVector> {
    perturbed_state(ops, c, b.theta0, |x, z| b.perturbation(x, z))
}

/// Horizontally uniform cosine bump in `z`, for single column runs.
pub fn column_state(ops: &MeshOperators, c: &PhysConstants, b: &BubbleParams) -> Result<StateVector> {
    let flat = BubbleParams { xc: 0.0, ..*b };
    perturbed_state(ops, c, b.theta0, |_, z| flat.perturbation(0.0, z))
}
