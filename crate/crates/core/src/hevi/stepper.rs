use super::flux::{averages_from_points, FluxSet, PointLevels};
use super::state::StateVector;
use crate::error::{Error, Result};
use crate::mesh::{weak_curl_pv_points, MeshOperators, Rule, Space};
use crate::numkit::{BandedLu, BandedMatrix, CsrMatrix};
use crate::thermo::{diagnose_theta_points, exner_load_points, total_energy, PhysConstants, Upwind};

/// Switches of the time stepper.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperSettings {
    /// Relative residual at which the implicit vertical iteration stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Downwind fraction of the step for the theta diagnosis, `None` for
    /// plain Galerkin.
    pub upwind_fraction: Option<f64>,
    /// Biharmonic viscosity coefficient in m^4/s.
    pub viscosity: f64,
    /// Keep `v` frozen, for pure vertical dynamics.
    pub vertical_only: bool,
    /// Predictor of the provisional horizontal velocity once a previous
    /// level exists.
    pub predictor: Step1Mode,
}

impl Default for StepperSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 100,
            upwind_fraction: None,
            viscosity: 0.0,
            vertical_only: false,
            predictor: Step1Mode::Euler,
        }
    }
}

/// How the provisional horizontal velocity is advanced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Step1Mode {
    /// Two step leapfrog from level `n - 1`.
    Leapfrog,
    /// Forward Euler from level `n`. The default, and always used for the
    /// first step.
    Euler,
}

impl std::fmt::Display for Step1Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Step1Mode::Leapfrog => "leapfrog",
            Step1Mode::Euler => "euler",
        })
    }
}

impl std::str::FromStr for Step1Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leapfrog" => Ok(Step1Mode::Leapfrog),
            "euler" => Ok(Step1Mode::Euler),
            other => Err(Error::Config(format!("unknown predictor {other:?}, expected leapfrog or euler"))),
        }
    }
}

/// Diagnostics of one completed step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub picard_iterations: usize,
    pub implicit_residual: f64,
    pub residual_history: Vec<f64>,
    /// Sum of the flux weighted increments, zero up to the implicit
    /// residual.
    pub energy_balance_residual: f64,
    /// `V_bar^T M (v' - v^{n+1})`.
    pub horizontal_error: f64,
    /// Kinetic energy of `v^{n+1}` minus that of `v'`, both with the new
    /// density.
    pub kinetic_closure: f64,
    /// Internal energy change minus `Pi_bar^T M dTheta`.
    pub exner_error: f64,
    /// Work done by the biharmonic viscosity.
    pub viscous_work: f64,
    /// Total energy change over the step.
    pub dh: f64,
    /// Potential to kinetic power exchange.
    pub p2k: f64,
    /// Internal to kinetic power exchange.
    pub i2k: f64,
}

/// Result of the implicit vertical solve.
#[derive(Clone, Debug)]
pub struct VerticalSolution {
    pub w: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta_d: Vec<f64>,
    pub flux: FluxSet,
    /// Time centred potential vorticity, P coefficients.
    pub q_half: Vec<f64>,
    /// Time centred potential temperature, theta space coefficients.
    pub theta_half: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Pieces of the energy change of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyBalance {
    pub vertical_part: f64,
    pub horizontal_error: f64,
}

/// Point values and diagnosed quantities of one time level.
struct Level {
    vq: Vec<f64>,
    wq: Vec<f64>,
    rq: Vec<f64>,
    tq: Vec<f64>,
    pi_load: Vec<f64>,
    theta: Vec<f64>,
    theta_q: Vec<f64>,
    pv: Vec<f64>,
    pv_q: Vec<f64>,
}

/// Approximate Jacobian of the vertical system with Theta and rho
/// eliminated, factored column by column.
struct Jacobian {
    columns: Vec<BandedLu<f64>>,
    /// `M_theta M^-1 E_perp^T M_pi'`
    k: CsrMatrix<f64>,
    /// `E_perp A1`
    p_rho: CsrMatrix<f64>,
    /// `E_perp M^-1 M_theta A1`
    p_theta: CsrMatrix<f64>,
}

fn mid(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn abs(a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| x.abs()).collect()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (u, v) in y.iter_mut().zip(x) {
        *u += a * v;
    }
}

fn times(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Tendency `-coeff L(L v)` of the biharmonic viscosity, with
/// `L = -M^-1 E_par^T M_Q E_par` the horizontal weak Laplacian on U_par.
pub fn biharmonic_viscosity(ops: &MeshOperators, v: &[f64], coeff: f64) -> Vec<f64> {
    if coeff == 0.0 {
        return vec![0.0; v.len()];
    }
    let lap = |x: &[f64]| -> Vec<f64> {
        let d = ops.m_q.matvec(&ops.e_par.matvec(x));
        ops.m_par_inv.solve(&ops.e_par.tmatvec(&d)).into_iter().map(|y| -y).collect()
    };
    lap(&lap(v)).into_iter().map(|y| -coeff * y).collect()
}

/// Flux weighted increments of a step.
///
/// `vertical_part` pairs `W_bar, Phi_bar, Pi_bar, V_bar` with the changes of
/// `w, rho, Theta, v`; `horizontal_error` is `V_bar^T M (v' - v^{n+1})`.
pub fn energy_balance_residual(
    ops: &MeshOperators,
    flux: &FluxSet,
    before: &StateVector,
    after: &StateVector,
    v_prov: &[f64],
) -> EnergyBalance {
    let dv = diff(&after.v, &before.v);
    let vertical_part = dot(&flux.w_bar, &ops.m_perp.matvec(&diff(&after.w, &before.w)))
        + dot(&flux.phi_load, &diff(&after.rho, &before.rho))
        + dot(&flux.pi_load, &diff(&after.theta_d, &before.theta_d))
        + dot(&flux.v_bar, &ops.m_par.matvec(&dv));
    let horizontal_error = dot(&flux.v_bar, &ops.m_par.matvec(&diff(v_prov, &after.v)));
    EnergyBalance {
        vertical_part,
        horizontal_error,
    }
}

/// The energetically balanced horizontally explicit, vertically implicit
/// stepper on one mesh.
#[derive(Clone, Debug)]
pub struct Hevi {
    pub ops: MeshOperators,
    pub consts: PhysConstants,
    pub settings: StepperSettings,
    z_q: Vec<f64>,
    z_load: Vec<f64>,
    m_perp_inv: CsrMatrix<f64>,
    /// Entrywise magnitude of the vertical gradient `M_w^-1 E_perp^T`.
    grad_abs: CsrMatrix<f64>,
    /// U_perp indices of every element column, ordered level-major.
    perp_cols: Vec<Vec<usize>>,
}

impl Hevi {
    pub fn new(ops: MeshOperators, consts: PhysConstants, settings: StepperSettings) -> Result<Self> {
        consts.validate()?;
        if !(settings.tol > 0.0) || settings.max_iter == 0 {
            return Err(Error::Config("picard tolerance and iteration count must be positive".into()));
        }
        if !(settings.viscosity >= 0.0) {
            return Err(Error::Config("viscosity must be non-negative".into()));
        }
        let m = &ops.mesh;
        let z_q: Vec<f64> = m.quad_points(Rule::Collocated).iter().map(|q| q.z).collect();
        let z_load = ops.load(Space::Q, &z_q);
        let (_, nzc) = m.shape(Space::Uperp);
        let perp_cols = (0..m.nx)
            .map(|ex| {
                let mut idx = Vec::with_capacity(nzc * m.p);
                for j in 0..nzc {
                    for a in 0..m.p {
                        idx.push((ex * m.p + a) * nzc + j);
                    }
                }
                idx
            })
            .collect();
        let m_perp_inv = ops.m_perp_inv.inverse();
        let grad_abs = m_perp_inv.matmul(&ops.e_perp.transpose()).map(f64::abs);
        Ok(Self {
            m_perp_inv,
            grad_abs,
            z_q,
            z_load,
            perp_cols,
            ops,
            consts,
            settings,
        })
    }

    pub fn mesh(&self) -> &crate::mesh::MeshComplex {
        &self.ops.mesh
    }

    fn upwind<'a>(&self, w: &'a [f64], dt: f64) -> Option<Upwind<'a>> {
        self.settings.upwind_fraction.map(|fraction| Upwind { w, dt, fraction })
    }

    /// Potential temperature of a state as theta space coefficients.
    pub fn diagnose_theta(&self, s: &StateVector, dt: f64) -> Result<Vec<f64>> {
        let m = &self.ops.mesh;
        let rq = m.eval(Space::Q, &s.rho, Rule::Collocated)?;
        let tq = m.eval(Space::Q, &s.theta_d, Rule::Collocated)?;
        diagnose_theta_points(&self.ops, &rq, &tq, self.upwind(&s.w, dt))
    }

    fn level(&self, v: &[f64], w: &[f64], rho: &[f64], theta_d: &[f64], dt: f64) -> Result<Level> {
        let o = &self.ops;
        let m = &o.mesh;
        let rq = m.eval(Space::Q, rho, Rule::Collocated)?;
        if let Some(k) = rq.iter().position(|r| !(*r > 0.0)) {
            return Err(Error::Thermodynamic(format!("density = {:e} at quadrature point {k}", rq[k])));
        }
        let tq = m.eval(Space::Q, theta_d, Rule::Collocated)?;
        let pi_load = exner_load_points(o, &tq, &self.consts)?;
        let theta = diagnose_theta_points(o, &rq, &tq, self.upwind(w, dt))?;
        let theta_q = o.at_points(Space::Theta, &theta);
        let pv = weak_curl_pv_points(o, v, w, &rq)?;
        let pv_q = o.at_points(Space::P, &pv);
        Ok(Level {
            vq: m.eval(Space::Upar, v, Rule::Collocated)?,
            wq: m.eval(Space::Uperp, w, Rule::Collocated)?,
            rq,
            tq,
            pi_load,
            theta,
            theta_q,
            pv,
            pv_q,
        })
    }

    /// Load vector of the horizontal momentum forcing: vorticity, Bernoulli
    /// and theta weighted Exner gradient terms.
    fn horizontal_rhs(&self, w_flux: &[f64], phi_load: &[f64], pi_load: &[f64], theta_q: &[f64], pv_q: &[f64]) -> Vec<f64> {
        let o = &self.ops;
        let wq = o.at_points(Space::Uperp, w_flux);
        let mut f = o.load(Space::Upar, &times(pv_q, &wq));
        f.iter_mut().for_each(|x| *x = -*x);
        o.e_par.tmatvec_add(phi_load, &mut f);
        let grad = o.m_par_inv.solve(&o.e_par.tmatvec(pi_load));
        let gq = o.at_points(Space::Upar, &grad);
        axpy(&mut f, 1.0, &o.load(Space::Upar, &times(theta_q, &gq)));
        f
    }

    fn vertical_rhs(&self, v_flux: &[f64], phi_load: &[f64], pi_load: &[f64], theta_q: &[f64], pv_q: &[f64]) -> Vec<f64> {
        let o = &self.ops;
        let vq = o.at_points(Space::Upar, v_flux);
        let mut f = o.load(Space::Uperp, &times(pv_q, &vq));
        o.e_perp.tmatvec_add(phi_load, &mut f);
        let grad = o.m_perp_inv.solve(&o.e_perp.tmatvec(pi_load));
        let gq = o.at_points(Space::Uperp, &grad);
        axpy(&mut f, 1.0, &o.load(Space::Uperp, &times(theta_q, &gq)));
        f
    }

    /// Divergence of the potential temperature flux `P[theta U]`.
    fn theta_flux_div(&self, v_flux: &[f64], w_flux: &[f64], theta_q: &[f64]) -> Vec<f64> {
        let o = &self.ops;
        let fw = o.m_perp_inv.solve(&o.load(Space::Uperp, &times(theta_q, &o.at_points(Space::Uperp, w_flux))));
        let fv = o.m_par_inv.solve(&o.load(Space::Upar, &times(theta_q, &o.at_points(Space::Upar, v_flux))));
        let mut d = o.e_perp.matvec(&fw);
        axpy(&mut d, 1.0, &o.e_par.matvec(&fv));
        d
    }

    fn mass_flux_div(&self, v_flux: &[f64], w_flux: &[f64]) -> Vec<f64> {
        let mut d = self.ops.e_perp.matvec(w_flux);
        axpy(&mut d, 1.0, &self.ops.e_par.matvec(v_flux));
        d
    }

    /// Step 1: provisional horizontal velocity from level `n` forcings.
    pub fn step1_horizontal(&self, prev: Option<&StateVector>, cur: &StateVector, dt: f64, mode: Step1Mode) -> Result<Vec<f64>> {
        let ln = self.level(&cur.v, &cur.w, &cur.rho, &cur.theta_d, dt)?;
        self.step1_with(prev, cur, &ln, dt, mode)
    }

    fn step1_with(&self, prev: Option<&StateVector>, cur: &StateVector, ln: &Level, dt: f64, mode: Step1Mode) -> Result<Vec<f64>> {
        let (base, scale) = match mode {
            Step1Mode::Euler => (&cur.v, dt),
            Step1Mode::Leapfrog => match prev {
                Some(p) => (&p.v, 2.0 * dt),
                None => return Err(Error::Startup("leapfrog needs the previous time level".into())),
            },
        };
        if self.settings.vertical_only {
            return Ok(cur.v.clone());
        }
        let o = &self.ops;
        let w_flux = o.m_perp_inv.solve(&o.load(Space::Uperp, &times(&ln.rq, &ln.wq)));
        let g = self.consts.g;
        let phi: Vec<f64> = (0..ln.vq.len())
            .map(|k| 0.5 * (ln.vq[k] * ln.vq[k] + ln.wq[k] * ln.wq[k]) + g * self.z_q[k])
            .collect();
        let phi_load = o.load(Space::Q, &phi);
        let f = self.horizontal_rhs(&w_flux, &phi_load, &ln.pi_load, &ln.theta_q, &ln.pv_q);
        let acc = o.m_par_inv.solve(&f);
        let mut v = base.clone();
        axpy(&mut v, scale, &acc);
        Ok(v)
    }

    fn jacobian(&self, ln: &Level, dt: f64) -> Result<Jacobian> {
        let o = &self.ops;
        let m = &o.mesh;
        let c = &self.consts;
        let dpi: Vec<f64> = ln.tq.iter().map(|&t| c.exner_derivative(t)).collect();
        let mt = m.assemble(Space::Uperp, Space::Uperp, Some(&ln.theta_q), Rule::Collocated)?;
        let mpi = m.assemble(Space::Q, Space::Q, Some(&dpi), Rule::Collocated)?;
        let mr = m.assemble(Space::Uperp, Space::Uperp, Some(&ln.rq), Rule::Collocated)?;
        let b = self.m_perp_inv.matmul(&mt);
        let k = b.transpose().matmul(&o.e_perp.transpose()).matmul(&mpi);
        let a1 = self.m_perp_inv.matmul(&mr).scale(0.5);
        let p_rho = o.e_perp.matmul(&a1);
        let p_theta = o.e_perp.matmul(&b.matmul(&a1));
        let j = o.m_perp.add_scaled(0.5 * dt * dt, &k.matmul(&p_theta));
        let n = j.nrows();
        let mut local = vec![usize::MAX; n];
        let mut columns = Vec::with_capacity(self.perp_cols.len());
        for (ci, idx) in self.perp_cols.iter().enumerate() {
            for (l, &g) in idx.iter().enumerate() {
                local[g] = l;
            }
            let mut bw = 0;
            for (l, &g) in idx.iter().enumerate() {
                for &jj in j.row(g).0 {
                    let lj = local[jj];
                    debug_assert!(lj != usize::MAX && idx[lj] == jj, "vertical system couples columns");
                    bw = bw.max(l.abs_diff(lj));
                }
            }
            let mut band = BandedMatrix::zeros(idx.len(), bw, bw);
            for (l, &g) in idx.iter().enumerate() {
                let (cols, vals) = j.row(g);
                for (&jj, &v) in cols.iter().zip(vals) {
                    band.add(l, local[jj], v);
                }
            }
            columns.push(
                band.lu()
                    .map_err(|e| Error::Degenerate(format!("vertical system column {ci}: {e}")))?,
            );
        }
        Ok(Jacobian {
            columns,
            k,
            p_rho,
            p_theta,
        })
    }

    fn solve_jacobian(&self, jac: &Jacobian, rhs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; rhs.len()];
        for (idx, lu) in self.perp_cols.iter().zip(&jac.columns) {
            let mut b: Vec<f64> = idx.iter().map(|&g| rhs[g]).collect();
            lu.solve_in_place(&mut b);
            for (&g, v) in idx.iter().zip(b) {
                x[g] = v;
            }
        }
        x
    }

    /// Step 2: implicit solve for `w`, `rho` and `Theta` at the new level,
    /// with the horizontal divergence of the averaged mass flux included.
    pub fn solve_vertical_implicit(&self, cur: &StateVector, v_prov: &[f64], dt: f64) -> Result<VerticalSolution> {
        let ln = self.level(&cur.v, &cur.w, &cur.rho, &cur.theta_d, dt)?;
        self.vertical_with(cur, &ln, v_prov, dt)
    }

    fn vertical_with(&self, cur: &StateVector, ln: &Level, v_prov: &[f64], dt: f64) -> Result<VerticalSolution> {
        let o = &self.ops;
        let vp_q = o.mesh.eval(Space::Upar, v_prov, Rule::Collocated)?;
        let jac = self.jacobian(ln, dt)?;
        let rho_scale = norm_inf(&cur.rho).max(f64::MIN_POSITIVE);
        let td_scale = norm_inf(&cur.theta_d).max(f64::MIN_POSITIVE);
        let (mut w, mut rho, mut td) = (cur.w.clone(), cur.rho.clone(), cur.theta_d.clone());
        let mut history = Vec::new();
        for it in 1..=self.settings.max_iter {
            let l1 = self.level(v_prov, &w, &rho, &td, dt)?;
            let theta_half_q = mid(&ln.theta_q, &l1.theta_q);
            let pv_half_q = mid(&ln.pv_q, &l1.pv_q);
            let flux = averages_from_points(
                o,
                &self.z_q,
                self.consts.g,
                &PointLevels {
                    vn: &ln.vq,
                    vp: &vp_q,
                    wn: &ln.wq,
                    w1: &l1.wq,
                    rn: &ln.rq,
                    r1: &l1.rq,
                    pi_load_n: &ln.pi_load,
                    pi_load_1: &l1.pi_load,
                },
            );
            let force = self.vertical_rhs(&flux.v_bar, &flux.phi_load, &flux.pi_load, &theta_half_q, &pv_half_q);
            let dw = diff(&w, &cur.w);
            let mut r_w = o.m_perp.matvec(&dw);
            axpy(&mut r_w, -dt, &force);
            let mut r_rho = diff(&rho, &cur.rho);
            axpy(&mut r_rho, dt, &self.mass_flux_div(&flux.v_bar, &flux.w_bar));
            let mut r_td = diff(&td, &cur.theta_d);
            axpy(&mut r_td, dt, &self.theta_flux_div(&flux.v_bar, &flux.w_bar, &theta_half_q));
            let impulse = norm_inf(&o.m_perp_inv.solve(&force)) * dt.abs();
            // size of the gravity and pressure terms before they cancel
            let cancel = dt.abs()
                * norm_inf(&self.grad_abs.matvec(&abs(&flux.phi_load)))
                    .max(norm_inf(&theta_half_q) * norm_inf(&self.grad_abs.matvec(&abs(&flux.pi_load))));
            let w_scale = (self.consts.g * dt.abs())
                .max(impulse)
                .max(cancel)
                .max(norm_inf(&cur.w))
                .max(norm_inf(&dw))
                .max(f64::MIN_POSITIVE);
            let res = (norm_inf(&o.m_perp_inv.solve(&r_w)) / w_scale)
                .max(norm_inf(&r_rho) / rho_scale)
                .max(norm_inf(&r_td) / td_scale);
            history.push(res);
            if res <= self.settings.tol {
                return Ok(VerticalSolution {
                    w,
                    rho,
                    theta_d: td,
                    flux,
                    q_half: mid(&ln.pv, &l1.pv),
                    theta_half: mid(&ln.theta, &l1.theta),
                    iterations: it,
                    residual: res,
                    history,
                });
            }
            let mut rhs: Vec<f64> = r_w.iter().map(|x| -x).collect();
            axpy(&mut rhs, -0.5 * dt, &jac.k.matvec(&r_td));
            let delta_w = self.solve_jacobian(&jac, &rhs);
            axpy(&mut w, 1.0, &delta_w);
            axpy(&mut rho, -1.0, &r_rho);
            axpy(&mut rho, -dt, &jac.p_rho.matvec(&delta_w));
            axpy(&mut td, -1.0, &r_td);
            axpy(&mut td, -dt, &jac.p_theta.matvec(&delta_w));
        }
        Err(Error::Convergence {
            what: "implicit vertical solve",
            iterations: self.settings.max_iter,
            residual: history.last().copied().unwrap_or(f64::NAN),
            history,
        })
    }

    /// Step 3: final horizontal velocity from the averaged fluxes. The
    /// biharmonic viscosity tendency of `v^n` is included when enabled.
    pub fn step3_horizontal(
        &self,
        cur: &StateVector,
        flux: &FluxSet,
        q_half: &[f64],
        theta_half: &[f64],
        dt: f64,
    ) -> Result<Vec<f64>> {
        let (mut v, visc) = self.step3_parts(cur, flux, q_half, theta_half, dt)?;
        axpy(&mut v, 1.0, &visc);
        Ok(v)
    }

    fn step3_parts(
        &self,
        cur: &StateVector,
        flux: &FluxSet,
        q_half: &[f64],
        theta_half: &[f64],
        dt: f64,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = cur.v.len();
        if self.settings.vertical_only {
            return Ok((cur.v.clone(), vec![0.0; n]));
        }
        let m = &self.ops.mesh;
        let pv_q = m.eval(Space::P, q_half, Rule::Collocated)?;
        let th_q = m.eval(Space::Theta, theta_half, Rule::Collocated)?;
        let f = self.horizontal_rhs(&flux.w_bar, &flux.phi_load, &flux.pi_load, &th_q, &pv_q);
        let mut v = cur.v.clone();
        axpy(&mut v, dt, &self.ops.m_par_inv.solve(&f));
        let visc: Vec<f64> = biharmonic_viscosity(&self.ops, &cur.v, self.settings.viscosity)
            .into_iter()
            .map(|x| dt * x)
            .collect();
        Ok((v, visc))
    }

    /// One full step. `prev` is level `n - 1`; without it Step 1 falls back
    /// to forward Euler whatever the configured predictor.
    pub fn step(&self, prev: Option<&StateVector>, cur: &StateVector, dt: f64) -> Result<(StateVector, StepReport)> {
        let o = &self.ops;
        let m = &o.mesh;
        let ln = self.level(&cur.v, &cur.w, &cur.rho, &cur.theta_d, dt)?;
        let mode = if prev.is_some() { self.settings.predictor } else { Step1Mode::Euler };
        let v_prov = self.step1_with(prev, cur, &ln, dt, mode)?;
        let sol = self.vertical_with(cur, &ln, &v_prov, dt)?;
        let (v_inv, visc) = self.step3_parts(cur, &sol.flux, &sol.q_half, &sol.theta_half, dt)?;
        let mut v = v_inv.clone();
        axpy(&mut v, 1.0, &visc);
        let next = StateVector {
            v,
            w: sol.w,
            rho: sol.rho,
            theta_d: sol.theta_d,
            t: cur.t + dt,
        };
        let inviscid = StateVector {
            v: v_inv,
            ..next.clone()
        };
        let flux = &sol.flux;
        let bal = energy_balance_residual(o, flux, cur, &inviscid, &v_prov);
        let viscous_work = dot(&flux.v_bar, &o.m_par.matvec(&visc));
        let horizontal_error = dot(&flux.v_bar, &o.m_par.matvec(&diff(&v_prov, &next.v)));
        let e0 = total_energy(m, &cur.v, &cur.w, &cur.rho, &cur.theta_d, &self.consts, Rule::Collocated)?;
        let e1 = total_energy(m, &next.v, &next.w, &next.rho, &next.theta_d, &self.consts, Rule::Collocated)?;
        let r1 = m.eval(Space::Q, &next.rho, Rule::Collocated)?;
        let v1 = m.eval(Space::Upar, &next.v, Rule::Collocated)?;
        let vp = m.eval(Space::Upar, &v_prov, Rule::Collocated)?;
        let kinetic_closure: f64 = m
            .quad_points(Rule::Collocated)
            .iter()
            .enumerate()
            .map(|(k, q)| 0.5 * q.weight * r1[k] * (v1[k] * v1[k] - vp[k] * vp[k]))
            .sum();
        let exner_error = e1.internal - e0.internal - dot(&flux.pi_load, &diff(&next.theta_d, &cur.theta_d));
        let theta_half_q = m.eval(Space::Theta, &sol.theta_half, Rule::Collocated)?;
        let p2k = self.consts.g * dot(&self.z_load, &o.e_perp.matvec(&flux.w_bar));
        let i2k = dot(&flux.pi_load, &self.theta_flux_div(&flux.v_bar, &flux.w_bar, &theta_half_q));
        let report = StepReport {
            picard_iterations: sol.iterations,
            implicit_residual: sol.residual,
            residual_history: sol.history,
            energy_balance_residual: bal.vertical_part,
            horizontal_error,
            kinetic_closure,
            exner_error,
            viscous_work,
            dh: e1.total - e0.total,
            p2k,
            i2k,
        };
        Ok((next, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hevi::init::{bubble_state, column_state, isentropic_state, BubbleParams};
    use crate::mesh::build_mesh;

    fn ops(nx: usize, nz: usize, p: usize) -> MeshOperators {
        MeshOperators::new(build_mesh(nx, nz, p, 1000.0, 1500.0).unwrap()).unwrap()
    }

    fn stepper(o: MeshOperators, settings: StepperSettings) -> Hevi {
        Hevi::new(o, PhysConstants::default(), settings).unwrap()
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        norm_inf(&diff(a, b)) / norm_inf(b).max(f64::MIN_POSITIVE)
    }

    fn energy(h: &Hevi, s: &StateVector) -> f64 {
        total_energy(h.mesh(), &s.v, &s.w, &s.rho, &s.theta_d, &h.consts, Rule::Collocated)
            .unwrap()
            .total
    }

    #[test]
    fn balanced_column_stays_at_rest() {
        let o = ops(1, 10, 3);
        let s = isentropic_state(&o, &PhysConstants::default(), 300.0).unwrap();
        let h = stepper(o, StepperSettings::default());
        let (next, r) = h.step(None, &s, 0.5).unwrap();
        assert!(norm_inf(&next.w) < 1e-9, "{}", norm_inf(&next.w));
        assert!(norm_inf(&next.v) < 1e-9);
        assert!(rel(&next.rho, &s.rho) < 1e-12);
        assert!(rel(&next.theta_d, &s.theta_d) < 1e-12);
        assert!(r.implicit_residual <= 1e-12);
    }

    #[test]
    fn zero_step_is_identity_after_one_iteration() {
        let o = ops(2, 4, 2);
        let s = bubble_state(&o, &PhysConstants::default(), &BubbleParams::default()).unwrap();
        let h = stepper(o, StepperSettings::default());
        let (next, r) = h.step(None, &s, 0.0).unwrap();
        assert_eq!(r.picard_iterations, 1);
        assert_eq!(next.w, s.w);
        assert_eq!(next.rho, s.rho);
        assert_eq!(next.theta_d, s.theta_d);
        assert_eq!(next.v, s.v);
    }

    #[test]
    fn vertical_only_column_conserves_energy() {
        let o = ops(1, 12, 3);
        let s0 = column_state(&o, &PhysConstants::default(), &BubbleParams::default()).unwrap();
        let settings = StepperSettings {
            vertical_only: true,
            ..Default::default()
        };
        let h = stepper(o, settings);
        let mut prev: Option<StateVector> = None;
        let mut cur = s0;
        for _ in 0..5 {
            let (next, r) = h.step(prev.as_ref(), &cur, 0.1).unwrap();
            let e0 = energy(&h, &cur);
            assert!(r.dh.abs() / e0 <= 10.0 * h.settings.tol, "{}", r.dh / e0);
            assert!(next.v.iter().all(|v| *v == 0.0));
            prev = Some(cur);
            cur = next;
        }
        assert!(norm_inf(&cur.w) > 1e-3, "the column should start moving");
    }

    #[test]
    fn mass_and_theta_mass_are_conserved() {
        let o = ops(3, 4, 2);
        let s = bubble_state(&o, &PhysConstants::default(), &BubbleParams::default()).unwrap();
        let h = stepper(o, StepperSettings::default());
        let (s1, _) = h.step(None, &s, 0.2).unwrap();
        let (s2, _) = h.step(Some(&s), &s1, 0.2).unwrap();
        let sum = |x: &[f64]| x.iter().sum::<f64>();
        for st in [&s1, &s2] {
            assert!((sum(&st.rho) - sum(&s.rho)).abs() <= 1e-13 * sum(&s.rho));
            assert!((sum(&st.theta_d) - sum(&s.theta_d)).abs() <= 1e-13 * sum(&s.theta_d));
        }
    }

    #[test]
    fn energy_change_decomposes_exactly() {
        let o = ops(3, 5, 3);
        let s = bubble_state(&o, &PhysConstants::default(), &BubbleParams::default()).unwrap();
        let settings = StepperSettings {
            viscosity: 1e5,
            upwind_fraction: Some(0.5),
            ..Default::default()
        };
        let h = stepper(o, settings);
        let (s1, _) = h.step(None, &s, 0.5).unwrap();
        let (_, r) = h.step(Some(&s), &s1, 0.5).unwrap();
        let parts = r.energy_balance_residual + r.viscous_work + r.horizontal_error + r.kinetic_closure + r.exner_error;
        let e = energy(&h, &s1);
        assert!((r.dh - parts).abs() <= 1e-12 * e, "{} vs {}", r.dh, parts);
        assert!(r.energy_balance_residual.abs() <= 1e-12 * e);
        assert!(r.viscous_work <= 0.0);
    }

    #[test]
    fn leapfrog_needs_a_previous_level() {
        let o = ops(2, 3, 2);
        let s = bubble_state(&o, &PhysConstants::default(), &BubbleParams::default()).unwrap();
        let h = stepper(o, StepperSettings::default());
        assert!(matches!(
            h.step1_horizontal(None, &s, 0.1, Step1Mode::Leapfrog),
            Err(Error::Startup(_))
        ));
        let v = h.step1_horizontal(None, &s, 0.0, Step1Mode::Euler).unwrap();
        assert_eq!(v, s.v);
    }

    #[test]
    fn step1_at_rest_gives_no_horizontal_motion() {
        let o = ops(3, 4, 2);
        let s = isentropic_state(&o, &PhysConstants::default(), 300.0).unwrap();
        let h = stepper(o, StepperSettings::default());
        let v = h.step1_horizontal(Some(&s), &s, 1.0, Step1Mode::Leapfrog).unwrap();
        assert!(norm_inf(&v) < 1e-9);
    }

    #[test]
    fn step3_is_odd_in_the_time_step() {
        let o = ops(3, 4, 2);
        let s = bubble_state(&o, &PhysConstants::default(), &BubbleParams::default()).unwrap();
        let h = stepper(o, StepperSettings::default());
        let vp = h.step1_horizontal(None, &s, 0.3, Step1Mode::Euler).unwrap();
        let sol = h.solve_vertical_implicit(&s, &vp, 0.3).unwrap();
        let fwd = h.step3_horizontal(&s, &sol.flux, &sol.q_half, &sol.theta_half, 0.3).unwrap();
        let back = h.step3_horizontal(&s, &sol.flux, &sol.q_half, &sol.theta_half, -0.3).unwrap();
        for ((f, b), v) in fwd.iter().zip(&back).zip(&s.v) {
            assert!((f + b - 2.0 * v).abs() < 1e-12);
        }
        assert!(norm_inf(&diff(&fwd, &s.v)) > 0.0);
    }

    #[test]
    fn biharmonic_damps_fourier_modes() {
        let nx = 16;
        let o = MeshOperators::new(build_mesh(nx, 1, 1, 16.0, 1.0).unwrap()).unwrap();
        assert!(biharmonic_viscosity(&o, &[1.0; 16], 0.0).iter().all(|x| *x == 0.0));
        assert!(norm_inf(&biharmonic_viscosity(&o, &vec![3.0; o.mesh.dim(Space::Upar)], 2.0)) < 1e-12);
        let k = 2.0 * std::f64::consts::PI * 3.0 / 16.0;
        let v = o.mesh.reduce(Space::Upar, |x, _| (k * x).cos());
        let nu = 0.7;
        let lam = 4.0 * (0.5 * k).sin().powi(2);
        let t = biharmonic_viscosity(&o, &v, nu);
        for (a, b) in t.iter().zip(&v) {
            assert!((a + nu * lam * lam * b).abs() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let o = ops(1, 2, 1);
        let bad = StepperSettings {
            tol: 0.0,
            ..Default::default()
        };
        assert!(Hevi::new(o.clone(), PhysConstants::default(), bad).is_err());
        let bad = StepperSettings {
            viscosity: -1.0,
            ..Default::default()
        };
        assert!(Hevi::new(o, PhysConstants::default(), bad).is_err());
    }
}
