//! Invariant suite behind the `checks` subcommand.

use std::fmt::Write as _;

use crate::config::{Experiment, RunConfig};
use crate::error::Result;
use crate::hevi::{bubble_state, column_state, flux_time_averages, FluxLevels, Hevi, StateVector};
use crate::mesh::{build_mesh, nilpotency_report, project_div, MeshOperators, Rule, Space};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            passed: value <= threshold,
        }
    }
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Smooth but irregular test field.
fn wiggle(seed: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, z| (1.3 * x + seed).sin() * (0.7 * z - 2.0 * seed).cos() + 0.3 * (x * z + seed).sin()
}

/// Largest entry of every composite incidence product.
pub fn check_nilpotency(ops: &MeshOperators) -> CheckResult {
    let r = nilpotency_report(&ops.incidence);
    let value = if r.passed() { 0.0 } else { r.max_entry.max(1) as f64 };
    CheckResult::new("incidence nilpotency", value, 0.0)
}

/// `max |<beta, P v - v>|` relative to the load vector.
pub fn check_galerkin(ops: &MeshOperators, tol: f64) -> Result<CheckResult> {
    let m = &ops.mesh;
    let (fx, fz) = (wiggle(0.4), wiggle(1.1));
    let (sx, sz) = (m.lx, m.lz);
    let raw: Vec<(f64, f64)> = m
        .quad_points(Rule::Collocated)
        .iter()
        .map(|q| (fx(q.x / sx * 6.0, q.z / sz * 6.0), fz(q.x / sx * 6.0, q.z / sz * 6.0)))
        .collect();
    let (v, w) = project_div(ops, &raw)?;
    let bx = ops.load(Space::Upar, &raw.iter().map(|r| r.0).collect::<Vec<_>>());
    let bz = ops.load(Space::Uperp, &raw.iter().map(|r| r.1).collect::<Vec<_>>());
    let rx: Vec<f64> = ops.m_par.matvec(&v.values).iter().zip(&bx).map(|(a, b)| a - b).collect();
    let rz: Vec<f64> = ops.m_perp.matvec(&w.values).iter().zip(&bz).map(|(a, b)| a - b).collect();
    let value = max_abs(&rx).max(max_abs(&rz)) / max_abs(&bx).max(max_abs(&bz));
    Ok(CheckResult::new("galerkin orthogonality", value, tol))
}

/// Averaged mass flux against two point Gauss integration in time.
pub fn check_flux_averages(ops: &MeshOperators, cfg: &RunConfig, tol: f64) -> Result<CheckResult> {
    let m = &ops.mesh;
    let s = |f: &dyn Fn(f64, f64) -> f64, sp| m.reduce(sp, |x, z| f(x / m.lx, z / m.lz));
    let v0 = s(&|x, z| 3.0 * wiggle(0.2)(6.0 * x, 6.0 * z), Space::Upar);
    let v1 = s(&|x, z| 2.0 * wiggle(0.9)(6.0 * x, 6.0 * z), Space::Upar);
    let w0 = s(&|x, z| wiggle(0.5)(6.0 * x, 6.0 * z) * z * (1.0 - z), Space::Uperp);
    let w1 = s(&|x, z| wiggle(1.7)(6.0 * x, 6.0 * z) * z * (1.0 - z), Space::Uperp);
    let r0 = s(&|x, z| 1.0 + 0.2 * wiggle(0.3)(6.0 * x, 6.0 * z), Space::Q);
    let r1 = s(&|x, z| 1.1 + 0.2 * wiggle(2.3)(6.0 * x, 6.0 * z), Space::Q);
    let td = s(&|_, z| 300.0 - 10.0 * z, Space::Q);
    let f = flux_time_averages(
        ops,
        &cfg.consts,
        &FluxLevels {
            v_n: &v0,
            v_prov: &v1,
            w_n: &w0,
            w_next: &w1,
            rho_n: &r0,
            rho_next: &r1,
            theta_d_n: &td,
            theta_d_next: &td,
        },
    )?;
    let at = |sp, c: &[f64]| m.eval(sp, c, Rule::Collocated);
    let (a0, a1) = (at(Space::Q, &r0)?, at(Space::Q, &r1)?);
    let (p0, p1) = (at(Space::Upar, &v0)?, at(Space::Upar, &v1)?);
    let (q0, q1) = (at(Space::Uperp, &w0)?, at(Space::Uperp, &w1)?);
    let g = 0.5 / 3f64.sqrt();
    let mut fv = vec![0.0; a0.len()];
    let mut fw = vec![0.0; a0.len()];
    for s in [0.5 - g, 0.5 + g] {
        for k in 0..fv.len() {
            let r = a0[k] + s * (a1[k] - a0[k]);
            fv[k] += 0.5 * r * (p0[k] + s * (p1[k] - p0[k]));
            fw[k] += 0.5 * r * (q0[k] + s * (q1[k] - q0[k]));
        }
    }
    let ev = ops.m_par_inv.solve(&ops.load(Space::Upar, &fv));
    let ew = ops.m_perp_inv.solve(&ops.load(Space::Uperp, &fw));
    let dv: Vec<f64> = f.v_bar.iter().zip(&ev).map(|(a, b)| a - b).collect();
    let dw: Vec<f64> = f.w_bar.iter().zip(&ew).map(|(a, b)| a - b).collect();
    let value = (max_abs(&dv) / max_abs(&ev)).max(max_abs(&dw) / max_abs(&ew));
    Ok(CheckResult::new("flux average exactness", value, tol))
}

fn run_steps(h: &Hevi, s0: StateVector, dt: f64, n: usize, mut each: impl FnMut(&StateVector, &StateVector, f64, f64)) -> Result<()> {
    let mut prev: Option<StateVector> = None;
    let mut cur = s0;
    for _ in 0..n {
        let (next, rep) = h.step(prev.as_ref(), &cur, dt)?;
        each(&cur, &next, rep.dh, rep.energy_balance_residual);
        prev = Some(cur);
        cur = next;
    }
    Ok(())
}

fn energy(h: &Hevi, s: &StateVector) -> f64 {
    crate::thermo::total_energy(h.mesh(), &s.v, &s.w, &s.rho, &s.theta_d, &h.consts, Rule::Collocated)
        .map(|e| e.total)
        .unwrap_or(f64::NAN)
}

/// Runs the whole suite on the mesh of `cfg`. `cfg.check_tol` replaces
/// every floating point threshold.
pub fn run_checks(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let tol = |default: f64| cfg.check_tol.unwrap_or(default);
    let ops = MeshOperators::new(build_mesh(cfg.nx, cfg.nz, cfg.p, cfg.lx, cfg.lz)?)?;
    let mut out = vec![
        check_nilpotency(&ops),
        check_galerkin(&ops, tol(1e-12))?,
        check_flux_averages(&ops, cfg, tol(1e-13))?,
    ];
    let steps = cfg.steps().clamp(1, 20);

    let col_cfg = RunConfig {
        experiment: Experiment::Column,
        nx: 1,
        ..cfg.clone()
    };
    let col_ops = MeshOperators::new(build_mesh(1, cfg.nz, cfg.p, cfg.lx, cfg.lz)?)?;
    let s0 = column_state(&col_ops, &cfg.consts, &cfg.bubble)?;
    let h = Hevi::new(col_ops, cfg.consts, col_cfg.stepper_settings())?;
    let mut worst = 0.0f64;
    run_steps(&h, s0, cfg.dt, steps, |a, _, dh, _| worst = worst.max(dh.abs() / energy(&h, a)))?;
    out.push(CheckResult::new("column energy conservation", worst, tol(10.0 * cfg.picard_tol)));

    let bub_cfg = RunConfig {
        experiment: Experiment::Bubble,
        ..cfg.clone()
    };
    let s0 = bubble_state(&ops, &cfg.consts, &cfg.bubble)?;
    let h = Hevi::new(ops, cfg.consts, bub_cfg.stepper_settings())?;
    let (mut skew, mut mass) = (0.0f64, 0.0f64);
    run_steps(&h, s0, cfg.dt, steps, |a, b, _, bal| {
        skew = skew.max(bal.abs() / energy(&h, a));
        let rel = |x: &[f64], y: &[f64]| {
            let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
            ((sy - sx) / sx).abs()
        };
        mass = mass.max(rel(&a.rho, &b.rho)).max(rel(&a.theta_d, &b.theta_d));
    })?;
    out.push(CheckResult::new("skew cancellation", skew, tol(1e-10)));
    out.push(CheckResult::new("mass and theta conservation", mass, tol(1e-12)));
    Ok(out)
}

/// Fixed width pass/fail table.
pub fn format_table(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        let _ = writeln!(
            s,
            "{:<4} {:<30} {:>12.3e} <= {:.1e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.value,
            r.threshold
        );
    }
    s
}
