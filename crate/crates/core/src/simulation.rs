//! Time loop with per step diagnostics and snapshot output.

use std::path::Path;

use crate::config::{Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::hevi::{bubble_state, column_state, Hevi, StateVector};
use crate::mesh::{build_mesh, MeshOperators, Rule, Space};
use crate::output::{write_field_csv, write_timeseries};
use crate::thermo::{entropy_diagnostic, total_energy, EnergyBreakdown};

pub const ENERGY_HEADER: [&str; 10] = ["t", "K", "P", "I", "H", "dH", "balance_residual", "entropy", "p2k", "i2k"];

pub const DIAGNOSTICS_HEADER: [&str; 10] = [
    "t",
    "mass",
    "theta_mass",
    "theta_max",
    "centroid_z",
    "max_w",
    "picard_iterations",
    "implicit_residual",
    "horizontal_error",
    "step_dH",
];

/// Diagnostics after one step, or of the initial state for the first record.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub energy: EnergyBreakdown,
    /// `H - H(0)`.
    pub dh: f64,
    /// Flux weighted sum of the step increments, zero up to solver noise.
    pub balance_residual: f64,
    pub horizontal_error: f64,
    /// `H` after the step minus `H` before it.
    pub step_dh: f64,
    pub entropy: f64,
    pub p2k: f64,
    pub i2k: f64,
    /// `int rho`.
    pub mass: f64,
    /// `int Theta`.
    pub theta_mass: f64,
    pub theta_max: f64,
    /// Height of the centre of the warm anomaly `theta - theta0 > 0`.
    pub centroid_z: f64,
    /// Largest vertical velocity at a quadrature point.
    pub max_w: f64,
    pub picard_iterations: usize,
    pub implicit_residual: f64,
}

impl StepRecord {
    pub fn energy_row(&self) -> Vec<f64> {
        let e = &self.energy;
        vec![
            self.t,
            e.kinetic,
            e.potential,
            e.internal,
            e.total,
            self.dh,
            self.balance_residual,
            self.entropy,
            self.p2k,
            self.i2k,
        ]
    }

    pub fn diagnostics_row(&self) -> Vec<f64> {
        vec![
            self.t,
            self.mass,
            self.theta_mass,
            self.theta_max,
            self.centroid_z,
            self.max_w,
            self.picard_iterations as f64,
            self.implicit_residual,
            self.horizontal_error,
            self.step_dh,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    /// Potential temperature coefficients.
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: StateVector,
}

/// Stepper and initial state of a column or bubble configuration.
pub fn setup(cfg: &RunConfig) -> Result<(Hevi, StateVector)> {
    let mesh = build_mesh(cfg.nx, cfg.nz, cfg.p, cfg.lx, cfg.lz)?;
    let ops = MeshOperators::new(mesh)?;
    let s0 = match cfg.experiment {
        Experiment::Bubble => bubble_state(&ops, &cfg.consts, &cfg.bubble)?,
        Experiment::Column => column_state(&ops, &cfg.consts, &cfg.bubble)?,
        other => return Err(Error::Config(format!("{other} is not a time stepping experiment"))),
    };
    Ok((Hevi::new(ops, cfg.consts, cfg.stepper_settings())?, s0))
}

struct Monitor<'a> {
    h: &'a Hevi,
    cfg: &'a RunConfig,
    z_q: Vec<f64>,
    w_q: Vec<f64>,
    h0: f64,
}

impl Monitor<'_> {
    fn theta(&self, s: &StateVector) -> Result<Vec<f64>> {
        self.h.diagnose_theta(s, self.cfg.dt)
    }

    fn record(&self, s: &StateVector, theta: &[f64]) -> Result<StepRecord> {
        let m = self.h.mesh();
        let c = &self.cfg.consts;
        let energy = total_energy(m, &s.v, &s.w, &s.rho, &s.theta_d, c, Rule::Collocated)?;
        let th = m.eval(Space::Theta, theta, Rule::Collocated)?;
        let theta0 = self.cfg.bubble.theta0;
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..th.len() {
            let a = (th[k] - theta0).max(0.0) * self.w_q[k];
            num += a * self.z_q[k];
            den += a;
        }
        Ok(StepRecord {
            t: s.t,
            energy,
            dh: energy.total - self.h0,
            balance_residual: 0.0,
            horizontal_error: 0.0,
            step_dh: 0.0,
            entropy: entropy_diagnostic(m, theta, &s.rho, c, self.cfg.s0)?,
            p2k: 0.0,
            i2k: 0.0,
            mass: s.rho.iter().sum(),
            theta_mass: s.theta_d.iter().sum(),
            theta_max: th.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)),
            centroid_z: if den > 0.0 { num / den } else { f64::NAN },
            max_w: m
                .eval(Space::Uperp, &s.w, Rule::Collocated)?
                .iter()
                .fold(0.0, |a, b| a.max(b.abs())),
            picard_iterations: 0,
            implicit_residual: 0.0,
        })
    }
}

/// Runs a column or bubble experiment.
///
/// With `out` set, `energy.csv`, `diagnostics.csv`, `config.txt` and the
/// `theta_XXXX.csv` snapshots are written there, also when a step fails
/// part way.
pub fn run_simulation(cfg: &RunConfig, out: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let (h, s0) = setup(cfg)?;
    let m = h.mesh();
    let pts = m.quad_points(Rule::Collocated);
    let h0 = total_energy(m, &s0.v, &s0.w, &s0.rho, &s0.theta_d, &cfg.consts, Rule::Collocated)?.total;
    let mon = Monitor {
        h: &h,
        cfg,
        z_q: pts.iter().map(|q| q.z).collect(),
        w_q: pts.iter().map(|q| q.weight).collect(),
        h0,
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.txt"), cfg.to_config_string())?;
    }
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let theta = mon.theta(&s0)?;
    records.push(mon.record(&s0, &theta)?);
    if cfg.snapshot_every > 0 {
        snapshots.push(Snapshot { step: 0, t: 0.0, theta });
    }
    let result = time_loop(cfg, &h, &mon, s0, &mut records, &mut snapshots);
    if let Some(dir) = out {
        write_outputs(dir, &h, &records, &snapshots)?;
    }
    let final_state = result?;
    Ok(RunOutput {
        records,
        snapshots,
        final_state,
    })
}

fn time_loop(
    cfg: &RunConfig,
    h: &Hevi,
    mon: &Monitor<'_>,
    s0: StateVector,
    records: &mut Vec<StepRecord>,
    snapshots: &mut Vec<Snapshot>,
) -> Result<StateVector> {
    let mut prev: Option<StateVector> = None;
    let mut cur = s0;
    for n in 1..=cfg.steps() {
        let (mut next, rep) = h.step(prev.as_ref(), &cur, cfg.dt)?;
        next.t = n as f64 * cfg.dt;
        let theta = mon.theta(&next)?;
        let mut r = mon.record(&next, &theta)?;
        r.balance_residual = rep.energy_balance_residual;
        r.horizontal_error = rep.horizontal_error;
        r.step_dh = rep.dh;
        r.p2k = rep.p2k;
        r.i2k = rep.i2k;
        r.picard_iterations = rep.picard_iterations;
        r.implicit_residual = rep.implicit_residual;
        records.push(r);
        if cfg.snapshot_every > 0 && n % cfg.snapshot_every == 0 {
            snapshots.push(Snapshot { step: n, t: next.t, theta });
        }
        prev = Some(cur);
        cur = next;
    }
    Ok(cur)
}

fn write_outputs(dir: &Path, h: &Hevi, records: &[StepRecord], snapshots: &[Snapshot]) -> Result<()> {
    let rows: Vec<Vec<f64>> = records.iter().map(StepRecord::energy_row).collect();
    write_timeseries(&dir.join("energy.csv"), &ENERGY_HEADER, &rows)?;
    let rows: Vec<Vec<f64>> = records.iter().map(StepRecord::diagnostics_row).collect();
    write_timeseries(&dir.join("diagnostics.csv"), &DIAGNOSTICS_HEADER, &rows)?;
    for (i, s) in snapshots.iter().enumerate() {
        write_field_csv(&dir.join(format!("theta_{i:04}.csv")), h.mesh(), Space::Theta, &s.theta)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(exp: Experiment) -> RunConfig {
        RunConfig {
            nx: 2,
            nz: 4,
            p: 2,
            t_end: 1.0,
            dt: 0.25,
            snapshot_every: 2,
            ..RunConfig::defaults(exp)
        }
    }

    #[test]
    fn balanced_state_stays_balanced() {
        let mut cfg = small(Experiment::Bubble);
        cfg.bubble.dtheta = 0.0;
        cfg.t_end = 25.0;
        cfg.dt = 0.25;
        let out = run_simulation(&cfg, None).unwrap();
        assert_eq!(out.records.len(), 101);
        let last = out.records.last().unwrap();
        assert!(last.max_w < 1e-8, "{}", last.max_w);
        assert!(last.dh.abs() / last.energy.total < 1e-9);
    }

    #[test]
    fn outputs_are_written_and_reproducible() {
        let cfg = small(Experiment::Bubble);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let out = run_simulation(&cfg, Some(a.path())).unwrap();
        run_simulation(&cfg, Some(b.path())).unwrap();
        assert_eq!(out.snapshots.len(), 3);
        for name in ["energy.csv", "diagnostics.csv", "config.txt", "theta_0000.csv", "theta_0002.csv"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            assert_eq!(x, std::fs::read(b.path().join(name)).unwrap(), "{name}");
        }
        let energy = std::fs::read_to_string(a.path().join("energy.csv")).unwrap();
        assert_eq!(energy.lines().next().unwrap(), "t,K,P,I,H,dH,balance_residual,entropy,p2k,i2k");
        assert_eq!(energy.lines().count(), 1 + 5);
    }

    #[test]
    fn failure_still_writes_partial_output() {
        let mut cfg = small(Experiment::Bubble);
        cfg.picard_max_iter = 1;
        let dir = tempfile::tempdir().unwrap();
        let err = run_simulation(&cfg, Some(dir.path())).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }));
        let energy = std::fs::read_to_string(dir.path().join("energy.csv")).unwrap();
        assert_eq!(energy.lines().count(), 2);
    }

    #[test]
    fn column_keeps_v_zero() {
        let out = run_simulation(&small(Experiment::Column), None).unwrap();
        assert!(out.final_state.v.iter().all(|v| *v == 0.0));
        assert!(out.records.iter().all(|r| r.energy.kinetic >= 0.0));
        assert!(setup(&RunConfig::defaults(Experiment::Stability)).is_err());
    }
}
