//! Plain `key=value` run configuration.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::hevi::{BubbleParams, Step1Mode, StepperSettings};
use crate::stability::{Scheme, SweepParams};
use crate::thermo::PhysConstants;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    Stability,
    Column,
    Bubble,
    Checks,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Stability => "stability",
            Experiment::Column => "column",
            Experiment::Bubble => "bubble",
            Experiment::Checks => "checks",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stability" => Ok(Experiment::Stability),
            "column" => Ok(Experiment::Column),
            "bubble" => Ok(Experiment::Bubble),
            "checks" => Ok(Experiment::Checks),
            other => Err(Error::Config(format!("unknown experiment {other:?}"))),
        }
    }
}

/// Everything a run needs. Build one with [`RunConfig::defaults`] or
/// [`parse_config`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub nx: usize,
    pub nz: usize,
    pub p: usize,
    pub lx: f64,
    pub lz: f64,
    pub dt: f64,
    pub t_end: f64,
    pub consts: PhysConstants,
    pub upwind: bool,
    pub upwind_fraction: f64,
    /// Biharmonic coefficient in m^4/s.
    pub viscosity: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub predictor: Step1Mode,
    pub out_dir: PathBuf,
    /// Steps between theta snapshots, 0 for none.
    pub snapshot_every: usize,
    pub bubble: BubbleParams,
    /// Reference entropy added to `cp ln theta`.
    pub s0: f64,
    pub scheme: Scheme,
    pub sound_speed: f64,
    pub brunt: f64,
    pub nk: usize,
    pub nl: usize,
    /// Replaces every threshold of the checks suite when set.
    pub check_tol: Option<f64>,
}

impl RunConfig {
    /// Documented defaults of one experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            nx: 12,
            nz: 18,
            p: 3,
            lx: 1000.0,
            lz: 1500.0,
            dt: 0.05,
            t_end: 200.0,
            consts: PhysConstants::default(),
            upwind: false,
            upwind_fraction: 0.5,
            viscosity: 0.0,
            picard_tol: 1e-12,
            picard_max_iter: 100,
            predictor: Step1Mode::Euler,
            out_dir: PathBuf::from("out"),
            snapshot_every: 400,
            bubble: BubbleParams::default(),
            s0: 0.0,
            scheme: Scheme::HeviNew,
            sound_speed: 340.0,
            brunt: 0.01,
            nk: 64,
            nl: 64,
            check_tol: None,
        };
        match experiment {
            Experiment::Bubble => base,
            Experiment::Column => Self {
                nx: 1,
                nz: 20,
                t_end: 2.5,
                snapshot_every: 10,
                ..base
            },
            Experiment::Stability => Self {
                lz: 1000.0,
                dt: 0.5,
                ..base
            },
            Experiment::Checks => Self {
                nx: 4,
                nz: 4,
                lz: 1000.0,
                t_end: 0.25,
                ..base
            },
        }
    }

    pub fn stepper_settings(&self) -> StepperSettings {
        StepperSettings {
            tol: self.picard_tol,
            max_iter: self.picard_max_iter,
            upwind_fraction: self.upwind.then_some(self.upwind_fraction),
            viscosity: self.viscosity,
            vertical_only: self.experiment == Experiment::Column,
            predictor: self.predictor,
        }
    }

    pub fn sweep_params(&self) -> SweepParams {
        SweepParams {
            c: self.sound_speed,
            n: self.brunt,
            dt: self.dt,
            lx: self.lx,
            lz: self.lz,
            nk: self.nk,
            nl: self.nl,
        }
    }

    /// Number of steps covering `t_end`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("malformed value {v:?} for {key}")))
        }
        match key {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    return Err(Error::Config(format!(
                        "experiment {e} does not match the requested {}",
                        self.experiment
                    )));
                }
            }
            "nx" => self.nx = num(key, value)?,
            "nz" => self.nz = num(key, value)?,
            "p" => self.p = num(key, value)?,
            "lx" => self.lx = num(key, value)?,
            "lz" => self.lz = num(key, value)?,
            "dt" => self.dt = num(key, value)?,
            "t_end" => self.t_end = num(key, value)?,
            "g" => self.consts.g = num(key, value)?,
            "cp" => self.consts.cp = num(key, value)?,
            "cv" => self.consts.cv = num(key, value)?,
            "R" => self.consts.r = num(key, value)?,
            "p0" => self.consts.p0 = num(key, value)?,
            "upwind" => {
                self.upwind = match value {
                    "true" | "on" | "1" => true,
                    "false" | "off" | "0" => false,
                    _ => return Err(Error::Config(format!("malformed value {value:?} for upwind"))),
                }
            }
            "upwind_fraction" => self.upwind_fraction = num(key, value)?,
            "visc" => self.viscosity = num(key, value)?,
            "picard_tol" => self.picard_tol = num(key, value)?,
            "picard_max_iter" => self.picard_max_iter = num(key, value)?,
            "predictor" => self.predictor = value.parse()?,
            "out" => {
                if value.is_empty() {
                    return Err(Error::Config("empty output directory".into()));
                }
                self.out_dir = PathBuf::from(value)
            }
            "snapshot_every" => self.snapshot_every = num(key, value)?,
            "theta0" => self.bubble.theta0 = num(key, value)?,
            "dtheta" => self.bubble.dtheta = num(key, value)?,
            "radius" => self.bubble.radius = num(key, value)?,
            "xc" => self.bubble.xc = num(key, value)?,
            "zc" => self.bubble.zc = num(key, value)?,
            "s0" => self.s0 = num(key, value)?,
            "scheme" => self.scheme = value.parse()?,
            "c" => self.sound_speed = num(key, value)?,
            "N" => self.brunt = num(key, value)?,
            "nk" => self.nk = num(key, value)?,
            "nl" => self.nl = num(key, value)?,
            "check_tol" => self.check_tol = Some(num(key, value)?),
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lx", self.lx),
            ("lz", self.lz),
            ("dt", self.dt),
            ("picard_tol", self.picard_tol),
            ("theta0", self.bubble.theta0),
            ("radius", self.bubble.radius),
            ("c", self.sound_speed),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("nx", self.nx), ("nz", self.nz), ("p", self.p), ("picard_max_iter", self.picard_max_iter), ("nk", self.nk), ("nl", self.nl)] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !(self.viscosity >= 0.0 && self.viscosity.is_finite()) {
            return Err(Error::Config(format!("visc must be non-negative, got {}", self.viscosity)));
        }
        if !(self.upwind_fraction > 0.0 && self.upwind_fraction <= 1.0) {
            return Err(Error::Config(format!("upwind_fraction must lie in (0, 1], got {}", self.upwind_fraction)));
        }
        if !(self.brunt >= 0.0 && self.brunt.is_finite()) {
            return Err(Error::Config(format!("N must be non-negative, got {}", self.brunt)));
        }
        if let Some(t) = self.check_tol {
            if !(t > 0.0) {
                return Err(Error::Config(format!("check_tol must be positive, got {t}")));
            }
        }
        if !(self.bubble.dtheta.is_finite() && self.bubble.theta0 + self.bubble.dtheta.min(0.0) > 0.0) {
            return Err(Error::Config(format!("dtheta {} leaves theta non-positive", self.bubble.dtheta)));
        }
        self.consts.validate()
    }

    /// `key=value` text that [`parse_config`] reads back to an equal config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let b = &self.bubble;
        let c = &self.consts;
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k}={v}");
        };
        kv("experiment", &self.experiment);
        kv("nx", &self.nx);
        kv("nz", &self.nz);
        kv("p", &self.p);
        kv("lx", &self.lx);
        kv("lz", &self.lz);
        kv("dt", &self.dt);
        kv("t_end", &self.t_end);
        kv("g", &c.g);
        kv("cp", &c.cp);
        kv("cv", &c.cv);
        kv("R", &c.r);
        kv("p0", &c.p0);
        kv("upwind", &self.upwind);
        kv("upwind_fraction", &self.upwind_fraction);
        kv("visc", &self.viscosity);
        kv("picard_tol", &self.picard_tol);
        kv("picard_max_iter", &self.picard_max_iter);
        kv("predictor", &self.predictor);
        kv("out", &self.out_dir.display());
        kv("snapshot_every", &self.snapshot_every);
        kv("theta0", &b.theta0);
        kv("dtheta", &b.dtheta);
        kv("radius", &b.radius);
        kv("xc", &b.xc);
        kv("zc", &b.zc);
        kv("s0", &self.s0);
        kv("scheme", &self.scheme);
        kv("c", &self.sound_speed);
        kv("N", &self.brunt);
        kv("nk", &self.nk);
        kv("nl", &self.nl);
        if let Some(t) = self.check_tol {
            kv("check_tol", &t);
        }
        s
    }
}

/// Parses `key=value` lines with `#` comments on top of the defaults of
/// the experiment.
///
/// The experiment comes from `experiment` or, failing that, from an
/// `experiment=` line. Errors name the offending line.
pub fn parse_config(text: &str, experiment: Option<Experiment>) -> Result<RunConfig> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::ConfigLine {
                line: i + 1,
                msg: format!("expected key=value, got {line:?}"),
            });
        };
        pairs.push((i + 1, k.trim(), v.trim()));
    }
    let from_file = pairs
        .iter()
        .find(|(_, k, _)| *k == "experiment")
        .map(|(line, _, v)| {
            v.parse::<Experiment>().map_err(|e| Error::ConfigLine {
                line: *line,
                msg: e.to_string(),
            })
        })
        .transpose()?;
    let exp = experiment
        .or(from_file)
        .ok_or_else(|| Error::Config("missing required key experiment".into()))?;
    let mut cfg = RunConfig::defaults(exp);
    let mut seen_r = false;
    for (line, k, v) in pairs {
        seen_r |= k == "R";
        cfg.set(k, v).map_err(|e| Error::ConfigLine {
            line,
            msg: match e {
                Error::Config(m) => m,
                other => other.to_string(),
            },
        })?;
    }
    if !seen_r {
        cfg.consts.r = cfg.consts.cp - cfg.consts.cv;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        for e in [Experiment::Stability, Experiment::Column, Experiment::Bubble, Experiment::Checks] {
            assert_eq!(parse_config("", Some(e)).unwrap(), RunConfig::defaults(e));
        }
        assert!(parse_config("# nothing\n", None).is_err());
    }

    #[test]
    fn values_comments_and_experiment_line() {
        let c = parse_config("experiment = bubble\ndt=0.05 # step\n\nvisc=624.78\nupwind=on\n", None).unwrap();
        assert_eq!(c.dt, 0.05);
        assert_eq!(c.viscosity, 624.78);
        assert!(c.upwind);
        assert_eq!(c.stepper_settings().upwind_fraction, Some(0.5));
        assert_eq!(c.steps(), 4000);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse_config("dt=0.1\nbogus=3\n", Some(Experiment::Bubble)).unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 2, .. }), "{e}");
        let e = parse_config("nx=abc", Some(Experiment::Bubble)).unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 1, .. }));
        let e = parse_config("\n\njust words", Some(Experiment::Bubble)).unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 3, .. }));
        let e = parse_config("experiment=column", Some(Experiment::Bubble)).unwrap_err();
        assert!(matches!(e, Error::ConfigLine { line: 1, .. }));
        assert!(parse_config("dt=-1", Some(Experiment::Bubble)).is_err());
        assert!(parse_config("nx=0", Some(Experiment::Bubble)).is_err());
        assert!(parse_config("scheme=rk4", Some(Experiment::Stability)).is_err());
    }

    #[test]
    fn gas_constant_follows_heat_capacities() {
        let c = parse_config("cp=1000\ncv=700", Some(Experiment::Column)).unwrap();
        assert_eq!(c.consts.r, 300.0);
        assert!(parse_config("cp=1000\ncv=700\nR=287", Some(Experiment::Column)).is_err());
    }

    #[test]
    fn round_trip() {
        let mut c = parse_config("dt=0.013\nvisc=1.5e-3\nupwind=true\nout=/tmp/x y\ncheck_tol=1e-30", Some(Experiment::Checks)).unwrap();
        c.consts.g = 9.81;
        let back = parse_config(&c.to_config_string(), None).unwrap();
        assert_eq!(back, c);
    }
}
