use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hevi::checks::{format_table, run_checks};
use hevi::config::{parse_config, Experiment, RunConfig};
use hevi::output::write_timeseries;
use hevi::simulation::run_simulation;
use hevi::stability::{acoustic_stability_boundary, sweep_grid, sweep_rows, SWEEP_HEADER};
use hevi::Error;

const EXIT_INVARIANT: u8 = 3;

/// Energy balanced HEVI slice solver.
#[derive(Parser, Debug)]
#[command(name = "hevi-slice", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Amplification factors of the linear schemes over a wavenumber grid.
    Stability(StabilityArgs),
    /// Single column run with the horizontal velocity held at zero.
    Column(RunArgs),
    /// Warm bubble in an x-z slice.
    Bubble(RunArgs),
    /// Invariant suite with a pass/fail table.
    Checks(ChecksArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output location.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra key=value setting, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[command(flatten)]
    common: Common,
    /// cn, new or trap.
    #[arg(long)]
    scheme: Option<String>,
    /// Sound speed in m/s.
    #[arg(long)]
    c: Option<f64>,
    /// Buoyancy frequency in 1/s.
    #[arg(long = "N")]
    n: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    /// Domain length in both directions, m.
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    nk: Option<usize>,
    #[arg(long)]
    nl: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Turn on the upwinded potential temperature.
    #[arg(long)]
    upwind: bool,
    /// Biharmonic viscosity in m^4/s.
    #[arg(long)]
    visc: Option<f64>,
}

#[derive(Args, Debug)]
struct ChecksArgs {
    #[command(flatten)]
    common: Common,
    /// Replaces every floating point threshold of the suite.
    #[arg(long)]
    tol: Option<f64>,
}

fn load(exp: Experiment, common: &Common, extra: Vec<(&str, String)>) -> hevi::Result<RunConfig> {
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text, Some(exp))?;
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    for (k, v) in extra {
        cfg.set(k, &v)?;
    }
    if exp != Experiment::Stability {
        if let Some(o) = &common.out {
            cfg.out_dir = o.clone();
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn opt<T: ToString>(key: &'static str, v: Option<T>, out: &mut Vec<(&'static str, String)>) {
    if let Some(v) = v {
        out.push((key, v.to_string()));
    }
}

fn stability(a: &StabilityArgs) -> hevi::Result<ExitCode> {
    let mut extra = Vec::new();
    opt("scheme", a.scheme.clone(), &mut extra);
    opt("c", a.c, &mut extra);
    opt("N", a.n, &mut extra);
    opt("dt", a.dt, &mut extra);
    opt("lx", a.l, &mut extra);
    opt("lz", a.l, &mut extra);
    opt("nk", a.nk, &mut extra);
    opt("nl", a.nl, &mut extra);
    let cfg = load(Experiment::Stability, &a.common, extra)?;
    let sp = cfg.sweep_params();
    let grid = sweep_grid(cfg.scheme, &sp)?;
    let path = a.common.out.clone().unwrap_or_else(|| cfg.out_dir.join("grid.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_timeseries(&path, &SWEEP_HEADER, &sweep_rows(&grid))?;
    let max = grid.iter().map(|g| g.result.max_modulus()).fold(0.0, f64::max);
    println!("scheme {} dt {} points {} max modulus {:.6e}", cfg.scheme, sp.dt, grid.len(), max);
    let b = acoustic_stability_boundary(cfg.scheme, &sp)?;
    match b.threshold {
        Some(t) => println!("acoustic growth from k = {:.6e} rad/m (index {}, cfl {:.4})", t.k, t.m, t.cfl),
        None => println!("acoustic modes stable throughout"),
    }
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn run(exp: Experiment, a: &RunArgs) -> hevi::Result<ExitCode> {
    let mut extra = Vec::new();
    opt("dt", a.dt, &mut extra);
    opt("t_end", a.t_end, &mut extra);
    opt("visc", a.visc, &mut extra);
    if a.upwind {
        extra.push(("upwind", "true".into()));
    }
    let cfg = load(exp, &a.common, extra)?;
    let out = run_simulation(&cfg, Some(&cfg.out_dir))?;
    let first = &out.records[0];
    let last = out.records.last().expect("initial record");
    println!(
        "{exp}: {} steps to t = {}, dH/H = {:.3e}, max w = {:.4e} m/s",
        out.records.len() - 1,
        last.t,
        last.dh / first.energy.total,
        last.max_w
    );
    println!("wrote {}", cfg.out_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn checks(a: &ChecksArgs) -> hevi::Result<ExitCode> {
    let mut extra = Vec::new();
    opt("check_tol", a.tol, &mut extra);
    let cfg = load(Experiment::Checks, &a.common, extra)?;
    let results = run_checks(&cfg)?;
    let table = format_table(&results);
    print!("{table}");
    if let Some(path) = &a.common.out {
        if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, &table)?;
    }
    if results.iter().all(|r| r.passed) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_INVARIANT))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.command {
        Command::Stability(a) => stability(a),
        Command::Column(a) => run(Experiment::Column, a),
        Command::Bubble(a) => run(Experiment::Bubble, a),
        Command::Checks(a) => checks(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
