use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hevi-slice"))
}

#[test]
fn checks_pass_on_a_small_mesh() {
    let out = bin().args(["checks", "--set", "nx=2", "--set", "nz=3", "--set", "p=2"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6);
}

#[test]
fn unattainable_tolerance_exits_with_invariant_code() {
    let out = bin().args(["checks", "--tol", "1e-30", "--set", "nx=2", "--set", "nz=2", "--set", "p=2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "dt=0.1\nwhat=1\n").unwrap();
    let out = bin().args(["bubble", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(bin().args(["bubble", "--nonsense"]).output().unwrap().status.code(), Some(1));
}

#[test]
fn convergence_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["bubble", "--set", "nx=2", "--set", "nz=3", "--set", "p=2", "--set", "picard_max_iter=1", "--dt", "0.5", "--t-end", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("energy.csv").exists());
}

#[test]
fn stability_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = bin()
        .args(["stability", "--scheme", "cn", "--nk", "4", "--nl", "3", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("stable throughout"));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("k,l,mod_acoustic,mod_gravity,"));
    assert_eq!(text.lines().count(), 1 + 12);
}

#[test]
fn column_run_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = bin()
            .args(["column", "--set", "nz=6", "--t-end", "0.5", "--out"])
            .arg(d.path())
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["energy.csv", "diagnostics.csv", "theta_0000.csv", "theta_0001.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}
