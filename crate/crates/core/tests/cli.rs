use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eplab"))
        .args(args)
        .env_remove("EPLAB_MODEL_K")
        .env_remove("EPLAB_TIME_T_END")
        .output()
        .expect("spawn eplab")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn golden(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    fs::read_to_string(p).unwrap().trim_end().to_string()
}

const SMALL_RUN: &str = "preset = table1-c\ngrid.n = 64\ntime.t_end = 0.3\ntime.snapshot_interval = 0.1\n";

#[test]
fn run_writes_artifacts_with_stable_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL_RUN).unwrap();
    let out = dir.path().join("out");
    let o = eplab(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("termination = completed\n"));

    assert_eq!(first_line(&out.join("diagnostics.csv")), golden("diagnostics_header.csv"));
    assert_eq!(first_line(&out.join("probe.csv")), golden("probe_header.csv"));
    assert_eq!(first_line(&out.join("snapshots/index.csv")), golden("snapshot_index_header.csv"));
    assert_eq!(first_line(&out.join("snapshots/snapshot_00000.csv")), golden("snapshot_header.csv"));
    assert_eq!(fs::read_to_string(out.join("diagnostics.csv")).unwrap().lines().count(), 32);
    assert_eq!(fs::read_to_string(out.join("snapshots/index.csv")).unwrap().lines().count(), 5);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("criteria.pressureless.verdict = not_hold\n"));
    assert!(summary.contains("truncation.rho0_edge_tail = "));
}

#[test]
fn repeated_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL_RUN).unwrap();
    let mut texts = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = eplab(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
        assert!(o.status.success());
        texts.push((
            fs::read_to_string(out.join("summary.txt")).unwrap(),
            fs::read_to_string(out.join("diagnostics.csv")).unwrap(),
            fs::read_to_string(out.join("snapshots/snapshot_00003.csv")).unwrap(),
        ));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn environment_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL_RUN).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_eplab"))
        .args(["criteria", "--config", cfg.to_str().unwrap()])
        .env("EPLAB_MODEL_K", "0.5")
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("model.K = 5.0000000000000000e-1\n"), "{text}");
    assert!(text.contains("criteria.isothermal.verdict = "));
}

#[test]
fn criteria_on_constant_data() {
    let o = eplab(&["criteria", "--preset", "constant"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("criteria.pressureless.H0 = 0.0000000000000000e0\n"), "{text}");
    assert!(text.contains("criteria.pressureless.verdict = not_hold\n"));
    assert!(text.contains("criteria.liu.verdict = not_hold\n"));
}

#[test]
fn criteria_on_case_a() {
    let o = eplab(&["criteria", "--preset", "table1-a", "--set", "grid.n=1024"]);
    let text = stdout(&o);
    assert!(text.contains("criteria.pressureless.verdict = hold\n"));
    assert!(text.contains("criteria.liu.verdict = not_hold\n"));
}

#[test]
fn config_errors_name_the_key() {
    let o = eplab(&["run", "--preset", "table1-a", "--set", "init.a=1.2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("init.a"));
    let o = eplab(&["criteria", "--preset", "no-such-preset"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("preset"));
}

#[test]
fn sweep_separates_persisting_and_breaking_data() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("sweep.cfg");
    fs::write(
        &spec,
        "preset = table1-a\nbase.grid.n = 1024\nbase.init.b = 3\nbase.model.K = 0\naxis.init.a = 0.3, 0.7\n",
    )
    .unwrap();
    let serial = eplab(&["sweep", "--config", spec.to_str().unwrap(), "--parallel", "1"]);
    assert!(serial.status.success(), "{}", String::from_utf8_lossy(&serial.stderr));
    let parallel = eplab(&["sweep", "--config", spec.to_str().unwrap(), "--parallel", "2"]);
    assert_eq!(serial.stdout, parallel.stdout);
    let text = stdout(&serial);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("cell,init.a,termination,T_star"));
    assert!(rows[1].starts_with("0,0.3,completed,none,"), "{}", rows[1]);
    assert!(rows[2].starts_with("1,0.7,blowup_detected,"), "{}", rows[2]);
}

#[test]
fn odelab_modes() {
    let o = eplab(&["odelab"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("gates.hold = true\n"));
    assert!(text.contains("verdict = no_zero\n"));

    let o = eplab(&["odelab", "--mode", "equation", "--a", "1", "--b", "0.3333333333333333"]);
    let text = stdout(&o);
    let z: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("first_zero = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((z - 2.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);

    for a in ["0", "-0.5"] {
        let o = eplab(&["odelab", "--a", a]);
        assert_eq!(o.status.code(), Some(2));
    }
}

#[test]
fn plotdata_from_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL_RUN).unwrap();
    let run = dir.path().join("run");
    assert!(eplab(&["run", "--config", cfg.to_str().unwrap(), "--out-dir", run.to_str().unwrap()])
        .status
        .success());
    let plots = dir.path().join("plots");
    let o = eplab(&[
        "plotdata",
        "--kind",
        "fig2",
        "--run",
        run.to_str().unwrap(),
        "--out-dir",
        plots.to_str().unwrap(),
        "--svg",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(first_line(&plots.join("fig2.csv")), "t,rho_0,neg_ux_0");
    assert!(fs::read_to_string(plots.join("fig2.svg")).unwrap().starts_with("<svg"));

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let o = eplab(&["plotdata", "--kind", "fig2", "--run", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing artifact"));
}
