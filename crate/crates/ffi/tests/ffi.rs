use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use eplab_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = eplab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn small_scenario() -> *mut EplabScenario {
    let mut sc = ptr::null_mut();
    unsafe {
        assert_eq!(eplab_scenario_from_preset(c("table1-c").as_ptr(), &mut sc), EplabStatus::Ok);
        assert_eq!(eplab_scenario_set(sc, c("grid.n").as_ptr(), c("64").as_ptr()), EplabStatus::Ok);
        assert_eq!(eplab_scenario_set(sc, c("time.t_end").as_ptr(), c("0.1").as_ptr()), EplabStatus::Ok);
    }
    sc
}

#[test]
fn run_through_the_c_interface() {
    let sc = small_scenario();
    unsafe {
        let mut run = ptr::null_mut();
        assert_eq!(eplab_run(sc, &mut run), EplabStatus::Ok);
        let mut term = EplabTermination::SolverFailure;
        assert_eq!(eplab_run_termination(run, &mut term), EplabStatus::Ok);
        assert_eq!(term, EplabTermination::Completed);
        let (mut t, mut has) = (0.0, true);
        assert_eq!(eplab_run_t_star(run, &mut t, &mut has), EplabStatus::Ok);
        assert!(!has && t.is_nan());
        let mut time = 0.0;
        eplab_run_final_time(run, &mut time);
        assert!((time - 0.1).abs() < 1e-12);

        let mut rho = vec![0.0; 64];
        let mut phi = vec![0.0; 64];
        assert_eq!(
            eplab_run_final_fields(run, rho.as_mut_ptr(), ptr::null_mut(), phi.as_mut_ptr(), 64),
            EplabStatus::Ok
        );
        assert!(rho.iter().all(|&r| r > 0.0));
        assert_eq!(
            eplab_run_final_fields(run, rho.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), 10),
            EplabStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 64"));

        let mut need = 0;
        assert_eq!(eplab_run_summary(run, ptr::null_mut(), 0, &mut need), EplabStatus::Ok);
        let mut buf = vec![0 as std::ffi::c_char; need];
        assert_eq!(eplab_run_summary(run, buf.as_mut_ptr(), 4, &mut need), EplabStatus::BufferTooSmall);
        assert_eq!(eplab_run_summary(run, buf.as_mut_ptr(), need, &mut need), EplabStatus::Ok);
        let text = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        assert!(text.contains("termination = completed\n"));

        let dir = tempfile::tempdir().unwrap();
        let d = c(dir.path().to_str().unwrap());
        assert_eq!(eplab_run_write_artifacts(run, d.as_ptr()), EplabStatus::Ok);
        assert!(dir.path().join("diagnostics.csv").exists());

        eplab_run_free(run);
        eplab_scenario_free(sc);
    }
}

#[test]
fn config_errors_and_null_handles() {
    let sc = small_scenario();
    unsafe {
        assert_eq!(eplab_scenario_set(sc, c("init.a").as_ptr(), c("2").as_ptr()), EplabStatus::Config);
        assert!(last_error().contains("init.a"));
        // the failed set left the scenario usable
        let mut n = 0;
        assert_eq!(eplab_scenario_grid_size(sc, &mut n), EplabStatus::Ok);
        assert_eq!(n, 64);
        assert!(eplab_last_error().is_null());

        let mut out = ptr::null_mut();
        assert_eq!(eplab_scenario_from_preset(c("nope").as_ptr(), &mut out), EplabStatus::Config);
        assert!(out.is_null());
        assert_eq!(eplab_scenario_from_preset(ptr::null(), &mut out), EplabStatus::NullPointer);
        assert_eq!(eplab_run(ptr::null(), &mut ptr::null_mut()), EplabStatus::NullPointer);
        assert_eq!(eplab_scenario_grid_size(sc, ptr::null_mut()), EplabStatus::NullPointer);
        let bad = [0xffu8, 0];
        assert_eq!(
            eplab_scenario_from_config(bad.as_ptr().cast(), &mut out),
            EplabStatus::InvalidUtf8
        );
        eplab_scenario_free(sc);
        eplab_scenario_free(ptr::null_mut());
        eplab_run_free(ptr::null_mut());
    }
}

#[test]
fn criteria_for_case_a() {
    let mut sc = ptr::null_mut();
    let text = c("preset = table1-a\ngrid.n = 1024\n");
    unsafe {
        assert_eq!(eplab_scenario_from_config(text.as_ptr(), &mut sc), EplabStatus::Ok);
        let mut r = EplabCriteria::default();
        assert_eq!(eplab_criteria(sc, &mut r), EplabStatus::Ok);
        assert!(r.pressureless_holds && !r.liu_holds);
        assert!((r.two_rho0_min - 0.6).abs() < 1e-12);
        let mut z = 0.0;
        assert_eq!(eplab_v_minus_inverse(r.h0, &mut z), EplabStatus::Ok);
        assert!((z.exp() - r.exp_v_minus_inv_h0).abs() < 1e-15);
        assert_eq!(eplab_v_plus_inverse(-1.0, &mut z), EplabStatus::Precondition);
        eplab_scenario_free(sc);
    }
}

#[test]
fn header_declares_the_interface() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/eplab.h")).unwrap();
    for name in [
        "typedef struct EplabScenario EplabScenario;",
        "typedef struct EplabRun EplabRun;",
        "EPLAB_STATUS_BUFFER_TOO_SMALL",
        "eplab_scenario_from_preset",
        "eplab_run_final_fields",
        "eplab_last_error",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

/// The static library next to the test binary in `target/<profile>/deps`, or one level up.
fn static_lib() -> PathBuf {
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let here = deps.join("libeplab_ffi.a");
    if here.exists() {
        here
    } else {
        deps.parent().unwrap().join("libeplab_ffi.a")
    }
}

#[test]
fn c_program_links_against_the_static_library() {
    let lib = static_lib();
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new("cc")
        .arg(root.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text} {}", String::from_utf8_lossy(&out.stderr));
    assert!(text.starts_with("n=64 term=0 "), "{text}");
}
