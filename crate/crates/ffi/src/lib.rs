//! C interface to `eplab`.
//!
//! Every function returns an [`EplabStatus`]. On failure a message is kept per
//! thread and can be read with [`eplab_last_error`]. Handles are opaque and
//! must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use eplab::config::{KeyValues, ScenarioConfig};
use eplab::experiments::{criteria_report, execute, RunOutcome};
use eplab::{Error, Termination};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EplabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Precondition = 4,
    Numeric = 5,
    Solver = 6,
    Unsupported = 7,
    Io = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EplabTermination {
    Completed = 0,
    BlowupDetected = 1,
    SolverFailure = 2,
}

/// Criteria on the initial data.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EplabCriteria {
    pub h0: f64,
    /// `exp(V_-^{-1}(H(0)))`
    pub exp_v_minus_inv_h0: f64,
    /// `2 min rho0`
    pub two_rho0_min: f64,
    pub pressureless_holds: bool,
    pub liu_holds: bool,
}

/// A scenario built from a preset or config text.
pub struct EplabScenario {
    kv: KeyValues,
    config: ScenarioConfig,
}

/// A finished run.
pub struct EplabRun {
    outcome: RunOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EplabStatus {
    match e {
        Error::Config { .. } => EplabStatus::Config,
        Error::Precondition(_) => EplabStatus::Precondition,
        Error::Numeric(_) => EplabStatus::Numeric,
        Error::PoissonDivergence { .. }
        | Error::StepFailure { .. }
        | Error::Crossing { .. }
        | Error::FitFailure(_)
        | Error::InsufficientSamples { .. } => EplabStatus::Solver,
        Error::Unsupported(_) => EplabStatus::Unsupported,
        Error::MissingArtifact(_) | Error::Io(_) => EplabStatus::Io,
    }
}

struct Fail(EplabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EplabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EplabStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            EplabStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(EplabStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(EplabStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn build(kv: KeyValues) -> Result<Box<EplabScenario>, Fail> {
    let config = ScenarioConfig::from_key_values(&kv, Path::new("."))?;
    Ok(Box::new(EplabScenario { kv, config }))
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn eplab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eplab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eplab_scenario_from_preset(
    name: *const c_char,
    out: *mut *mut EplabScenario,
) -> EplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mut kv = KeyValues::default();
        kv.set("preset", str_arg(name, "name")?);
        *out = Box::into_raw(build(kv)?);
        Ok(())
    })
}

/// Parses `key = value` config text. Environment overrides are not applied.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn eplab_scenario_from_config(
    text: *const c_char,
    out: *mut *mut EplabScenario,
) -> EplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kv = KeyValues::parse(str_arg(text, "text")?)?;
        *out = Box::into_raw(build(kv)?);
        Ok(())
    })
}

/// Sets one config key. On failure the scenario is left unchanged.
///
/// # Safety
/// `scenario` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn eplab_scenario_set(
    scenario: *mut EplabScenario,
    key: *const c_char,
    value: *const c_char,
) -> EplabStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| null("scenario"))?;
        let mut kv = s.kv.clone();
        kv.set(str_arg(key, "key")?, str_arg(value, "value")?);
        *s = *build(kv)?;
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn eplab_scenario_grid_size(scenario: *const EplabScenario, out: *mut usize) -> EplabStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(scenario, "scenario")?.config.scenario.n;
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from this library or be NULL; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eplab_scenario_free(scenario: *mut EplabScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// # Safety
/// `scenario` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn eplab_criteria(scenario: *const EplabScenario, out: *mut EplabCriteria) -> EplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let r = criteria_report(&handle(scenario, "scenario")?.config.scenario)?;
        *out = EplabCriteria {
            h0: r.pressureless.h0,
            exp_v_minus_inv_h0: r.pressureless.lhs,
            two_rho0_min: r.pressureless.rhs,
            pressureless_holds: r.pressureless.holds,
            liu_holds: r.liu.holds,
        };
        Ok(())
    })
}

/// `V_-^{-1}(h)` for `h >= 0`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn eplab_v_minus_inverse(h: f64, out: *mut f64) -> EplabStatus {
    guard(|| {
        *out_arg(out, "out")? = eplab::criteria::v_minus_inverse(h)?;
        Ok(())
    })
}

/// `V_+^{-1}(h)` for `h >= 0`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn eplab_v_plus_inverse(h: f64, out: *mut f64) -> EplabStatus {
    guard(|| {
        *out_arg(out, "out")? = eplab::criteria::v_plus_inverse(h)?;
        Ok(())
    })
}

/// Runs the scenario. Solver breakdown is reported through the run's
/// termination, not the status.
///
/// # Safety
/// `scenario` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn eplab_run(scenario: *const EplabScenario, out: *mut *mut EplabRun) -> EplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let outcome = execute(&handle(scenario, "scenario")?.config.scenario)?;
        *out = Box::into_raw(Box::new(EplabRun { outcome }));
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library or be NULL; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eplab_run_free(run: *mut EplabRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `run` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn eplab_run_termination(run: *const EplabRun, out: *mut EplabTermination) -> EplabStatus {
    guard(|| {
        *out_arg(out, "out")? = match handle(run, "run")?.outcome.result.termination {
            Termination::Completed => EplabTermination::Completed,
            Termination::BlowupDetected => EplabTermination::BlowupDetected,
            Termination::SolverFailure => EplabTermination::SolverFailure,
        };
        Ok(())
    })
}

/// Estimated blow-up time; `*has_value` is false when none was detected.
///
/// # Safety
/// `run` must come from this library; `out` and `has_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn eplab_run_t_star(run: *const EplabRun, out: *mut f64, has_value: *mut bool) -> EplabStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let has = out_arg(has_value, "has_value")?;
        let t = handle(run, "run")?.outcome.t_star();
        *has = t.is_some();
        *out = t.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// # Safety
/// `run` must come from this library and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn eplab_run_final_time(run: *const EplabRun, out: *mut f64) -> EplabStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(run, "run")?.outcome.result.final_state.time;
        Ok(())
    })
}

/// Copies the last valid `rho`, `u` and `phi` into caller buffers of `len`
/// doubles each. Any buffer may be NULL to skip it.
///
/// # Safety
/// `run` must come from this library; non-NULL buffers must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eplab_run_final_fields(
    run: *const EplabRun,
    rho: *mut f64,
    u: *mut f64,
    phi: *mut f64,
    len: usize,
) -> EplabStatus {
    guard(|| {
        let s = &handle(run, "run")?.outcome.result.final_state;
        let n = s.rho.len();
        if len < n {
            return Err(Fail(
                EplabStatus::BufferTooSmall,
                format!("buffers hold {len} values, need {n}"),
            ));
        }
        for (dst, src) in [(rho, &s.rho), (u, &s.u), (phi, &s.phi)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, n);
            }
        }
        Ok(())
    })
}

/// Writes the key-value run summary, NUL-terminated, into `buf`. `*needed`
/// receives the required capacity including the NUL. Pass `buf = NULL` to query it.
///
/// # Safety
/// `run` must come from this library; `buf` must hold `capacity` bytes when not NULL.
#[no_mangle]
pub unsafe extern "C" fn eplab_run_summary(
    run: *const EplabRun,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> EplabStatus {
    guard(|| {
        let text = handle(run, "run")?.outcome.summary().render();
        let bytes = text.as_bytes();
        if let Some(n) = needed.as_mut() {
            *n = bytes.len() + 1;
        }
        if buf.is_null() {
            return Ok(());
        }
        if capacity < bytes.len() + 1 {
            return Err(Fail(
                EplabStatus::BufferTooSmall,
                format!("summary needs {} bytes, buffer has {capacity}", bytes.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, bytes.len());
        *buf.add(bytes.len()) = 0;
        Ok(())
    })
}

/// Writes diagnostics, probe, snapshots and summary under `dir`.
///
/// # Safety
/// `run` must come from this library and `dir` be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn eplab_run_write_artifacts(run: *const EplabRun, dir: *const c_char) -> EplabStatus {
    guard(|| {
        let r = handle(run, "run")?;
        r.outcome.write_artifacts(Path::new(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_codes() {
        assert_eq!(status_of(&Error::config("k", "m")), EplabStatus::Config);
        assert_eq!(status_of(&Error::MissingArtifact("x".into())), EplabStatus::Io);
        assert_eq!(
            status_of(&Error::InsufficientSamples { needed: 3, have: 1 }),
            EplabStatus::Solver
        );
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, EplabStatus::Panic);
        let msg = unsafe { CStr::from_ptr(eplab_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
        assert_eq!(guard(|| Ok(())), EplabStatus::Ok);
        assert!(eplab_last_error().is_null());
    }
}
