//! C ABI for the thermistor solver.
//!
//! Configurations and completed runs are opaque handles; every fallible call
//! returns a `thermistor_status` and leaves a human-readable message for
//! `thermistor_last_error`. The generated header lands in
//! `include/thermistor.h` at build time.
//!
//! Ownership: any handle returned through an out-pointer is owned by the
//! caller and must be released with the matching `_free` function. Returned
//! strings are borrowed: the error message is valid until the next failing
//! call on the same thread, the version string is static.

#![allow(non_camel_case_types)]

use libc::{c_char, c_double, c_int, size_t};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::path::Path;
use thermistor::config::{parse_config, parse_config_str, RunConfig};
use thermistor::diagnostics::CheckOutcome;
use thermistor::output;
use thermistor::scheme::{exponent_pair, RunOptions, RunState};

/// Status codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum thermistor_status {
    THERMISTOR_OK = 0,
    /// A required pointer argument was null.
    THERMISTOR_NULL_ARGUMENT = 1,
    /// A string argument was not valid UTF-8.
    THERMISTOR_INVALID_UTF8 = 2,
    /// The configuration failed to parse or validate.
    THERMISTOR_INVALID_CONFIG = 3,
    /// The solver failed (details via thermistor_last_error).
    THERMISTOR_SOLVER_FAILURE = 4,
    /// Filesystem failure while writing or reading a record.
    THERMISTOR_IO_FAILURE = 5,
    /// A scalar argument was outside its admissible range.
    THERMISTOR_OUT_OF_RANGE = 6,
}

use thermistor_status::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: String) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Message of the most recent failure on this thread. Borrowed; valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn thermistor_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static version string of the underlying solver crate.
#[no_mangle]
pub extern "C" fn thermistor_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Opaque parsed configuration.
pub struct thermistor_config {
    inner: RunConfig,
}

/// Opaque completed run: the pasted solution plus its check verdicts.
pub struct thermistor_run {
    config: RunConfig,
    state: RunState,
    checks: Vec<CheckOutcome>,
}

/// # Safety
/// `s` must be null or a valid nul-terminated string.
unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, thermistor_status> {
    if s.is_null() {
        set_error("null string argument".into());
        return Err(THERMISTOR_NULL_ARGUMENT);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8".into());
        THERMISTOR_INVALID_UTF8
    })
}

fn finish_config(
    parsed: Result<RunConfig, thermistor::config::ConfigError>,
    out: *mut *mut thermistor_config,
) -> thermistor_status {
    match parsed {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(thermistor_config { inner })) };
            THERMISTOR_OK
        }
        Err(e) => {
            set_error(e.to_string());
            THERMISTOR_INVALID_CONFIG
        }
    }
}

/// Parse and validate a configuration file.
///
/// # Safety
/// `path` must be a valid nul-terminated string; `out` must be a valid
/// pointer. On success `*out` owns a new handle.
#[no_mangle]
pub unsafe extern "C" fn thermistor_config_load(
    path: *const c_char,
    out: *mut *mut thermistor_config,
) -> thermistor_status {
    if out.is_null() {
        set_error("null out pointer".into());
        return THERMISTOR_NULL_ARGUMENT;
    }
    let path = match str_arg(path) {
        Ok(p) => p,
        Err(code) => return code,
    };
    finish_config(parse_config(Path::new(path)), out)
}

/// Parse and validate a configuration from an in-memory string.
///
/// # Safety
/// As `thermistor_config_load`.
#[no_mangle]
pub unsafe extern "C" fn thermistor_config_parse(
    text: *const c_char,
    out: *mut *mut thermistor_config,
) -> thermistor_status {
    if out.is_null() {
        set_error("null out pointer".into());
        return THERMISTOR_NULL_ARGUMENT;
    }
    let text = match str_arg(text) {
        Ok(t) => t,
        Err(code) => return code,
    };
    finish_config(parse_config_str(text), out)
}

/// Release a configuration handle (null is a no-op).
///
/// # Safety
/// `cfg` must be null or a pointer previously returned by a config
/// constructor and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn thermistor_config_free(cfg: *mut thermistor_config) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// The contraction threshold τ* of a configuration.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn thermistor_tau_star(
    cfg: *const thermistor_config,
    out: *mut c_double,
) -> thermistor_status {
    if cfg.is_null() || out.is_null() {
        set_error("null argument".into());
        return THERMISTOR_NULL_ARGUMENT;
    }
    let cfg = &(*cfg).inner;
    let laws = cfg.build_laws();
    let g = cfg.build_grid();
    *out = thermistor::circuit::threshold_tau_star(&cfg.circuit, &laws, &g);
    THERMISTOR_OK
}

/// Execute the configured run; the handle carries the trace, the diagnostic
/// rows and the standard check verdicts.
///
/// # Safety
/// `cfg` and `out` must be valid pointers. On success `*out` owns a new
/// handle.
#[no_mangle]
pub unsafe extern "C" fn thermistor_run_execute(
    cfg: *const thermistor_config,
    out: *mut *mut thermistor_run,
) -> thermistor_status {
    if cfg.is_null() || out.is_null() {
        set_error("null argument".into());
        return THERMISTOR_NULL_ARGUMENT;
    }
    let config = (*cfg).inner.clone();
    match config.execute(&RunOptions::default()) {
        Ok(state) => {
            let checks = output::run_checks(
                &config,
                &state.diagnostics,
                state.summary.sup_v,
                state.summary.sup_v_prime,
                state.summary.phi0_h1_sq,
            );
            *out = Box::into_raw(Box::new(thermistor_run {
                config,
                state,
                checks,
            }));
            THERMISTOR_OK
        }
        Err(e) => {
            set_error(e.to_string());
            THERMISTOR_SOLVER_FAILURE
        }
    }
}

/// Release a run handle (null is a no-op).
///
/// # Safety
/// `run` must be null or a pointer previously returned by
/// `thermistor_run_execute` and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn thermistor_run_free(run: *mut thermistor_run) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of time nodes (including t = 0).
///
/// # Safety
/// `run` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn thermistor_run_num_nodes(run: *const thermistor_run) -> size_t {
    if run.is_null() {
        return 0;
    }
    (*run).state.times.len()
}

/// Read one node of the voltage trace; out-pointers may be null to skip.
///
/// # Safety
/// `run` must be a valid handle; non-null out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn thermistor_run_node(
    run: *const thermistor_run,
    node: size_t,
    t: *mut c_double,
    v: *mut c_double,
    v_prime: *mut c_double,
    i_r: *mut c_double,
) -> thermistor_status {
    if run.is_null() {
        set_error("null run handle".into());
        return THERMISTOR_NULL_ARGUMENT;
    }
    let state = &(*run).state;
    if node >= state.times.len() {
        set_error(format!(
            "node {node} out of range (run has {} nodes)",
            state.times.len()
        ));
        return THERMISTOR_OUT_OF_RANGE;
    }
    if !t.is_null() {
        *t = state.times[node];
    }
    if !v.is_null() {
        *v = state.voltage.v[node];
    }
    if !v_prime.is_null() {
        *v_prime = state.voltage.v_prime[node];
    }
    if !i_r.is_null() {
        *i_r = state.i_r[node];
    }
    THERMISTOR_OK
}

/// sup_t |V(t)| over the run.
///
/// # Safety
/// `run` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn thermistor_run_sup_voltage(run: *const thermistor_run) -> c_double {
    if run.is_null() {
        return f64::NAN;
    }
    (*run).state.summary.sup_v
}

/// min over all nodes and cells of the temperature.
///
/// # Safety
/// `run` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn thermistor_run_min_theta(run: *const thermistor_run) -> c_double {
    if run.is_null() {
        return f64::NAN;
    }
    (*run).state.summary.min_theta
}

/// 1 iff every a priori estimate check passed.
///
/// # Safety
/// `run` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn thermistor_run_checks_passed(run: *const thermistor_run) -> c_int {
    if run.is_null() {
        return 0;
    }
    (*run).checks.iter().all(|c| c.passed) as c_int
}

/// Write the run record (CSV time series, diagnostics, checks, report,
/// snapshots) into `dir`.
///
/// # Safety
/// `run` must be a valid handle, `dir` a valid nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn thermistor_run_write(
    run: *const thermistor_run,
    dir: *const c_char,
) -> thermistor_status {
    if run.is_null() {
        set_error("null run handle".into());
        return THERMISTOR_NULL_ARGUMENT;
    }
    let dir = match str_arg(dir) {
        Ok(d) => d,
        Err(code) => return code,
    };
    let run = &*run;
    let dir = Path::new(dir);
    if let Err(e) = output::write_run(dir, &run.config, &run.state) {
        set_error(format!("writing {}: {e}", dir.display()));
        return THERMISTOR_IO_FAILURE;
    }
    if let Err(e) = output::write_checks(dir, &run.checks, "") {
        set_error(format!("writing checks in {}: {e}", dir.display()));
        return THERMISTOR_IO_FAILURE;
    }
    THERMISTOR_OK
}

/// The conjugate exponent pair (p, q) of the fourth estimate for
/// α ∈ (2/3, 1).
///
/// # Safety
/// Non-null out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn thermistor_exponent_pair(
    alpha: c_double,
    p: *mut c_double,
    q: *mut c_double,
) -> thermistor_status {
    match exponent_pair(alpha) {
        Ok((pv, qv)) => {
            if !p.is_null() {
                *p = pv;
            }
            if !q.is_null() {
                *q = qv;
            }
            THERMISTOR_OK
        }
        Err(e) => {
            set_error(e.to_string());
            THERMISTOR_OUT_OF_RANGE
        }
    }
}
