//! C ABI facade over the frustrated-diffusions toolkit.
//!
//! The interface follows the usual handle pattern: opaque pointers created
//! and released by this library, status codes aligned with the CLI exit
//! codes, and a thread-local error message readable with [`fd_last_error`].
//! The C header is generated into `include/frustrated_diffusions.h` when
//! the crate builds.
//!
//! Ownership rules: every `*mut` handle returned by an `fd_*_new`-style
//! call must be released with the matching `fd_*_free`; strings returned
//! as `*mut c_char` must be released with [`fd_string_free`]. Borrowed
//! pointers (`fd_trajectory_m1` and friends) stay valid until the handle
//! they came from is freed or mutated.

use frustrated_diffusions::moments::{find_sigma_c, integrate_moments, MomentState};
use frustrated_diffusions::phase::find_equilibria;
use frustrated_diffusions::rhythm::{dft_period, poincare_periods};
use frustrated_diffusions::sim::{simulate_particles, InitialCondition};
use frustrated_diffusions::{Error, MeanTrajectory, ModelParams};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

/// Outcome of an API call. The numeric values match the CLI exit codes so
/// embedders and scripts can share error tables.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdStatus {
    Ok = 0,
    /// Invalid arguments, null pointers, or malformed input.
    Invalid = 2,
    /// The simulation left the numerical trust region.
    Divergence = 3,
    /// The computation ran but the requested quantity does not exist
    /// (no rhythm, no convergence, no bracketed root).
    Analysis = 4,
}

/// Period estimator selector for [`fd_period`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdPeriodMethod {
    Poincare = 0,
    Dft = 1,
}

/// Simulation parameters (opaque).
pub struct FdParams {
    inner: ModelParams,
}

/// A uniformly sampled mean trajectory (opaque).
pub struct FdTrajectory {
    inner: MeanTrajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn clear_error() {
    LAST_ERROR.with(|e| e.borrow_mut().take());
}

fn set_error(msg: &str) {
    let owned = CString::new(msg)
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(owned));
}

fn fail(status: FdStatus, msg: &str) -> FdStatus {
    set_error(msg);
    status
}

fn status_of(err: &Error) -> FdStatus {
    match err.exit_code() {
        2 => FdStatus::Invalid,
        3 => FdStatus::Divergence,
        _ => FdStatus::Analysis,
    }
}

fn from_result(err: &Error) -> FdStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// Last error message of the current thread, or null when the most recent
/// call succeeded. The pointer stays valid until the next failing call on
/// the same thread.
#[no_mangle]
pub extern "C" fn fd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| match &*e.borrow() {
        Some(msg) => msg.as_ptr(),
        None => std::ptr::null(),
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

unsafe fn cstr<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, String> {
    if ptr.is_null() {
        return Err(format!("{what} is null"));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| format!("{what} is not valid UTF-8"))
}

/// Parameters of the reference parameterization: alpha = 1/2,
/// theta11 = theta22 = 8, theta12 = 2A, theta21 = -2B, N = 1000,
/// dt = 0.005, 200000 steps, seed 1. Returns null (with `fd_last_error`
/// set) when the resulting parameter set is invalid.
#[no_mangle]
pub extern "C" fn fd_params_new(a: f64, b: f64, sigma: f64) -> *mut FdParams {
    clear_error();
    match ModelParams::from_ab(a, b, sigma).validate() {
        Ok(inner) => Box::into_raw(Box::new(FdParams { inner })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Parse a flat key=value configuration (same format as the CLI
/// `--config` file). Returns null with `fd_last_error` set on failure.
///
/// # Safety
/// `text` must be a NUL-terminated string or null.
#[no_mangle]
pub unsafe extern "C" fn fd_params_from_config(text: *const c_char) -> *mut FdParams {
    clear_error();
    let text = match cstr(text, "config text") {
        Ok(t) => t,
        Err(msg) => {
            set_error(&msg);
            return std::ptr::null_mut();
        }
    };
    match ModelParams::from_config_str(text, "config") {
        Ok(inner) => Box::into_raw(Box::new(FdParams { inner })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release a parameter handle. A null pointer is a no-op.
///
/// # Safety
/// `p` must be null or a pointer obtained from this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn fd_params_free(p: *mut FdParams) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn set_field(p: &mut ModelParams, key: &str, value: f64) -> Result<(), String> {
    let as_count = |what: &str| -> Result<u64, String> {
        if !value.is_finite() || value < 0.0 || value.fract() != 0.0 || value > 2f64.powi(53) {
            return Err(format!("{what} needs a nonnegative integer, got {value}"));
        }
        Ok(value as u64)
    };
    match key {
        "alpha" => p.alpha = value,
        "theta11" => p.theta11 = value,
        "theta12" => p.theta12 = value,
        "theta21" => p.theta21 = value,
        "theta22" => p.theta22 = value,
        "sigma" => p.sigma = value,
        "dt" => p.dt = value,
        "n1" => p.n1 = as_count("n1")? as usize,
        "n2" => p.n2 = as_count("n2")? as usize,
        "steps" => p.steps = as_count("steps")? as usize,
        "seed" => p.seed = as_count("seed")?,
        other => return Err(format!("unknown parameter key {other:?}")),
    }
    Ok(())
}

/// Set one scalar field by name. Keys are the config-file keys: alpha,
/// theta11, theta12, theta21, theta22, sigma, dt, n1, n2, steps, seed.
/// Values are validated when the parameters are used, not here.
///
/// # Safety
/// `p` must be a live handle from this library; `key` a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn fd_params_set(
    p: *mut FdParams,
    key: *const c_char,
    value: f64,
) -> FdStatus {
    clear_error();
    if p.is_null() {
        return fail(FdStatus::Invalid, "params handle is null");
    }
    let key = match cstr(key, "key") {
        Ok(k) => k,
        Err(msg) => return fail(FdStatus::Invalid, &msg),
    };
    match set_field(&mut (*p).inner, key, value) {
        Ok(()) => FdStatus::Ok,
        Err(msg) => fail(FdStatus::Invalid, &msg),
    }
}

/// Read one scalar field by name (same keys as [`fd_params_set`]).
/// Returns NaN for a null handle or unknown key.
///
/// # Safety
/// `p` must be null or a live handle; `key` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fd_params_get(p: *const FdParams, key: *const c_char) -> f64 {
    let Some(p) = p.as_ref() else { return f64::NAN };
    let Ok(key) = cstr(key, "key") else {
        return f64::NAN;
    };
    let m = &p.inner;
    match key {
        "alpha" => m.alpha,
        "theta11" => m.theta11,
        "theta12" => m.theta12,
        "theta21" => m.theta21,
        "theta22" => m.theta22,
        "sigma" => m.sigma,
        "dt" => m.dt,
        "n1" => m.n1 as f64,
        "n2" => m.n2 as f64,
        "steps" => m.steps as f64,
        "seed" => m.seed as f64,
        _ => f64::NAN,
    }
}

/// Check the full parameter set without running anything.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_params_validate(p: *const FdParams) -> FdStatus {
    clear_error();
    let Some(p) = p.as_ref() else {
        return fail(FdStatus::Invalid, "params handle is null");
    };
    match p.inner.validate() {
        Ok(_) => FdStatus::Ok,
        Err(e) => from_result(&e),
    }
}

/// Integrate the N-particle system. Every particle of both populations
/// starts at `ic_value`; the empirical means are recorded every `stride`
/// steps. On success `*out` receives a trajectory handle.
///
/// # Safety
/// `p` must be a live handle, `out` a valid pointer to a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fd_simulate(
    p: *const FdParams,
    ic_value: f64,
    stride: usize,
    out: *mut *mut FdTrajectory,
) -> FdStatus {
    clear_error();
    if out.is_null() {
        return fail(FdStatus::Invalid, "output slot is null");
    }
    *out = std::ptr::null_mut();
    let Some(p) = p.as_ref() else {
        return fail(FdStatus::Invalid, "params handle is null");
    };
    if stride == 0 {
        return fail(FdStatus::Invalid, "stride must be at least 1");
    }
    let ic = InitialCondition::Uniform {
        x0: ic_value,
        y0: ic_value,
    };
    match simulate_particles(&p.inner, &ic, stride) {
        Ok(run) => {
            *out = Box::into_raw(Box::new(FdTrajectory {
                inner: run.trajectory,
            }));
            FdStatus::Ok
        }
        Err(e) => from_result(&e),
    }
}

/// Integrate the Gaussian moment closure from `init = {m1, m2, v1, v2}`
/// over `t_end` with step `dt_ode`. On success `*out` receives a
/// trajectory handle carrying variance columns.
///
/// # Safety
/// `p` must be a live handle, `init` must point at four doubles, `out` at
/// a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fd_moments(
    p: *const FdParams,
    t_end: f64,
    dt_ode: f64,
    init: *const f64,
    out: *mut *mut FdTrajectory,
) -> FdStatus {
    clear_error();
    if out.is_null() {
        return fail(FdStatus::Invalid, "output slot is null");
    }
    *out = std::ptr::null_mut();
    let Some(p) = p.as_ref() else {
        return fail(FdStatus::Invalid, "params handle is null");
    };
    if init.is_null() {
        return fail(FdStatus::Invalid, "initial state is null");
    }
    let init = std::slice::from_raw_parts(init, 4);
    let s0 = MomentState {
        m1: init[0],
        m2: init[1],
        v1: init[2],
        v2: init[3],
    };
    match integrate_moments(&s0, &p.inner, t_end, dt_ode) {
        Ok(traj) => {
            *out = Box::into_raw(Box::new(FdTrajectory { inner: traj }));
            FdStatus::Ok
        }
        Err(e) => from_result(&e),
    }
}

/// Release a trajectory handle. A null pointer is a no-op.
///
/// # Safety
/// `t` must be null or a pointer obtained from this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_free(t: *mut FdTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_len(t: *const FdTrajectory) -> usize {
    t.as_ref().map_or(0, |t| t.inner.len())
}

/// Time of the first sample; NaN for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_t0(t: *const FdTrajectory) -> f64 {
    t.as_ref().map_or(f64::NAN, |t| t.inner.t0)
}

/// Sampling interval; NaN for a null handle.
///
/// # Safety
/// `t` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_dt(t: *const FdTrajectory) -> f64 {
    t.as_ref().map_or(f64::NAN, |t| t.inner.dt_sample)
}

/// Borrowed pointer to the m1 column (`fd_trajectory_len` entries), null
/// for a null handle.
///
/// # Safety
/// `t` must be null or a live handle; the pointer dies with the handle.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_m1(t: *const FdTrajectory) -> *const f64 {
    t.as_ref().map_or(std::ptr::null(), |t| t.inner.m1.as_ptr())
}

/// Borrowed pointer to the m2 column, null for a null handle.
///
/// # Safety
/// `t` must be null or a live handle; the pointer dies with the handle.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_m2(t: *const FdTrajectory) -> *const f64 {
    t.as_ref().map_or(std::ptr::null(), |t| t.inner.m2.as_ptr())
}

/// Borrowed pointer to the v1 column, or null when the trajectory has no
/// variance columns (particle runs, as opposed to closure runs).
///
/// # Safety
/// `t` must be null or a live handle; the pointer dies with the handle.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_v1(t: *const FdTrajectory) -> *const f64 {
    t.as_ref()
        .and_then(|t| t.inner.v1.as_ref())
        .map_or(std::ptr::null(), |v| v.as_ptr())
}

/// Borrowed pointer to the v2 column, or null when absent.
///
/// # Safety
/// `t` must be null or a live handle; the pointer dies with the handle.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_v2(t: *const FdTrajectory) -> *const f64 {
    t.as_ref()
        .and_then(|t| t.inner.v2.as_ref())
        .map_or(std::ptr::null(), |v| v.as_ptr())
}

/// Write the canonical CSV representation (t,m1,m2 or t,m1,m2,v1,v2).
///
/// # Safety
/// `t` must be a live handle, `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_write_csv(
    t: *const FdTrajectory,
    path: *const c_char,
) -> FdStatus {
    clear_error();
    let Some(t) = t.as_ref() else {
        return fail(FdStatus::Invalid, "trajectory handle is null");
    };
    let path = match cstr(path, "path") {
        Ok(p) => p,
        Err(msg) => return fail(FdStatus::Invalid, &msg),
    };
    match t.inner.write_csv(Path::new(path)) {
        Ok(()) => FdStatus::Ok,
        Err(e) => from_result(&e),
    }
}

/// Read a trajectory from its CSV representation.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn fd_trajectory_read_csv(
    path: *const c_char,
    out: *mut *mut FdTrajectory,
) -> FdStatus {
    clear_error();
    if out.is_null() {
        return fail(FdStatus::Invalid, "output slot is null");
    }
    *out = std::ptr::null_mut();
    let path = match cstr(path, "path") {
        Ok(p) => p,
        Err(msg) => return fail(FdStatus::Invalid, &msg),
    };
    match MeanTrajectory::read_csv(Path::new(path)) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(FdTrajectory { inner }));
            FdStatus::Ok
        }
        Err(e) => from_result(&e),
    }
}

/// Estimate the oscillation period of a trajectory. `burn_in` is absolute
/// time units discarded from the start. `mean` and `std` receive the
/// estimate; `events` (optional, may be null) receives the crossing count
/// for the Poincare method or the replica count for the DFT.
///
/// # Safety
/// `t` must be a live handle; `mean` and `std` must be valid pointers;
/// `events` may be null.
#[no_mangle]
pub unsafe extern "C" fn fd_period(
    t: *const FdTrajectory,
    method: FdPeriodMethod,
    burn_in: f64,
    mean: *mut f64,
    std: *mut f64,
    events: *mut usize,
) -> FdStatus {
    clear_error();
    let Some(t) = t.as_ref() else {
        return fail(FdStatus::Invalid, "trajectory handle is null");
    };
    if mean.is_null() || std.is_null() {
        return fail(
            FdStatus::Invalid,
            "mean/std output pointers must not be null",
        );
    }
    let est = match method {
        FdPeriodMethod::Poincare => poincare_periods(&t.inner, burn_in),
        FdPeriodMethod::Dft => {
            dft_period(std::slice::from_ref(&t.inner), burn_in).map(|(_, est)| est)
        }
    };
    match est {
        Ok(est) => {
            *mean = est.mean_period;
            *std = est.std_period;
            if !events.is_null() {
                *events = est.n_events;
            }
            FdStatus::Ok
        }
        Err(e) => from_result(&e),
    }
}

/// Critical noise intensity of the moment closure in `[sigma_lo,
/// sigma_hi]`. Fails with `FdStatus::Analysis` when the bracket does not
/// straddle the bifurcation.
///
/// # Safety
/// `p` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fd_sigma_c(
    p: *const FdParams,
    sigma_lo: f64,
    sigma_hi: f64,
    out: *mut f64,
) -> FdStatus {
    clear_error();
    let Some(p) = p.as_ref() else {
        return fail(FdStatus::Invalid, "params handle is null");
    };
    if out.is_null() {
        return fail(FdStatus::Invalid, "output pointer is null");
    }
    match find_sigma_c(&p.inner, sigma_lo, sigma_hi, 1e-6) {
        Ok(sc) => {
            *out = sc;
            FdStatus::Ok
        }
        Err(e) => from_result(&e),
    }
}

/// Equilibria of the noiseless planar system with couplings A, B as a
/// JSON document (points, eigenvalues, classification, regime). Returns
/// null with `fd_last_error` set on failure; release the string with
/// [`fd_string_free`].
#[no_mangle]
pub extern "C" fn fd_equilibria_json(a: f64, b: f64) -> *mut c_char {
    clear_error();
    let report = match find_equilibria(a, b) {
        Ok(r) => r,
        Err(e) => {
            set_error(&e.to_string());
            return std::ptr::null_mut();
        }
    };
    let json = match serde_json::to_string(&report) {
        Ok(j) => j,
        Err(e) => {
            set_error(&format!("serialization failure: {e}"));
            return std::ptr::null_mut();
        }
    };
    match CString::new(json) {
        Ok(s) => s.into_raw(),
        Err(_) => {
            set_error("JSON contained a NUL byte");
            std::ptr::null_mut()
        }
    }
}

/// Release a string returned by this library. A null pointer is a no-op.
///
/// # Safety
/// `s` must be null or a string returned by this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn fd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
