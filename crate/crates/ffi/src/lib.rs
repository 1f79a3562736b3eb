//! C ABI for the lcesim library.
//!
//! Every function returns an [`LcesimStatus`]; on failure the message is
//! available from [`lcesim_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lcesim::harness;
use lcesim::run::sample;
use lcesim::timestepper::{RunConfig, Stepper};
use lcesim::{checkpoint, Error};

/// Result codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcesimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidGrid = 4,
    /// Non-finite values or a director outside the angle chart.
    Numerical = 5,
    ConstraintViolation = 6,
    WindowViolation = 7,
    Checkpoint = 8,
    Io = 9,
    UnknownPreset = 10,
    OutOfRange = 11,
    Other = 12,
    Panic = 13,
}

/// Parsed and validated run configuration.
pub struct LcesimConfig(RunConfig);

/// A run in progress.
pub struct LcesimStepper(Stepper);

/// Constraint residuals of the current state.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LcesimConstraints {
    pub div_u: f64,
    pub div_ht: f64,
    pub curl_compat: f64,
    pub director_norm: f64,
    pub tangency: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> LcesimStatus {
    match e {
        Error::Config { .. } | Error::UnknownManufactured(_) | Error::Formulation(_) => LcesimStatus::Config,
        Error::InvalidGrid(_) | Error::DimensionMismatch { .. } => LcesimStatus::InvalidGrid,
        Error::NonFinite { .. } | Error::BranchViolation { .. } | Error::ChartMargin { .. } | Error::FlowMap(_) => {
            LcesimStatus::Numerical
        }
        Error::ConstraintViolation { .. } => LcesimStatus::ConstraintViolation,
        Error::WindowViolation { .. } => LcesimStatus::WindowViolation,
        Error::Checkpoint(_) => LcesimStatus::Checkpoint,
        Error::Io { .. } => LcesimStatus::Io,
        Error::UnknownPreset(_) => LcesimStatus::UnknownPreset,
        Error::BadIndex(_) | Error::OrderTooHigh(_) => LcesimStatus::OutOfRange,
        _ => LcesimStatus::Other,
    }
}

/// Runs `f`, recording errors and panics for `lcesim_last_error`.
fn guard(f: impl FnOnce() -> Result<(), (LcesimStatus, String)>) -> LcesimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LcesimStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            LcesimStatus::Panic
        }
    }
}

fn lib(e: Error) -> (LcesimStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LcesimStatus, String) {
    (LcesimStatus::NullPointer, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LcesimStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (LcesimStatus::InvalidUtf8, format!("{what} is not UTF-8: {e}")))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), (LcesimStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the latest failure on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn lcesim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lcesim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses TOML configuration text (a bare `preset = name` line is allowed).
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcesim_config_parse(toml: *const c_char, out: *mut *mut LcesimConfig) -> LcesimStatus {
    guard(|| {
        let cfg = harness::parse_config(text(toml, "toml")?).map_err(lib)?;
        put(out, boxed(LcesimConfig(cfg)), "out")
    })
}

/// Configuration of a registered preset.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcesim_config_preset(name: *const c_char, out: *mut *mut LcesimConfig) -> LcesimStatus {
    guard(|| {
        let name = text(name, "name")?;
        let p = harness::presets::find(name).ok_or_else(|| lib(Error::UnknownPreset(name.into())))?;
        put(out, boxed(LcesimConfig(p.config)), "out")
    })
}

/// Overrides the end time.
///
/// # Safety
/// `cfg` must come from `lcesim_config_parse` or `lcesim_config_preset`.
#[no_mangle]
pub unsafe extern "C" fn lcesim_config_set_t_end(cfg: *mut LcesimConfig, t_end: f64) -> LcesimStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        if t_end.is_nan() || t_end < 0.0 {
            return Err((LcesimStatus::Config, format!("t_end must be nonnegative, got {t_end}")));
        }
        cfg.0.run.t_end = t_end;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lcesim_config_free(cfg: *mut LcesimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Builds the initial state; the configuration is copied and stays owned by the caller.
///
/// # Safety
/// `cfg` must be a live configuration handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_new(cfg: *const LcesimConfig, out: *mut *mut LcesimStepper) -> LcesimStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let st = Stepper::new(cfg.0.clone()).map_err(lib)?;
        put(out, boxed(LcesimStepper(st)), "out")
    })
}

/// Restores a run from a checkpoint file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_resume(path: *const c_char, out: *mut *mut LcesimStepper) -> LcesimStatus {
    guard(|| {
        let path = text(path, "path")?;
        let st = checkpoint::read(Path::new(path))
            .and_then(checkpoint::resume)
            .map_err(lib)?;
        put(out, boxed(LcesimStepper(st)), "out")
    })
}

/// Advances up to `steps` steps, stopping early at the end time.
///
/// # Safety
/// `st` must be a live stepper handle.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_advance(st: *mut LcesimStepper, steps: u64) -> LcesimStatus {
    guard(|| {
        let st = &mut st.as_mut().ok_or_else(|| null("st"))?.0;
        for _ in 0..steps {
            if st.done() {
                break;
            }
            st.advance().map_err(lib)?;
        }
        Ok(())
    })
}

/// Writes a checkpoint of the current state.
///
/// # Safety
/// `st` must be a live stepper handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_checkpoint(st: *mut LcesimStepper, path: *const c_char) -> LcesimStatus {
    guard(|| {
        let st = &mut st.as_mut().ok_or_else(|| null("st"))?.0;
        st.checkpoint(Path::new(text(path, "path")?)).map_err(lib)
    })
}

/// Current time, step count, and whether the end time is reached.
///
/// # Safety
/// `st` must be a live stepper handle; each output pointer may be NULL.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_progress(
    st: *const LcesimStepper,
    t: *mut f64,
    step: *mut u64,
    done: *mut bool,
) -> LcesimStatus {
    guard(|| {
        let st = &st.as_ref().ok_or_else(|| null("st"))?.0;
        if let Some(t) = t.as_mut() {
            *t = st.time();
        }
        if let Some(step) = step.as_mut() {
            *step = st.step;
        }
        if let Some(done) = done.as_mut() {
            *done = st.done();
        }
        Ok(())
    })
}

/// Basic (conserved) energy of the current state.
///
/// # Safety
/// `st` must be a live stepper handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_energy(st: *const LcesimStepper, out: *mut f64) -> LcesimStatus {
    guard(|| {
        let st = &st.as_ref().ok_or_else(|| null("st"))?.0;
        let row = sample(st, None).map_err(lib)?;
        put(out, row.e_basic, "out")
    })
}

/// Constraint residuals recorded after the latest step.
///
/// # Safety
/// `st` must be a live stepper handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_constraints(
    st: *const LcesimStepper,
    out: *mut LcesimConstraints,
) -> LcesimStatus {
    guard(|| {
        let c = st.as_ref().ok_or_else(|| null("st"))?.0.constraints;
        let v = LcesimConstraints {
            div_u: c.div_u,
            div_ht: c.div_ht,
            curl_compat: c.curl_compat,
            director_norm: c.director_norm,
            tangency: c.tangency,
        };
        put(out, v, "out")
    })
}

/// Number of scalar components of the state and grid points per component.
///
/// # Safety
/// `st` must be a live stepper handle; each output pointer may be NULL.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_shape(
    st: *const LcesimStepper,
    components: *mut usize,
    points: *mut usize,
) -> LcesimStatus {
    guard(|| {
        let st = &st.as_ref().ok_or_else(|| null("st"))?.0;
        if let Some(c) = components.as_mut() {
            *c = st.state.components().len();
        }
        if let Some(p) = points.as_mut() {
            *p = st.grid().num_points();
        }
        Ok(())
    })
}

/// Copies component `index` (row-major grid order) into `buf`, which holds `len` doubles.
///
/// # Safety
/// `st` must be a live stepper handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_copy_component(
    st: *const LcesimStepper,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> LcesimStatus {
    guard(|| {
        let st = &st.as_ref().ok_or_else(|| null("st"))?.0;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let comps = st.state.components();
        let f = comps.get(index).ok_or_else(|| {
            (
                LcesimStatus::OutOfRange,
                format!("component {index} out of range (state has {})", comps.len()),
            )
        })?;
        let data = f.data();
        if len < data.len() {
            return Err((
                LcesimStatus::OutOfRange,
                format!("buffer holds {len} values, need {}", data.len()),
            ));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// # Safety
/// `st` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lcesim_stepper_free(st: *mut LcesimStepper) {
    if !st.is_null() {
        drop(Box::from_raw(st));
    }
}

/// Runs an acceptance suite. `passed` receives the verdict and `json` (if not NULL)
/// a report string to release with `lcesim_string_free`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `passed` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcesim_verify(name: *const c_char, passed: *mut bool, json: *mut *mut c_char) -> LcesimStatus {
    guard(|| {
        let report = harness::verify(text(name, "name")?).map_err(lib)?;
        put(passed, report.passed, "passed")?;
        if !json.is_null() {
            let s = serde_json::to_string(&report).map_err(|e| (LcesimStatus::Other, e.to_string()))?;
            json.write(CString::new(s).expect("JSON has no interior nul").into_raw());
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn lcesim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
