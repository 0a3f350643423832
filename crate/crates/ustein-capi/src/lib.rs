//! C ABI for the ustein library.
//!
//! Two access styles:
//!
//! - pipeline entry points (`ustein_run_bound`, `ustein_run_verify`,
//!   `ustein_run_sweep_csv`): JSON config in, JSON/CSV report out, status
//!   code back — the full CLI functionality behind one call;
//! - an opaque model handle (`ustein_model_from_json` + accessors) for
//!   bindings that want to introspect a model without running a pipeline.
//!
//! All returned strings are heap-allocated and must be released with
//! [`ustein_string_free`]. On any non-`Ok` status, a thread-local message
//! is readable through [`ustein_last_error`] until the next call on the
//! same thread. Null pointers are rejected, never dereferenced.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ustein::cli::{build_model, cmd_bound, cmd_sweep, cmd_verify, RunConfig};
use ustein::model::UStatModel;
use ustein::Error;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UsteinStatus {
    Ok = 0,
    /// Malformed config, unknown model, bad parameters.
    ConfigError = 1,
    /// Numerical precondition failure (non-PD matrix, cost guard, NaN).
    NumericalError = 2,
    /// The verify pipeline ran but a check failed (output is still set).
    VerificationFailed = 3,
    /// A required pointer argument was null.
    NullPointer = 4,
    /// Unexpected internal failure (caught panic).
    InternalError = 5,
}

/// Opaque handle to a validated model.
pub struct UsteinModel {
    inner: UStatModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_for(err: &Error) -> UsteinStatus {
    match err {
        Error::Config(_) | Error::Json(_) | Error::Io(_) => UsteinStatus::ConfigError,
        Error::Numerical(_) | Error::CostGuard(_) | Error::NonFinite(_) => {
            UsteinStatus::NumericalError
        }
    }
}

/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, UsteinStatus> {
    if ptr.is_null() {
        set_error("null pointer argument");
        return Err(UsteinStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        UsteinStatus::ConfigError
    })
}

fn write_out(out: *mut *mut c_char, payload: String) -> UsteinStatus {
    if out.is_null() {
        set_error("null output pointer");
        return UsteinStatus::NullPointer;
    }
    match CString::new(payload) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            UsteinStatus::Ok
        }
        Err(_) => {
            set_error("output contained an interior NUL byte");
            UsteinStatus::InternalError
        }
    }
}

fn guarded(f: impl FnOnce() -> UsteinStatus) -> UsteinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            UsteinStatus::InternalError
        }
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn ustein_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or null. Valid
/// until the next ustein call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn ustein_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(c) => c.as_ptr(),
        None => ptr::null(),
    })
}

/// Frees a string returned through an `out` parameter.
///
/// # Safety
/// `s` must be null or a pointer previously returned by this library
/// through an `out` parameter, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ustein_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a model from a JSON config document (the same schema the CLI
/// reads; only the `model` and `C` sections are used here).
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `out_model` must be a
/// valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ustein_model_from_json(
    config_json: *const c_char,
    out_model: *mut *mut UsteinModel,
) -> UsteinStatus {
    guarded(|| {
        clear_error();
        if out_model.is_null() {
            set_error("null output pointer");
            return UsteinStatus::NullPointer;
        }
        let text = match read_str(config_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let parsed = RunConfig::from_json(text).and_then(|cfg| build_model(&cfg));
        match parsed {
            Ok(model) => {
                *out_model = Box::into_raw(Box::new(UsteinModel { inner: model }));
                UsteinStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Number of U-statistic components, or -1 on a null handle.
///
/// # Safety
/// `model` must be null or a live handle from [`ustein_model_from_json`].
#[no_mangle]
pub unsafe extern "C" fn ustein_model_dimension(model: *const UsteinModel) -> i32 {
    match model.as_ref() {
        Some(m) => m.inner.dimension() as i32,
        None => -1,
    }
}

/// Kernel order of component `i` (0-based), or -1 when out of range.
///
/// # Safety
/// `model` must be null or a live handle from [`ustein_model_from_json`].
#[no_mangle]
pub unsafe extern "C" fn ustein_model_order(model: *const UsteinModel, i: u32) -> i32 {
    match model.as_ref() {
        Some(m) if (i as usize) < m.inner.dimension() => m.inner.order(i as usize) as i32,
        _ => -1,
    }
}

/// Total mass `μ(E)` of the model's intensity measure; NaN on null.
///
/// # Safety
/// `model` must be null or a live handle from [`ustein_model_from_json`].
#[no_mangle]
pub unsafe extern "C" fn ustein_model_total_mass(model: *const UsteinModel) -> f64 {
    match model.as_ref() {
        Some(m) => m.inner.measure().total_mass(),
        None => f64::NAN,
    }
}

/// Releases a model handle.
///
/// # Safety
/// `model` must be null or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ustein_model_free(model: *mut UsteinModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs the bound pipeline; on `Ok`, `out_json` holds the pretty-printed
/// report.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ustein_run_bound(
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> UsteinStatus {
    guarded(|| {
        clear_error();
        let text = match read_str(config_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::from_json(text).and_then(|cfg| cmd_bound(&cfg)) {
            Ok(out) => match serde_json::to_string_pretty(&out) {
                Ok(json) => write_out(out_json, json),
                Err(e) => {
                    set_error(&e.to_string());
                    UsteinStatus::InternalError
                }
            },
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Runs the verify pipeline. Returns `VerificationFailed` (with the full
/// report still written) when a check fails.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ustein_run_verify(
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> UsteinStatus {
    guarded(|| {
        clear_error();
        let text = match read_str(config_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::from_json(text).and_then(|cfg| cmd_verify(&cfg)) {
            Ok(out) => match serde_json::to_string_pretty(&out) {
                Ok(json) => {
                    let status = write_out(out_json, json);
                    if status == UsteinStatus::Ok && !out.pass {
                        set_error("verification checks failed");
                        UsteinStatus::VerificationFailed
                    } else {
                        status
                    }
                }
                Err(e) => {
                    set_error(&e.to_string());
                    UsteinStatus::InternalError
                }
            },
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Runs the sweep pipeline; on `Ok`, `out_csv` holds the plot-ready CSV.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_csv` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ustein_run_sweep_csv(
    config_json: *const c_char,
    out_csv: *mut *mut c_char,
) -> UsteinStatus {
    guarded(|| {
        clear_error();
        let text = match read_str(config_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match RunConfig::from_json(text).and_then(|cfg| cmd_sweep(&cfg)) {
            Ok(out) => write_out(out_csv, out.csv),
            Err(e) => {
                set_error(&e.to_string());
                status_for(&e)
            }
        }
    })
}
