//! C interface to the pricing library.
//!
//! Configurations and results are opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! an [`RmcaStatus`]; on failure [`rmca_last_error`] describes the error.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use robust_mca::cli::compute_price;
use robust_mca::config::RunConfig;
use robust_mca::engine::PricingResult;
use robust_mca::Error;

/// Status codes; the nonzero values match the CLI exit codes where they overlap.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmcaStatus {
    Ok = 0,
    Io = 1,
    Config = 2,
    Numeric = 3,
    Contract = 4,
    NullPointer = 5,
    Panic = 6,
}

pub struct RmcaConfig {
    inner: RunConfig,
}

pub struct RmcaResult {
    inner: PricingResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(e: Error) -> RmcaStatus {
    let status = match e {
        Error::Config { .. } => RmcaStatus::Config,
        Error::Numeric(_) => RmcaStatus::Numeric,
        Error::Contract(_) | Error::InvalidKernel(_) => RmcaStatus::Contract,
        Error::Io(_) => RmcaStatus::Io,
    };
    set_error(e.to_string());
    status
}

fn null(what: &str) -> RmcaStatus {
    set_error(format!("null pointer: {what}"));
    RmcaStatus::NullPointer
}

fn guard(f: impl FnOnce() -> RmcaStatus) -> RmcaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic".into());
            RmcaStatus::Panic
        }
    }
}

unsafe fn parse_config(
    text: *const c_char,
    out: *mut *mut RmcaConfig,
    parse: fn(&str) -> robust_mca::Result<RunConfig>,
) -> RmcaStatus {
    guard(|| {
        if text.is_null() {
            return null("text");
        }
        if out.is_null() {
            return null("out");
        }
        let s = match CStr::from_ptr(text).to_str() {
            Ok(s) => s,
            Err(_) => return fail(Error::config("", "config text is not UTF-8")),
        };
        match parse(s) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RmcaConfig { inner }));
                RmcaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses and validates a JSON configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rmca_config_from_json(json: *const c_char, out: *mut *mut RmcaConfig) -> RmcaStatus {
    parse_config(json, out, RunConfig::from_json_str)
}

/// Parses and validates a TOML configuration.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rmca_config_from_toml(toml: *const c_char, out: *mut *mut RmcaConfig) -> RmcaStatus {
    parse_config(toml, out, RunConfig::from_toml_str)
}

/// The cut-off call experiment preset (N = 1200).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rmca_config_fig1_preset(out: *mut *mut RmcaConfig) -> RmcaStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        *out = Box::into_raw(Box::new(RmcaConfig { inner: RunConfig::fig1_preset() }));
        RmcaStatus::Ok
    })
}

/// Sets the number of time steps (`h = T / steps`).
///
/// # Safety
/// `config` must come from an `rmca_config_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn rmca_config_set_steps(config: *mut RmcaConfig, steps: usize) -> RmcaStatus {
    guard(|| {
        let Some(c) = config.as_mut() else { return null("config") };
        let mut next = c.inner.clone();
        next.h = None;
        next.steps = Some(steps);
        match next.validate() {
            Ok(()) => {
                c.inner = next;
                RmcaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `config` must come from an `rmca_config_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn rmca_config_free(config: *mut RmcaConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the backward recursion of `config`.
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rmca_price(config: *const RmcaConfig, out: *mut *mut RmcaResult) -> RmcaStatus {
    guard(|| {
        let Some(c) = config.as_ref() else { return null("config") };
        if out.is_null() {
            return null("out");
        }
        match compute_price(&c.inner) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(RmcaResult { inner }));
                RmcaStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `result` must be a live handle and `price` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rmca_result_price(result: *const RmcaResult, price: *mut f64) -> RmcaStatus {
    let (Some(r), false) = (result.as_ref(), price.is_null()) else { return null("result or price") };
    *price = r.inner.price;
    RmcaStatus::Ok
}

/// # Safety
/// `result` must be a live handle and `h` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rmca_result_h(result: *const RmcaResult, h: *mut f64) -> RmcaStatus {
    let (Some(r), false) = (result.as_ref(), h.is_null()) else { return null("result or h") };
    *h = r.inner.h;
    RmcaStatus::Ok
}

/// # Safety
/// `result` must be a live handle and `steps` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rmca_result_steps(result: *const RmcaResult, steps: *mut usize) -> RmcaStatus {
    let (Some(r), false) = (result.as_ref(), steps.is_null()) else { return null("result or steps") };
    *steps = r.inner.n_steps;
    RmcaStatus::Ok
}

/// Number of points of the value curve; 0 for a null handle.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rmca_result_curve_len(result: *const RmcaResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.value_curve.values.len())
}

/// Copies the value curve into `xs` and `values`, each of length `len`, which
/// must equal [`rmca_result_curve_len`].
///
/// # Safety
/// `xs` and `values` must be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rmca_result_copy_curve(
    result: *const RmcaResult,
    xs: *mut f64,
    values: *mut f64,
    len: usize,
) -> RmcaStatus {
    let Some(r) = result.as_ref() else { return null("result") };
    if xs.is_null() || values.is_null() {
        return null("xs or values");
    }
    let vf = &r.inner.value_curve;
    if len != vf.values.len() {
        return fail(Error::Contract(format!("curve has {} points, buffer has {len}", vf.values.len())));
    }
    let xs = std::slice::from_raw_parts_mut(xs, len);
    let values = std::slice::from_raw_parts_mut(values, len);
    for (i, (x, v)) in xs.iter_mut().zip(values.iter_mut()).enumerate() {
        *x = vf.grid.node(i);
        *v = vf.values[i];
    }
    RmcaStatus::Ok
}

/// # Safety
/// `result` must come from [`rmca_price`] or be null.
#[no_mangle]
pub unsafe extern "C" fn rmca_result_free(result: *mut RmcaResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rmca_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn rmca_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_values_match_exit_codes() {
        assert_eq!(RmcaStatus::Config as i32, Error::config("", "").exit_code());
        assert_eq!(RmcaStatus::Numeric as i32, Error::Numeric(String::new()).exit_code());
        assert_eq!(RmcaStatus::Contract as i32, Error::Contract(String::new()).exit_code());
    }

    #[test]
    fn version_is_the_package_version() {
        let v = unsafe { CStr::from_ptr(rmca_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}
