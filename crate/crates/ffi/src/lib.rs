//! C interface to the population exchange samplers.
//!
//! Configurations and fit results are opaque handles created and destroyed
//! through this interface. Every fallible call returns an [`ErgmStatus`];
//! on failure `ergm_last_error` describes the most recent error on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ergm_exchange::commands::{fit, FitOutput};
use ergm_exchange::config::{preset, RunConfig};
use ergm_exchange::samplers::Algorithm;
use ergm_exchange::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Invalid configuration, statistic or parameter dimension.
    Config = 2,
    /// Unreadable or malformed network data.
    Data = 3,
    /// Numerical failure during sampling or summarising.
    Numerical = 4,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 5,
    /// The output buffer is too small.
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque run configuration.
pub struct ErgmConfig {
    inner: RunConfig,
}

/// Opaque result of one fit.
pub struct ErgmFit {
    inner: FitOutput,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> ErgmStatus {
    match e.exit_code() {
        2 => ErgmStatus::Data,
        3 => ErgmStatus::Numerical,
        _ => ErgmStatus::Config,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ErgmStatus>) -> ErgmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ErgmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            ErgmStatus::Panic
        }
    }
}

fn fail(e: Error) -> ErgmStatus {
    set_error(e.to_string());
    status_of(&e)
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, ErgmStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(ErgmStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        ErgmStatus::InvalidUtf8
    })
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, ErgmStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle");
        ErgmStatus::NullPointer
    })
}

unsafe fn out_ptr<T>(p: *mut T) -> Result<&'static mut T, ErgmStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer");
        ErgmStatus::NullPointer
    })
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), ErgmStatus> {
    if buf.is_null() {
        set_error("null output buffer");
        return Err(ErgmStatus::NullPointer);
    }
    if len < values.len() {
        set_error(format!("buffer holds {len} values, {} needed", values.len()));
        return Err(ErgmStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ergm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ergm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a JSON run configuration into `*out`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ergm_config_from_json(json: *const c_char, out: *mut *mut ErgmConfig) -> ErgmStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let cfg = RunConfig::from_json(text(json)?).map_err(fail)?;
        *out = Box::into_raw(Box::new(ErgmConfig { inner: cfg }));
        Ok(())
    })
}

/// Loads a bundled preset (`florentine`, `karate`, `fauxmesa`, `fauxmesa-smoke`).
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ergm_config_from_preset(name: *const c_char, out: *mut *mut ErgmConfig) -> ErgmStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let name = text(name)?;
        let cfg = preset(name)
            .ok_or_else(|| fail(Error::Config(format!("unknown preset `{name}`"))))?
            .map_err(fail)?;
        *out = Box::into_raw(Box::new(ErgmConfig { inner: cfg }));
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ergm_config_set_seed(cfg: *mut ErgmConfig, seed: u64) -> ErgmStatus {
    guard(|| {
        out_ptr(cfg)?.inner.sampler.seed = seed;
        Ok(())
    })
}

/// Selects the algorithm by name, e.g. `"AAEA-2+DR"` or `"ads-aea"`.
///
/// # Safety
/// `cfg` must be a live handle and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ergm_config_set_algorithm(cfg: *mut ErgmConfig, name: *const c_char) -> ErgmStatus {
    guard(|| {
        let cfg = out_ptr(cfg)?;
        let alg: Algorithm = text(name)?.parse().map_err(fail)?;
        cfg.inner.sampler.set_algorithm(alg);
        Ok(())
    })
}

/// Sets the number of main iterations per chain. Per-variant overrides in
/// the configuration still take precedence.
///
/// # Safety
/// `cfg` must be a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn ergm_config_set_main_iters(cfg: *mut ErgmConfig, iters: usize) -> ErgmStatus {
    guard(|| {
        out_ptr(cfg)?.inner.sampler.main_iters = iters;
        Ok(())
    })
}

/// Serialises the configuration as JSON into `*out`; release it with
/// `ergm_string_free`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ergm_config_to_json(cfg: *const ErgmConfig, out: *mut *mut c_char) -> ErgmStatus {
    guard(|| {
        let json = handle(cfg)?.inner.to_json();
        *out_ptr(out)? = CString::new(json).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ergm_config_free(cfg: *mut ErgmConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the configured algorithm and stores the result in `*out`.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit(cfg: *const ErgmConfig, out: *mut *mut ErgmFit) -> ErgmStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let result = fit(&handle(cfg)?.inner, None, None).map_err(fail)?;
        *out = Box::into_raw(Box::new(ErgmFit { inner: result }));
        Ok(())
    })
}

/// Number of parameters, or 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_dim(fit: *const ErgmFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.store.dim())
}

/// Number of pooled post-burn-in samples, or 0 for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_sample_count(fit: *const ErgmFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.store.len())
}

/// Copies the pooled samples, row-major `count × dim`, into `buf`.
///
/// # Safety
/// `fit` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_samples(fit: *const ErgmFit, buf: *mut f64, len: usize) -> ErgmStatus {
    guard(|| {
        let store = &handle(fit)?.inner.store;
        let flat: Vec<f64> = store.pooled().flat_map(|t| t.iter().copied()).collect();
        copy_out(&flat, buf, len)
    })
}

/// Posterior means, one per parameter.
///
/// # Safety
/// `fit` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_mean(fit: *const ErgmFit, buf: *mut f64, len: usize) -> ErgmStatus {
    guard(|| copy_out(&handle(fit)?.inner.report.mean, buf, len))
}

/// Posterior standard deviations, one per parameter.
///
/// # Safety
/// `fit` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_sd(fit: *const ErgmFit, buf: *mut f64, len: usize) -> ErgmStatus {
    guard(|| copy_out(&handle(fit)?.inner.report.sd, buf, len))
}

/// Effective sample sizes, one per parameter; NaN where undefined.
///
/// # Safety
/// `fit` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_ess(fit: *const ErgmFit, buf: *mut f64, len: usize) -> ErgmStatus {
    guard(|| {
        let ess: Vec<f64> = handle(fit)?
            .inner
            .report
            .ess
            .iter()
            .map(|e| e.unwrap_or(f64::NAN))
            .collect();
        copy_out(&ess, buf, len)
    })
}

/// Acceptance rates of the first stage, the second stage and overall.
///
/// # Safety
/// `fit` must be a live handle; each output pointer must be valid.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_acceptance(
    fit: *const ErgmFit,
    stage1: *mut f64,
    stage2: *mut f64,
    overall: *mut f64,
) -> ErgmStatus {
    guard(|| {
        let a = handle(fit)?.inner.report.acceptance;
        *out_ptr(stage1)? = a.stage1;
        *out_ptr(stage2)? = a.stage2;
        *out_ptr(overall)? = a.overall;
        Ok(())
    })
}

/// Seconds spent sampling, or NaN for a null handle.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_wall_time(fit: *const ErgmFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.inner.store.wall_time)
}

/// Full summary as JSON into `*out`; release it with `ergm_string_free`.
///
/// # Safety
/// `fit` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_report_json(fit: *const ErgmFit, out: *mut *mut c_char) -> ErgmStatus {
    guard(|| {
        let json = serde_json::to_string(&handle(fit)?.inner.report).map_err(|e| fail(e.into()))?;
        *out_ptr(out)? = CString::new(json).unwrap_or_default().into_raw();
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ergm_fit_free(fit: *mut ErgmFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ergm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Config("x".into())), ErgmStatus::Config);
        assert_eq!(status_of(&Error::ZeroVariance), ErgmStatus::Numerical);
        assert_eq!(status_of(&Error::UnknownLabel("a".into())), ErgmStatus::Data);
    }

    #[test]
    fn errors_are_recorded_per_thread() {
        set_error("first");
        let here = unsafe { CStr::from_ptr(ergm_last_error()) }
            .to_str()
            .unwrap()
            .to_string();
        let there = std::thread::spawn(|| {
            unsafe { CStr::from_ptr(ergm_last_error()) }
                .to_str()
                .unwrap()
                .to_string()
        })
        .join()
        .unwrap();
        assert_eq!(here, "first");
        assert_eq!(there, "");
    }

    #[test]
    fn panics_become_status() {
        assert_eq!(guard(|| panic!("boom")), ErgmStatus::Panic);
    }
}
