//! C ABI over `cvqkd-core`.
//!
//! Handles are opaque and owned by the caller once returned; free each with
//! its matching `*_free`. Every fallible call returns a [`CvqkdStatus`]; on
//! failure [`cvqkd_last_error_message`] describes the error for the calling
//! thread. Strings returned by the library are freed with [`cvqkd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cvqkd_core::link::ber_from_q;
use cvqkd_core::report::to_canonical_json;
use cvqkd_core::{keyrate_only, run_experiment, Error, ExperimentConfig, ExperimentReport};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvqkdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Unknown key, unparsable value or inconsistent configuration.
    Config = 3,
    /// A value outside its physical domain.
    InvalidParameter = 4,
    /// Unphysical covariance or no positive key rate.
    Unphysical = 5,
    /// Too few samples, degenerate pilots or mismatched inputs.
    InsufficientData = 6,
    Io = 7,
    Panic = 8,
}

/// Experiment configuration.
pub struct CvqkdConfig(ExperimentConfig);

/// Completed experiment report.
pub struct CvqkdReport(ExperimentReport);

/// Headline numbers of a report.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CvqkdSummary {
    pub pulses: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub q_factor: f64,
    pub ber_analytic: f64,
    pub symbol_error_rate: f64,
    pub delta_hat: f64,
    pub t_hat: f64,
    pub xi_hat: f64,
    pub key_rate_per_pulse: f64,
    pub key_rate_bps: f64,
    pub data_rate_bps: f64,
}

/// Analytic key rate at a configuration's nominal channel.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CvqkdKeyRate {
    pub i_ab: f64,
    pub chi_be: f64,
    pub key_rate_per_pulse: f64,
    pub key_rate_bps: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CvqkdStatus {
    match e {
        Error::Config(_) | Error::UnknownKey { .. } => CvqkdStatus::Config,
        Error::InvalidParameter { .. } => CvqkdStatus::InvalidParameter,
        Error::UnphysicalSpectrum { .. } | Error::DeadLink { .. } => CvqkdStatus::Unphysical,
        Error::Io { .. } | Error::Json(_) => CvqkdStatus::Io,
        _ => CvqkdStatus::InsufficientData,
    }
}

enum Failure {
    Status(CvqkdStatus, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CvqkdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CvqkdStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_last_error(msg);
            s
        }
        Err(_) => {
            set_last_error("internal panic".to_string());
            CvqkdStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(CvqkdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(CvqkdStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Status(CvqkdStatus::InvalidUtf8, "string contains NUL".to_string()))
}

/// Message for the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cvqkd_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cvqkd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// New configuration holding the defaults.
#[no_mangle]
pub extern "C" fn cvqkd_config_new_default() -> *mut CvqkdConfig {
    Box::into_raw(Box::new(CvqkdConfig(ExperimentConfig::default())))
}

/// Parses `key = value` text on top of the defaults.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_config_from_text(text: *const c_char, out: *mut *mut CvqkdConfig) -> CvqkdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig::from_text(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(CvqkdConfig(cfg)));
        Ok(())
    })
}

/// Sets one key from its text form, as in a config file.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_config_set(cfg: *mut CvqkdConfig, key: *const c_char, value: *const c_char) -> CvqkdStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.set(str_arg(key, "key")?, str_arg(value, "value")?)?;
        Ok(())
    })
}

/// Configuration as `key = value` text; free with [`cvqkd_string_free`].
///
/// # Safety
/// `cfg` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_config_to_text(cfg: *const CvqkdConfig, out: *mut *mut c_char) -> CvqkdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(handle(cfg, "cfg")?.0.to_text())?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_config_free(cfg: *mut CvqkdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the full simulation. Blocks until done; uses the configured worker count.
///
/// # Safety
/// `cfg` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_run_experiment(cfg: *const CvqkdConfig, out: *mut *mut CvqkdReport) -> CvqkdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let report = run_experiment(&handle(cfg, "cfg")?.0)?;
        *out = Box::into_raw(Box::new(CvqkdReport(report)));
        Ok(())
    })
}

/// Canonical JSON of the report (the bytes the CLI writes); free with [`cvqkd_string_free`].
///
/// # Safety
/// `report` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_report_json(report: *const CvqkdReport, out: *mut *mut c_char) -> CvqkdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(to_canonical_json(&handle(report, "report")?.0)?)?;
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_report_summary(report: *const CvqkdReport, out: *mut CvqkdSummary) -> CvqkdStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = CvqkdSummary {
            pulses: r.counts.pulses,
            bits: r.link.ber_empirical.trials,
            bit_errors: r.link.ber_empirical.errors,
            q_factor: r.link.q_factor,
            ber_analytic: r.link.ber_analytic,
            symbol_error_rate: r.link.symbol_error_rate,
            delta_hat: r.delta_hat,
            t_hat: r.security.t_hat,
            xi_hat: r.security.xi_hat,
            key_rate_per_pulse: r.security.key_rate_per_pulse,
            key_rate_bps: r.security.key_rate_bps,
            data_rate_bps: r.link.data_rate_bps,
        };
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not be used afterwards. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_report_free(report: *mut CvqkdReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Analytic key rate at the configuration's nominal T, ξ and detector, no simulation.
///
/// # Safety
/// `cfg` must come from this library and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_keyrate(cfg: *const CvqkdConfig, out: *mut CvqkdKeyRate) -> CvqkdStatus {
    guard(|| {
        let params = handle(cfg, "cfg")?.0.security_params();
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let k = keyrate_only(&params)?;
        *out = CvqkdKeyRate {
            i_ab: k.i_ab,
            chi_be: k.chi_be,
            key_rate_per_pulse: k.key_rate_per_pulse,
            key_rate_bps: k.key_rate_bps,
        };
        Ok(())
    })
}

/// Gaussian bit error rate ½·erfc(Q/√2).
#[no_mangle]
pub extern "C" fn cvqkd_ber_from_q(q: f64) -> f64 {
    ber_from_q(q)
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn cvqkd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
