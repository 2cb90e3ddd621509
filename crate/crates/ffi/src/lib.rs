//! C ABI over the wannier2d pipeline.
//!
//! Models and results are opaque handles owned by the caller and released
//! with the matching `*_free` function. Every fallible call returns a
//! [`W2dStatus`]; the message of the last failure on the calling thread is
//! available through [`w2d_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wannier2d::cli::{run_model, Method, RunConfig, RunOutcome};
use wannier2d::model::{builtin_model, parse_model_file, TightBindingModel};
use wannier2d::wannier::{bloch_fourier_coefficients, BlochCoefficients};
use wannier2d::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W2dStatus {
    Ok = 0,
    /// The band has nonzero Chern number; the result holds the Stage-2 sheet only.
    Obstructed = 1,
    NullPointer = 2,
    InvalidArgument = 3,
    UnknownModel = 4,
    ParseError = 5,
    InvalidModel = 6,
    NearDegenerate = 7,
    Numerical = 8,
    Panic = 9,
}

/// Transport method selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W2dMethod {
    Ode = 0,
    Twist = 1,
    Alt = 2,
}

/// Opaque tight-binding model.
pub struct W2dModel {
    inner: TightBindingModel,
    name: String,
}

/// Opaque pipeline result.
pub struct W2dResult {
    outcome: RunOutcome,
    coeffs: Option<BlochCoefficients>,
    report: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> W2dStatus {
    match e.root() {
        Error::UnknownModel(_) => W2dStatus::UnknownModel,
        Error::ParseError(_) => W2dStatus::ParseError,
        Error::DegenerateLattice { .. }
        | Error::HermiticityViolation { .. }
        | Error::ShapeMismatch(_)
        | Error::NonHermitianInput(_) => W2dStatus::InvalidModel,
        Error::NearDegenerate { .. } => W2dStatus::NearDegenerate,
        Error::ObstructedBranch { .. } => W2dStatus::Obstructed,
        Error::InvalidConfig(_) | Error::WindowTooLarge { .. } | Error::Io(_) => {
            W2dStatus::InvalidArgument
        }
        _ => W2dStatus::Numerical,
    }
}

fn fail(e: Error) -> W2dStatus {
    set_last_error(&e.to_string());
    status_of(&e)
}

// runs `f`, converting panics into a status so they never cross the boundary
fn guard(f: impl FnOnce() -> W2dStatus) -> W2dStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_last_error("internal panic");
            W2dStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, W2dStatus> {
    if s.is_null() {
        set_last_error("null string argument");
        return Err(W2dStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        W2dStatus::InvalidArgument
    })
}

fn null_arg(name: &str) -> W2dStatus {
    set_last_error(&format!("null pointer: {name}"));
    W2dStatus::NullPointer
}

/// Message describing the last failure on this thread. Valid until the next
/// call on the same thread; never NULL.
#[no_mangle]
pub extern "C" fn w2d_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn w2d_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Looks up a built-in model ("square3", "haldane-trivial", "haldane-chern").
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w2d_model_builtin(
    name: *const c_char,
    out: *mut *mut W2dModel,
) -> W2dStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let name = match read_str(name) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match builtin_model(name) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(W2dModel {
                    inner: m,
                    name: name.to_string(),
                }));
                W2dStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Parses a JSON model document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w2d_model_from_json(
    json: *const c_char,
    out: *mut *mut W2dModel,
) -> W2dStatus {
    guard(|| {
        if out.is_null() {
            return null_arg("out");
        }
        let text = match read_str(json) {
            Ok(s) => s,
            Err(st) => return st,
        };
        match parse_model_file(text) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(W2dModel {
                    inner: m,
                    name: "custom".into(),
                }));
                W2dStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Orbital count per cell, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn w2d_model_dim(model: *const W2dModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim)
}

/// Selects the band to localize.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn w2d_model_set_band(model: *mut W2dModel, band: usize) -> W2dStatus {
    let Some(m) = model.as_mut() else {
        return null_arg("model");
    };
    if band >= m.inner.dim {
        set_last_error(&format!("band {band} out of range for dim {}", m.inner.dim));
        return W2dStatus::InvalidArgument;
    }
    m.inner.band = band;
    W2dStatus::Ok
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn w2d_model_free(model: *mut W2dModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Runs the pipeline on an n×n grid. On `Obstructed` a result is still
/// written: it carries the Chern number and the non-periodic sheet.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w2d_run(
    model: *const W2dModel,
    n: usize,
    method: W2dMethod,
    optimize: bool,
    out: *mut *mut W2dResult,
) -> W2dStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return null_arg("model");
        };
        if out.is_null() {
            return null_arg("out");
        }
        *out = ptr::null_mut();
        let mut cfg = RunConfig::new(&m.name, n);
        cfg.method = match method {
            W2dMethod::Ode => Method::Ode,
            W2dMethod::Twist => Method::Twist,
            W2dMethod::Alt => Method::Alt,
        };
        cfg.optimize = optimize || method == W2dMethod::Alt;
        match run_model(&cfg, m.inner.clone()) {
            Ok(outcome) => {
                let obstructed = outcome.report.obstructed;
                let coeffs = (!obstructed).then(|| {
                    bloch_fourier_coefficients(outcome.optimal.as_ref().unwrap_or(&outcome.sheet))
                });
                let report = CString::new(outcome.report.to_json()).unwrap_or_default();
                *out = Box::into_raw(Box::new(W2dResult {
                    outcome,
                    coeffs,
                    report,
                }));
                if obstructed {
                    set_last_error("nonzero Chern number");
                    W2dStatus::Obstructed
                } else {
                    W2dStatus::Ok
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// Chern number of the band, or 0 for a NULL handle.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn w2d_result_chern(res: *const W2dResult) -> i64 {
    res.as_ref().map_or(0, |r| r.outcome.report.chern)
}

/// Writes the Wannier center (x, y) into `center[0..2]`.
///
/// # Safety
/// `res` must be a live handle; `center` must point to two writable doubles.
#[no_mangle]
pub unsafe extern "C" fn w2d_result_center(res: *const W2dResult, center: *mut f64) -> W2dStatus {
    let Some(r) = res.as_ref() else {
        return null_arg("res");
    };
    if center.is_null() {
        return null_arg("center");
    }
    let Some(c) = r.outcome.report.center else {
        set_last_error("no center for an obstructed band");
        return W2dStatus::Obstructed;
    };
    *center = c[0];
    *center.add(1) = c[1];
    W2dStatus::Ok
}

/// Writes the variance of the final gauge into `variance`.
///
/// # Safety
/// `res` must be a live handle; `variance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn w2d_result_variance(
    res: *const W2dResult,
    variance: *mut f64,
) -> W2dStatus {
    let Some(r) = res.as_ref() else {
        return null_arg("res");
    };
    if variance.is_null() {
        return null_arg("variance");
    }
    let rep = &r.outcome.report;
    match rep.variance_post.or(rep.variance_pre) {
        Some(v) => {
            *variance = v;
            W2dStatus::Ok
        }
        None => {
            set_last_error("no variance for an obstructed band");
            W2dStatus::Obstructed
        }
    }
}

/// Bloch Fourier coefficient vector at lattice vector (m1, m2).
/// Writes `dim` real and imaginary parts into `re` and `im`.
///
/// # Safety
/// `res` must be a live handle; `re` and `im` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn w2d_result_coefficient(
    res: *const W2dResult,
    m1: i64,
    m2: i64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> W2dStatus {
    let Some(r) = res.as_ref() else {
        return null_arg("res");
    };
    if re.is_null() || im.is_null() {
        return null_arg("re/im");
    }
    let Some(coeffs) = &r.coeffs else {
        set_last_error("no coefficients for an obstructed band");
        return W2dStatus::Obstructed;
    };
    let half = (coeffs.n / 2) as i64;
    if len < coeffs.dim || !(-half..half).contains(&m1) || !(-half..half).contains(&m2) {
        set_last_error("coefficient index or buffer length out of range");
        return W2dStatus::InvalidArgument;
    }
    for (i, z) in coeffs.get(m1, m2).into_iter().enumerate() {
        *re.add(i) = z.re;
        *im.add(i) = z.im;
    }
    W2dStatus::Ok
}

/// JSON report of the run. Owned by the result; valid until it is freed.
///
/// # Safety
/// `res` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn w2d_result_report_json(res: *const W2dResult) -> *const c_char {
    res.as_ref().map_or(ptr::null(), |r| r.report.as_ptr())
}

/// # Safety
/// `res` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn w2d_result_free(res: *mut W2dResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
