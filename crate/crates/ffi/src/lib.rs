//! C ABI over cmlkit.
//!
//! Objects are opaque handles freed with their `*_free` function. Calls
//! return a `CmlStatus`; on failure `cml_last_error` describes the problem
//! until the next call on the same thread. Strings returned to the caller
//! are freed with `cml_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cmlkit::image::{self, ImageError};
use cmlkit::sat::SatError;
use cmlkit::verify::{self, VerificationReport, VerifyError, VerifyOptions};
use cmlkit::{parse_formula_file, parse_model, Cpn, Formula, SatOptions, SatVerdict, Signature};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    FragmentUnsupported = 4,
    SolverError = 5,
    UnknownTransition = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmlSatVerdict {
    Sat = 0,
    Unsat = 1,
    Unknown = 2,
}

/// A parsed net.
pub struct CmlModel {
    net: Cpn,
}

/// A closed formula together with its signature.
pub struct CmlFormula {
    sig: Signature,
    formula: Formula,
}

/// Outcome of an invariant check.
pub struct CmlReport {
    report: VerificationReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).unwrap_or_default());
}

fn fail(status: CmlStatus, msg: impl Into<String>) -> CmlStatus {
    set_error(msg);
    status
}

fn verify_status(e: &VerifyError) -> CmlStatus {
    if e.is_fragment_error() {
        return CmlStatus::FragmentUnsupported;
    }
    match e {
        VerifyError::Sat(SatError::Smt(_)) => CmlStatus::SolverError,
        VerifyError::Budget(_) => CmlStatus::SolverError,
        _ => CmlStatus::ParseError,
    }
}

fn image_fail(e: ImageError) -> CmlStatus {
    let e = VerifyError::Image(e);
    fail(verify_status(&e), e.to_string())
}

// Runs `f`, turning panics into `Internal`.
fn guard(f: impl FnOnce() -> CmlStatus) -> CmlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == CmlStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(CmlStatus::Internal, "internal panic"),
    }
}

unsafe fn utf8<'a>(p: *const c_char) -> Result<&'a str, CmlStatus> {
    if p.is_null() {
        return Err(fail(CmlStatus::NullArgument, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(CmlStatus::InvalidUtf8, "string is not UTF-8"))
}

fn give<T>(out: *mut *mut T, v: T) {
    unsafe { *out = Box::into_raw(Box::new(v)) };
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cml_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn cml_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a model file's text.
///
/// # Safety
/// `text` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cml_model_parse(
    text: *const c_char,
    out: *mut *mut CmlModel,
) -> CmlStatus {
    guard(|| {
        if out.is_null() {
            return fail(CmlStatus::NullArgument, "null output pointer");
        }
        let t = match utf8(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match parse_model(t) {
            Ok(net) => {
                give(out, CmlModel { net });
                CmlStatus::Ok
            }
            Err(e) => fail(CmlStatus::ParseError, e.to_string()),
        }
    })
}

/// # Safety
/// `m` must come from `cml_model_parse` or be null.
#[no_mangle]
pub unsafe extern "C" fn cml_model_free(m: *mut CmlModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of transitions of the model, 0 for null.
///
/// # Safety
/// `m` must be a live model or null.
#[no_mangle]
pub unsafe extern "C" fn cml_model_transition_count(m: *const CmlModel) -> usize {
    m.as_ref().map_or(0, |m| m.net.transitions.len())
}

/// Parses a formula. A header in the text wins; otherwise the model's
/// signature is used when `model` is not null, else one is inferred.
///
/// # Safety
/// `text` must be NUL-terminated, `model` live or null, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cml_formula_parse(
    text: *const c_char,
    model: *const CmlModel,
    out: *mut *mut CmlFormula,
) -> CmlStatus {
    guard(|| {
        if out.is_null() {
            return fail(CmlStatus::NullArgument, "null output pointer");
        }
        let t = match utf8(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let fallback = model.as_ref().map(|m| &m.net.signature);
        match parse_formula_file(t, fallback) {
            Ok((sig, formula)) => {
                give(out, CmlFormula { sig, formula });
                CmlStatus::Ok
            }
            Err(e) => fail(CmlStatus::ParseError, e.to_string()),
        }
    })
}

/// # Safety
/// `f` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cml_formula_free(f: *mut CmlFormula) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Text form of a formula, parseable again. Null for a null handle.
///
/// # Safety
/// `f` must be a live formula or null.
#[no_mangle]
pub unsafe extern "C" fn cml_formula_to_string(f: *const CmlFormula) -> *mut c_char {
    match f.as_ref() {
        Some(f) => to_c(f.formula.to_string()),
        None => ptr::null_mut(),
    }
}

unsafe fn image_call(
    model: *const CmlModel,
    formula: *const CmlFormula,
    transition: *const c_char,
    out: *mut *mut CmlFormula,
    forward: bool,
) -> CmlStatus {
    guard(|| {
        let (Some(m), Some(f)) = (model.as_ref(), formula.as_ref()) else {
            return fail(CmlStatus::NullArgument, "null model or formula");
        };
        if out.is_null() {
            return fail(CmlStatus::NullArgument, "null output pointer");
        }
        let net = &m.net;
        let r = if transition.is_null() {
            if forward {
                image::post_all(&f.formula, net)
            } else {
                image::pre_all(&f.formula, net)
            }
        } else {
            let name = match utf8(transition) {
                Ok(t) => t,
                Err(s) => return s,
            };
            let Ok(t) = net.transition(name) else {
                return fail(
                    CmlStatus::UnknownTransition,
                    format!("unknown transition `{name}`"),
                );
            };
            if forward {
                image::post_formula(&f.formula, net, t)
            } else {
                image::pre_formula(&f.formula, net, t)
            }
        };
        match r {
            Ok(g) => {
                give(
                    out,
                    CmlFormula {
                        sig: net.signature.clone(),
                        formula: g,
                    },
                );
                CmlStatus::Ok
            }
            Err(e) => image_fail(e),
        }
    })
}

/// Symbolic successors through `transition`, or through every transition
/// when `transition` is null.
///
/// # Safety
/// Handles must be live; `transition` NUL-terminated or null; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cml_post(
    model: *const CmlModel,
    formula: *const CmlFormula,
    transition: *const c_char,
    out: *mut *mut CmlFormula,
) -> CmlStatus {
    image_call(model, formula, transition, out, true)
}

/// Symbolic predecessors; see `cml_post`.
///
/// # Safety
/// As for `cml_post`.
#[no_mangle]
pub unsafe extern "C" fn cml_pre(
    model: *const CmlModel,
    formula: *const CmlFormula,
    transition: *const c_char,
    out: *mut *mut CmlFormula,
) -> CmlStatus {
    image_call(model, formula, transition, out, false)
}

/// Decides satisfiability with the default solver settings.
///
/// # Safety
/// `formula` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cml_check_sat(
    formula: *const CmlFormula,
    out: *mut CmlSatVerdict,
) -> CmlStatus {
    guard(|| {
        let Some(f) = formula.as_ref() else {
            return fail(CmlStatus::NullArgument, "null formula");
        };
        if out.is_null() {
            return fail(CmlStatus::NullArgument, "null output pointer");
        }
        match cmlkit::check_sat(&f.formula, &f.sig, &SatOptions::default()) {
            Ok(r) => {
                *out = match r.verdict {
                    SatVerdict::Sat(_) => CmlSatVerdict::Sat,
                    SatVerdict::Unsat => CmlSatVerdict::Unsat,
                    SatVerdict::Unknown(_) => CmlSatVerdict::Unknown,
                };
                CmlStatus::Ok
            }
            Err(e) => {
                let e = VerifyError::Sat(e);
                fail(verify_status(&e), e.to_string())
            }
        }
    })
}

/// Checks that `inv` is an inductive invariant, or with `aux` non-null that
/// `init => aux => inv` and `aux` is inductive.
///
/// # Safety
/// `model`, `init`, `inv` must be live; `aux` live or null; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn cml_check_invariant(
    model: *const CmlModel,
    init: *const CmlFormula,
    inv: *const CmlFormula,
    aux: *const CmlFormula,
    out: *mut *mut CmlReport,
) -> CmlStatus {
    guard(|| {
        let (Some(m), Some(i), Some(v)) = (model.as_ref(), init.as_ref(), inv.as_ref()) else {
            return fail(CmlStatus::NullArgument, "null model or formula");
        };
        if out.is_null() {
            return fail(CmlStatus::NullArgument, "null output pointer");
        }
        let opts = VerifyOptions::default();
        let r = match aux.as_ref() {
            Some(a) => {
                verify::check_invariance_instance(&m.net, &i.formula, &v.formula, &a.formula, &opts)
            }
            None => verify::check_inductive_invariant(&m.net, &i.formula, &v.formula, &opts),
        };
        match r {
            Ok(report) => {
                give(out, CmlReport { report });
                CmlStatus::Ok
            }
            Err(e) => fail(verify_status(&e), e.to_string()),
        }
    })
}

/// 1 when every lemma is unsatisfiable, 0 otherwise or for null.
///
/// # Safety
/// `r` must be a live report or null.
#[no_mangle]
pub unsafe extern "C" fn cml_report_holds(r: *const CmlReport) -> i32 {
    r.as_ref().map_or(0, |r| r.report.holds() as i32)
}

/// # Safety
/// `r` must be a live report or null.
#[no_mangle]
pub unsafe extern "C" fn cml_report_lemma_count(r: *const CmlReport) -> usize {
    r.as_ref().map_or(0, |r| r.report.lemmas.len())
}

/// The report as JSON. Null for a null handle.
///
/// # Safety
/// `r` must be a live report or null.
#[no_mangle]
pub unsafe extern "C" fn cml_report_json(r: *const CmlReport) -> *mut c_char {
    match r.as_ref() {
        Some(r) => to_c(r.report.to_json()),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `r` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn cml_report_free(r: *mut CmlReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_arguments_are_reported() {
        let mut m: *mut CmlModel = ptr::null_mut();
        let s = unsafe { cml_model_parse(ptr::null(), &mut m) };
        assert_eq!(s, CmlStatus::NullArgument);
        assert!(m.is_null());
        let msg = unsafe { CStr::from_ptr(cml_last_error()) };
        assert!(!msg.to_bytes().is_empty());
    }

    #[test]
    fn parse_errors_carry_a_message() {
        let src = CString::new("theory int; colors 1; places p; trans t: p -> nowhere;").unwrap();
        let mut m: *mut CmlModel = ptr::null_mut();
        let s = unsafe { cml_model_parse(src.as_ptr(), &mut m) };
        assert_eq!(s, CmlStatus::ParseError);
        let msg = unsafe { CStr::from_ptr(cml_last_error()) }
            .to_str()
            .unwrap();
        assert!(msg.contains("nowhere"), "{msg}");
    }
}
