use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cmlkit_ffi::*;

const NET: &str = "theory int; colors 1; places p, q, r;\n\
                   trans tau: p -> q : d1(x1) >= 0 & !(exists t in q . d1(t) = d1(y1));";

fn model() -> *mut CmlModel {
    let src = CString::new(NET).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(
        unsafe { cml_model_parse(src.as_ptr(), &mut m) },
        CmlStatus::Ok
    );
    m
}

fn formula(text: &str, m: *const CmlModel) -> *mut CmlFormula {
    let src = CString::new(text).unwrap();
    let mut f = ptr::null_mut();
    let s = unsafe { cml_formula_parse(src.as_ptr(), m, &mut f) };
    assert_eq!(s, CmlStatus::Ok, "{}", last_error());
    f
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(cml_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn owned(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { cml_string_free(s) };
    out
}

#[test]
fn post_through_the_c_interface() {
    let m = model();
    assert_eq!(unsafe { cml_model_transition_count(m) }, 1);
    let f = formula("forall x, y in p . x = y", m);
    let tau = CString::new("tau").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(
        unsafe { cml_post(m, f, tau.as_ptr(), &mut g) },
        CmlStatus::Ok
    );
    let text = owned(unsafe { cml_formula_to_string(g) });
    assert!(text.starts_with("(forall x in p . false)"), "{text}");

    let bad = CString::new("nope").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(
        unsafe { cml_pre(m, f, bad.as_ptr(), &mut h) },
        CmlStatus::UnknownTransition
    );
    assert!(last_error().contains("nope"));
    unsafe {
        cml_formula_free(g);
        cml_formula_free(f);
        cml_model_free(m);
    }
}

#[test]
fn sat_and_fragment_errors() {
    let f = formula(
        "theory int; colors 1; places p;\n(exists x in p . true) & forall x, y in p . x = y",
        ptr::null(),
    );
    let mut v = CmlSatVerdict::Unknown;
    assert_eq!(unsafe { cml_check_sat(f, &mut v) }, CmlStatus::Ok);
    assert_eq!(v, CmlSatVerdict::Sat);
    let g = formula(
        "theory int; colors 1; places p;\nforall x in p . exists y in p . d1(x) < d1(y)",
        ptr::null(),
    );
    assert_eq!(
        unsafe { cml_check_sat(g, &mut v) },
        CmlStatus::FragmentUnsupported
    );
    assert!(last_error().contains("Pi2"), "{}", last_error());
    unsafe {
        cml_formula_free(f);
        cml_formula_free(g);
    }
}

#[test]
fn invariant_report() {
    let m = model();
    let init = formula("(forall x in q . false) & forall x, y in p . x = y", m);
    let inv = formula("forall x, y in q . x = y", m);
    let mut r = ptr::null_mut();
    assert_eq!(
        unsafe { cml_check_invariant(m, init, inv, ptr::null(), &mut r) },
        CmlStatus::Ok,
        "{}",
        last_error()
    );
    // one token in p and none in q: the only firing leaves one token in q
    assert_eq!(
        unsafe { cml_report_holds(r) },
        0,
        "q can fill up with distinct colors across firings"
    );
    assert!(unsafe { cml_report_lemma_count(r) } >= 2);
    let json = owned(unsafe { cml_report_json(r) });
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["verdict"]["kind"], "fails");
    unsafe {
        cml_report_free(r);
        cml_formula_free(init);
        cml_formula_free(inv);
        cml_model_free(m);
    }
}

#[test]
fn null_handles_are_harmless() {
    unsafe {
        cml_model_free(ptr::null_mut());
        cml_formula_free(ptr::null_mut());
        cml_report_free(ptr::null_mut());
        cml_string_free(ptr::null_mut());
        assert!(cml_formula_to_string(ptr::null()).is_null());
        assert_eq!(cml_report_holds(ptr::null()), 0);
        let mut out = ptr::null_mut();
        assert_eq!(
            cml_post(ptr::null(), ptr::null(), ptr::null(), &mut out),
            CmlStatus::NullArgument
        );
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/cmlkit.h")
}

fn cc() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| Command::new(c).arg("--version").output().is_ok())
}

#[test]
fn header_is_valid_c() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    let h = header();
    assert!(
        h.exists(),
        "build script should have written {}",
        h.display()
    );
    let out = Command::new(cc)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&h)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn c_program_links_against_the_static_library() {
    let Some(cc) = cc() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    // cargo test does not produce the staticlib, so build it once into a
    // separate target directory
    let target = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/capi-test");
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let built = Command::new(cargo)
        .args([
            "build",
            "--quiet",
            "--offline",
            "-p",
            "cmlkit-ffi",
            "--lib",
            "--target-dir",
        ])
        .arg(&target)
        .status();
    if !matches!(built, Ok(s) if s.success()) {
        eprintln!("could not build the static library, skipping");
        return;
    }
    let lib = target.join("debug/libcmlkit_ffi.a");
    assert!(lib.exists(), "{}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "cmlkit.h"
int main(void) {
    CmlModel *m = NULL;
    CmlFormula *f = NULL, *g = NULL;
    if (cml_model_parse("theory int; colors 1; places p, q; trans t: p -> q : d1(y1) = d1(x1);", &m) != CML_STATUS_OK) return 1;
    if (cml_formula_parse("exists x in p . d1(x) = 3", m, &f) != CML_STATUS_OK) return 2;
    if (cml_post(m, f, NULL, &g) != CML_STATUS_OK) return 3;
    char *s = cml_formula_to_string(g);
    printf("%s\n", s);
    cml_string_free(s);
    if (cml_model_parse(NULL, &m) != CML_STATUS_NULL_ARGUMENT) return 4;
    cml_formula_free(g);
    cml_formula_free(f);
    cml_model_free(m);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("main");
    let out = Command::new(cc)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let text = String::from_utf8_lossy(&run.stdout);
    assert!(text.contains("exists y1 in q"), "{text}");
}
