use std::ffi::{c_char, c_int, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ringmod_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ringmod_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

fn take_string(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { ringmod_string_free(p) };
    s
}

#[test]
fn closed_forms() {
    let mut v = 0.0;
    let e = std::f64::consts::E;
    let pi = std::f64::consts::PI;
    unsafe {
        assert_eq!(ringmod_closed_form(RingmodQuantity::RingCapacity, 3, 1.0, e, &mut v), RingmodStatus::Ok);
        assert!((v - 4.0 * pi).abs() < 1e-12);
        assert_eq!(ringmod_closed_form(RingmodQuantity::SphereFamilyModulus, 2, 1.0, e, &mut v), RingmodStatus::Ok);
        assert!((v - 1.0 / (2.0 * pi)).abs() < 1e-15);
        assert_eq!(ringmod_closed_form(RingmodQuantity::SeparatingModulus, 4, 1.0, e, &mut v), RingmodStatus::InvalidArgument);
        assert!(last_error().contains("dimension"));
        assert_eq!(ringmod_closed_form(RingmodQuantity::RingCapacity, 3, 1.0, e, ptr::null_mut()), RingmodStatus::NullPointer);
    }
}

#[test]
fn mapping_handle_lifecycle() {
    let origin = [0.0f64; 2];
    let mut h = ptr::null_mut();
    unsafe {
        let kind = cstr(r#"{"kind":"beltrami_const_2d","mu":[0.5,0.0]}"#);
        assert_eq!(ringmod_mapping_new(kind.as_ptr(), origin.as_ptr(), 2, &mut h), RingmodStatus::Ok);
        let x = [0.2, -0.7];
        let (mut op, mut j, mut k) = (0.0, 0.0, 0.0);
        assert_eq!(ringmod_mapping_distortion(h, x.as_ptr(), &mut op, &mut j, &mut k), RingmodStatus::Ok);
        assert!((k - 3.0).abs() < 1e-12);
        assert!((op - 1.5).abs() < 1e-12 && (j - 0.75).abs() < 1e-12);
        let mut y = [0.0; 2];
        assert_eq!(ringmod_mapping_apply(h, x.as_ptr(), y.as_mut_ptr()), RingmodStatus::Ok);
        assert!((y[0] - 0.3).abs() < 1e-15 && (y[1] + 0.35).abs() < 1e-15);
        ringmod_mapping_free(h);
        ringmod_mapping_free(ptr::null_mut());

        let bad = cstr(r#"{"kind":"radial_stretch"}"#);
        assert_eq!(ringmod_mapping_new(bad.as_ptr(), origin.as_ptr(), 2, &mut h), RingmodStatus::InvalidJson);
        let neg = cstr(r#"{"kind":"radial_stretch","alpha":-1}"#);
        assert_eq!(ringmod_mapping_new(neg.as_ptr(), origin.as_ptr(), 2, &mut h), RingmodStatus::InvalidArgument);
        let inv = cstr(r#"{"kind":"inversion"}"#);
        assert_eq!(ringmod_mapping_new(inv.as_ptr(), origin.as_ptr(), 2, &mut h), RingmodStatus::Ok);
        assert_eq!(ringmod_mapping_distortion(h, origin.as_ptr(), ptr::null_mut(), ptr::null_mut(), &mut k), RingmodStatus::Domain);
        ringmod_mapping_free(h);
        assert_eq!(ringmod_mapping_new(ptr::null(), origin.as_ptr(), 2, &mut h), RingmodStatus::NullPointer);
    }
}

#[test]
fn weight_functionals() {
    let origin = [0.0f64; 3];
    let mut w = ptr::null_mut();
    unsafe {
        let kind = cstr(r#"{"kind":"radial_log_power","beta":2.0}"#);
        assert_eq!(ringmod_weight_new(kind.as_ptr(), origin.as_ptr(), 3, &mut w), RingmodStatus::Ok);
        let mut v = 0.0;
        let (a, b) = ((-8f64).exp(), (-1f64).exp());
        assert_eq!(ringmod_weight_functional(w, RingmodWeightFunctional::RingCriterion, a, b, &mut v), RingmodStatus::Ok);
        assert!((v - 8f64.ln()).abs() < 1e-9);
        assert_eq!(ringmod_weight_functional(w, RingmodWeightFunctional::SphericalAverage, 0.1, 0.0, &mut v), RingmodStatus::Ok);
        assert!((v - 10f64.ln().powi(2)).abs() < 1e-12);
        assert_eq!(ringmod_weight_functional(w, RingmodWeightFunctional::LowerCriterion, 0.5, 0.1, &mut v), RingmodStatus::InvalidArgument);
        ringmod_weight_free(w);

        let one = cstr(r#"{"kind":"constant","c":1.0}"#);
        assert_eq!(ringmod_weight_new(one.as_ptr(), origin.as_ptr(), 3, &mut w), RingmodStatus::Ok);
        assert_eq!(ringmod_weight_functional(w, RingmodWeightFunctional::LqNorm, 1.0, 0.0, &mut v), RingmodStatus::Ok);
        assert!((v - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        ringmod_weight_free(w);
    }
}

#[test]
fn checks_and_reports() {
    let origin = [0.0f64; 3];
    let mut f = ptr::null_mut();
    let mut w = ptr::null_mut();
    let mut holds: c_int = -1;
    let mut json = ptr::null_mut();
    unsafe {
        let kind = cstr(r#"{"kind":"radial_stretch","alpha":2.0}"#);
        assert_eq!(ringmod_mapping_new(kind.as_ptr(), origin.as_ptr(), 3, &mut f), RingmodStatus::Ok);
        assert_eq!(ringmod_check(RingmodCheck::LowerQ, f, ptr::null(), 0.2, 0.8, &mut holds, &mut json), RingmodStatus::Ok);
        assert_eq!(holds, 1);
        let report: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(report["check"], "lower_q");
        assert!((report["slack_ratio"].as_f64().unwrap() - 8.0).abs() < 1e-6);

        let low = cstr(r#"{"kind":"constant","c":0.1}"#);
        assert_eq!(ringmod_weight_new(low.as_ptr(), origin.as_ptr(), 3, &mut w), RingmodStatus::Ok);
        assert_eq!(ringmod_check(RingmodCheck::RingQ, f, w, 0.2, 0.8, &mut holds, ptr::null_mut()), RingmodStatus::Ok);
        assert_eq!(holds, 0);
        ringmod_weight_free(w);

        assert_eq!(ringmod_weight_from_mapping(f, 0.2, 0.8, &mut w), RingmodStatus::Ok);
        assert_eq!(ringmod_check(RingmodCheck::MainLemmaChain, f, w, 0.2, 0.8, &mut holds, ptr::null_mut()), RingmodStatus::Ok);
        assert_eq!(holds, 1);
        ringmod_weight_free(w);
        ringmod_mapping_free(f);
    }
}

#[test]
fn run_config_in_memory() {
    let cfg = cstr(r#"{"schema_version":1,"dimension":3,"blocks":[{"op":"compute-capacity","ring":[1,2.718281828459045]}]}"#);
    let mut code: c_int = -1;
    let mut json = ptr::null_mut();
    unsafe {
        assert_eq!(ringmod_run_config(cfg.as_ptr(), &mut code, &mut json), RingmodStatus::Ok);
    }
    assert_eq!(code, 0);
    let report: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
    assert_eq!(report["records"][0]["status"], "holds");
    let bad = cstr(r#"{"schema_version":1,"dimension":3,"blocks":[{"op":"compute-capacity"}]}"#);
    unsafe {
        assert_eq!(ringmod_run_config(bad.as_ptr(), &mut code, &mut json), RingmodStatus::InvalidJson);
    }
    assert!(last_error().contains("ring"));
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ringmod_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libringmod_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = std::env::temp_dir().join(format!("ringmod_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler available");
    assert!(status.success(), "C smoke program failed to build");
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "C smoke program exited with {:?}", run.status);
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
