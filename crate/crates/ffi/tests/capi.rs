use std::ffi::{CStr, CString};
use std::ptr;

use pkgsv_ffi::*;

const SCALAR: &str = r#"{
  "seed": 7,
  "model": {
    "kind": "linear_gaussian", "n": 1, "m": 1, "horizon": 2,
    "s0": [0.0], "mu_s": [[0.0], [0.0]], "mu_a": [[0.0], [0.0]],
    "beta_s": [[[0.5]]], "beta_a": [[[0.2]]],
    "residual": { "kind": "diagonal", "sd": [[1.0], [1.0]] }
  },
  "policy": { "kind": "nominal", "gains": [[1.0]] },
  "reward": { "kind": "linear", "m": [0.0, 0.0], "b": [[0.0], [0.0]], "c": [[1.0], [1.0]] },
  "analysis": { "inputs": "random-factors", "mode": "expectation", "engine": "analytic" }
}"#;

fn config(json: &str) -> *mut PkgsvConfig {
    let json = CString::new(json).unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { pkgsv_config_from_json(json.as_ptr(), ptr::null(), &mut cfg) };
    assert_eq!(status, PkgsvStatus::Ok);
    cfg
}

fn last_error() -> String {
    let p = pkgsv_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn label(p: *const std::ffi::c_char) -> String {
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn scalar_analytic_report_through_handles() {
    let cfg = config(SCALAR);
    let mut seed = 0;
    assert_eq!(unsafe { pkgsv_config_seed(cfg, &mut seed) }, PkgsvStatus::Ok);
    assert_eq!(seed, 7);
    let mut report = ptr::null_mut();
    let status = unsafe { pkgsv_sv_run(cfg, PkgsvEngine::Configured, true, ptr::null(), 2, &mut report) };
    assert_eq!(status, PkgsvStatus::Ok);
    unsafe {
        assert_eq!(pkgsv_report_num_inputs(report), 2);
        assert_eq!(pkgsv_report_num_outputs(report), 3);
        assert_eq!(label(pkgsv_report_input_label(report, 0)), "e[t=1,k=s1]");
        assert_eq!(label(pkgsv_report_output_label(report, 1)), "s[t=2,k=s1]");
        assert!(pkgsv_report_input_label(report, 2).is_null());
        let (mut v, mut var) = (f64::NAN, f64::NAN);
        assert_eq!(pkgsv_report_value(report, 0, 1, &mut v, &mut var), PkgsvStatus::Ok);
        assert!((v - 0.7).abs() < 1e-12);
        assert_eq!(var, 0.0);
        assert_eq!(pkgsv_report_value(report, 5, 0, &mut v, ptr::null_mut()), PkgsvStatus::OutOfRange);
        assert!(last_error().contains("outside"));
        pkgsv_report_free(report);
        pkgsv_config_free(cfg);
    }
}

#[test]
fn reports_are_written_to_disk() {
    let cfg = config(SCALAR);
    let dir = tempfile::tempdir().unwrap();
    let mut report = ptr::null_mut();
    unsafe {
        assert_eq!(pkgsv_sv_run(cfg, PkgsvEngine::Analytic, false, ptr::null(), 0, &mut report), PkgsvStatus::Ok);
        let csv = CString::new(dir.path().join("sv.csv").to_str().unwrap()).unwrap();
        let json = CString::new(dir.path().join("sv.json").to_str().unwrap()).unwrap();
        assert_eq!(pkgsv_report_write_csv(report, csv.as_ptr(), false), PkgsvStatus::Ok);
        assert_eq!(pkgsv_report_write_json(report, json.as_ptr()), PkgsvStatus::Ok);
        pkgsv_report_free(report);
        pkgsv_config_free(cfg);
    }
    let text = std::fs::read_to_string(dir.path().join("sv.csv")).unwrap();
    assert!(text.starts_with("input_label,output_label,sv,mc_variance"));
    assert!(text.contains("6.9999999999999996e-1"));
    assert!(std::fs::metadata(dir.path().join("sv.json")).unwrap().len() > 0);
}

#[test]
fn errors_map_to_status_codes() {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(pkgsv_config_from_json(ptr::null(), ptr::null(), &mut cfg), PkgsvStatus::NullPointer);
        let bad = CString::new("{\"seed\": 1").unwrap();
        assert_eq!(pkgsv_config_from_json(bad.as_ptr(), ptr::null(), &mut cfg), PkgsvStatus::Parse);
        assert!(cfg.is_null());
        assert!(!last_error().is_empty());
        let wrong = CString::new(SCALAR.replace("\"gains\": [[1.0]]", "\"gains\": [[1.0, 2.0]]")).unwrap();
        assert_eq!(pkgsv_config_from_json(wrong.as_ptr(), ptr::null(), &mut cfg), PkgsvStatus::DimensionMismatch);
        let missing = CString::new("/nonexistent/pkgsv.json").unwrap();
        assert_ne!(pkgsv_config_load(missing.as_ptr(), &mut cfg), PkgsvStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(pkgsv_sv_run(ptr::null(), PkgsvEngine::Analytic, false, ptr::null(), 0, &mut report), PkgsvStatus::NullPointer);
        pkgsv_config_free(ptr::null_mut());
        pkgsv_report_free(ptr::null_mut());
        assert_eq!(pkgsv_report_num_inputs(ptr::null()), 0);
    }
}

#[test]
fn success_clears_the_last_error() {
    let mut n = 0;
    unsafe {
        assert_eq!(pkgsv_sample_size_variance(1.0, 0.05, -1.0, &mut n), PkgsvStatus::InvalidArgument);
        assert!(!pkgsv_last_error_message().is_null());
        assert_eq!(pkgsv_sample_size_variance(1.0, 0.05, 0.1, &mut n), PkgsvStatus::Ok);
    }
    assert!(pkgsv_last_error_message().is_null());
    assert_eq!(n, 2000);
}

#[test]
fn sample_size_planning() {
    let mut n = 0;
    unsafe {
        assert_eq!(pkgsv_sample_size_range(1.0, 0.05, 0.1, &mut n), PkgsvStatus::Ok);
        assert_eq!(n, 185);
        assert_eq!(pkgsv_sample_size_range(1.0, 0.05, 0.1, ptr::null_mut()), PkgsvStatus::NullPointer);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(pkgsv_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_api() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pkgsv.h");
    let header = std::fs::read_to_string(&path).unwrap();
    for name in [
        "pkgsv_config_load",
        "pkgsv_config_from_json",
        "pkgsv_sv_run",
        "pkgsv_report_value",
        "pkgsv_report_free",
        "pkgsv_last_error_message",
        "PKGSV_STATUS_OUT_OF_RANGE",
        "typedef struct PkgsvReport PkgsvReport",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    if let Ok(status) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&path).status() {
        assert!(status.success(), "header does not compile as C");
    }
}
