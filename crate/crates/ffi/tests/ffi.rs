use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use ergm_exchange_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ergm_last_error()) }
        .to_str()
        .unwrap()
        .to_string()
}

fn preset(name: &str) -> *mut ErgmConfig {
    let name = CString::new(name).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { ergm_config_from_preset(name.as_ptr(), &mut cfg) },
        ErgmStatus::Ok
    );
    cfg
}

#[test]
fn fit_through_handles() {
    let cfg = preset("florentine");
    let alg = CString::new("AAEA-3+DR").unwrap();
    unsafe {
        assert_eq!(ergm_config_set_algorithm(cfg, alg.as_ptr()), ErgmStatus::Ok);
        assert_eq!(ergm_config_set_main_iters(cfg, 150), ErgmStatus::Ok);
        assert_eq!(ergm_config_set_seed(cfg, 9), ErgmStatus::Ok);
        let mut fit = ptr::null_mut();
        assert_eq!(ergm_fit(cfg, &mut fit), ErgmStatus::Ok);
        let (d, n) = (ergm_fit_dim(fit), ergm_fit_sample_count(fit));
        assert_eq!((d, n), (3, 6 * 150));
        let mut samples = vec![0.0; d * n];
        assert_eq!(
            ergm_fit_samples(fit, samples.as_mut_ptr(), samples.len()),
            ErgmStatus::Ok
        );
        let mut mean = [0.0; 3];
        assert_eq!(ergm_fit_mean(fit, mean.as_mut_ptr(), 3), ErgmStatus::Ok);
        let direct = (0..n).map(|k| samples[k * d]).sum::<f64>() / n as f64;
        assert!((direct - mean[0]).abs() < 1e-9);
        let mut sd = [0.0; 3];
        assert_eq!(ergm_fit_sd(fit, sd.as_mut_ptr(), 3), ErgmStatus::Ok);
        assert!(sd.iter().all(|s| *s > 0.0));
        let mut ess = [0.0; 3];
        assert_eq!(ergm_fit_ess(fit, ess.as_mut_ptr(), 3), ErgmStatus::Ok);
        let (mut a1, mut a2, mut all) = (0.0, 0.0, 0.0);
        assert_eq!(ergm_fit_acceptance(fit, &mut a1, &mut a2, &mut all), ErgmStatus::Ok);
        assert!(all >= a1 && all <= 1.0);
        assert!(ergm_fit_wall_time(fit) > 0.0);

        let mut json = ptr::null_mut();
        assert_eq!(ergm_fit_report_json(fit, &mut json), ErgmStatus::Ok);
        let report: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(report["parameters"].as_array().unwrap().len(), 3);
        ergm_string_free(json);

        let mut small = [0.0; 2];
        assert_eq!(ergm_fit_mean(fit, small.as_mut_ptr(), 2), ErgmStatus::BufferTooSmall);
        ergm_fit_free(fit);
        ergm_config_free(cfg);
    }
}

#[test]
fn same_seed_same_samples() {
    let run = || unsafe {
        let cfg = preset("florentine");
        ergm_config_set_main_iters(cfg, 100);
        let mut fit = ptr::null_mut();
        assert_eq!(ergm_fit(cfg, &mut fit), ErgmStatus::Ok);
        let mut out = vec![0.0; ergm_fit_sample_count(fit) * 3];
        ergm_fit_samples(fit, out.as_mut_ptr(), out.len());
        ergm_fit_free(fit);
        ergm_config_free(cfg);
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn config_json_round_trip() {
    unsafe {
        let cfg = preset("karate");
        let mut json = ptr::null_mut();
        assert_eq!(ergm_config_to_json(cfg, &mut json), ErgmStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(ergm_config_from_json(json, &mut back), ErgmStatus::Ok);
        let mut again = ptr::null_mut();
        ergm_config_to_json(back, &mut again);
        assert_eq!(CStr::from_ptr(json), CStr::from_ptr(again));
        ergm_string_free(json);
        ergm_string_free(again);
        ergm_config_free(cfg);
        ergm_config_free(back);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(ergm_config_from_json(ptr::null(), &mut cfg), ErgmStatus::NullPointer);
        let bad = CString::new(r#"{"dataset": "florentine", "model": ["wibble"]}"#).unwrap();
        assert_eq!(ergm_config_from_json(bad.as_ptr(), &mut cfg), ErgmStatus::Config);
        assert!(last_error().contains("wibble"), "{}", last_error());
        let name = CString::new("nope").unwrap();
        assert_eq!(ergm_config_from_preset(name.as_ptr(), &mut cfg), ErgmStatus::Config);
        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            ergm_config_from_json(invalid.as_ptr().cast(), &mut cfg),
            ErgmStatus::InvalidUtf8
        );

        let data = CString::new(
            r#"{"dataset": {"nodes": "/nonexistent/n.csv", "edges": "/nonexistent/e.tsv"}, "model": ["edges"]}"#,
        )
        .unwrap();
        assert_eq!(ergm_config_from_json(data.as_ptr(), &mut cfg), ErgmStatus::Ok);
        let mut fit = ptr::null_mut();
        assert_eq!(ergm_fit(cfg, &mut fit), ErgmStatus::Data);
        assert!(fit.is_null());
        ergm_config_free(cfg);

        let cfg = preset("florentine");
        let alg = CString::new("aaea-9").unwrap();
        assert_eq!(ergm_config_set_algorithm(cfg, alg.as_ptr()), ErgmStatus::Config);
        assert_eq!(ergm_fit(ptr::null(), &mut fit), ErgmStatus::NullPointer);
        assert_eq!(ergm_fit(cfg, ptr::null_mut()), ErgmStatus::NullPointer);
        assert_eq!(ergm_fit_dim(ptr::null()), 0);
        assert!(ergm_fit_wall_time(ptr::null()).is_nan());
        ergm_config_free(cfg);
        ergm_config_free(ptr::null_mut());
        ergm_fit_free(ptr::null_mut());
        ergm_string_free(ptr::null_mut());
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ergm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/ergm_exchange.h")).unwrap();
    let source = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 15);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

// Builds the C smoke program against the static library produced alongside
// this test binary.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|p| p.parent()).unwrap();
    let lib = profile_dir.join("libergm_exchange_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ergm_ffi_smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    assert!(
        run.status.success(),
        "exit {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stderr)
    );
    let line = String::from_utf8(run.stdout).unwrap();
    let fields: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(&fields[..2], &["3", "1200"]);
}
