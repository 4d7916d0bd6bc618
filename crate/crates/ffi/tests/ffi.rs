use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use acforge_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    acf_string_free(p);
    s
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(acf_last_error()).to_str().unwrap().to_string() }
}

#[test]
fn timestamp_and_bad_offset() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(acf_format_timestamp(1690280832, 120, &mut out), AcfStatus::Ok);
        assert_eq!(take(out), "2023-07-25 12:27:12");
        assert_eq!(acf_format_timestamp(0, 10_000, &mut out), AcfStatus::InvalidData);
        assert!(!last_error().is_empty());
    }
}

#[test]
fn confident_joint_hand_fixture() {
    let labels = [0usize, 0, 1, 1];
    let probs = [0.9, 0.1, 0.6, 0.4, 0.2, 0.8, 0.8, 0.2];
    let mut counts = [0u64; 4];
    let mut uncounted = 0usize;
    unsafe {
        let s = acf_confident_joint(labels.as_ptr(), probs.as_ptr(), 4, 2, counts.as_mut_ptr(), &mut uncounted);
        assert_eq!(s, AcfStatus::Ok);
        assert_eq!(counts, [1, 0, 1, 1]);
        assert_eq!(uncounted, 1);

        let mut json = ptr::null_mut();
        assert_eq!(acf_label_issues(labels.as_ptr(), probs.as_ptr(), 4, 2, &mut json), AcfStatus::Ok);
        let issues: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(issues[0]["index"], 3);
        assert_eq!(issues[0]["suggested"], 0);
        assert_eq!(issues.as_array().unwrap().len(), 1);
    }
}

#[test]
fn null_and_invalid_inputs() {
    unsafe {
        let mut counts = [0u64; 4];
        let mut uncounted = 0usize;
        let s = acf_confident_joint(ptr::null(), ptr::null(), 4, 2, counts.as_mut_ptr(), &mut uncounted);
        assert_eq!(s, AcfStatus::NullArgument);
        let labels = [0usize, 1];
        let probs = [0.7, 0.7, 0.5, 0.5];
        let s = acf_confident_joint(labels.as_ptr(), probs.as_ptr(), 2, 2, counts.as_mut_ptr(), &mut uncounted);
        assert_eq!(s, AcfStatus::InvalidData);
        assert!(last_error().contains("sum"), "{}", last_error());
        assert_eq!(acf_case_open(ptr::null(), &mut ptr::null_mut()), AcfStatus::NullArgument);
    }
}

#[test]
fn forest_is_deterministic() {
    let mut data = Vec::new();
    for i in 0..200 {
        data.push((i as f64 * 0.37).sin());
        data.push((i as f64 * 0.11).cos());
    }
    data.extend([25.0, -25.0]);
    let n = data.len() / 2;
    unsafe {
        let mut scores = [vec![0.0; n], vec![0.0; n]];
        for out in scores.iter_mut() {
            let mut forest = ptr::null_mut();
            assert_eq!(acf_forest_fit(data.as_ptr(), n, 2, 50, 64, 7, &mut forest), AcfStatus::Ok);
            assert_eq!(acf_forest_score(forest, data.as_ptr(), n, 2, out.as_mut_ptr()), AcfStatus::Ok);
            acf_forest_free(forest);
        }
        assert_eq!(scores[0], scores[1]);
        let outlier = scores[0][n - 1];
        assert!(scores[0][..n - 1].iter().all(|s| *s < outlier));
        assert!(scores[0].iter().all(|s| *s > 0.0 && *s < 1.0));

        let mut forest = ptr::null_mut();
        assert_eq!(acf_forest_fit(data.as_ptr(), n, 0, 50, 64, 7, &mut forest), AcfStatus::InvalidArgument);
    }
}

#[test]
fn case_lifecycle() {
    let dir = tempfile::tempdir().unwrap();
    let path = c(dir.path().join("case").to_str().unwrap());
    unsafe {
        let mut case = ptr::null_mut();
        assert_eq!(acf_case_init(path.as_ptr(), &mut case), AcfStatus::Ok);
        assert_eq!(acf_case_set_clock(case, true, 1690280832), AcfStatus::Ok);
        let leaf = c(r#"{"id":"leaf","statement":"test data is correctly labeled"}"#);
        assert_eq!(acf_case_create(case, c("claim").as_ptr(), leaf.as_ptr()), AcfStatus::Ok);
        assert_eq!(acf_case_create(case, c("claim").as_ptr(), leaf.as_ptr()), AcfStatus::AlreadyExists);
        let root = c(r#"{"id":"root","statement":"s","strategy":"per characteristic","subclaim_ids":["leaf"]}"#);
        assert_eq!(acf_case_create(case, c("claim").as_ptr(), root.as_ptr()), AcfStatus::Ok);
        assert_eq!(acf_case_create(case, c("gadget").as_ptr(), root.as_ptr()), AcfStatus::InvalidArgument);

        let mut json = ptr::null_mut();
        assert_eq!(acf_case_load_json(case, c("root").as_ptr(), &mut json), AcfStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(v["element_version"], 1690280832);
        assert_eq!(acf_case_load_json(case, c("ghost").as_ptr(), &mut json), AcfStatus::NotFound);
        assert_eq!(acf_case_load_json(case, c("Bad Id").as_ptr(), &mut json), AcfStatus::InvalidArgument);

        let mut errors = 0usize;
        assert_eq!(acf_case_validate(case, c("root").as_ptr(), &mut json, &mut errors), AcfStatus::Ok);
        let findings: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(errors, 1);
        assert_eq!(findings[0]["rule"], "V2");
        assert_eq!(acf_case_export(case, c("root").as_ptr(), c("subtree").as_ptr(), &mut json), AcfStatus::ValidationFailed);

        assert_eq!(acf_case_delete(case, c("leaf").as_ptr()), AcfStatus::StillReferenced);
        assert_eq!(acf_case_delete(case, c("root").as_ptr()), AcfStatus::Ok);
        assert_eq!(acf_case_delete(case, c("leaf").as_ptr()), AcfStatus::Ok);
        acf_case_free(case);
    }
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("acforge.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "acf_last_error",
        "acf_string_free",
        "acf_case_init",
        "acf_case_open",
        "acf_case_free",
        "acf_case_set_clock",
        "acf_case_create",
        "acf_case_load_json",
        "acf_case_delete",
        "acf_case_validate",
        "acf_case_export",
        "acf_format_timestamp",
        "acf_confident_joint",
        "acf_label_issues",
        "acf_forest_fit",
        "acf_forest_score",
        "acf_forest_free",
    ] {
        assert!(text.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(text.contains("typedef struct AcfCase AcfCase;"));
}

/// Compiles and runs a C client against the header and static library when
/// a C compiler and the archive are available.
#[test]
fn c_client_links_and_runs() {
    let deps = std::env::current_exe().unwrap();
    let profile_dir = deps.parent().unwrap().parent().unwrap();
    let archive = profile_dir.join("libacforge_ffi.a");
    if !archive.is_file() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {} not built", archive.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let src = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("c").join("smoke.c");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C client failed to compile");
    let out = Command::new(&exe).arg(dir.path().join("case")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "2022-09-19 14:43:12\n1 0 1 1 1\n5\n");
}
