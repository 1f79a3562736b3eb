use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lcesim_ffi::*;

const SMALL: &str = "[grid]\ndim = 2\nn = 16\n[init]\namplitude = 1e-3\n[run]\nt_end = 0.1\ntol_c = 1.0\ntol_d = 1.0\n";

fn last_error() -> String {
    let p = lcesim_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(text: &str) -> *mut LcesimConfig {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { lcesim_config_parse(text.as_ptr(), &mut cfg) },
        LcesimStatus::Ok
    );
    cfg
}

#[test]
fn bad_config_reports_code_and_message() {
    let text = CString::new("[run]\ncfl = -1\n").unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { lcesim_config_parse(text.as_ptr(), &mut cfg) };
    assert_eq!(status, LcesimStatus::Config);
    assert!(cfg.is_null());
    let msg = last_error();
    assert!(msg.contains("run.cfl") && msg.contains("line 2"), "{msg}");
}

#[test]
fn null_arguments_are_rejected() {
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { lcesim_config_parse(ptr::null(), &mut cfg) },
        LcesimStatus::NullPointer
    );
    assert_eq!(
        unsafe { lcesim_stepper_advance(ptr::null_mut(), 1) },
        LcesimStatus::NullPointer
    );
    unsafe {
        lcesim_config_free(ptr::null_mut());
        lcesim_stepper_free(ptr::null_mut());
        lcesim_string_free(ptr::null_mut());
    }
}

#[test]
fn unknown_preset_and_corrupt_checkpoint() {
    let name = CString::new("no-such-preset").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { lcesim_config_preset(name.as_ptr(), &mut cfg) },
        LcesimStatus::UnknownPreset
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ck");
    std::fs::write(&path, b"not a checkpoint").unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mut st = ptr::null_mut();
    assert_eq!(
        unsafe { lcesim_stepper_resume(p.as_ptr(), &mut st) },
        LcesimStatus::Checkpoint
    );
    assert!(last_error().contains("bad checkpoint header"));
}

#[test]
fn step_checkpoint_resume_round_trip() {
    let cfg = config(SMALL);
    let mut a = ptr::null_mut();
    unsafe {
        assert_eq!(lcesim_stepper_new(cfg, &mut a), LcesimStatus::Ok);
        lcesim_config_free(cfg);
        let (mut comps, mut points) = (0usize, 0usize);
        assert_eq!(lcesim_stepper_shape(a, &mut comps, &mut points), LcesimStatus::Ok);
        assert_eq!((comps, points), (16, 256));
        let mut e0 = 0.0;
        assert_eq!(lcesim_stepper_energy(a, &mut e0), LcesimStatus::Ok);
        assert!(e0 > 0.0);
        assert_eq!(lcesim_stepper_advance(a, 2), LcesimStatus::Ok);

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("mid.ck").to_str().unwrap()).unwrap();
        assert_eq!(lcesim_stepper_checkpoint(a, path.as_ptr()), LcesimStatus::Ok);
        let mut b = ptr::null_mut();
        assert_eq!(lcesim_stepper_resume(path.as_ptr(), &mut b), LcesimStatus::Ok);
        assert_eq!(lcesim_stepper_advance(a, 1000), LcesimStatus::Ok);
        assert_eq!(lcesim_stepper_advance(b, 1000), LcesimStatus::Ok);

        let (mut t, mut step, mut done) = (0.0, 0u64, false);
        assert_eq!(
            lcesim_stepper_progress(a, &mut t, &mut step, &mut done),
            LcesimStatus::Ok
        );
        assert!(done && (t - 0.1).abs() < 1e-12);
        let mut c = LcesimConstraints::default();
        assert_eq!(lcesim_stepper_constraints(a, &mut c), LcesimStatus::Ok);
        assert!(c.div_u < 1e-12);

        let mut x = vec![0.0; points];
        let mut y = vec![0.0; points];
        for i in 0..comps {
            assert_eq!(
                lcesim_stepper_copy_component(a, i, x.as_mut_ptr(), points),
                LcesimStatus::Ok
            );
            assert_eq!(
                lcesim_stepper_copy_component(b, i, y.as_mut_ptr(), points),
                LcesimStatus::Ok
            );
            assert_eq!(x, y);
        }
        assert_eq!(
            lcesim_stepper_copy_component(a, comps, x.as_mut_ptr(), points),
            LcesimStatus::OutOfRange
        );
        assert_eq!(
            lcesim_stepper_copy_component(a, 0, x.as_mut_ptr(), points - 1),
            LcesimStatus::OutOfRange
        );
        lcesim_stepper_free(a);
        lcesim_stepper_free(b);
    }
}

#[test]
fn verify_returns_json_report() {
    let name = CString::new("spectral-exactness").unwrap();
    let mut passed = false;
    let mut json = ptr::null_mut();
    unsafe {
        assert_eq!(lcesim_verify(name.as_ptr(), &mut passed, &mut json), LcesimStatus::Ok);
        let s = CStr::from_ptr(json).to_str().unwrap().to_owned();
        lcesim_string_free(json);
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["criterion"], 1);
        assert_eq!(v["passed"], passed);
    }
}

/// Compiles a C program against the generated header and the shared library.
#[test]
fn c_program_links_against_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let libdir = exe.parent().and_then(|p| p.parent()).unwrap().to_path_buf();
    let lib = libdir.join("liblcesim_ffi.so");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "lcesim.h"
int main(void) {
    LcesimConfig *cfg = NULL;
    if (lcesim_config_parse("[run]\ncfl = -1\n", &cfg) != LCESIM_STATUS_CONFIG) return 1;
    if (strstr(lcesim_last_error(), "run.cfl") == NULL) return 2;
    if (lcesim_config_parse("[grid]\ndim = 2\nn = 16\n[run]\nt_end = 0.05\ntol_c = 1.0\ntol_d = 1.0\n", &cfg) != LCESIM_STATUS_OK) return 3;
    LcesimStepper *st = NULL;
    if (lcesim_stepper_new(cfg, &st) != LCESIM_STATUS_OK) return 4;
    lcesim_config_free(cfg);
    if (lcesim_stepper_advance(st, 100) != LCESIM_STATUS_OK) { fprintf(stderr, "%s\n", lcesim_last_error()); return 5; }
    double t = 0; bool done = false;
    lcesim_stepper_progress(st, &t, NULL, &done);
    lcesim_stepper_free(st);
    printf("%s %.3f %d\n", lcesim_version(), t, done);
    return done ? 0 : 6;
}
"#,
    )
    .unwrap();
    let bin = dir.path().join("smoke");
    let cc = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg("-L")
        .arg(&libdir)
        .arg("-llcesim_ffi")
        .arg("-o")
        .arg(&bin)
        .status();
    let Ok(status) = cc else {
        eprintln!("skipping: no C compiler");
        return;
    };
    assert!(status.success());
    let out = Command::new(&bin).env("LD_LIBRARY_PATH", &libdir).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("0.050 1"), "{stdout}");
}
