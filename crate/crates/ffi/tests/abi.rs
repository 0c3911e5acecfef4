use std::f64::consts::PI;
use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use overlap_lab_ffi::*;

fn model(family: u32, eps: f64, mu: f64) -> *mut OlModel {
    let mut m = ptr::null_mut();
    let st = unsafe { ol_model_new(family, eps, mu, OL_COUPLING_MU_ONLY, ptr::null(), &mut m) };
    assert_eq!(st, OlStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { ol_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn energy_and_field_match_the_library() {
    let m = model(OL_FAMILY_TORUS, 1.0, 0.0);
    let mut h = 0.0;
    assert_eq!(unsafe { ol_energy(m, 0.3, 0.2, 0.0, &mut h) }, OlStatus::Ok);
    assert!((h - (0.2f64.cos() - 0.3f64.cos())).abs() < 1e-15);
    let (mut dx, mut dy) = (0.0, 0.0);
    assert_eq!(
        unsafe { ol_vector_field(m, 0.3, 0.2, 0.0, &mut dx, &mut dy) },
        OlStatus::Ok
    );
    assert!((dx + 0.2f64.sin()).abs() < 1e-15 && (dy + 0.3f64.sin()).abs() < 1e-15);
    unsafe { ol_model_free(m) };
}

#[test]
fn strobe_map_is_area_preserving() {
    let m = model(OL_FAMILY_CUBIC, 1.0, 0.1);
    let mut j = [0.0; 4];
    assert_eq!(
        unsafe { ol_strobe_jacobian(m, 0.4, 0.3, 0.0, ptr::null(), j.as_mut_ptr()) },
        OlStatus::Ok
    );
    assert!((j[0] * j[3] - j[1] * j[2] - 1.0).abs() < 1e-8);
    let (mut xs, mut ys) = (vec![0.0; 5], vec![0.0; 5]);
    assert_eq!(
        unsafe {
            ol_strobe(
                m,
                0.4,
                0.3,
                0.0,
                5,
                ptr::null(),
                xs.as_mut_ptr(),
                ys.as_mut_ptr(),
            )
        },
        OlStatus::Ok
    );
    assert!(xs.iter().chain(&ys).all(|v| v.is_finite()));
    unsafe { ol_model_free(m) };
}

#[test]
fn saddle_refinement_at_the_unperturbed_saddle() {
    let m = model(OL_FAMILY_CUBIC, 1.0, 0.0);
    let mut o = OlHyperbolicOrbit::default();
    let cfg = ol_integrator_default();
    assert_eq!(
        unsafe { ol_refine_fixed_point(m, PI, 0.0, 0.0, &cfg, &mut o) },
        OlStatus::Ok
    );
    assert!((o.x - PI).abs() < 1e-12 && o.y.abs() < 1e-12);
    assert!(o.residual <= 1e-12);
    assert!((o.lambda_u * o.lambda_s - 1.0).abs() < 1e-8);
    unsafe { ol_model_free(m) };
}

#[test]
fn melnikov_profile_handle() {
    let m = model(OL_FAMILY_TORUS, 1.0, 0.01);
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { ol_melnikov_profile(m, 0.0, 0.0, PI, -PI, 128, &mut p) },
        OlStatus::Ok
    );
    let n = unsafe { ol_profile_len(p) };
    assert_eq!(n, 128);
    let (mut t0, mut v) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(
        unsafe { ol_profile_samples(p, t0.as_mut_ptr(), v.as_mut_ptr(), n) },
        n
    );
    assert!((unsafe { ol_profile_eval(p, t0[5]) } - v[5]).abs() < 1e-9);
    let mut zeros = [0.0; 8];
    let nz = unsafe { ol_profile_zeros(p, zeros.as_mut_ptr(), zeros.len()) };
    assert_eq!(nz, 2);
    unsafe { ol_profile_free(p) };
    unsafe { ol_model_free(m) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut m = ptr::null_mut();
    let st = unsafe {
        ol_model_new(
            OL_FAMILY_TORUS,
            3.0,
            0.0,
            OL_COUPLING_MU_ONLY,
            ptr::null(),
            &mut m,
        )
    };
    assert_eq!(st, OlStatus::InvalidArgument);
    assert!(last_error().contains("epsilon"));

    let bad = CString::new("cos(x+").unwrap();
    let st = unsafe {
        ol_model_new(
            OL_FAMILY_TORUS,
            1.0,
            0.0,
            OL_COUPLING_MU_ONLY,
            bad.as_ptr(),
            &mut m,
        )
    };
    assert_eq!(st, OlStatus::Parse);

    let t = model(OL_FAMILY_TORUS, 0.5, 0.0);
    let mut p = ptr::null_mut();
    let st = unsafe { ol_melnikov_profile(t, 0.0, 0.0, PI, PI, 128, &mut p) };
    assert_eq!(st, OlStatus::NoSuchConnection);
    assert!(last_error().contains("no such connection"));

    let mut h = 0.0;
    assert_eq!(
        unsafe { ol_energy(ptr::null(), 0.0, 0.0, 0.0, &mut h) },
        OlStatus::NullPointer
    );
    assert_eq!(unsafe { ol_energy(t, 0.0, 0.0, 0.0, &mut h) }, OlStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { ol_model_free(t) };
}

#[test]
fn confinement_verdict_codes() {
    let m = model(OL_FAMILY_TORUS, 1.0, 0.01);
    let mut v = u32::MAX;
    assert_eq!(
        unsafe { ol_confinement_test(m, 8, 500, &mut v) },
        OlStatus::Ok
    );
    assert_eq!(v, OL_VERDICT_OVERLAPPED);
    unsafe { ol_model_free(m) };
}

/// Compiles and runs a C program against the generated header and the static
/// library, when a C compiler and the archive are available.
#[test]
fn c_program_links_against_header() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = profile_dir.join("liboverlap_lab_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!(
            "skipping: no C compiler or static library at {}",
            lib.display()
        );
        return;
    }
    let out = std::env::temp_dir().join(format!("ol_smoke_{}", std::process::id()));
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
