use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sbar_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sbar_last_error_message()) }.to_str().unwrap().to_owned()
}

fn bessel(n: usize) -> *mut SbarKernel {
    let mut k = ptr::null_mut();
    let eta = (1.0 / (2.0 * std::f64::consts::PI)).sqrt();
    assert_eq!(unsafe { sbar_kernel_bessel(n, 4.0, 3.5e9, 1.0, eta, 0, &mut k) }, SbarStatus::Ok);
    k
}

fn design(k: *const SbarKernel, p: usize, m: usize, s2: f64) -> *mut SbarPlan {
    let mut plan = ptr::null_mut();
    assert_eq!(unsafe { sbar_plan_design(k, p, m, s2, &mut plan) }, SbarStatus::Ok, "{}", last_error());
    plan
}

#[test]
fn plan_matches_the_rust_api() {
    let k = bessel(24);
    let plan = design(k, 3, 2, 0.1);
    let g = sbar::build_port_geometry(24, 4.0, 3.5e9).unwrap();
    let eta = sbar::kernels::LengthUnit::Wavelength.default_eta(&g);
    let want = sbar::design_plan(&sbar::kernel_bessel(&g, 1.0, eta, 0).unwrap(), 3, 2, 0.1).unwrap();
    unsafe {
        assert_eq!(sbar_kernel_num_ports(k), 24);
        assert_eq!(sbar_plan_num_ports(plan), 24);
        assert_eq!(sbar_plan_num_timeslots(plan), 3);
        assert_eq!(sbar_plan_antennas_per_slot(plan), 2);
        assert_eq!(sbar_plan_num_measurements(plan), 6);
        assert_eq!(sbar_plan_noise_power(plan), 0.1);
        assert_eq!(CStr::from_ptr(sbar_plan_id(plan)).to_str().unwrap(), want.id());
        let mut order = [0usize; 6];
        assert_eq!(sbar_plan_order(plan, order.as_mut_ptr(), 6), SbarStatus::Ok);
        let one_based: Vec<usize> = want.order().iter().map(|p| p + 1).collect();
        assert_eq!(order.to_vec(), one_based);
        assert_eq!(sbar_plan_order(plan, order.as_mut_ptr(), 5), SbarStatus::DimensionMismatch);
        sbar_plan_free(plan);
        sbar_kernel_free(k);
    }
}

#[test]
fn reconstruct_round_trip() {
    let k = bessel(16);
    let plan = design(k, 4, 4, 0.0);
    let h: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut y = vec![0.0; 32];
    let mut est = vec![0.0; 32];
    let mut var = vec![-1.0; 16];
    unsafe {
        assert_eq!(sbar_plan_observe(plan, h.as_ptr(), 16, 0.0, 3, y.as_mut_ptr()), SbarStatus::Ok);
        assert_eq!(
            sbar_reconstruct(plan, y.as_ptr(), 16, 0.0, est.as_mut_ptr(), var.as_mut_ptr()),
            SbarStatus::Ok
        );
    }
    let err: f64 = h.iter().zip(&est).map(|(a, b)| (a - b).powi(2)).sum();
    let norm: f64 = h.iter().map(|a| a * a).sum();
    assert!(err / norm < 1e-8);
    assert!(var.iter().all(|v| v.abs() < 1e-6), "{var:?}");
    unsafe {
        sbar_plan_free(plan);
        sbar_kernel_free(k);
    }
}

#[test]
fn errors_set_status_and_message() {
    let k = bessel(8);
    let mut plan = ptr::null_mut();
    unsafe {
        assert_eq!(sbar_plan_design(k, 3, 3, 0.1, &mut plan), SbarStatus::PlanTooLarge);
        assert!(plan.is_null());
        assert!(last_error().contains("does not fit"));
        assert_eq!(sbar_plan_design(ptr::null(), 1, 1, 0.1, &mut plan), SbarStatus::NullPointer);
        let mut k2 = ptr::null_mut();
        assert_eq!(sbar_kernel_exponential(8, 4.0, 3.5e9, 1.0, -1.0, &mut k2), SbarStatus::InvalidArgument);
        let plan = design(k, 1, 2, 0.1);
        let y = [0.0; 4];
        let mut est = [0.0; 16];
        assert_eq!(
            sbar_reconstruct(plan, y.as_ptr(), 2, 0.5, est.as_mut_ptr(), ptr::null_mut()),
            SbarStatus::NoisePowerMismatch
        );
        assert_eq!(
            sbar_reconstruct(plan, y.as_ptr(), 1, 0.1, est.as_mut_ptr(), ptr::null_mut()),
            SbarStatus::DimensionMismatch
        );
        let missing = CString::new("/nonexistent/plan.bin").unwrap();
        let mut loaded = ptr::null_mut();
        assert_eq!(sbar_plan_load(missing.as_ptr(), &mut loaded), SbarStatus::Io);
        sbar_plan_free(plan);
        sbar_kernel_free(k);
        sbar_kernel_free(ptr::null_mut());
        sbar_plan_free(ptr::null_mut());
        assert_eq!(sbar_plan_num_ports(ptr::null()), 0);
        assert!(sbar_plan_id(ptr::null()).is_null());
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let k = bessel(12);
    let plan = design(k, 2, 3, 0.2);
    for name in ["p.bin", "p.json"] {
        let path = CString::new(dir.path().join(name).to_str().unwrap()).unwrap();
        let mut back = ptr::null_mut();
        unsafe {
            assert_eq!(sbar_plan_save(plan, path.as_ptr()), SbarStatus::Ok);
            assert_eq!(sbar_plan_load(path.as_ptr(), &mut back), SbarStatus::Ok);
            assert_eq!(CStr::from_ptr(sbar_plan_id(back)), CStr::from_ptr(sbar_plan_id(plan)));
            sbar_plan_free(back);
        }
    }
    let kpath = CString::new(dir.path().join("k.bin").to_str().unwrap()).unwrap();
    let mut k2 = ptr::null_mut();
    unsafe {
        assert_eq!(sbar_kernel_save(k, kpath.as_ptr()), SbarStatus::Ok);
        assert_eq!(sbar_kernel_load(kpath.as_ptr(), &mut k2), SbarStatus::Ok);
        let p2 = design(k2, 2, 3, 0.2);
        assert_eq!(CStr::from_ptr(sbar_plan_id(p2)), CStr::from_ptr(sbar_plan_id(plan)));
        sbar_plan_free(p2);
        sbar_kernel_free(k2);
        sbar_plan_free(plan);
        sbar_kernel_free(k);
    }
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(sbar_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Builds and runs the C program in `tests/c` against the static library.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libsbar_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("sbar_smoke");
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-D_DEFAULT_SOURCE")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
