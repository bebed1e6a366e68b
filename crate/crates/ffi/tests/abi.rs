use std::ffi::{CStr, CString};
use std::ptr;

use ndae_ident::nn::{Checkpoint, Mlp};
use ndae_ident::numerics::Matrix;
use ndae_ident_ffi::*;

fn last_error() -> String {
    let p = ndae_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn synthetic() -> *mut NdaeModelHandle {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { ndae_model_synthetic(1, 3, &mut h) }, NdaeStatus::Ok);
    h
}

#[test]
fn model_round_trip_and_dims() {
    let h = synthetic();
    let (mut n_d, mut n_a, mut m) = (0, 0, 0);
    unsafe {
        assert_eq!(ndae_model_dims(h, &mut n_d, &mut n_a, &mut m), NdaeStatus::Ok);
        assert_eq!((n_d, n_a, m), (4, 8, 2));

        let mut json = ptr::null_mut();
        assert_eq!(ndae_model_to_json(h, &mut json), NdaeStatus::Ok);
        let mut h2 = ptr::null_mut();
        assert_eq!(ndae_model_from_json(json, &mut h2), NdaeStatus::Ok);
        ndae_string_free(json);

        let xd = [0.1, -0.2, 0.05, 0.0];
        let mut xa = [0.0; 8];
        assert_eq!(ndae_model_consistent_init(h, xd.as_ptr(), ptr::null(), xa.as_mut_ptr()), NdaeStatus::Ok);
        let mut g = [1.0; 8];
        assert_eq!(ndae_model_residual(h2, xd.as_ptr(), xa.as_ptr(), g.as_mut_ptr()), NdaeStatus::Ok);
        assert!(g.iter().all(|v| v.abs() < 1e-9));

        let u = [0.2, -0.1];
        let (mut f1, mut f2) = ([0.0; 4], [0.0; 4]);
        ndae_model_rhs(h, xd.as_ptr(), xa.as_ptr(), u.as_ptr(), f1.as_mut_ptr());
        ndae_model_rhs(h2, xd.as_ptr(), xa.as_ptr(), u.as_ptr(), f2.as_mut_ptr());
        assert_eq!(f1, f2);

        ndae_model_free(h);
        ndae_model_free(h2);
    }
}

#[test]
fn simulate_and_copy_out() {
    let h = synthetic();
    let tab = CString::new("radau2").unwrap();
    let xd0 = [0.1, 0.0, 0.0, 0.0];
    let offset = [0.0, 0.0];
    let amp = [0.5, 0.5];
    let mut traj = ptr::null_mut();
    unsafe {
        let s = ndae_simulate(h, tab.as_ptr(), 0.01, 0.1, xd0.as_ptr(), offset.as_ptr(), amp.as_ptr(), ptr::null(), 1.0, &mut traj);
        assert_eq!(s, NdaeStatus::Ok);
        let mut len = 0;
        ndae_trajectory_len(traj, &mut len);
        assert_eq!(len, 11);
        let mut times = vec![0.0; len];
        assert_eq!(ndae_trajectory_times(traj, times.as_mut_ptr(), len), NdaeStatus::Ok);
        assert!((times[10] - 0.1).abs() < 1e-15);
        let mut xd = vec![0.0; len * 4];
        assert_eq!(ndae_trajectory_states_d(traj, xd.as_mut_ptr(), xd.len()), NdaeStatus::Ok);
        assert_eq!(&xd[..4], &xd0);
        let mut xa = vec![0.0; len * 8];
        assert_eq!(ndae_trajectory_states_a(traj, xa.as_mut_ptr(), xa.len()), NdaeStatus::Ok);
        // Wrong buffer size is reported, not overrun.
        assert_eq!(ndae_trajectory_times(traj, times.as_mut_ptr(), len - 1), NdaeStatus::DimensionMismatch);
        ndae_trajectory_free(traj);
        ndae_model_free(h);
    }
}

#[test]
fn errors_set_status_and_message() {
    let h = synthetic();
    let bad = CString::new("rk4").unwrap();
    let xd0 = [0.0; 4];
    let offset = [0.0; 2];
    let mut traj = ptr::null_mut();
    unsafe {
        let s = ndae_simulate(h, bad.as_ptr(), 0.01, 0.1, xd0.as_ptr(), offset.as_ptr(), ptr::null(), ptr::null(), 0.0, &mut traj);
        assert_eq!(s, NdaeStatus::InvalidArgument);
        assert!(last_error().contains("rk4"));
        assert!(traj.is_null());

        let mut n = 0;
        assert_eq!(ndae_model_dims(ptr::null(), &mut n, ptr::null_mut(), ptr::null_mut()), NdaeStatus::NullPointer);
        assert!(last_error().contains("model"));

        let json = CString::new("{not json").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(ndae_model_from_json(json.as_ptr(), &mut out), NdaeStatus::Json);

        let mut m = ptr::null_mut();
        assert_eq!(ndae_model_synthetic(0, 0, &mut m), NdaeStatus::InvalidArgument);
        ndae_model_free(h);
        ndae_model_free(ptr::null_mut());
        ndae_string_free(ptr::null_mut());
    }
}

#[test]
fn certificate_arithmetic() {
    let p = [4.0, 0.0, 0.0, 4.0];
    let w = [1.0, 0.0, 0.0, 1.0];
    let mut b = 0.0;
    unsafe {
        assert_eq!(ndae_prop1_bound(p.as_ptr(), w.as_ptr(), 2, 2.0, &mut b), NdaeStatus::Ok);
        assert!((b - 2f64.sqrt()).abs() < 1e-15);

        let a = [-1.0, 0.0, 0.0, -1.0];
        let i = [1.0, 0.0, 0.0, 1.0];
        let wq = [0.25, 0.0, 0.0, 0.25];
        let (mut feasible, mut margin) = (false, 0.0);
        let s = ndae_check_assumption3(a.as_ptr(), i.as_ptr(), wq.as_ptr(), i.as_ptr(), i.as_ptr(), 2, 0.5, &mut feasible, &mut margin);
        assert_eq!(s, NdaeStatus::Ok);
        assert!(feasible);
        assert!((margin - 0.25).abs() < 1e-14);

        let neg = [1.0, 0.0, 0.0, -1.0];
        assert_eq!(ndae_prop1_bound(neg.as_ptr(), w.as_ptr(), 2, 1.0, &mut b), NdaeStatus::NotPositiveDefinite);
    }
}

#[test]
fn checkpoint_eval() {
    let net = Mlp::from_layers(vec![(Matrix::from_rows(&[&[2.0, -1.0]]), vec![0.5])]).unwrap();
    let json = CString::new(Checkpoint::Mlp(net).to_json().unwrap()).unwrap();
    let mut ck = ptr::null_mut();
    unsafe {
        let s = ndae_checkpoint_from_json(json.as_ptr(), &mut ck);
        assert_eq!(s, NdaeStatus::Ok, "{}", last_error());
        let (mut i, mut o) = (0, 0);
        ndae_checkpoint_dims(ck, &mut i, &mut o, ptr::null_mut());
        assert_eq!((i, o), (2, 1));
        let x = [1.0, 3.0];
        let mut y = [0.0];
        assert_eq!(ndae_checkpoint_eval(ck, x.as_ptr(), ptr::null(), y.as_mut_ptr()), NdaeStatus::Ok);
        assert_eq!(y[0], 2.0 - 3.0 + 0.5);
        ndae_checkpoint_free(ck);

        let missing = CString::new("/nonexistent/ckpt.json").unwrap();
        assert_eq!(ndae_checkpoint_load(missing.as_ptr(), &mut ck), NdaeStatus::Io);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/ndae_ident.h");
    for f in [
        "ndae_last_error",
        "ndae_version",
        "ndae_string_free",
        "ndae_model_synthetic",
        "ndae_model_from_json",
        "ndae_model_to_json",
        "ndae_model_free",
        "ndae_model_dims",
        "ndae_model_rhs",
        "ndae_model_residual",
        "ndae_model_consistent_init",
        "ndae_simulate",
        "ndae_trajectory_len",
        "ndae_trajectory_times",
        "ndae_trajectory_states_d",
        "ndae_trajectory_states_a",
        "ndae_trajectory_free",
        "ndae_prop1_bound",
        "ndae_check_assumption3",
        "ndae_checkpoint_load",
        "ndae_checkpoint_from_json",
        "ndae_checkpoint_dims",
        "ndae_checkpoint_eval",
        "ndae_checkpoint_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f}");
    }
    assert!(header.contains("NDAE_STATUS_OK = 0"));
}

/// Compiles and runs a C program against the generated header and the
/// static library built alongside this test.
#[test]
fn c_program_links_against_header() {
    use std::path::PathBuf;
    use std::process::Command;

    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libndae_ident_ffi.a");
    assert!(lib.is_file(), "static library not found at {}", lib.display());
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler");
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let text = String::from_utf8(run.stdout).unwrap();
    assert!(text.starts_with("4 8 2 6 1.414213562373095"), "{text}");
}
