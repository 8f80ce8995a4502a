use std::ffi::CStr;
use std::ptr;

use gibbsflow_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gf_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn ou_line_is_seeded_and_matches_the_library() {
    let n = 64;
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    let (mut re2, mut im2) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        assert_eq!(gf_sample_ou_line(-3.0, 3.0, n, 9, 1, re.as_mut_ptr(), im.as_mut_ptr()), GfStatus::Ok);
        assert_eq!(gf_sample_ou_line(-3.0, 3.0, n, 9, 1, re2.as_mut_ptr(), im2.as_mut_ptr()), GfStatus::Ok);
    }
    assert_eq!(re, re2);
    assert_eq!(im, im2);
    let grid = gibbsflow::Grid1D::line(-3.0, 3.0, n).unwrap();
    let u = gibbsflow::field_sampler::sample_ou_line(grid, gibbsflow::SeedStream::new(9, 1)).unwrap();
    assert!(u.values().iter().zip(&re).all(|(v, r)| v.re == *r));
}

#[test]
fn null_and_invalid_arguments_report_errors() {
    let mut out = 0.0;
    unsafe {
        assert_eq!(gf_mehler_kernel(0.5, 0.0, 0.0, ptr::null_mut()), GfStatus::NullPointer);
        assert!(last_error().contains("out"));
        assert_eq!(gf_mehler_kernel(-1.0, 0.0, 0.0, &mut out), GfStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert_eq!(gf_mehler_kernel(std::f64::consts::LN_2, 0.0, 0.0, &mut out), GfStatus::Ok);
    }
    assert!(last_error().is_empty());
    assert!((out - 0.651_470_015_870_559_9).abs() < 1e-15);
}

#[test]
fn operator_handle_round_trip() {
    let mut op: *mut GfOperator = ptr::null_mut();
    unsafe {
        assert_eq!(gf_operator_new(8.0, 199, 1, GfPotential::Harmonic, &mut op), GfStatus::Ok);
        assert!(!op.is_null());
        let (mut n, mut e) = (0usize, 0.0);
        assert_eq!(gf_operator_n_states(op, &mut n), GfStatus::Ok);
        assert_eq!(n, 199);
        assert_eq!(gf_operator_ground_energy(op, &mut e), GfStatus::Ok);
        assert!(e.abs() < 1e-3);
        let mut state = vec![0.0; n];
        assert_eq!(gf_operator_ground_state(op, state.as_mut_ptr(), n - 1), GfStatus::InvalidArgument);
        assert_eq!(gf_operator_ground_state(op, state.as_mut_ptr(), n), GfStatus::Ok);
        let h = 16.0 / 200.0;
        let norm: f64 = state.iter().map(|v| v * v * h).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(state.iter().all(|v| *v > 0.0));
        gf_operator_free(op);
        gf_operator_free(ptr::null_mut());
        assert_eq!(gf_operator_new(8.0, 3, 1, GfPotential::Harmonic, &mut op), GfStatus::InvalidArgument);
        assert!(op.is_null());
        assert_eq!(gf_operator_ground_energy(ptr::null(), &mut 0.0), GfStatus::NullPointer);
    }
}

#[test]
fn evolve_plane_wave_and_back() {
    let n = 32;
    let l = 2.0 * std::f64::consts::PI;
    let (a, k, g, t) = (0.7, 2.0, 2.0, 0.5);
    let x: Vec<f64> = (0..n).map(|j| -0.5 * l + l * j as f64 / n as f64).collect();
    let re: Vec<f64> = x.iter().map(|x| a * (k * x).cos()).collect();
    let im: Vec<f64> = x.iter().map(|x| a * (k * x).sin()).collect();
    let (mut re1, mut im1) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        assert_eq!(
            gf_evolve(re.as_ptr(), im.as_ptr(), n, l, g, 1e-3, t, re1.as_mut_ptr(), im1.as_mut_ptr()),
            GfStatus::Ok
        );
    }
    let w = k * k + g * a * a;
    for j in 0..n {
        let phase = k * x[j] - w * t;
        assert!((re1[j] - a * phase.cos()).abs() < 1e-9);
        assert!((im1[j] - a * phase.sin()).abs() < 1e-9);
    }
    let (mut re2, mut im2) = (vec![0.0; n], vec![0.0; n]);
    unsafe {
        assert_eq!(
            gf_evolve(re1.as_ptr(), im1.as_ptr(), n, l, g, 1e-3, -t, re2.as_mut_ptr(), im2.as_mut_ptr()),
            GfStatus::Ok
        );
    }
    assert!(re2.iter().zip(&re).chain(im2.iter().zip(&im)).all(|(a, b)| (a - b).abs() < 1e-10));
    unsafe {
        assert_eq!(
            gf_evolve(re.as_ptr(), im.as_ptr(), n, -1.0, g, 1e-3, t, re2.as_mut_ptr(), im2.as_mut_ptr()),
            GfStatus::InvalidArgument
        );
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gibbsflow.h")).unwrap();
    for f in [
        "gf_last_error",
        "gf_sample_ou_line",
        "gf_mehler_kernel",
        "gf_operator_new",
        "gf_operator_free",
        "gf_operator_n_states",
        "gf_operator_ground_energy",
        "gf_operator_ground_state",
        "gf_evolve",
        "typedef struct GfOperator GfOperator",
    ] {
        assert!(header.contains(f), "{f}");
    }
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/gibbsflow.h");
    match std::process::Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).status() {
        Ok(s) => assert!(s.success()),
        Err(_) => eprintln!("no C compiler; skipped"),
    }
}
