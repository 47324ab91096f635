use std::ffi::{CStr, CString};
use std::ptr;

use ctxrisk::choice::{prob_11_limited, Scenario};
use ctxrisk::preferences::PricePair;
use ctxrisk_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(ctxrisk_last_error_message()) }.to_string_lossy().into_owned()
}

fn default_model() -> *mut CtxModel {
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { ctxrisk_model_default(&mut m) }, CtxStatus::Ok);
    assert!(!m.is_null());
    m
}

#[test]
fn prob_matches_core_library() {
    let m = default_model();
    let mut p = f64::NAN;
    assert_eq!(unsafe { ctxrisk_prob_11(m, 0.7, 0.5, &mut p) }, CtxStatus::Ok);
    let expected = prob_11_limited(&Scenario::reference(), PricePair::new(0.7, 0.5)).unwrap();
    assert_eq!(p, expected);

    let mut dist = [0.0; 4];
    assert_eq!(unsafe { ctxrisk_bundle_distribution(m, 0.7, 0.5, dist.as_mut_ptr()) }, CtxStatus::Ok);
    assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert_eq!(dist[0], expected);
    unsafe { ctxrisk_model_free(m) };
}

#[test]
fn thresholds_and_gap() {
    let m = default_model();
    let mut t = [0.0; 4];
    assert_eq!(unsafe { ctxrisk_thresholds(m, 0.7, 0.5, t.as_mut_ptr()) }, CtxStatus::Ok);
    let sc = Scenario::reference();
    let expect = sc.ts.at(PricePair::new(0.7, 0.5)).unwrap();
    assert_eq!(t, [expect.v_i, expect.v_ii, expect.w_i, expect.w_ii]);

    let (mut gap, mut feasible) = (f64::NAN, -1);
    assert_eq!(unsafe { ctxrisk_derivative_gap(m, CTXRISK_AXIS_NU, 0.5, &mut gap, &mut feasible) }, CtxStatus::Ok);
    assert_eq!(feasible, 1);
    // 0.3 times the beta(2,2) density at 0.5
    assert!((gap - 0.45).abs() < 1e-3, "gap {gap}");

    assert_eq!(unsafe { ctxrisk_derivative_gap(m, 7, 0.5, &mut gap, &mut feasible) }, CtxStatus::InvalidArgument);
    assert!(last_error().contains("axis"));
    unsafe { ctxrisk_model_free(m) };
}

#[test]
fn identify_round_trip() {
    let m = default_model();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ctxrisk_identify(m, &mut r) }, CtxStatus::Ok);
    let mut s = std::mem::MaybeUninit::<CtxScalars>::uninit();
    assert_eq!(unsafe { ctxrisk_identification_scalars(r, s.as_mut_ptr()) }, CtxStatus::Ok);
    let s = unsafe { s.assume_init() };
    assert!((s.alpha_hat - 0.3).abs() < 1e-3);
    assert!((s.beta_hat - 0.5).abs() < 1e-3);

    let mut n = 0usize;
    assert_eq!(unsafe { ctxrisk_identification_grid_len(r, CTXRISK_AXIS_NU, &mut n) }, CtxStatus::Ok);
    let (mut lv, mut gp, mut cdf) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let st = unsafe { ctxrisk_identification_marginal(r, CTXRISK_AXIS_NU, lv.as_mut_ptr(), gp.as_mut_ptr(), cdf.as_mut_ptr(), n) };
    assert_eq!(st, CtxStatus::Ok);
    assert_eq!(lv[0], 0.0);
    assert!(gp[0].is_nan(), "level 0 is outside the feasible hull");
    assert!(cdf.iter().filter(|c| !c.is_nan()).all(|c| (0.0..=1.0).contains(c)));

    let st = unsafe { ctxrisk_identification_marginal(r, CTXRISK_AXIS_NU, lv.as_mut_ptr(), gp.as_mut_ptr(), cdf.as_mut_ptr(), n - 1) };
    assert_eq!(st, CtxStatus::InvalidArgument);

    let mut k = 0usize;
    assert_eq!(unsafe { ctxrisk_identification_copula_len(r, &mut k) }, CtxStatus::Ok);
    assert_eq!(k, 81);
    let mut bufs = [vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]];
    let [u, v, ch, ct] = &mut bufs;
    let st = unsafe { ctxrisk_identification_copula(r, u.as_mut_ptr(), v.as_mut_ptr(), ch.as_mut_ptr(), ct.as_mut_ptr(), k) };
    assert_eq!(st, CtxStatus::Ok);
    for i in 0..k {
        assert!((ch[i] - ct[i]).abs() < 1e-3);
    }
    unsafe {
        ctxrisk_identification_free(r);
        ctxrisk_model_free(m);
    }
}

#[test]
fn toml_errors_map_to_status_codes() {
    let mut m = ptr::null_mut();
    let bad = CString::new("[scenario.copulla]\nfamily = \"fgm\"\n").unwrap();
    assert_eq!(unsafe { ctxrisk_model_from_toml(bad.as_ptr(), &mut m) }, CtxStatus::Parse);
    assert!(last_error().contains("copulla"));
    assert!(m.is_null());

    let invalid = CString::new("[scenario.mixture]\nalpha = 0.7\nbeta = 0.5\nf = { family = \"uniform\" }\ng = { family = \"uniform\" }\n").unwrap();
    assert_eq!(unsafe { ctxrisk_model_from_toml(invalid.as_ptr(), &mut m) }, CtxStatus::Validation);

    let ok = CString::new("[scenario.copula]\nfamily = \"clayton\"\ntheta = 2.0\n").unwrap();
    assert_eq!(unsafe { ctxrisk_model_from_toml(ok.as_ptr(), &mut m) }, CtxStatus::Ok);
    assert_eq!(last_error(), "");
    unsafe { ctxrisk_model_free(m) };
}

#[test]
fn null_pointers_are_rejected() {
    let mut p = 0.0;
    assert_eq!(unsafe { ctxrisk_prob_11(ptr::null(), 0.5, 0.5, &mut p) }, CtxStatus::NullPointer);
    assert_eq!(unsafe { ctxrisk_model_default(ptr::null_mut()) }, CtxStatus::NullPointer);
    assert_eq!(unsafe { ctxrisk_model_from_toml(ptr::null(), &mut ptr::null_mut()) }, CtxStatus::NullPointer);
    unsafe {
        ctxrisk_model_free(ptr::null_mut());
        ctxrisk_identification_free(ptr::null_mut());
    }
}

#[test]
fn out_of_range_prices_are_invalid_arguments() {
    let m = default_model();
    let mut p = 0.0;
    assert_eq!(unsafe { ctxrisk_prob_11(m, f64::NAN, 0.5, &mut p) }, CtxStatus::InvalidArgument);
    assert_eq!(unsafe { ctxrisk_prob_11(m, 100.0, 0.5, &mut p) }, CtxStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    unsafe { ctxrisk_model_free(m) };
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(ctxrisk_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
