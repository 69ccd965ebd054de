use std::ffi::CStr;
use std::ptr;

use sparse_ar::{fit_mle, FitOptions, InnovationFamily};
use sparse_ar_ffi::*;

const GAUSS: SarInnovation = SarInnovation { family: SarFamily::Gaussian, parameter: 1.0 };

fn last_error() -> String {
    unsafe { CStr::from_ptr(sar_last_error_message()) }.to_string_lossy().into_owned()
}

fn simulated(n: usize, seed: u64) -> *mut SarSeries {
    let coeffs = [0.2, 0.0, 0.2, 0.0, 0.2];
    let mut s = ptr::null_mut();
    let st = unsafe { sar_simulate(coeffs.as_ptr(), 5, GAUSS, n, 500, seed, &mut s) };
    assert_eq!(st, SarStatus::Ok);
    s
}

#[test]
fn series_round_trip() {
    let v = [1.0, -2.0, 3.5];
    let mut s = ptr::null_mut();
    unsafe {
        assert_eq!(sar_series_new(v.as_ptr(), v.len(), &mut s), SarStatus::Ok);
        assert_eq!(sar_series_len(s), 3);
        assert_eq!(std::slice::from_raw_parts(sar_series_values(s), 3), &v);
        sar_series_free(s);
    }
}

#[test]
fn mle_matches_library() {
    let s = simulated(600, 3);
    let mut fit = ptr::null_mut();
    let mut est = [0.0; 5];
    let mut se = [0.0; 5];
    unsafe {
        assert_eq!(sar_fit_mle(s, 5, GAUSS, &mut fit), SarStatus::Ok);
        assert_eq!(sar_fit_order(fit), 5);
        assert!(sar_fit_lambda(fit).is_nan());
        assert_eq!(sar_fit_estimates(fit, est.as_mut_ptr(), 5), SarStatus::Ok);
        assert_eq!(sar_fit_std_errors(fit, se.as_mut_ptr(), 5), SarStatus::Ok);
        let values = std::slice::from_raw_parts(sar_series_values(s), sar_series_len(s));
        let direct = fit_mle(values, 5, InnovationFamily::standard_normal(), &FitOptions::default()).unwrap();
        assert_eq!(est.to_vec(), direct.estimates);
        assert_eq!(se.to_vec(), direct.std_errors);
        sar_fit_free(fit);
        sar_series_free(s);
    }
}

#[test]
fn penalized_and_tuned_fits() {
    let s = simulated(1000, 9);
    let mut est = [f64::NAN; 5];
    unsafe {
        let mut fit = ptr::null_mut();
        let pen = SarPenalty { kind: SarPenaltyKind::Lasso, lambda: 1e6, a: 0.0 };
        assert_eq!(sar_fit_pcmle(s, 5, GAUSS, pen, &mut fit), SarStatus::Ok);
        assert_eq!(sar_fit_estimates(fit, est.as_mut_ptr(), 5), SarStatus::Ok);
        assert!(est.iter().all(|v| *v == 0.0));
        assert_eq!(sar_fit_lambda(fit), 1e6);
        sar_fit_free(fit);

        let lambdas = [0.04, 0.08];
        let a = [2.1];
        let mut tuned = ptr::null_mut();
        let st = sar_tune(s, 5, GAUSS, SarPenaltyKind::Scad, lambdas.as_ptr(), 2, a.as_ptr(), 1, 0.8, &mut tuned);
        assert_eq!(st, SarStatus::Ok);
        assert!(lambdas.contains(&sar_fit_lambda(tuned)));
        sar_fit_free(tuned);
        sar_series_free(s);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut s = ptr::null_mut();
        let explosive = [1.5];
        assert_eq!(sar_simulate(explosive.as_ptr(), 1, GAUSS, 10, 0, 1, &mut s), SarStatus::Model);
        assert!(s.is_null());
        assert!(!last_error().is_empty());

        let bad = SarInnovation { family: SarFamily::StudentT, parameter: -1.0 };
        let coeffs = [0.5];
        assert_eq!(sar_simulate(coeffs.as_ptr(), 1, bad, 10, 0, 1, &mut s), SarStatus::InvalidInput);

        let zeros = [0.0; 40];
        assert_eq!(sar_series_new(zeros.as_ptr(), 40, &mut s), SarStatus::Ok);
        let mut fit = ptr::null_mut();
        assert_eq!(sar_fit_mle(s, 2, GAUSS, &mut fit), SarStatus::DegenerateData);
        assert!(fit.is_null());
        sar_series_free(s);

        assert_eq!(sar_fit_mle(ptr::null(), 2, GAUSS, &mut fit), SarStatus::NullPointer);
        assert_eq!(sar_series_new(ptr::null(), 3, &mut s), SarStatus::NullPointer);
        assert_eq!(sar_fit_order(ptr::null()), 0);
        sar_fit_free(ptr::null_mut());
        sar_series_free(ptr::null_mut());
    }
}

#[test]
fn short_output_buffer_is_rejected() {
    let s = simulated(300, 4);
    unsafe {
        let mut fit = ptr::null_mut();
        assert_eq!(sar_fit_mle(s, 5, GAUSS, &mut fit), SarStatus::Ok);
        let mut buf = [0.0; 3];
        assert_eq!(sar_fit_estimates(fit, buf.as_mut_ptr(), 3), SarStatus::InvalidInput);
        sar_fit_free(fit);
        sar_series_free(s);
    }
}

#[test]
fn causality_selection_and_forecast() {
    unsafe {
        let (mut causal, mut radius) = (false, 0.0);
        let c = [0.5];
        assert_eq!(sar_check_causality(c.as_ptr(), 1, &mut causal, &mut radius), SarStatus::Ok);
        assert!(causal);
        assert!((radius - 0.5).abs() < 1e-12);

        let s = simulated(800, 5);
        let mut order = 0;
        assert_eq!(sar_fpe_select(s, 8, &mut order), SarStatus::Ok);
        assert!((1..=8).contains(&order));
        sar_series_free(s);

        let history = [7.0, 2.0];
        let mut f = 0.0;
        assert_eq!(sar_forecast_k(c.as_ptr(), 1, history.as_ptr(), 2, 3, &mut f), SarStatus::Ok);
        assert_eq!(f, 0.25);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sparse_ar.h")).unwrap();
    for sym in [
        "sar_last_error_message",
        "sar_series_new",
        "sar_series_len",
        "sar_series_values",
        "sar_series_free",
        "sar_simulate",
        "sar_fit_mle",
        "sar_fit_pcmle",
        "sar_tune",
        "sar_fit_order",
        "sar_fit_lambda",
        "sar_fit_estimates",
        "sar_fit_std_errors",
        "sar_fit_free",
        "sar_check_causality",
        "sar_fpe_select",
        "sar_forecast_k",
        "typedef struct SarSeries SarSeries",
        "typedef struct SarFit SarFit",
        "SAR_STATUS_PANIC = 6",
    ] {
        assert!(header.contains(sym), "header lacks {sym}");
    }
}
