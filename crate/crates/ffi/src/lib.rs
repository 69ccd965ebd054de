//! C ABI over the `sparse-ar` estimators.
//!
//! Series and fits cross the boundary as opaque handles created by `sar_*`
//! constructors and released by the matching `*_free`. Every function
//! returns a [`SarStatus`]; on failure [`sar_last_error_message`] describes
//! the error. Panics never unwind into C: they are caught and reported as
//! `SAR_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use sparse_ar::estimator::fit_pcmle;
use sparse_ar::forecast::forecast_k;
use sparse_ar::selection::fpe_select;
use sparse_ar::{
    check_causality, fit_mle, simulate, tune, ArModel, Error, FitOptions, FitResult, InnovationFamily, Penalty,
    PenaltyKind, TimeSeries, TuningGrid,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SarStatus {
    Ok = 0,
    InvalidInput = 1,
    Model = 2,
    DegenerateData = 3,
    Convergence = 4,
    NullPointer = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SarFamily {
    Gaussian = 0,
    StudentT = 1,
}

/// Innovation family; `parameter` is σ for Gaussian and the degrees of
/// freedom for Student-t.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SarInnovation {
    pub family: SarFamily,
    pub parameter: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SarPenaltyKind {
    Scad = 0,
    Lasso = 1,
}

/// `a` is ignored for LASSO.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SarPenalty {
    pub kind: SarPenaltyKind,
    pub lambda: f64,
    pub a: f64,
}

/// Opaque observed or simulated series.
pub struct SarSeries {
    inner: TimeSeries,
}

/// Opaque fit result.
pub struct SarFit {
    inner: FitResult,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SarStatus {
    match e {
        Error::InvalidInput(_) | Error::Format(_) | Error::Io { .. } => SarStatus::InvalidInput,
        Error::Model(_) => SarStatus::Model,
        Error::DegenerateData(_) | Error::Scoring { .. } => SarStatus::DegenerateData,
        Error::Convergence { .. } => SarStatus::Convergence,
    }
}

struct Failure(SarStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SarStatus::NullPointer, format!("{what} is null"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> SarStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SarStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            SarStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or point to `len` readable `f64`s.
unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or a live handle.
unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

fn innovation(spec: SarInnovation) -> Result<InnovationFamily, Failure> {
    Ok(match spec.family {
        SarFamily::Gaussian => InnovationFamily::gaussian(spec.parameter)?,
        SarFamily::StudentT => InnovationFamily::student_t(spec.parameter)?,
    })
}

fn penalty_kind(kind: SarPenaltyKind) -> PenaltyKind {
    match kind {
        SarPenaltyKind::Scad => PenaltyKind::Scad,
        SarPenaltyKind::Lasso => PenaltyKind::Lasso,
    }
}

/// # Safety
/// `out` must be writable.
unsafe fn emit_fit(out: *mut *mut SarFit, fit: FitResult) {
    *out = Box::into_raw(Box::new(SarFit { inner: fit }));
}

/// Message for the most recent failing call on this thread; empty after a
/// success. The pointer stays valid until the next `sar_*` call on the same
/// thread.
#[no_mangle]
pub extern "C" fn sar_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `len` observations into a new series handle.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sar_series_new(values: *const f64, len: usize, out: *mut *mut SarSeries) -> SarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = input(values, len, "values")?;
        let series = TimeSeries::new(v.to_vec())?;
        *out = Box::into_raw(Box::new(SarSeries { inner: series }));
        Ok(())
    })
}

/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_series_len(series: *const SarSeries) -> usize {
    series.as_ref().map_or(0, |s| s.inner.len())
}

/// Borrowed view of the observations, valid while the handle lives.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_series_values(series: *const SarSeries) -> *const f64 {
    series.as_ref().map_or(ptr::null(), |s| s.inner.values().as_ptr())
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sar_series_free(series: *mut SarSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Simulates `n` observations of a causal AR model after `burn_in` discarded
/// steps.
///
/// # Safety
/// `coefficients` must point to `order` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sar_simulate(
    coefficients: *const f64,
    order: usize,
    innov: SarInnovation,
    n: usize,
    burn_in: usize,
    seed: u64,
    out: *mut *mut SarSeries,
) -> SarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let c = input(coefficients, order, "coefficients")?;
        let model = ArModel::new(c.to_vec(), innovation(innov)?)?;
        let series = simulate(&model, n, burn_in, seed)?;
        *out = Box::into_raw(Box::new(SarSeries { inner: series }));
        Ok(())
    })
}

/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_mle(
    series: *const SarSeries,
    order: usize,
    innov: SarInnovation,
    out: *mut *mut SarFit,
) -> SarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = handle(series, "series")?;
        let fit = fit_mle(s.inner.values(), order, innovation(innov)?, &FitOptions::default())?;
        emit_fit(out, fit);
        Ok(())
    })
}

/// One-step penalized fit at a fixed penalty.
///
/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_pcmle(
    series: *const SarSeries,
    order: usize,
    innov: SarInnovation,
    penalty: SarPenalty,
    out: *mut *mut SarFit,
) -> SarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = handle(series, "series")?;
        let pen = Penalty::new(penalty_kind(penalty.kind), penalty.lambda, penalty.a)?;
        let fit = fit_pcmle(s.inner.values(), order, innovation(innov)?, &pen, &FitOptions::default())?;
        emit_fit(out, fit);
        Ok(())
    })
}

/// Holdout-tuned penalized fit over the grid `lambdas × a_values`
/// (`a_values` is ignored for LASSO and may be null with `n_a = 0`).
///
/// # Safety
/// Array arguments must point to the stated number of doubles; `series`
/// must be a live handle; `out` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn sar_tune(
    series: *const SarSeries,
    order: usize,
    innov: SarInnovation,
    kind: SarPenaltyKind,
    lambdas: *const f64,
    n_lambdas: usize,
    a_values: *const f64,
    n_a: usize,
    split_fraction: f64,
    out: *mut *mut SarFit,
) -> SarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let s = handle(series, "series")?;
        let grid = TuningGrid::new(
            input(lambdas, n_lambdas, "lambdas")?.to_vec(),
            input(a_values, n_a, "a_values")?.to_vec(),
            split_fraction,
        )?;
        let fit = tune(s.inner.values(), order, innovation(innov)?, penalty_kind(kind), &grid, &FitOptions::default())?;
        emit_fit(out, fit);
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_order(fit: *const SarFit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.order)
}

/// Penalty level used, or NaN for an unpenalized fit.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_lambda(fit: *const SarFit) -> f64 {
    fit.as_ref().and_then(|f| f.inner.lambda_used).unwrap_or(f64::NAN)
}

/// # Safety
/// `dst` must point to `len` writable doubles.
unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(null("out buffer"));
    }
    if len < src.len() {
        return Err(Failure(
            SarStatus::InvalidInput,
            format!("buffer of length {len} is shorter than {}", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Copies the `order` coefficient estimates into `out` (capacity `len`).
///
/// # Safety
/// `fit` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_estimates(fit: *const SarFit, out: *mut f64, len: usize) -> SarStatus {
    guard(|| copy_out(&handle(fit, "fit")?.inner.estimates, out, len))
}

/// Copies the standard errors (0 off the support) into `out`.
///
/// # Safety
/// `fit` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_std_errors(fit: *const SarFit, out: *mut f64, len: usize) -> SarStatus {
    guard(|| copy_out(&handle(fit, "fit")?.inner.std_errors, out, len))
}

/// # Safety
/// `fit` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sar_fit_free(fit: *mut SarFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `coefficients` must point to `order` doubles; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sar_check_causality(
    coefficients: *const f64,
    order: usize,
    causal: *mut bool,
    spectral_radius: *mut f64,
) -> SarStatus {
    guard(|| {
        if causal.is_null() || spectral_radius.is_null() {
            return Err(null("output"));
        }
        let c = check_causality(input(coefficients, order, "coefficients")?)?;
        *causal = c.causal;
        *spectral_radius = c.spectral_radius;
        Ok(())
    })
}

/// Order in `1..=p_max` minimizing the Final Prediction Error.
///
/// # Safety
/// `series` must be a live handle; `chosen` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sar_fpe_select(series: *const SarSeries, p_max: usize, chosen: *mut usize) -> SarStatus {
    guard(|| {
        if chosen.is_null() {
            return Err(null("chosen"));
        }
        *chosen = fpe_select(handle(series, "series")?.inner.values(), p_max)?.chosen_order;
        Ok(())
    })
}

/// k-step forecast from the end of `history`.
///
/// # Safety
/// Arrays must hold the stated number of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sar_forecast_k(
    coefficients: *const f64,
    order: usize,
    history: *const f64,
    history_len: usize,
    k: usize,
    out: *mut f64,
) -> SarStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = forecast_k(
            input(coefficients, order, "coefficients")?,
            input(history, history_len, "history")?,
            k,
        )?;
        Ok(())
    })
}
