//! C interface to `ctxrisk`.
//!
//! Models and identification results are opaque handles created and freed
//! through this API. Every fallible function returns a [`CtxStatus`]; on
//! failure a message is available from [`ctxrisk_last_error_message`] on the
//! same thread. Optional results that are absent come back as NaN.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ctxrisk::choice::{bundle_distribution, prob_11_limited, Scenario};
use ctxrisk::cli::ExperimentConfig;
use ctxrisk::identify::{derivative_gap, identify_pipeline, Axis, IdentificationResult, IdentifyConfig, IdentifyError};
use ctxrisk::preferences::PricePair;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Infeasible = 5,
    Numeric = 6,
    Panic = 7,
}

/// Axis selector: 0 for the ν marginal (α, F), 1 for the ω marginal (β, G).
pub const CTXRISK_AXIS_NU: i32 = 0;
pub const CTXRISK_AXIS_OMEGA: i32 = 1;

/// A validated scenario plus the numerical settings used for identification.
pub struct CtxModel {
    scenario: Scenario,
    numeric: IdentifyConfig,
}

/// Result of [`ctxrisk_identify`].
pub struct CtxIdentification {
    result: IdentificationResult,
}

/// Scalar outputs of an identification run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CtxScalars {
    pub alpha_hat: f64,
    pub alpha_times_o_hat: f64,
    pub beta_hat: f64,
    pub beta_times_o_hat: f64,
    pub coverage_f: f64,
    pub coverage_g: f64,
    pub copula_sup_error: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

type Failure = (CtxStatus, String);

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> CtxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CtxStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CtxStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    (CtxStatus::NullPointer, format!("{what} is null"))
}

unsafe fn model_ref<'a>(model: *const CtxModel) -> Result<&'a CtxModel, Failure> {
    model.as_ref().ok_or_else(|| null("model"))
}

unsafe fn out_ref<'a, T>(out: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    out.as_mut().ok_or_else(|| null(what))
}

fn identify_status(e: &IdentifyError) -> CtxStatus {
    match e {
        IdentifyError::InvalidConfig(_) => CtxStatus::InvalidArgument,
        IdentifyError::Numeric(_) => CtxStatus::Numeric,
        IdentifyError::Preference(_) | IdentifyError::Choice(_) => CtxStatus::InvalidArgument,
        _ => CtxStatus::Infeasible,
    }
}

fn axis_from(axis: i32) -> Result<Axis, Failure> {
    match axis {
        CTXRISK_AXIS_NU => Ok(Axis::Nu),
        CTXRISK_AXIS_OMEGA => Ok(Axis::Omega),
        _ => Err((CtxStatus::InvalidArgument, format!("unknown axis {axis}"))),
    }
}

fn prices(x_i: f64, x_ii: f64) -> Result<PricePair, Failure> {
    if x_i.is_finite() && x_ii.is_finite() {
        Ok(PricePair::new(x_i, x_ii))
    } else {
        Err((CtxStatus::InvalidArgument, "prices must be finite".into()))
    }
}

fn nan_or(x: Option<f64>) -> f64 {
    x.unwrap_or(f64::NAN)
}

/// Creates the reference model. Free with [`ctxrisk_model_free`].
///
/// # Safety
/// `out` must be null or point to writable storage for a pointer.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_model_default(out: *mut *mut CtxModel) -> CtxStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = Box::into_raw(Box::new(CtxModel {
            scenario: Scenario::reference(),
            numeric: IdentifyConfig::default(),
        }));
        Ok(())
    })
}

/// Builds a model from a TOML experiment config (NUL-terminated UTF-8).
/// Only the `scenario` and `numeric` sections affect the model.
///
/// # Safety
/// `toml` must be null or a valid NUL-terminated string; `out` must be null
/// or point to writable storage for a pointer.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_model_from_toml(toml: *const c_char, out: *mut *mut CtxModel) -> CtxStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if toml.is_null() {
            return Err(null("toml"));
        }
        let text = CStr::from_ptr(toml)
            .to_str()
            .map_err(|e| (CtxStatus::Parse, e.to_string()))?;
        let cfg = ExperimentConfig::from_toml_str(text).map_err(|e| (CtxStatus::Parse, e.to_string()))?;
        cfg.validate().map_err(|e| (CtxStatus::Validation, e.to_string()))?;
        let scenario = cfg.scenario.build().map_err(|e| (CtxStatus::Validation, e.to_string()))?;
        *out = Box::into_raw(Box::new(CtxModel {
            scenario,
            numeric: cfg.numeric,
        }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a pointer obtained from this library that has
/// not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_model_free(model: *mut CtxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Probability of bundle (1,1) at prices `(x_i, x_ii)`.
///
/// # Safety
/// `model` must be null or a live model; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_prob_11(model: *const CtxModel, x_i: f64, x_ii: f64, out: *mut f64) -> CtxStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out, "out")?;
        *out = prob_11_limited(&m.scenario, prices(x_i, x_ii)?).map_err(|e| (CtxStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Probabilities of bundles (1,1), (1,2), (2,1), (2,2), in that order.
///
/// # Safety
/// `model` must be null or a live model; `out` null or writable for 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_bundle_distribution(
    model: *const CtxModel,
    x_i: f64,
    x_ii: f64,
    out: *mut f64,
) -> CtxStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = bundle_distribution(&m.scenario, prices(x_i, x_ii)?)
            .map_err(|e| (CtxStatus::InvalidArgument, e.to_string()))?;
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&d.to_array());
        Ok(())
    })
}

/// Cutoffs `V_I, V_II, W_I, W_II` at prices `(x_i, x_ii)`.
///
/// # Safety
/// `model` must be null or a live model; `out` null or writable for 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_thresholds(model: *const CtxModel, x_i: f64, x_ii: f64, out: *mut f64) -> CtxStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let t = m
            .scenario
            .ts
            .at(prices(x_i, x_ii)?)
            .map_err(|e| (CtxStatus::InvalidArgument, e.to_string()))?;
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&[t.v_i, t.v_ii, t.w_i, t.w_ii]);
        Ok(())
    })
}

/// Jump in the one-sided derivatives at `level` along `axis`. An infeasible
/// level is not an error: `*feasible` is set to 0 and `*gap` to NaN.
///
/// # Safety
/// `model` must be null or a live model; `gap` and `feasible` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_derivative_gap(
    model: *const CtxModel,
    axis: i32,
    level: f64,
    gap: *mut f64,
    feasible: *mut i32,
) -> CtxStatus {
    guard(|| {
        let m = model_ref(model)?;
        let axis = axis_from(axis)?;
        let gap = out_ref(gap, "gap")?;
        let feasible = out_ref(feasible, "feasible")?;
        let est = derivative_gap(&m.scenario, &m.scenario.ts, axis, level, &m.numeric);
        *gap = nan_or(est.gap);
        *feasible = est.feasible() as i32;
        Ok(())
    })
}

/// Runs the identification pipeline on exact probabilities. Insufficient
/// coverage is reported through the result (NaN shares), not the status.
///
/// # Safety
/// `model` must be null or a live model; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_identify(model: *const CtxModel, out: *mut *mut CtxIdentification) -> CtxStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_ref(out, "out")?;
        let result = identify_pipeline(&m.scenario, &m.numeric).map_err(|e| (identify_status(&e), e.to_string()))?;
        *out = Box::into_raw(Box::new(CtxIdentification { result }));
        Ok(())
    })
}

/// Releases an identification result. Null is ignored.
///
/// # Safety
/// `result` must be null or a pointer obtained from [`ctxrisk_identify`]
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_identification_free(result: *mut CtxIdentification) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `result` must be null or live; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_identification_scalars(
    result: *const CtxIdentification,
    out: *mut CtxScalars,
) -> CtxStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.result;
        let out = out_ref(out, "out")?;
        *out = CtxScalars {
            alpha_hat: nan_or(r.alpha_hat),
            alpha_times_o_hat: nan_or(r.alpha_times_o_hat),
            beta_hat: nan_or(r.beta_hat),
            beta_times_o_hat: nan_or(r.beta_times_o_hat),
            coverage_f: r.coverage_f(),
            coverage_g: r.coverage_g(),
            copula_sup_error: nan_or(r.copula_sup_error()),
        };
        Ok(())
    })
}

/// Number of grid points of the marginal on `axis`.
///
/// # Safety
/// `result` must be null or live; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_identification_grid_len(
    result: *const CtxIdentification,
    axis: i32,
    out: *mut usize,
) -> CtxStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.result;
        let out = out_ref(out, "out")?;
        let m = match axis_from(axis)? {
            Axis::Nu => &r.f,
            Axis::Omega => &r.g,
        };
        *out = m.grid.len();
        Ok(())
    })
}

/// Copies grid levels, gaps and recovered cdf values of one marginal into
/// caller buffers of length `len`, which must equal the grid length.
/// Infeasible gaps and cdf values outside the feasible hull are NaN.
///
/// # Safety
/// `result` must be null or live; each buffer null or writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_identification_marginal(
    result: *const CtxIdentification,
    axis: i32,
    levels: *mut f64,
    gaps: *mut f64,
    cdf: *mut f64,
    len: usize,
) -> CtxStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.result;
        let m = match axis_from(axis)? {
            Axis::Nu => &r.f,
            Axis::Omega => &r.g,
        };
        if len != m.grid.len() {
            return Err((
                CtxStatus::InvalidArgument,
                format!("buffer length {len} does not match grid length {}", m.grid.len()),
            ));
        }
        if levels.is_null() || gaps.is_null() || cdf.is_null() {
            return Err(null("buffer"));
        }
        let levels = std::slice::from_raw_parts_mut(levels, len);
        let gaps = std::slice::from_raw_parts_mut(gaps, len);
        let cdf = std::slice::from_raw_parts_mut(cdf, len);
        for i in 0..len {
            levels[i] = m.grid[i];
            gaps[i] = nan_or(m.gaps[i].gap);
            cdf[i] = nan_or(m.cdf_hat[i]);
        }
        Ok(())
    })
}

/// Number of points on the copula grid.
///
/// # Safety
/// `result` must be null or live; `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_identification_copula_len(
    result: *const CtxIdentification,
    out: *mut usize,
) -> CtxStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.result;
        *out_ref(out, "out")? = r.copula.len();
        Ok(())
    })
}

/// Copies the copula grid `(u, v)`, recovered values and model values into
/// caller buffers of length `len`. Missing values are NaN.
///
/// # Safety
/// `result` must be null or live; each buffer null or writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctxrisk_identification_copula(
    result: *const CtxIdentification,
    u: *mut f64,
    v: *mut f64,
    c_hat: *mut f64,
    c_true: *mut f64,
    len: usize,
) -> CtxStatus {
    guard(|| {
        let r = &result.as_ref().ok_or_else(|| null("result"))?.result;
        if len != r.copula.len() {
            return Err((
                CtxStatus::InvalidArgument,
                format!("buffer length {len} does not match copula grid length {}", r.copula.len()),
            ));
        }
        if u.is_null() || v.is_null() || c_hat.is_null() || c_true.is_null() {
            return Err(null("buffer"));
        }
        let bufs = [u, v, c_hat, c_true].map(|p| std::slice::from_raw_parts_mut(p, len));
        let [u, v, c_hat, c_true] = bufs;
        for (i, p) in r.copula.iter().enumerate() {
            u[i] = p.u;
            v[i] = p.v;
            c_hat[i] = nan_or(p.c_hat);
            c_true[i] = nan_or(p.c_true);
        }
        Ok(())
    })
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn ctxrisk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ctxrisk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
