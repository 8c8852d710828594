//! C ABI over the `scloss` core.
//!
//! Configurations live behind an opaque [`SclConfig`] handle. Every fallible
//! call returns an [`SclStatus`]; on failure a description is available from
//! [`scl_last_error_message`] on the same thread until the next call.
//! Grids are passed as row-major buffers of `height * width` elements.
//! Panics never cross the boundary: they are reported as
//! `SCL_STATUS_INTERNAL`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use scloss::config::halving_weights;
use scloss::{
    grad_wrt_logits, grad_wrt_probs, image_loss, Error, FieldMap, GridDims, LabelMap,
    LossConfig, ProbabilityMap, Reduction, Regularizer, SingleResponse,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SclStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad dimensions, probabilities outside [0, 1], non-binary labels.
    InvalidInput = 2,
    InvalidConfig = 3,
    /// The grid has no adjacent pixel pairs.
    DegenerateGeometry = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SclSingleResponse {
    Bce = 0,
    Mse = 1,
    L1 = 2,
    CrossEntropy = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SclRegularizer {
    Gaussian = 0,
    Distance = 1,
    Constant = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SclReduction {
    Mean = 0,
    Sum = 1,
}

/// Opaque loss configuration.
pub struct SclConfig {
    inner: LossConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> SclStatus {
    match e {
        Error::InvalidConfig(_) | Error::InvalidEpsilon(_) | Error::InvalidLevel(_) => {
            SclStatus::InvalidConfig
        }
        Error::DegenerateGeometry(_) => SclStatus::DegenerateGeometry,
        Error::EmptyGrid { .. }
        | Error::LengthMismatch { .. }
        | Error::DimensionMismatch { .. }
        | Error::ValueOutOfRange { .. }
        | Error::LabelOutOfRange { .. }
        | Error::OutOfBounds { .. } => SclStatus::InvalidInput,
        _ => SclStatus::Internal,
    }
}

/// Runs `f`, recording its error or panic.
fn guard(f: impl FnOnce() -> Result<(), (SclStatus, String)>) -> SclStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SclStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SclStatus::Internal
        }
    }
}

fn core<T>(r: scloss::Result<T>) -> Result<T, (SclStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SclStatus, String) {
    (SclStatus::NullPointer, format!("{what} is null"))
}

fn config_ref<'a>(cfg: *const SclConfig) -> Result<&'a LossConfig, (SclStatus, String)> {
    // SAFETY: non-null handles come from `scl_config_new` and are live per the API contract.
    unsafe { cfg.as_ref() }.map(|c| &c.inner).ok_or_else(|| null("config"))
}

fn config_mut<'a>(cfg: *mut SclConfig) -> Result<&'a mut LossConfig, (SclStatus, String)> {
    // SAFETY: as in `config_ref`; the caller must not share the handle across threads while mutating.
    unsafe { cfg.as_mut() }.map(|c| &mut c.inner).ok_or_else(|| null("config"))
}

/// Borrows `len` elements from `ptr`.
///
/// # Safety
/// `ptr` must be null or valid for `len` reads.
unsafe fn slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], (SclStatus, String)> {
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `ptr` must be null or valid for `values.len()` writes.
unsafe fn write_out(ptr: *mut f64, values: &[f64]) {
    if !ptr.is_null() {
        ptr::copy_nonoverlapping(values.as_ptr(), ptr, values.len());
    }
}

fn dims(height: usize, width: usize) -> Result<GridDims, (SclStatus, String)> {
    core(GridDims::new(height, width))
}

/// Default configuration: K = 2, alpha = 1, BCE, Gaussian, mean reduction.
/// Release with [`scl_config_free`].
#[no_mangle]
pub extern "C" fn scl_config_new() -> *mut SclConfig {
    Box::into_raw(Box::new(SclConfig {
        inner: LossConfig::default(),
    }))
}

/// # Safety
/// `cfg` must be null or a handle from [`scl_config_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn scl_config_free(cfg: *mut SclConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Sets the level count and resets level weights to `1, 1/2, ...`.
#[no_mangle]
pub extern "C" fn scl_config_set_k_max(cfg: *mut SclConfig, k_max: usize) -> SclStatus {
    guard(|| {
        let c = config_mut(cfg)?;
        let next = LossConfig {
            k_max,
            level_weights: halving_weights(k_max),
            ..c.clone()
        };
        core(next.validate())?;
        *c = next;
        Ok(())
    })
}

/// Replaces the level weights; `k_max` becomes `len`.
///
/// # Safety
/// `weights` must be valid for `len` reads.
#[no_mangle]
pub unsafe extern "C" fn scl_config_set_level_weights(
    cfg: *mut SclConfig,
    weights: *const f64,
    len: usize,
) -> SclStatus {
    guard(|| {
        let c = config_mut(cfg)?;
        let w = slice(weights, len, "weights")?;
        let next = LossConfig {
            k_max: len,
            level_weights: w.to_vec(),
            ..c.clone()
        };
        core(next.validate())?;
        *c = next;
        Ok(())
    })
}

fn update(cfg: *mut SclConfig, f: impl FnOnce(&mut LossConfig)) -> SclStatus {
    guard(|| {
        let c = config_mut(cfg)?;
        let mut next = c.clone();
        f(&mut next);
        core(next.validate())?;
        *c = next;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn scl_config_set_alpha(cfg: *mut SclConfig, alpha: f64) -> SclStatus {
    update(cfg, |c| c.alpha = alpha)
}

#[no_mangle]
pub extern "C" fn scl_config_set_epsilon(cfg: *mut SclConfig, epsilon: f64) -> SclStatus {
    update(cfg, |c| c.epsilon = epsilon)
}

/// `kind` is an `SclSingleResponse` value.
#[no_mangle]
pub extern "C" fn scl_config_set_single_response(cfg: *mut SclConfig, kind: u32) -> SclStatus {
    let value = match kind {
        0 => SingleResponse::Bce,
        1 => SingleResponse::Mse,
        2 => SingleResponse::L1,
        3 => SingleResponse::CrossEntropy,
        _ => return guard(|| Err((SclStatus::InvalidConfig, format!("unknown single response {kind}")))),
    };
    update(cfg, |c| c.single_response = value)
}

/// `kind` is an `SclRegularizer` value.
#[no_mangle]
pub extern "C" fn scl_config_set_regularizer(cfg: *mut SclConfig, kind: u32) -> SclStatus {
    let value = match kind {
        0 => Regularizer::Gaussian,
        1 => Regularizer::Distance,
        2 => Regularizer::Constant,
        _ => return guard(|| Err((SclStatus::InvalidConfig, format!("unknown regularizer {kind}")))),
    };
    update(cfg, |c| c.regularizer = value)
}

/// `kind` is an `SclReduction` value.
#[no_mangle]
pub extern "C" fn scl_config_set_reduction(cfg: *mut SclConfig, kind: u32) -> SclStatus {
    let value = match kind {
        0 => Reduction::Mean,
        1 => Reduction::Sum,
        _ => return guard(|| Err((SclStatus::InvalidConfig, format!("unknown reduction {kind}")))),
    };
    update(cfg, |c| c.reduction = value)
}

#[no_mangle]
pub extern "C" fn scl_config_k_max(cfg: *const SclConfig) -> usize {
    config_ref(cfg).map_or(0, |c| c.k_max)
}

/// Loss of one image. `out_loss_map` and `out_attention_map` may be null;
/// otherwise they receive `height * width` values.
///
/// # Safety
/// `pred` and `labels` must be valid for `height * width` reads, and every
/// non-null output for the matching number of writes.
#[no_mangle]
pub unsafe extern "C" fn scl_image_loss(
    cfg: *const SclConfig,
    height: usize,
    width: usize,
    pred: *const f64,
    labels: *const u32,
    out_total: *mut f64,
    out_loss_map: *mut f64,
    out_attention_map: *mut f64,
) -> SclStatus {
    guard(|| {
        let c = config_ref(cfg)?;
        let d = dims(height, width)?;
        if out_total.is_null() {
            return Err(null("out_total"));
        }
        let p = core(ProbabilityMap::new(d, slice(pred, d.len(), "pred")?.to_vec()))?;
        let l = core(LabelMap::binary(d, slice(labels, d.len(), "labels")?.to_vec()))?;
        let b = core(image_loss(&p, &l, c))?;
        *out_total = b.total;
        write_out(out_loss_map, b.loss_map.values());
        write_out(out_attention_map, b.attention_map.values());
        Ok(())
    })
}

/// Gradient of the loss with respect to the probabilities.
///
/// # Safety
/// As [`scl_image_loss`]; `out_grad` must be valid for `height * width` writes.
#[no_mangle]
pub unsafe extern "C" fn scl_grad_wrt_probs(
    cfg: *const SclConfig,
    height: usize,
    width: usize,
    pred: *const f64,
    labels: *const u32,
    out_grad: *mut f64,
) -> SclStatus {
    guard(|| {
        let c = config_ref(cfg)?;
        let d = dims(height, width)?;
        if out_grad.is_null() {
            return Err(null("out_grad"));
        }
        let p = core(ProbabilityMap::new(d, slice(pred, d.len(), "pred")?.to_vec()))?;
        let l = core(LabelMap::binary(d, slice(labels, d.len(), "labels")?.to_vec()))?;
        write_out(out_grad, core(grad_wrt_probs(&p, &l, c))?.values());
        Ok(())
    })
}

/// Gradient with respect to logits `z`, where `p = sigmoid(z)`.
///
/// # Safety
/// As [`scl_grad_wrt_probs`], with `logits` in place of `pred`.
#[no_mangle]
pub unsafe extern "C" fn scl_grad_wrt_logits(
    cfg: *const SclConfig,
    height: usize,
    width: usize,
    logits: *const f64,
    labels: *const u32,
    out_grad: *mut f64,
) -> SclStatus {
    guard(|| {
        let c = config_ref(cfg)?;
        let d = dims(height, width)?;
        if out_grad.is_null() {
            return Err(null("out_grad"));
        }
        let z = core(FieldMap::new(d, slice(logits, d.len(), "logits")?.to_vec()))?;
        let l = core(LabelMap::binary(d, slice(labels, d.len(), "labels")?.to_vec()))?;
        write_out(out_grad, core(grad_wrt_logits(&z, &l, c))?.values());
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn scl_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn scl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
