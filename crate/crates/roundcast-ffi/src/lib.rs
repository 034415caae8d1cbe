//! C ABI over the trained predictor: load a checkpoint, score the observed
//! prefix of a round, free the handle. Models live behind an opaque pointer
//! so their layout stays private to the Rust side.
//!
//! Every fallible call returns a [`RoundcastStatus`]; any failure also
//! updates a thread-local message readable through [`roundcast_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use roundcast::checkpoint::load_checkpoint;
use roundcast::eval::logit_to_probability;
use roundcast::nn::Model;
use roundcast::tensor::{Mask, Tensor};
use roundcast::Error;

/// Opaque handle to a model restored from a checkpoint file.
pub struct RoundcastModel {
    model: Model,
}

/// Result of every fallible call in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundcastStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument value is outside its documented range.
    InvalidArgument = 2,
    /// The checkpoint file could not be read.
    Io = 3,
    /// The checkpoint file exists but is malformed.
    Format = 4,
    /// The sequence is longer than the model can accept.
    Capacity = 5,
    /// An internal invariant failed; the message has details.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let owned = CString::new(message.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn status_of(err: &Error) -> RoundcastStatus {
    match err {
        Error::Io(_) => RoundcastStatus::Io,
        Error::Capacity(_) => RoundcastStatus::Capacity,
        Error::Usage(_) | Error::Parameter(_) | Error::Config(_) => {
            RoundcastStatus::InvalidArgument
        }
        Error::Data(_)
        | Error::Schema(_)
        | Error::Parse(_)
        | Error::Label(_)
        | Error::Format(_)
        | Error::MetricUndefined(_) => RoundcastStatus::Format,
        Error::Dimension(_) | Error::Numeric(_) | Error::Integrity(_) | Error::Contract(_) => {
            RoundcastStatus::Internal
        }
    }
}

fn failure(err: &Error) -> RoundcastStatus {
    set_last_error(&err.to_string());
    status_of(err)
}

fn null_argument(message: &str) -> RoundcastStatus {
    set_last_error(message);
    RoundcastStatus::NullArgument
}

fn invalid_argument(message: &str) -> RoundcastStatus {
    set_last_error(message);
    RoundcastStatus::InvalidArgument
}

/// Loads a model from a checkpoint file written by `roundcast train`.
///
/// On success writes a handle to `*out_model`; the caller owns it and must
/// release it with `roundcast_model_free`. On failure `*out_model` is null.
///
/// # Safety
///
/// `path` must be a NUL-terminated string and `out_model` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn roundcast_model_load(
    path: *const c_char,
    out_model: *mut *mut RoundcastModel,
) -> RoundcastStatus {
    if out_model.is_null() {
        return null_argument("out_model is null");
    }
    *out_model = std::ptr::null_mut();
    if path.is_null() {
        return null_argument("checkpoint path is null");
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => return invalid_argument("checkpoint path is not valid UTF-8"),
    };
    match load_checkpoint(Path::new(path)) {
        Ok((model, _config)) => {
            *out_model = Box::into_raw(Box::new(RoundcastModel { model }));
            RoundcastStatus::Ok
        }
        Err(e) => failure(&e),
    }
}

/// Releases a handle returned by `roundcast_model_load`. Null is a no-op.
///
/// # Safety
///
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn roundcast_model_free(model: *mut RoundcastModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Win probability of the second player given the observed prefix of a
/// round.
///
/// `p1_damaged` and `p2_damaged` each hold `len` health-damage percentages
/// in [0, 100], one per timestep from timestep 0: damage received by the
/// first and second player respectively. On success writes the probability
/// that the second player wins (the model's label 1) to `*out_probability`.
///
/// # Safety
///
/// The two arrays must be readable for `len` elements and `model` must be
/// a live handle. The handle must not be used from two threads at once.
#[no_mangle]
pub unsafe extern "C" fn roundcast_predict(
    model: *mut RoundcastModel,
    p1_damaged: *const f64,
    p2_damaged: *const f64,
    len: usize,
    out_probability: *mut f64,
) -> RoundcastStatus {
    if model.is_null() {
        return null_argument("model handle is null");
    }
    if p1_damaged.is_null() || p2_damaged.is_null() {
        return null_argument("feature array is null");
    }
    if out_probability.is_null() {
        return null_argument("out_probability is null");
    }
    if len == 0 {
        return invalid_argument("round has no timesteps");
    }
    let p1 = std::slice::from_raw_parts(p1_damaged, len);
    let p2 = std::slice::from_raw_parts(p2_damaged, len);
    let mut interleaved = Vec::with_capacity(2 * len);
    for (&a, &b) in p1.iter().zip(p2) {
        for v in [a, b] {
            if !v.is_finite() || !(0.0..=100.0).contains(&v) {
                return invalid_argument(&format!("feature value {v} outside [0, 100]"));
            }
            interleaved.push(v);
        }
    }

    let handle = &mut *model;
    let features = match Tensor::from_vec(vec![1, len, 2], interleaved) {
        Ok(t) => t,
        Err(e) => return failure(&e),
    };
    let mask = match Mask::from_vec(vec![1, len], vec![true; len]) {
        Ok(m) => m,
        Err(e) => return failure(&e),
    };
    match handle.model.forward(&features, &mask, None) {
        Ok(logits) => {
            *out_probability = logit_to_probability(logits[0]);
            RoundcastStatus::Ok
        }
        Err(e) => failure(&e),
    }
}

/// Message of the most recent failure on the calling thread, NUL-terminated.
/// The pointer stays valid until the next failing call on the same thread.
/// Empty if no call has failed yet.
#[no_mangle]
pub extern "C" fn roundcast_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}
