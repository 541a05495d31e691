//! C ABI for `rtg-core`.
//!
//! Models are opaque handles created by `rtg_model_*` constructors and
//! released with `rtg_model_free`. Every fallible function returns an
//! [`RtgStatus`] and writes results through out-pointers; on failure the
//! message is kept per thread and can be read with `rtg_last_error_message`.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rtg_core::graph::degree_sequence_fast;
use rtg_core::joint::{char_fn, joint_moment, MomentMethod};
use rtg_core::limits::{finite_n_nodal_pmf, fujihara_approx, fujihara_pmf, limit_nodal_pmf};
use rtg_core::rng::stream;
use rtg_core::{Estimate, FitnessModel, RtgError};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RtgStatus {
    Ok = 0,
    InvalidInput = 1,
    Unsupported = 2,
    Numerical = 3,
    Resource = 4,
    Config = 5,
    Io = 6,
    GateFailed = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Opaque fitness model handle.
pub struct RtgModel {
    inner: FitnessModel,
}

/// A value with its error estimate.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RtgEstimate {
    pub value: f64,
    pub error: f64,
}

/// One evaluation of the truncated characteristic-function series.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RtgCharFn {
    pub re: f64,
    pub im: f64,
    pub order: usize,
    pub tail_bound: f64,
}

impl From<Estimate> for RtgEstimate {
    fn from(e: Estimate) -> Self {
        RtgEstimate { value: e.value, error: e.error }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &RtgError) -> RtgStatus {
    match e {
        RtgError::InvalidInput(_) => RtgStatus::InvalidInput,
        RtgError::Unsupported(_) => RtgStatus::Unsupported,
        RtgError::Numerical { .. } => RtgStatus::Numerical,
        RtgError::Resource(_) => RtgStatus::Resource,
        RtgError::Config(_) => RtgStatus::Config,
        RtgError::GateFailure(_) => RtgStatus::GateFailed,
        RtgError::Io(_) => RtgStatus::Io,
    }
}

enum Failure {
    Core(RtgError),
    Null(&'static str),
}

impl From<RtgError> for Failure {
    fn from(e: RtgError) -> Self {
        Failure::Core(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> RtgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RtgStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            RtgStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            RtgStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(model: *const RtgModel) -> Result<&'a FitnessModel, Failure> {
    // SAFETY: the caller passes a handle from an rtg_model_* constructor.
    unsafe { model.as_ref() }.map(|m| &m.inner).ok_or(Failure::Null("model"))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("output"));
    }
    // SAFETY: non-null and, per the contract, valid for writes.
    unsafe { out.write(value) };
    Ok(())
}

fn store_model(model: FitnessModel, out: *mut *mut RtgModel) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("output"));
    }
    let handle = Box::into_raw(Box::new(RtgModel { inner: model }));
    // SAFETY: checked non-null above.
    unsafe { out.write(handle) };
    Ok(())
}

/// Creates an exponential fitness model with the given rate.
///
/// # Safety
/// `out` must be valid for writes. Free the handle with `rtg_model_free`.
#[no_mangle]
pub unsafe extern "C" fn rtg_model_exponential(rate: f64, out: *mut *mut RtgModel) -> RtgStatus {
    guard(|| store_model(FitnessModel::exponential(rate)?, out))
}

/// Creates a Pareto fitness model with the given scale and shape.
///
/// # Safety
/// `out` must be valid for writes. Free the handle with `rtg_model_free`.
#[no_mangle]
pub unsafe extern "C" fn rtg_model_pareto(scale: f64, shape: f64, out: *mut *mut RtgModel) -> RtgStatus {
    guard(|| store_model(FitnessModel::pareto(scale, shape)?, out))
}

/// Releases a model handle. Null is accepted.
///
/// # Safety
/// `model` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn rtg_model_free(model: *mut RtgModel) {
    if !model.is_null() {
        // SAFETY: the handle came from Box::into_raw in store_model.
        drop(unsafe { Box::from_raw(model) });
    }
}

/// `F(x)`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_model_cdf(model: *const RtgModel, x: f64, out: *mut f64) -> RtgStatus {
    guard(|| unsafe { write(out, model_ref(model)?.cdf(x)) })
}

/// `1 − F(x)`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_model_tail(model: *const RtgModel, x: f64, out: *mut f64) -> RtgStatus {
    guard(|| unsafe { write(out, model_ref(model)?.tail(x)) })
}

/// The limit intensity `λ(x)`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_model_intensity(model: *const RtgModel, x: f64, out: *mut f64) -> RtgStatus {
    guard(|| unsafe { write(out, model_ref(model)?.intensity(x)) })
}

/// The threshold `θ*_n`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_model_scaling_threshold(model: *const RtgModel, n: u64, out: *mut f64) -> RtgStatus {
    guard(|| unsafe { write(out, model_ref(model)?.scaling_threshold(n)) })
}

/// Draws `count` fitness values from stream `index` of `seed`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for `count` writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_model_sample(
    model: *const RtgModel,
    seed: u64,
    index: u64,
    count: usize,
    out: *mut f64,
) -> RtgStatus {
    guard(|| {
        let m = unsafe { model_ref(model)? };
        if out.is_null() && count > 0 {
            return Err(Failure::Null("output"));
        }
        let values = m.sample(&mut stream(seed, 0, index), count)?;
        // SAFETY: out holds at least `count` elements per the contract.
        unsafe { ptr::copy_nonoverlapping(values.as_ptr(), out, count) };
        Ok(())
    })
}

/// Degrees of the threshold graph on `fitness` at threshold `theta`.
///
/// # Safety
/// `fitness` must hold `len` readable values and `out` room for `len`.
#[no_mangle]
pub unsafe extern "C" fn rtg_degree_sequence(
    fitness: *const f64,
    len: usize,
    theta: f64,
    out: *mut u64,
) -> RtgStatus {
    guard(|| {
        if len == 0 {
            return Ok(());
        }
        if fitness.is_null() || out.is_null() {
            return Err(Failure::Null("fitness or output"));
        }
        // SAFETY: caller guarantees `len` readable elements.
        let x = unsafe { std::slice::from_raw_parts(fitness, len) };
        let degrees = degree_sequence_fast(x, theta)?;
        // SAFETY: caller guarantees room for `len` elements.
        let dst = unsafe { std::slice::from_raw_parts_mut(out, len) };
        for (o, d) in dst.iter_mut().zip(degrees) {
            *o = d as u64;
        }
        Ok(())
    })
}

/// Limiting nodal degree probability `p(d)`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_limit_nodal_pmf(model: *const RtgModel, d: u64, out: *mut RtgEstimate) -> RtgStatus {
    guard(|| unsafe { write(out, limit_nodal_pmf(model_ref(model)?, d)?.into()) })
}

/// `P(D_{n,1} = d)` in a graph of size `n` at threshold `theta`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_finite_n_nodal_pmf(
    model: *const RtgModel,
    n: u64,
    theta: f64,
    d: u64,
    out: *mut RtgEstimate,
) -> RtgStatus {
    guard(|| unsafe { write(out, finite_n_nodal_pmf(model_ref(model)?, n, theta, d)?.into()) })
}

/// The exponential-fitness limit law at degree `d`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_fujihara_pmf(d: u64, out: *mut RtgEstimate) -> RtgStatus {
    guard(|| unsafe { write(out, fujihara_pmf(d)?.into()) })
}

/// `1/(d(d−1))` and its error bound `1/d!`, for `d ≥ 2`.
///
/// # Safety
/// `approx` and `bound` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_fujihara_approx(d: u64, approx: *mut f64, bound: *mut f64) -> RtgStatus {
    guard(|| {
        let (a, b) = fujihara_approx(d)?;
        unsafe {
            write(approx, a)?;
            write(bound, b)
        }
    })
}

/// `m_r(d)` by quadrature (`tolerance > 0`) or, if `samples > 0`, by
/// sampling with `seed`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_joint_moment(
    model: *const RtgModel,
    r: usize,
    d: u64,
    tolerance: f64,
    samples: u64,
    seed: u64,
    out: *mut RtgEstimate,
) -> RtgStatus {
    guard(|| {
        let method = if samples > 0 {
            MomentMethod::MonteCarlo { samples, seed }
        } else {
            MomentMethod::Quadrature { tolerance }
        };
        unsafe { write(out, joint_moment(model_ref(model)?, r, d, method)?.into()) }
    })
}

/// Truncated series for `E[exp(i t Π(d))]` with truncation tolerance `eps`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_char_fn(
    model: *const RtgModel,
    d: u64,
    t: f64,
    eps: f64,
    out: *mut RtgCharFn,
) -> RtgStatus {
    guard(|| {
        let e = char_fn(unsafe { model_ref(model)? }, d, t, eps)?;
        unsafe { write(out, RtgCharFn { re: e.re, im: e.im, order: e.order, tail_bound: e.tail_bound }) }
    })
}

/// Copies the calling thread's last error message into `buf` (always
/// nul-terminated when `len > 0`) and returns the full message length
/// excluding the terminator; 0 if there is none.
///
/// # Safety
/// `buf` must be null or valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn rtg_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: n + 1 <= len bytes are written.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Static name of a status code, e.g. `"invalid_input"`.
#[no_mangle]
pub extern "C" fn rtg_status_name(status: i32) -> *const c_char {
    let s: &'static [u8] = match status {
        0 => b"ok\0",
        1 => b"invalid_input\0",
        2 => b"unsupported\0",
        3 => b"numerical_failure\0",
        4 => b"resource_refused\0",
        5 => b"config_error\0",
        6 => b"io_error\0",
        7 => b"gate_failed\0",
        8 => b"null_pointer\0",
        9 => b"panic\0",
        _ => b"unknown\0",
    };
    s.as_ptr().cast()
}
