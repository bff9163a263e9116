//! C ABI for the fixedpoint toolkit.
//!
//! Handles are opaque pointers owned by this library; every constructor has
//! a matching `*_free`, and every fallible call returns an [`FpStatus`].
//! On any non-`Ok` status, [`fp_last_error_message`] retrieves a
//! human-readable description for the calling thread. Structured inputs
//! (operators, convex sets, schedules, scalar functions) cross the boundary
//! as the same JSON documents the CLI consumes.
//!
//! The generated header lands in `include/fixedpoint.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe, UnwindSafe};
use std::ptr;
use std::slice;

use fixedpoint::cli::{OperatorSpec, ScheduleSpec};
use fixedpoint::iterate::{halpern, IterationTrace, StopReason, StopRule};
use fixedpoint::operators::{ConvexSet, Operator, ScalarFunction};
use fixedpoint::oracle::{project_intersection_oracle, prox_scalar_oracle};
use fixedpoint::sequences::{BetaTable, OperatorSequence, Schedule};
use fixedpoint::space::Vector;
use fixedpoint::Error;

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    ScheduleRejected = 4,
    JsonError = 5,
    OracleFailure = 6,
    NotConverged = 7,
    ProbeRejected = 8,
    InternalError = 9,
}

/// Opaque nonexpansive operator handle.
pub struct FpOperator {
    _private: (),
}

/// Opaque schedule handle.
pub struct FpSchedule {
    _private: (),
}

/// Opaque operator-sequence handle.
pub struct FpSequence {
    _private: (),
}

/// Opaque iteration-trace handle.
pub struct FpTrace {
    _private: (),
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> FpStatus {
    match err {
        Error::DimensionMismatch { .. } => FpStatus::DimensionMismatch,
        Error::ScheduleRejected(_) => FpStatus::ScheduleRejected,
        Error::Json(_) | Error::SpecValidation(_) => FpStatus::JsonError,
        Error::DidNotConverge(_) => FpStatus::NotConverged,
        Error::ProbeRejected(_) => FpStatus::ProbeRejected,
        Error::OracleFailure(_) | Error::EmptyIntersection(_) => FpStatus::OracleFailure,
        Error::Io(_) => FpStatus::InternalError,
        _ => FpStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> FpStatus {
    let status = status_of(&err);
    set_error(&err.to_string());
    status
}

fn guard<F: FnOnce() -> FpStatus + UnwindSafe>(f: F) -> FpStatus {
    match catch_unwind(f) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic across the FFI boundary");
            FpStatus::InternalError
        }
    }
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `cap` bytes) and returns the full message
/// length in bytes, excluding the terminator. Passing a null buffer or a
/// zero capacity just queries the length.
#[no_mangle]
pub extern "C" fn fp_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

unsafe fn parse_json<T: serde::de::DeserializeOwned>(json: *const c_char) -> Result<T, FpStatus> {
    if json.is_null() {
        set_error("null JSON pointer");
        return Err(FpStatus::NullPointer);
    }
    let text = match CStr::from_ptr(json).to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("JSON input is not valid UTF-8");
            return Err(FpStatus::JsonError);
        }
    };
    serde_json::from_str(text).map_err(|e| {
        set_error(&format!("JSON error: {e}"));
        FpStatus::JsonError
    })
}

unsafe fn vector_from(ptr_: *const f64, dim: usize) -> Result<Vector, FpStatus> {
    if ptr_.is_null() {
        set_error("null vector pointer");
        return Err(FpStatus::NullPointer);
    }
    if dim == 0 {
        set_error("zero-dimensional vector");
        return Err(FpStatus::InvalidArgument);
    }
    Vector::new(slice::from_raw_parts(ptr_, dim).to_vec()).map_err(|e| {
        set_error(&e.to_string());
        FpStatus::InvalidArgument
    })
}

macro_rules! handle_impl {
    ($handle:ident, $inner:ty, $free:ident) => {
        impl $handle {
            fn wrap(inner: $inner) -> *mut $handle {
                Box::into_raw(Box::new(inner)) as *mut $handle
            }

            unsafe fn get<'a>(ptr_: *const $handle) -> Result<&'a $inner, FpStatus> {
                if ptr_.is_null() {
                    set_error("null handle");
                    Err(FpStatus::NullPointer)
                } else {
                    Ok(&*(ptr_ as *const $inner))
                }
            }
        }

        /// Releases a handle; null is a no-op.
        #[no_mangle]
        pub unsafe extern "C" fn $free(handle: *mut $handle) {
            if !handle.is_null() {
                drop(Box::from_raw(handle as *mut $inner));
            }
        }
    };
}

handle_impl!(FpOperator, Operator, fp_operator_free);
handle_impl!(FpSchedule, Schedule, fp_schedule_free);
handle_impl!(FpSequence, OperatorSequence, fp_sequence_free);
handle_impl!(FpTrace, IterationTrace, fp_trace_free);

fn store<T>(out: *mut *mut T, value: *mut T) -> FpStatus {
    if out.is_null() {
        set_error("null output pointer");
        return FpStatus::NullPointer;
    }
    unsafe {
        *out = value;
    }
    FpStatus::Ok
}

/// Builds an operator from its JSON description (same schema as the CLI
/// problem files) for the given ambient dimension.
#[no_mangle]
pub unsafe extern "C" fn fp_operator_from_json(
    json: *const c_char,
    dim: usize,
    out: *mut *mut FpOperator,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let spec: OperatorSpec = match parse_json(json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match spec.build(dim) {
            Ok(op) => store(out, FpOperator::wrap(op)),
            Err(e) => fail(e),
        }
    }))
}

/// Metric projection operator onto a primitive convex set (JSON form).
#[no_mangle]
pub unsafe extern "C" fn fp_operator_projection(
    set_json: *const c_char,
    out: *mut *mut FpOperator,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let set: ConvexSet = match parse_json(set_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match Operator::projection(set) {
            Ok(op) => store(out, FpOperator::wrap(op)),
            Err(e) => fail(e),
        }
    }))
}

/// Ambient dimension of an operator, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fp_operator_dim(op: *const FpOperator) -> usize {
    match FpOperator::get(op) {
        Ok(op) => op.domain_dim(),
        Err(_) => 0,
    }
}

/// Applies an operator to `x` (length `dim`), writing the image to `out`
/// (length `dim`).
#[no_mangle]
pub unsafe extern "C" fn fp_operator_apply(
    op: *const FpOperator,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let op = match FpOperator::get(op) {
            Ok(o) => o,
            Err(s) => return s,
        };
        let x = match vector_from(x, dim) {
            Ok(v) => v,
            Err(s) => return s,
        };
        if out.is_null() {
            set_error("null output pointer");
            return FpStatus::NullPointer;
        }
        match op.apply(&x) {
            Ok(y) => {
                ptr::copy_nonoverlapping(y.coords().as_ptr(), out, dim);
                FpStatus::Ok
            }
            Err(e) => fail(e),
        }
    }))
}

/// Builds a schedule from its JSON description.
#[no_mangle]
pub unsafe extern "C" fn fp_schedule_from_json(
    json: *const c_char,
    out: *mut *mut FpSchedule,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let spec: ScheduleSpec = match parse_json(json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match spec.build() {
            Ok(s) => store(out, FpSchedule::wrap(s)),
            Err(e) => fail(e),
        }
    }))
}

/// Schedule value at index `n >= 1`.
#[no_mangle]
pub unsafe extern "C" fn fp_schedule_value(
    schedule: *const FpSchedule,
    n: usize,
    out: *mut f64,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let s = match FpSchedule::get(schedule) {
            Ok(s) => s,
            Err(status) => return status,
        };
        if n == 0 {
            set_error("schedules are indexed from 1");
            return FpStatus::InvalidArgument;
        }
        if out.is_null() {
            set_error("null output pointer");
            return FpStatus::NullPointer;
        }
        *out = s.value(n);
        FpStatus::Ok
    }))
}

/// Constant sequence `S_n = T`; the operator must carry a fixed set and a
/// firmly-nonexpansive or averaged certificate.
#[no_mangle]
pub unsafe extern "C" fn fp_sequence_constant(
    op: *const FpOperator,
    out: *mut *mut FpSequence,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let op = match FpOperator::get(op) {
            Ok(o) => o,
            Err(s) => return s,
        };
        match OperatorSequence::constant(op.clone()) {
            Ok(seq) => store(out, FpSequence::wrap(seq)),
            Err(e) => fail(e),
        }
    }))
}

/// Resolvent sequence of the scalar function `f_json` with parameter
/// schedule `lambdas` in dimension `dim`.
#[no_mangle]
pub unsafe extern "C" fn fp_sequence_resolvent(
    f_json: *const c_char,
    lambdas: *const FpSchedule,
    dim: usize,
    out: *mut *mut FpSequence,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let f: ScalarFunction = match parse_json(f_json) {
            Ok(f) => f,
            Err(status) => return status,
        };
        let lambdas = match FpSchedule::get(lambdas) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match OperatorSequence::resolvent(f, lambdas.clone(), dim) {
            Ok(seq) => store(out, FpSequence::wrap(seq)),
            Err(e) => fail(e),
        }
    }))
}

/// Common-fixed-point sequence over `n_ops` member operators with the
/// default geometric mixing table and relaxation schedule `gamma`.
#[no_mangle]
pub unsafe extern "C" fn fp_sequence_cfp(
    ops: *const *const FpOperator,
    n_ops: usize,
    gamma: *const FpSchedule,
    out: *mut *mut FpSequence,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        if ops.is_null() {
            set_error("null operator list");
            return FpStatus::NullPointer;
        }
        let gamma = match FpSchedule::get(gamma) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let mut members = Vec::with_capacity(n_ops);
        for i in 0..n_ops {
            let handle = *ops.add(i);
            match FpOperator::get(handle) {
                Ok(op) => members.push(op.clone()),
                Err(status) => return status,
            }
        }
        match OperatorSequence::cfp(members, BetaTable::geometric(), gamma.clone()) {
            Ok(seq) => store(out, FpSequence::wrap(seq)),
            Err(e) => fail(e),
        }
    }))
}

/// Applies the `n`-th member of a sequence (`n >= 1`).
#[no_mangle]
pub unsafe extern "C" fn fp_sequence_apply(
    seq: *const FpSequence,
    n: usize,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let seq = match FpSequence::get(seq) {
            Ok(s) => s,
            Err(status) => return status,
        };
        if n == 0 {
            set_error("operator sequences are indexed from 1");
            return FpStatus::InvalidArgument;
        }
        let x = match vector_from(x, dim) {
            Ok(v) => v,
            Err(s) => return s,
        };
        if out.is_null() {
            set_error("null output pointer");
            return FpStatus::NullPointer;
        }
        match seq.at(n).apply(&x) {
            Ok(y) => {
                ptr::copy_nonoverlapping(y.coords().as_ptr(), out, dim);
                FpStatus::Ok
            }
            Err(e) => fail(e),
        }
    }))
}

/// Runs the anchored iteration `x_{n+1} = a_n u + (1 - a_n) S_n x_n`.
///
/// `target_tol` and `reference` may be null; when both are supplied the run
/// also stops once `||x_n - reference|| <= *target_tol`. The returned trace
/// must be released with `fp_trace_free`.
#[no_mangle]
pub unsafe extern "C" fn fp_halpern(
    seq: *const FpSequence,
    u: *const f64,
    x1: *const f64,
    dim: usize,
    alpha: *const FpSchedule,
    max_iters: usize,
    residual_tol: f64,
    target_tol: *const f64,
    reference: *const f64,
    out: *mut *mut FpTrace,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let seq = match FpSequence::get(seq) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let alpha = match FpSchedule::get(alpha) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let u = match vector_from(u, dim) {
            Ok(v) => v,
            Err(s) => return s,
        };
        let x1 = match vector_from(x1, dim) {
            Ok(v) => v,
            Err(s) => return s,
        };
        let reference = if reference.is_null() {
            None
        } else {
            match vector_from(reference, dim) {
                Ok(v) => Some(v),
                Err(s) => return s,
            }
        };
        let stop = StopRule {
            max_iters,
            residual_tol,
            target_tol: if target_tol.is_null() { None } else { Some(*target_tol) },
            min_iters: 1,
        };
        match halpern(seq, &u, &x1, alpha, &stop, reference.as_ref()) {
            Ok(trace) => store(out, FpTrace::wrap(trace)),
            Err(e) => fail(e),
        }
    }))
}

/// Number of recorded steps in a trace (0 for a null handle).
#[no_mangle]
pub unsafe extern "C" fn fp_trace_steps(trace: *const FpTrace) -> usize {
    match FpTrace::get(trace) {
        Ok(t) => t.steps(),
        Err(_) => 0,
    }
}

/// Stop reason of a trace: 0 residual met, 1 target met, 2 step budget
/// exhausted, -1 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn fp_trace_stop_reason(trace: *const FpTrace) -> c_int {
    match FpTrace::get(trace) {
        Ok(t) => match t.stop_reason {
            StopReason::ResidualMet => 0,
            StopReason::TargetMet => 1,
            StopReason::MaxIters => 2,
        },
        Err(_) => -1,
    }
}

/// Copies the final iterate into `out` (length `dim`).
#[no_mangle]
pub unsafe extern "C" fn fp_trace_final(
    trace: *const FpTrace,
    out: *mut f64,
    dim: usize,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let t = match FpTrace::get(trace) {
            Ok(t) => t,
            Err(status) => return status,
        };
        if out.is_null() {
            set_error("null output pointer");
            return FpStatus::NullPointer;
        }
        let x = t.final_iterate();
        if x.dim() != dim {
            set_error(&format!("trace dimension is {}, not {dim}", x.dim()));
            return FpStatus::DimensionMismatch;
        }
        ptr::copy_nonoverlapping(x.coords().as_ptr(), out, dim);
        FpStatus::Ok
    }))
}

/// Copies per-step residuals into the supplied buffers (each of length
/// `len`, which must equal `fp_trace_steps`). Either buffer may be null to
/// skip it.
#[no_mangle]
pub unsafe extern "C" fn fp_trace_residuals(
    trace: *const FpTrace,
    seq_residuals: *mut f64,
    target_residuals: *mut f64,
    len: usize,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let t = match FpTrace::get(trace) {
            Ok(t) => t,
            Err(status) => return status,
        };
        if len != t.steps() {
            set_error(&format!("trace has {} steps, not {len}", t.steps()));
            return FpStatus::DimensionMismatch;
        }
        if !seq_residuals.is_null() {
            ptr::copy_nonoverlapping(t.residual_seq.as_ptr(), seq_residuals, len);
        }
        if !target_residuals.is_null() {
            ptr::copy_nonoverlapping(t.residual_target.as_ptr(), target_residuals, len);
        }
        FpStatus::Ok
    }))
}

/// Certified projection of `u` onto the intersection of the sets described
/// by `sets_json` (a JSON array of convex-set descriptors). Writes the
/// projection to `out` (length `dim`) and, when `certified_tol` is not
/// null, the certified tolerance of the result.
#[no_mangle]
pub unsafe extern "C" fn fp_project_intersection(
    sets_json: *const c_char,
    u: *const f64,
    dim: usize,
    out: *mut f64,
    certified_tol: *mut f64,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let sets: Vec<ConvexSet> = match parse_json(sets_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let u = match vector_from(u, dim) {
            Ok(v) => v,
            Err(s) => return s,
        };
        if out.is_null() {
            set_error("null output pointer");
            return FpStatus::NullPointer;
        }
        match project_intersection_oracle(&sets, &u) {
            Ok(result) => {
                ptr::copy_nonoverlapping(result.value.coords().as_ptr(), out, dim);
                if !certified_tol.is_null() {
                    *certified_tol = result.certified_tol;
                }
                FpStatus::Ok
            }
            Err(e) => fail(e),
        }
    }))
}

/// Ground-truth scalar resolvent value of the function described by
/// `f_json` at parameter `lambda` and point `x`.
#[no_mangle]
pub unsafe extern "C" fn fp_prox_scalar(
    f_json: *const c_char,
    lambda: f64,
    x: f64,
    out: *mut f64,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let f: ScalarFunction = match parse_json(f_json) {
            Ok(f) => f,
            Err(status) => return status,
        };
        if out.is_null() {
            set_error("null output pointer");
            return FpStatus::NullPointer;
        }
        match prox_scalar_oracle(&f, lambda, x) {
            Ok(z) => {
                *out = z;
                FpStatus::Ok
            }
            Err(e) => fail(e),
        }
    }))
}

/// Solves the anchor-path equation `z = t u + (1 - t) T z` to the given
/// tolerance.
#[no_mangle]
pub unsafe extern "C" fn fp_anchor_point(
    op: *const FpOperator,
    u: *const f64,
    dim: usize,
    t: f64,
    tol: f64,
    out: *mut f64,
) -> FpStatus {
    guard(AssertUnwindSafe(|| {
        let op = match FpOperator::get(op) {
            Ok(o) => o,
            Err(s) => return s,
        };
        let u = match vector_from(u, dim) {
            Ok(v) => v,
            Err(s) => return s,
        };
        if out.is_null() {
            set_error("null output pointer");
            return FpStatus::NullPointer;
        }
        match fixedpoint::iterate::anchor_point(op, &u, t, tol) {
            Ok(z) => {
                ptr::copy_nonoverlapping(z.coords().as_ptr(), out, dim);
                FpStatus::Ok
            }
            Err(e) => fail(e),
        }
    }))
}
