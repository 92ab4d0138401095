//! C ABI over the carnot toolkit.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns a [`CarnotStatus`]; the message of the last
//! failure on the calling thread is available from [`carnot_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use carnot::distance::{cc_distance, DistanceConfig};
use carnot::group::CarnotGroup;
use carnot::kernels::heat_kernel_g0;
use carnot::operator::Operator;
use carnot::parametrix::{fundamental_solution, ParametrixConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarnotStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Panic = 5,
}

/// Opaque group handle.
pub struct CarnotGroupHandle(CarnotGroup);

/// Opaque operator handle.
pub struct CarnotOperatorHandle(Operator);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut v = e.borrow_mut();
        v.clear();
        v.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn fail(status: CarnotStatus, msg: impl std::fmt::Display) -> CarnotStatus {
    set_error(&msg.to_string());
    status
}

fn guard(f: impl FnOnce() -> CarnotStatus) -> CarnotStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(CarnotStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, CarnotStatus> {
    if p.is_null() {
        return Err(fail(CarnotStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(CarnotStatus::InvalidArgument, "string is not UTF-8"))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize) -> Result<&'a [f64], CarnotStatus> {
    if p.is_null() {
        return Err(fail(CarnotStatus::NullPointer, "null array"));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn check_dim(g: &CarnotGroup, n: usize) -> Result<(), CarnotStatus> {
    if n != g.dim() {
        return Err(fail(CarnotStatus::DimensionMismatch, format!("{} expects {} coordinates, got {n}", g.name(), g.dim())));
    }
    Ok(())
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to `len`)
/// and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn carnot_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let k = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, k);
            *buf.add(k) = 0;
        }
        msg.len()
    })
}

/// Toolkit version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn carnot_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds a group from a registry name ("heisenberg1", "euclideanN") or a JSON document.
///
/// # Safety
/// `spec` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn carnot_group_new(spec: *const c_char, out: *mut *mut CarnotGroupHandle) -> CarnotStatus {
    guard(|| {
        if out.is_null() {
            return fail(CarnotStatus::NullPointer, "null output pointer");
        }
        let s = tri!(str_arg(spec));
        let g = if s.trim_start().starts_with('{') { CarnotGroup::from_json(s) } else { CarnotGroup::from_name(s) };
        match g {
            Ok(g) => {
                *out = Box::into_raw(Box::new(CarnotGroupHandle(g)));
                CarnotStatus::Ok
            }
            Err(e) => fail(CarnotStatus::InvalidArgument, e),
        }
    })
}

/// # Safety
/// `g` must be null or a handle from [`carnot_group_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn carnot_group_free(g: *mut CarnotGroupHandle) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Topological dimension, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live group handle.
#[no_mangle]
pub unsafe extern "C" fn carnot_group_dim(g: *const CarnotGroupHandle) -> usize {
    g.as_ref().map_or(0, |g| g.0.dim())
}

/// Homogeneous dimension `Q`, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live group handle.
#[no_mangle]
pub unsafe extern "C" fn carnot_group_homogeneous_dim(g: *const CarnotGroupHandle) -> f64 {
    g.as_ref().map_or(0.0, |g| g.0.homogeneous_dim())
}

/// `out = x o y`; all arrays have `n` entries.
///
/// # Safety
/// `x`, `y` must point to `n` readable doubles and `out` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn carnot_group_compose(
    g: *const CarnotGroupHandle,
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut f64,
) -> CarnotStatus {
    guard(|| {
        let Some(g) = g.as_ref() else { return fail(CarnotStatus::NullPointer, "null group") };
        if out.is_null() {
            return fail(CarnotStatus::NullPointer, "null output pointer");
        }
        tri!(check_dim(&g.0, n));
        let (x, y) = (tri!(slice_arg(x, n)), tri!(slice_arg(y, n)));
        let z = g.0.op(x, y);
        ptr::copy_nonoverlapping(z.as_ptr(), out, n);
        CarnotStatus::Ok
    })
}

/// `out = delta_r(x)`.
///
/// # Safety
/// `x` must point to `n` readable doubles and `out` to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn carnot_group_dilate(
    g: *const CarnotGroupHandle,
    r: f64,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> CarnotStatus {
    guard(|| {
        let Some(g) = g.as_ref() else { return fail(CarnotStatus::NullPointer, "null group") };
        if out.is_null() {
            return fail(CarnotStatus::NullPointer, "null output pointer");
        }
        tri!(check_dim(&g.0, n));
        let x = tri!(slice_arg(x, n));
        match g.0.dilate(r, x) {
            Ok(z) => {
                ptr::copy_nonoverlapping(z.as_ptr(), out, n);
                CarnotStatus::Ok
            }
            Err(e) => fail(CarnotStatus::InvalidArgument, e),
        }
    })
}

/// Carnot-Caratheodory distance with default optimizer settings and the given seed.
/// `gap` receives the optimizer's bound on the excess over the true distance.
///
/// # Safety
/// `x`, `y` must point to `n` readable doubles; `value` and `gap` must be valid.
#[no_mangle]
pub unsafe extern "C" fn carnot_distance(
    g: *const CarnotGroupHandle,
    x: *const f64,
    y: *const f64,
    n: usize,
    seed: u64,
    value: *mut f64,
    gap: *mut f64,
) -> CarnotStatus {
    guard(|| {
        let Some(g) = g.as_ref() else { return fail(CarnotStatus::NullPointer, "null group") };
        if value.is_null() || gap.is_null() {
            return fail(CarnotStatus::NullPointer, "null output pointer");
        }
        tri!(check_dim(&g.0, n));
        let (x, y) = (tri!(slice_arg(x, n)), tri!(slice_arg(y, n)));
        let cfg = DistanceConfig { seed, ..Default::default() };
        match cc_distance(&g.0, x, y, &cfg) {
            Ok(r) => {
                *value = r.value;
                *gap = r.gap_estimate;
                CarnotStatus::Ok
            }
            Err(e) => fail(CarnotStatus::InvalidArgument, e),
        }
    })
}

/// Heat kernel `Gamma0(x, t)` of the sub-Laplacian with pole at the origin.
///
/// # Safety
/// `x` must point to `n` readable doubles; `value` and `error` must be valid.
#[no_mangle]
pub unsafe extern "C" fn carnot_heat_kernel(
    g: *const CarnotGroupHandle,
    x: *const f64,
    n: usize,
    t: f64,
    value: *mut f64,
    error: *mut f64,
) -> CarnotStatus {
    guard(|| {
        let Some(g) = g.as_ref() else { return fail(CarnotStatus::NullPointer, "null group") };
        if value.is_null() || error.is_null() {
            return fail(CarnotStatus::NullPointer, "null output pointer");
        }
        tri!(check_dim(&g.0, n));
        let x = tri!(slice_arg(x, n));
        match heat_kernel_g0(&g.0, x, t) {
            Ok(k) => {
                *value = k.value;
                *error = k.error();
                CarnotStatus::Ok
            }
            Err(e) => fail(CarnotStatus::InvalidArgument, e),
        }
    })
}

/// Builds an operator from its JSON spec.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn carnot_operator_new(json: *const c_char, out: *mut *mut CarnotOperatorHandle) -> CarnotStatus {
    guard(|| {
        if out.is_null() {
            return fail(CarnotStatus::NullPointer, "null output pointer");
        }
        let s = tri!(str_arg(json));
        match Operator::from_json(s) {
            Ok(op) => {
                *out = Box::into_raw(Box::new(CarnotOperatorHandle(op)));
                CarnotStatus::Ok
            }
            Err(e) => fail(CarnotStatus::InvalidArgument, e),
        }
    })
}

/// Heat operator `Delta_G + c - d_t` on a registry group.
///
/// # Safety
/// `group` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn carnot_operator_heat(group: *const c_char, c: f64, out: *mut *mut CarnotOperatorHandle) -> CarnotStatus {
    guard(|| {
        if out.is_null() {
            return fail(CarnotStatus::NullPointer, "null output pointer");
        }
        let s = tri!(str_arg(group));
        match Operator::heat(s, c) {
            Ok(op) => {
                *out = Box::into_raw(Box::new(CarnotOperatorHandle(op)));
                CarnotStatus::Ok
            }
            Err(e) => fail(CarnotStatus::InvalidArgument, e),
        }
    })
}

/// # Safety
/// `op` must be null or a handle from an operator constructor not yet freed.
#[no_mangle]
pub unsafe extern "C" fn carnot_operator_free(op: *mut CarnotOperatorHandle) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Fundamental solution `Gamma(x, t; xi, tau)` by the parametrix series of order `order`.
/// `error` receives the combined quadrature and truncation budget.
///
/// # Safety
/// `x`, `xi` must point to `n` readable doubles; `value` and `error` must be valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn carnot_fundamental_solution(
    op: *const CarnotOperatorHandle,
    x: *const f64,
    t: f64,
    xi: *const f64,
    tau: f64,
    n: usize,
    order: usize,
    value: *mut f64,
    error: *mut f64,
) -> CarnotStatus {
    guard(|| {
        let Some(op) = op.as_ref() else { return fail(CarnotStatus::NullPointer, "null operator") };
        if value.is_null() || error.is_null() {
            return fail(CarnotStatus::NullPointer, "null output pointer");
        }
        tri!(check_dim(op.0.group(), n));
        let (x, xi) = (tri!(slice_arg(x, n)), tri!(slice_arg(xi, n)));
        let cfg = ParametrixConfig { order, ..Default::default() };
        match fundamental_solution(&op.0, x, t, xi, tau, &cfg) {
            Ok(f) => {
                *value = f.total;
                *error = f.error_budget();
                if f.diverging {
                    return fail(CarnotStatus::Numerical, "parametrix series terms do not decay");
                }
                CarnotStatus::Ok
            }
            Err(e) => fail(CarnotStatus::InvalidArgument, e),
        }
    })
}
