//! C ABI over `partexp`.
//!
//! Methods and problems are opaque handles created by `px_*_new`-style
//! constructors and released with the matching `*_free`. Every fallible call
//! returns a [`PxStatus`]; on failure the message is available from
//! [`px_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use partexp::integrators::{integrate_adaptive, integrate_fixed, Method, PartitionedIvp};
use partexp::problems::{build, ProblemParams};
use partexp::tableaus::{validate, MethodTableau};
use partexp::Error;

/// Status codes shared by all entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownMethod = 3,
    UnknownProblem = 4,
    /// The integration or a phi evaluation failed numerically.
    Numerical = 5,
    /// The output buffer is shorter than the state dimension.
    BufferTooSmall = 6,
    /// A Rust panic was caught at the boundary.
    Internal = 7,
}

/// Opaque integration method.
pub struct PxMethod {
    inner: Method,
}

/// Opaque partitioned initial value problem.
pub struct PxProblem {
    inner: PartitionedIvp,
}

/// Counters reported by the integrators.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PxStats {
    pub steps: usize,
    pub rejects: usize,
    pub rhs_evals: usize,
    pub krylov_dim_total: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> PxStatus {
    match err {
        Error::UnknownMethod { .. } => PxStatus::UnknownMethod,
        Error::UnknownProblem { .. } => PxStatus::UnknownProblem,
        e if e.is_numerical() => PxStatus::Numerical,
        _ => PxStatus::InvalidArgument,
    }
}

fn fail(err: Error) -> PxStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guard(body: impl FnOnce() -> PxStatus) -> PxStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            PxStatus::Internal
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, PxStatus> {
    if s.is_null() {
        set_error(format!("{what} is null"));
        return Err(PxStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        PxStatus::InvalidArgument
    })
}

macro_rules! try_px {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn px_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn px_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builtin method by name (e.g. "pexpw3a").
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn px_method_builtin(name: *const c_char, out: *mut *mut PxMethod) -> PxStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return PxStatus::NullPointer;
        }
        let name = try_px!(read_str(name, "name"));
        match Method::builtin(name) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(PxMethod { inner: m }));
                PxStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Method from a tableau in the JSON exchange format.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn px_method_from_json(json: *const c_char, out: *mut *mut PxMethod) -> PxStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return PxStatus::NullPointer;
        }
        let text = try_px!(read_str(json, "json"));
        match MethodTableau::from_json(text).and_then(Method::new) {
            Ok(m) => {
                *out = Box::into_raw(Box::new(PxMethod { inner: m }));
                PxStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `method` must come from a `px_method_*` constructor and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn px_method_free(method: *mut PxMethod) {
    if !method.is_null() {
        drop(Box::from_raw(method));
    }
}

/// Classical order of the method, or 0 for a null handle.
///
/// # Safety
/// `method` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn px_method_order(method: *const PxMethod) -> usize {
    method.as_ref().map_or(0, |m| m.inner.order())
}

/// Checks the order conditions of the main and embedded weights in exact
/// arithmetic. `passed` is set to whether every residual is at most `tol`,
/// `max_residual` to the largest residual.
///
/// # Safety
/// `method` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn px_method_verify(method: *const PxMethod, tol: f64, passed: *mut bool, max_residual: *mut f64) -> PxStatus {
    guard(|| {
        let Some(m) = method.as_ref() else {
            set_error("method is null");
            return PxStatus::NullPointer;
        };
        if passed.is_null() || max_residual.is_null() {
            set_error("output pointer is null");
            return PxStatus::NullPointer;
        }
        if !(tol >= 0.0) {
            set_error(format!("tolerance must be non-negative, got {tol}"));
            return PxStatus::InvalidArgument;
        }
        let report = validate(m.inner.tableau());
        *passed = report.passed(tol);
        *max_residual = report.max_residual();
        PxStatus::Ok
    })
}

/// Benchmark problem by name. `size` 0 selects the default grid; `seed`
/// drives the random initial data where a problem has any.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn px_problem_build(name: *const c_char, size: usize, seed: u64, out: *mut *mut PxProblem) -> PxStatus {
    guard(|| {
        if out.is_null() {
            set_error("out is null");
            return PxStatus::NullPointer;
        }
        let name = try_px!(read_str(name, "name"));
        let params = ProblemParams {
            size: (size > 0).then_some(size),
            seed,
            ..Default::default()
        };
        match build(name, &params) {
            Ok(ivp) => {
                *out = Box::into_raw(Box::new(PxProblem { inner: ivp }));
                PxStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `problem` must come from [`px_problem_build`] and not be used afterwards.
/// Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn px_problem_free(problem: *mut PxProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn px_problem_dim(problem: *const PxProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.inner.dim())
}

/// Writes t0 and tf.
///
/// # Safety
/// `problem` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn px_problem_span(problem: *const PxProblem, t0: *mut f64, tf: *mut f64) -> PxStatus {
    let Some(p) = problem.as_ref() else {
        set_error("problem is null");
        return PxStatus::NullPointer;
    };
    if t0.is_null() || tf.is_null() {
        set_error("output pointer is null");
        return PxStatus::NullPointer;
    }
    *t0 = p.inner.t0;
    *tf = p.inner.tf;
    PxStatus::Ok
}

/// Copies the initial state into `y` (length `len`).
///
/// # Safety
/// `problem` must be a live handle and `y` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn px_problem_initial_state(problem: *const PxProblem, y: *mut f64, len: usize) -> PxStatus {
    let Some(p) = problem.as_ref() else {
        set_error("problem is null");
        return PxStatus::NullPointer;
    };
    write_state(&p.inner.y0, y, len)
}

unsafe fn write_state(src: &[f64], y: *mut f64, len: usize) -> PxStatus {
    if y.is_null() {
        set_error("output buffer is null");
        return PxStatus::NullPointer;
    }
    if len < src.len() {
        set_error(format!("buffer holds {len} values, state has {}", src.len()));
        return PxStatus::BufferTooSmall;
    }
    ptr::copy_nonoverlapping(src.as_ptr(), y, src.len());
    PxStatus::Ok
}

unsafe fn run(
    method: *const PxMethod,
    problem: *const PxProblem,
    y: *mut f64,
    len: usize,
    stats: *mut PxStats,
    go: impl FnOnce(&Method, &PartitionedIvp) -> partexp::Result<partexp::integrators::Solution>,
) -> PxStatus {
    guard(|| {
        let (Some(m), Some(p)) = (method.as_ref(), problem.as_ref()) else {
            set_error("method or problem is null");
            return PxStatus::NullPointer;
        };
        if y.is_null() {
            set_error("output buffer is null");
            return PxStatus::NullPointer;
        }
        if len < p.inner.dim() {
            set_error(format!("buffer holds {len} values, state has {}", p.inner.dim()));
            return PxStatus::BufferTooSmall;
        }
        match go(&m.inner, &p.inner) {
            Ok(sol) => {
                if let Some(s) = stats.as_mut() {
                    *s = PxStats {
                        steps: sol.stats.steps,
                        rejects: sol.stats.rejects,
                        rhs_evals: sol.stats.rhs_evals,
                        krylov_dim_total: sol.stats.krylov_dim_total,
                    };
                }
                write_state(&sol.y, y, len)
            }
            Err(e) => fail(e),
        }
    })
}

/// Integrates over the problem span with constant step `h` and writes the
/// endpoint into `y`. `stats` may be null.
///
/// # Safety
/// Handles must be live, `y` valid for `len` writes, `stats` null or valid.
#[no_mangle]
pub unsafe extern "C" fn px_integrate_fixed(
    method: *const PxMethod,
    problem: *const PxProblem,
    h: f64,
    y: *mut f64,
    len: usize,
    stats: *mut PxStats,
) -> PxStatus {
    run(method, problem, y, len, stats, |m, p| integrate_fixed(m, p, h))
}

/// Embedded-error controlled integration with tolerance `tol`.
///
/// # Safety
/// As for [`px_integrate_fixed`].
#[no_mangle]
pub unsafe extern "C" fn px_integrate_adaptive(
    method: *const PxMethod,
    problem: *const PxProblem,
    tol: f64,
    y: *mut f64,
    len: usize,
    stats: *mut PxStats,
) -> PxStatus {
    run(method, problem, y, len, stats, |m, p| integrate_adaptive(m, p, tol, None))
}
