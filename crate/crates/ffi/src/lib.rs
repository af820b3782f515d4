//! C interface to `riesz-kernels`.
//!
//! Every fallible function returns an [`RklStatus`]. On failure the message
//! is stored per thread and can be read with [`rkl_last_error_message`].
//! Objects are opaque handles created by `rkl_*_new`-style functions and
//! released with the matching `rkl_*_free`; freeing `NULL` is a no-op.
//! Optional output pointers are documented as such and may be `NULL`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use riesz_kernels::bessel::{self, BesselOrder, EvalResult};
use riesz_kernels::cli::{self, VerifyArgs};
use riesz_kernels::kernels::{self, KernelFamily};
use riesz_kernels::schrodinger::{self, DiscreteOperator, Grid};
use riesz_kernels::verify::SuiteSelection;
use riesz_kernels::weights::{Weight, WeightFamily};
use riesz_kernels::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RklStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Overflow = 4,
    Convergence = 5,
    IllConditioned = 6,
    LinearAlgebra = 7,
    Io = 8,
    /// A verification run finished but some report differs from its
    /// expectation.
    VerificationFailed = 9,
    Panic = 10,
}

/// Kernel family `M_0` (derivative form).
pub const RKL_FAMILY_M0: i32 = 0;
/// Kernel family `M_1` (multiplication by `e^u`).
pub const RKL_FAMILY_M1: i32 = 1;

/// Uniform grid on the real line.
pub struct RklGrid(Grid);

/// Dense operator on a grid.
pub struct RklOperator(DiscreteOperator);

/// Sampled weight with its estimated `A_2` characteristic.
pub struct RklWeight(Weight);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(RklStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Domain(_) => RklStatus::InvalidArgument,
            Error::Overflow { .. } => RklStatus::Overflow,
            Error::Convergence(_) => RklStatus::Convergence,
            Error::IllConditioned { .. } => RklStatus::IllConditioned,
            Error::LinAlg(_) => RklStatus::LinearAlgebra,
            Error::Config(_) => RklStatus::Config,
            Error::Io(_) => RklStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Outcome) -> RklStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RklStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("internal panic: {msg}"));
            RklStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(RklStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: String) -> Failure {
    Failure(RklStatus::InvalidArgument, msg)
}

unsafe fn write<T>(ptr: *mut T, value: T, what: &str) -> Outcome {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

unsafe fn write_opt<T>(ptr: *mut T, value: T) {
    if !ptr.is_null() {
        ptr.write(value);
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn string<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn opt_string<'a>(ptr: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if ptr.is_null() {
        Ok(None)
    } else {
        string(ptr, what).map(Some)
    }
}

fn family(code: i32) -> Result<KernelFamily, Failure> {
    match code {
        RKL_FAMILY_M0 => Ok(KernelFamily::M0),
        RKL_FAMILY_M1 => Ok(KernelFamily::M1),
        other => Err(invalid(format!("unknown kernel family {other}"))),
    }
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

// ------------------------------------------------------------------ errors

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rkl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of the calling thread into `buf` (always
/// NUL-terminated when `len > 0`, truncated if needed) and returns its full
/// length in bytes, excluding the terminator. `buf` may be `NULL` to query
/// the length.
#[no_mangle]
pub unsafe extern "C" fn rkl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Clears the last error message of the calling thread.
#[no_mangle]
pub extern "C" fn rkl_clear_error() {
    set_error("");
}

// ---------------------------------------------------------------- scalars

unsafe fn bessel_out(r: riesz_kernels::Result<EvalResult>, value: *mut f64, rel_err: *mut f64) -> Outcome {
    let r = r?;
    write(value, r.value.to_f64()?, "value")?;
    write_opt(rel_err, r.relative_error());
    Ok(())
}

/// `J_nu(x)` for `nu >= 0`, `x >= 0`. `rel_err` is optional.
#[no_mangle]
pub unsafe extern "C" fn rkl_bessel_j(nu: f64, x: f64, value: *mut f64, rel_err: *mut f64) -> RklStatus {
    guard(|| bessel_out(BesselOrder::new(nu).and_then(|o| bessel::bessel_j(o, x)), value, rel_err))
}

/// `I_nu(x)`; fails with `RKL_STATUS_OVERFLOW` where it exceeds `double`.
/// `rel_err` is optional.
#[no_mangle]
pub unsafe extern "C" fn rkl_bessel_i(nu: f64, x: f64, value: *mut f64, rel_err: *mut f64) -> RklStatus {
    guard(|| bessel_out(BesselOrder::new(nu).and_then(|o| bessel::bessel_i_scaled(o, x)), value, rel_err))
}

/// `K_nu(x)`; fails with `RKL_STATUS_OVERFLOW` where it leaves the `double`
/// range. `rel_err` is optional.
#[no_mangle]
pub unsafe extern "C" fn rkl_bessel_k(nu: f64, x: f64, value: *mut f64, rel_err: *mut f64) -> RklStatus {
    guard(|| bessel_out(BesselOrder::new(nu).and_then(|o| bessel::bessel_k_scaled(o, x)), value, rel_err))
}

/// `K_nu(x) = mantissa * exp(exponent_offset)`, valid at any `x > 0`.
#[no_mangle]
pub unsafe extern "C" fn rkl_bessel_k_scaled(
    nu: f64,
    x: f64,
    mantissa: *mut f64,
    exponent_offset: *mut f64,
) -> RklStatus {
    guard(|| {
        let r = bessel::bessel_k_scaled(BesselOrder::new(nu)?, x)?;
        write(mantissa, r.value.mantissa(), "mantissa")?;
        write(exponent_offset, r.value.exponent_offset(), "exponent_offset")
    })
}

/// Homogeneous derivative `(d/du + d/dv)^n` of the kernel of `family` at a
/// fixed `t` in `(0, 1/2]`. `abs_err` is optional.
#[no_mangle]
pub unsafe extern "C" fn rkl_kernel_t(
    family_code: i32,
    n: usize,
    t: f64,
    u: f64,
    v: f64,
    value: *mut f64,
    abs_err: *mut f64,
) -> RklStatus {
    guard(|| {
        let (val, err) = kernels::homog_deriv_kernel_t_with_error(family(family_code)?, n, t, u, v)?;
        write(value, val, "value")?;
        write_opt(abs_err, err);
        Ok(())
    })
}

/// The kernel integrated over `t` in `(0, 1/2)` to relative tolerance
/// `tol`. `abs_err` is optional.
#[no_mangle]
pub unsafe extern "C" fn rkl_kernel_integrated(
    family_code: i32,
    n: usize,
    u: f64,
    v: f64,
    tol: f64,
    value: *mut f64,
    abs_err: *mut f64,
) -> RklStatus {
    guard(|| {
        let (val, err) = kernels::integrated_kernel_with_error(family(family_code)?, n, u, v, tol)?;
        write(value, val, "value")?;
        write_opt(abs_err, err);
        Ok(())
    })
}

/// `g(lambda) = lambda^{-1/2} arctan(lambda^{-1/2} / 2)` for `lambda > 0`.
#[no_mangle]
pub unsafe extern "C" fn rkl_subordination_g(lambda: f64, value: *mut f64) -> RklStatus {
    guard(|| {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda = {lambda} must be positive and finite")));
        }
        write(value, schrodinger::subordination_g(lambda), "value")
    })
}

// ------------------------------------------------------------------- grids

/// `count` points from `u_min` to `u_max` inclusive.
#[no_mangle]
pub unsafe extern "C" fn rkl_grid_new(u_min: f64, u_max: f64, count: usize, out: *mut *mut RklGrid) -> RklStatus {
    guard(|| {
        let g = Grid::new(u_min, u_max, count)?;
        write(out, boxed(RklGrid(g)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rkl_grid_count(grid: *const RklGrid, count: *mut usize) -> RklStatus {
    guard(|| write(count, deref(grid, "grid")?.0.count(), "count"))
}

#[no_mangle]
pub unsafe extern "C" fn rkl_grid_point(grid: *const RklGrid, i: usize, u: *mut f64) -> RklStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        if i >= g.count() {
            return Err(invalid(format!("index {i} outside a grid of {} points", g.count())));
        }
        write(u, g.point(i), "u")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rkl_grid_free(grid: *mut RklGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

// --------------------------------------------------------------- operators

unsafe fn make_operator(
    out: *mut *mut RklOperator,
    grid: *const RklGrid,
    f: impl FnOnce(&Grid) -> riesz_kernels::Result<DiscreteOperator>,
) -> RklStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let op = f(&deref(grid, "grid")?.0)?;
        write(out, boxed(RklOperator(op)), "out")
    })
}

/// Finite-difference `H(xi) = -d^2/du^2 + xi^2 e^{2u}` with Dirichlet ends.
#[no_mangle]
pub unsafe extern "C" fn rkl_operator_hamiltonian(
    xi: f64,
    grid: *const RklGrid,
    out: *mut *mut RklOperator,
) -> RklStatus {
    make_operator(out, grid, |g| schrodinger::build_h(xi, g))
}

/// `(t^2 + H(xi))^{-1}` of the finite-difference operator.
#[no_mangle]
pub unsafe extern "C" fn rkl_operator_resolvent(
    xi: f64,
    t: f64,
    grid: *const RklGrid,
    out: *mut *mut RklOperator,
) -> RklStatus {
    make_operator(out, grid, |g| schrodinger::resolvent_fd(xi, t, g))
}

/// Discretised `(xi d/dxi)^n M_j(xi)` built from the integrated kernels.
#[no_mangle]
pub unsafe extern "C" fn rkl_operator_multiplier(
    family_code: i32,
    n: usize,
    xi: f64,
    grid: *const RklGrid,
    out: *mut *mut RklOperator,
) -> RklStatus {
    match family(family_code) {
        Ok(f) => make_operator(out, grid, |g| schrodinger::xi_derivative_op(f, n, xi, g)),
        Err(Failure(status, msg)) => {
            set_error(&msg);
            status
        }
    }
}

#[no_mangle]
pub unsafe extern "C" fn rkl_operator_dim(op: *const RklOperator, dim: *mut usize) -> RklStatus {
    guard(|| write(dim, deref(op, "op")?.0.dim(), "dim"))
}

#[no_mangle]
pub unsafe extern "C" fn rkl_operator_get(op: *const RklOperator, i: usize, j: usize, value: *mut f64) -> RklStatus {
    guard(|| {
        let op = &deref(op, "op")?.0;
        if i >= op.dim() || j >= op.dim() {
            return Err(invalid(format!("entry ({i}, {j}) outside a {0}x{0} operator", op.dim())));
        }
        write(value, op.get(i, j), "value")
    })
}

/// Copies the entries in row-major order; `len` must be at least `dim^2`.
#[no_mangle]
pub unsafe extern "C" fn rkl_operator_copy(op: *const RklOperator, buf: *mut f64, len: usize) -> RklStatus {
    guard(|| {
        let op = &deref(op, "op")?.0;
        let d = op.dim();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < d * d {
            return Err(invalid(format!("buffer of {len} doubles, need {}", d * d)));
        }
        let out = std::slice::from_raw_parts_mut(buf, d * d);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = op.get(i, j);
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rkl_operator_spectral_norm(op: *const RklOperator, norm: *mut f64) -> RklStatus {
    guard(|| write(norm, deref(op, "op")?.0.spectral_norm()?, "norm"))
}

/// Norm of the operator on `L^2(w)`; the weight must live on the same grid.
#[no_mangle]
pub unsafe extern "C" fn rkl_operator_weighted_norm(
    op: *const RklOperator,
    weight: *const RklWeight,
    norm: *mut f64,
) -> RklStatus {
    guard(|| {
        let op = &deref(op, "op")?.0;
        let w = &deref(weight, "weight")?.0;
        write(norm, schrodinger::weighted_norm(op, w)?, "norm")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rkl_operator_free(op: *mut RklOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

// ----------------------------------------------------------------- weights

/// Samples the weight family named by `id` (for example
/// `"power:a=0.3:center=0"`) on `grid`.
#[no_mangle]
pub unsafe extern "C" fn rkl_weight_new(
    id: *const c_char,
    grid: *const RklGrid,
    out: *mut *mut RklWeight,
) -> RklStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let family: WeightFamily = string(id, "id")?.parse()?;
        let w = Weight::new(family, &deref(grid, "grid")?.0)?;
        write(out, boxed(RklWeight(w)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rkl_weight_a2(weight: *const RklWeight, a2: *mut f64) -> RklStatus {
    guard(|| write(a2, deref(weight, "weight")?.0.a2_estimate(), "a2"))
}

#[no_mangle]
pub unsafe extern "C" fn rkl_weight_free(weight: *mut RklWeight) {
    if !weight.is_null() {
        drop(Box::from_raw(weight));
    }
}

// ------------------------------------------------------------ verification

/// Runs a verification suite (`bessel`, `kernels`, `estimates`,
/// `operators` or `all`) and writes its reports to `out_dir`.
///
/// `preset` (`default` or `quick`) and `out_dir` may be `NULL`; the output
/// directory then defaults to `reports`. `parallel = 0` uses all cores.
/// `failing`, optional, receives the number of reports that differ from
/// their expectation; any such report makes the call return
/// `RKL_STATUS_VERIFICATION_FAILED`.
#[no_mangle]
pub unsafe extern "C" fn rkl_verify(
    suite: *const c_char,
    preset: *const c_char,
    out_dir: *const c_char,
    parallel: usize,
    failing: *mut usize,
) -> RklStatus {
    guard(|| {
        let suite: SuiteSelection = string(suite, "suite")?.parse()?;
        let args = VerifyArgs {
            suite: Some(suite),
            preset: opt_string(preset, "preset")?.map(str::to_string),
            out: opt_string(out_dir, "out_dir")?.map(PathBuf::from),
            parallel: (parallel > 0).then_some(parallel),
            ..Default::default()
        };
        let cfg = cli::resolve(&args)?;
        let outcome = cli::run_verify(&cfg)?;
        write_opt(failing, outcome.aggregate.failing.len());
        if outcome.aggregate.passed {
            Ok(())
        } else {
            Err(Failure(
                RklStatus::VerificationFailed,
                format!("failing: {}", outcome.aggregate.failing.join(", ")),
            ))
        }
    })
}
