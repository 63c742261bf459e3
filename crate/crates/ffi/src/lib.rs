//! C interface to the `hetlp` estimator.
//!
//! Estimates live behind an opaque `HetlpEstimate` handle created by
//! `hetlp_estimate_new` and released with `hetlp_estimate_free`. Every fallible
//! call returns a `HetlpStatus`; on failure, `hetlp_last_error` gives a message
//! for the calling thread. Output arrays are caller-allocated; a call that is
//! handed a short buffer fails with `HETLP_STATUS_BUFFER_TOO_SMALL`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hetlp::inference::functional::StructuralIrf;
use hetlp::inference::{bonferroni_bands, default_bandwidth, evaluate, pointwise_bands, supt_bands, Identification};
use hetlp::pipeline::{bootstrap, estimate, EstimationOptions, StructuralEstimate};
use hetlp::{DesignSpec, Error, Panel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HetlpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    BufferTooSmall = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HetlpBandKind {
    Pointwise = 0,
    Supt = 1,
    Bonferroni = 2,
}

/// Opaque estimate handle.
pub struct HetlpEstimate {
    inner: StructuralEstimate,
    names: Vec<String>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(err: Error) -> HetlpStatus {
    set_error(err.to_string());
    if err.is_numerical() {
        HetlpStatus::Numerical
    } else {
        HetlpStatus::InvalidArgument
    }
}

fn guard(f: impl FnOnce() -> HetlpStatus) -> HetlpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => {
            set_error("internal panic");
            HetlpStatus::Panic
        }
    }
}

/// Copies `src` into a caller buffer of `len` doubles.
///
/// # Safety
/// `dst` must point to `len` writable doubles.
unsafe fn copy_out(src: &[f64], dst: *mut f64, len: usize) -> HetlpStatus {
    if dst.is_null() {
        set_error("output buffer is null");
        return HetlpStatus::NullPointer;
    }
    if len < src.len() {
        set_error(format!("output buffer holds {len} values, {} needed", src.len()));
        return HetlpStatus::BufferTooSmall;
    }
    // SAFETY: the caller guarantees `dst` has room for `len >= src.len()` doubles.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    HetlpStatus::Ok
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hetlp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hetlp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Bootstrap bandwidth rule `round(0.75 T^{1/3})`, at least 1.
#[no_mangle]
pub extern "C" fn hetlp_default_bandwidth(t_len: usize) -> usize {
    default_bandwidth(t_len)
}

/// Estimates responses, impact vector and scores.
///
/// `data` holds `t_len * n` values period by period; `instrument` holds
/// `t_len` values. `trend` is the polynomial degree, -1 for none.
///
/// # Safety
/// `data` and `instrument` must point to the stated number of doubles and
/// `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn hetlp_estimate_new(
    data: *const f64,
    t_len: usize,
    n: usize,
    instrument: *const f64,
    lags: usize,
    trend: i32,
    h1: usize,
    h2: usize,
    shock: usize,
    out: *mut *mut HetlpEstimate,
) -> HetlpStatus {
    guard(|| {
        if data.is_null() || instrument.is_null() || out.is_null() {
            set_error("null pointer argument");
            return HetlpStatus::NullPointer;
        }
        let Some(total) = t_len.checked_mul(n) else {
            set_error("panel size overflows");
            return HetlpStatus::InvalidArgument;
        };
        // SAFETY: the caller guarantees the lengths.
        let (values, z) = unsafe {
            (std::slice::from_raw_parts(data, total), std::slice::from_raw_parts(instrument, t_len))
        };
        let panel = match Panel::from_row_major(t_len, n, values) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let spec = DesignSpec::new(lags, trend, h1, h2);
        match estimate(&panel, z, &spec, shock, &EstimationOptions::default()) {
            Ok(inner) => {
                let names = panel.names().to_vec();
                // SAFETY: `out` is non-null and writable per the contract.
                unsafe { *out = Box::into_raw(Box::new(HetlpEstimate { inner, names })) };
                HetlpStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases an estimate. Null is ignored.
///
/// # Safety
/// `est` must be null or a handle from `hetlp_estimate_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hetlp_estimate_free(est: *mut HetlpEstimate) {
    if !est.is_null() {
        // SAFETY: the handle came from `Box::into_raw` and is freed once.
        drop(unsafe { Box::from_raw(est) });
    }
}

/// Borrows the estimate behind a handle, recording an error for null.
///
/// # Safety
/// `est` must be null or a live handle.
unsafe fn handle<'a>(est: *const HetlpEstimate) -> Result<&'a HetlpEstimate, HetlpStatus> {
    if est.is_null() {
        set_error("estimate handle is null");
        return Err(HetlpStatus::NullPointer);
    }
    // SAFETY: non-null live handle per the contract.
    Ok(unsafe { &*est })
}

/// Writes the number of variables, `H1`, `H2` and the parameter-vector length.
/// Any output pointer may be null.
///
/// # Safety
/// `est` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hetlp_estimate_dims(
    est: *const HetlpEstimate,
    n: *mut usize,
    h1: *mut usize,
    h2: *mut usize,
    theta_len: *mut usize,
) -> HetlpStatus {
    // SAFETY: forwarded contract.
    let e = match unsafe { handle(est) } {
        Ok(e) => e,
        Err(s) => return s,
    };
    let vals = [
        (n, e.inner.lp.theta.n()),
        (h1, e.inner.lp.spec.h1),
        (h2, e.inner.lp.spec.h2),
        (theta_len, e.inner.lp.theta.dim()),
    ];
    for (p, v) in vals {
        if !p.is_null() {
            // SAFETY: non-null outputs are writable per the contract.
            unsafe { *p = v };
        }
    }
    HetlpStatus::Ok
}

/// Flat parameter vector: `vec(Sigma)`, `vec(C_1..C_H1)`, `gamma`, column-major.
///
/// # Safety
/// `est` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hetlp_estimate_theta(est: *const HetlpEstimate, buf: *mut f64, len: usize) -> HetlpStatus {
    // SAFETY: forwarded contract.
    match unsafe { handle(est) } {
        Ok(e) => unsafe { copy_out(&e.inner.lp.theta.to_flat(), buf, len) },
        Err(s) => s,
    }
}

/// Impact vector of a one-standard-deviation shock (`n` values).
///
/// # Safety
/// `est` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hetlp_estimate_impact(est: *const HetlpEstimate, buf: *mut f64, len: usize) -> HetlpStatus {
    // SAFETY: forwarded contract.
    match unsafe { handle(est) } {
        Ok(e) => unsafe { copy_out(e.inner.impact.b.as_slice(), buf, len) },
        Err(s) => s,
    }
}

/// Structural response of `variable` at horizons `0..=H2` (`H2 + 1` values).
///
/// # Safety
/// `est` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hetlp_estimate_irf(
    est: *const HetlpEstimate,
    variable: usize,
    buf: *mut f64,
    len: usize,
) -> HetlpStatus {
    // SAFETY: forwarded contract.
    let e = match unsafe { handle(est) } {
        Ok(e) => e,
        Err(s) => return s,
    };
    if variable >= e.inner.lp.theta.n() {
        set_error(format!("variable {variable} out of range"));
        return HetlpStatus::InvalidArgument;
    }
    let path: Vec<f64> = e.inner.psi.iter().map(|p| p[variable]).collect();
    // SAFETY: forwarded contract.
    unsafe { copy_out(&path, buf, len) }
}

/// Band for the structural response of `variable` at horizons `0..=H2` from
/// `draws` dependent wild bootstrap draws. `bandwidth = 0` selects the rule.
/// `lower` and `upper` each receive `H2 + 1` values.
///
/// # Safety
/// `est` must be a live handle; `lower` and `upper` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hetlp_estimate_bands(
    est: *const HetlpEstimate,
    variable: usize,
    draws: usize,
    bandwidth: usize,
    seed: u64,
    alpha: f64,
    kind: HetlpBandKind,
    lower: *mut f64,
    upper: *mut f64,
    len: usize,
) -> HetlpStatus {
    guard(|| {
        // SAFETY: forwarded contract.
        let e = match unsafe { handle(est) } {
            Ok(e) => e,
            Err(s) => return s,
        };
        if variable >= e.inner.lp.theta.n() {
            set_error(format!("variable {variable} out of range"));
            return HetlpStatus::InvalidArgument;
        }
        let bw = (bandwidth > 0).then_some(bandwidth);
        let ds = match bootstrap(&e.inner, draws, bw, seed) {
            Ok(d) => d,
            Err(err) => return fail(err),
        };
        let id = Identification { lags: e.inner.lp.spec.lags, sign: e.inner.sign, names: e.names.clone() };
        let f = StructuralIrf { id, variables: vec![variable], h2: e.inner.lp.spec.h2 };
        let band = evaluate(&ds, &f).and_then(|fd| match kind {
            HetlpBandKind::Pointwise => pointwise_bands(&fd, alpha),
            HetlpBandKind::Supt => supt_bands(&fd, alpha),
            HetlpBandKind::Bonferroni => bonferroni_bands(&fd, alpha),
        });
        let band = match band {
            Ok(b) => b,
            Err(err) => return fail(err),
        };
        let lo: Vec<f64> = (0..band.center.len()).map(|j| band.lower(j)).collect();
        let hi: Vec<f64> = (0..band.center.len()).map(|j| band.upper(j)).collect();
        // SAFETY: forwarded contract.
        match unsafe { copy_out(&lo, lower, len) } {
            HetlpStatus::Ok => unsafe { copy_out(&hi, upper, len) },
            s => s,
        }
    })
}
