//! C ABI over the `cascade-iv` estimators.
//!
//! Every fallible function returns a [`CivStatus`]. On failure the message and
//! the stable error code of the last error on the calling thread are
//! available from [`civ_last_error_message`] and [`civ_last_error_code`].
//! Matrices are passed row-major. Handles are opaque and must be released with
//! their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use cascade_iv::cascade::{cascade_solve, neumann_solve, spectral_radius, three_program_beta2, CascadeOptions, VacancyMatrix};
use cascade_iv::estimator::{estimate, EstimateSet, FirstStage};
use cascade_iv::io::fixtures::fixture_report;
use cascade_iv::linalg::{Mat, Vector};
use cascade_iv::{Dataset, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CivStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad shapes, values or files.
    InvalidInput = 2,
    /// Singular systems, divergent series and other numerical failures.
    Numerical = 3,
    /// A Rust panic was caught at the boundary.
    Panic = 4,
}

/// Which per-treatment column of an estimate set to read.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CivColumn {
    Beta = 0,
    SeBeta = 1,
    Wald = 2,
    SeWald = 3,
    Delta = 4,
    SeDelta = 5,
    ReducedForm = 6,
    /// Total effect from the cascade solve (equals `Beta` up to rounding).
    Total = 7,
}

/// Opaque dataset handle.
pub struct CivDataset(Dataset);

/// Opaque estimate-set handle.
pub struct CivEstimates(EstimateSet);

struct LastError {
    code: CString,
    message: CString,
}

thread_local! {
    static LAST: RefCell<Option<LastError>> = const { RefCell::new(None) };
}

fn set_last(code: &str, message: &str) {
    let clean = |s: &str| CString::new(s.replace('\0', " ")).expect("nul bytes removed");
    LAST.with(|l| *l.borrow_mut() = Some(LastError { code: clean(code), message: clean(message) }));
}

fn fail(e: &Error) -> CivStatus {
    set_last(e.code(), &e.to_string());
    match e.exit_code() {
        4 => CivStatus::Numerical,
        _ => CivStatus::InvalidInput,
    }
}

fn null_arg(name: &str) -> CivStatus {
    set_last("ffi.null_pointer", &format!("argument '{name}' is null"));
    CivStatus::NullPointer
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), CivStatus>) -> CivStatus {
    LAST.with(|l| *l.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CivStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_last("ffi.panic", "internal panic");
            CivStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], CivStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null_arg(name));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], CivStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null_arg(name));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

fn square(k: usize, data: &[f64]) -> Mat {
    Mat::from_row_slice(k, k, data)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn civ_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last error on this thread, or NULL. Valid until the next
/// call into the library from the same thread.
#[no_mangle]
pub extern "C" fn civ_last_error_message() -> *const c_char {
    LAST.with(|l| l.borrow().as_ref().map_or(ptr::null(), |e| e.message.as_ptr()))
}

/// Stable dotted error code of the last error (e.g. `cascade.divergent_cascade`), or NULL.
#[no_mangle]
pub extern "C" fn civ_last_error_code() -> *const c_char {
    LAST.with(|l| l.borrow().as_ref().map_or(ptr::null(), |e| e.code.as_ptr()))
}

/// Builds a dataset from `n` rows, `k` treatments/instruments and `p`
/// control columns (one of which must be constant). `clusters` holds one
/// integer cluster id per row.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn civ_dataset_new(
    n: usize,
    k: usize,
    p: usize,
    y: *const f64,
    a: *const f64,
    z: *const f64,
    x: *const f64,
    clusters: *const u64,
    out: *mut *mut CivDataset,
) -> CivStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let y = input(y, n, "y")?;
        let a = input(a, n * k, "a")?;
        let z = input(z, n * k, "z")?;
        let x = input(x, n * p, "x")?;
        if clusters.is_null() && n > 0 {
            return Err(null_arg("clusters"));
        }
        let cl: Vec<String> = if n == 0 { Vec::new() } else { slice::from_raw_parts(clusters, n).iter().map(u64::to_string).collect() };
        let d = Dataset::new(
            Vector::from_column_slice(y),
            Mat::from_row_slice(n, k, a),
            Mat::from_row_slice(n, k, z),
            Mat::from_row_slice(n, p, x),
            cl,
            None,
        )
        .map_err(|e| fail(&e))?;
        *out = Box::into_raw(Box::new(CivDataset(d)));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from [`civ_dataset_new`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn civ_dataset_free(ds: *mut CivDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fits 2SLS, Wald ratios and cascade effects with cluster-robust errors.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn civ_estimate(ds: *const CivDataset, out: *mut *mut CivEstimates) -> CivStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null_arg("ds"))?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let est = estimate(&ds.0).map_err(|e| fail(&e))?;
        *out = Box::into_raw(Box::new(CivEstimates(est)));
        Ok(())
    })
}

/// Number of treatments in an estimate set (0 for NULL).
///
/// # Safety
/// `est` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn civ_estimates_k(est: *const CivEstimates) -> usize {
    est.as_ref().map_or(0, |e| e.0.k())
}

/// Copies one column into `buf`, which must hold `len >= k` values.
///
/// # Safety
/// `est` must be a live handle and `buf` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn civ_estimates_get(est: *const CivEstimates, column: CivColumn, buf: *mut f64, len: usize) -> CivStatus {
    guard(|| {
        let est = &est.as_ref().ok_or_else(|| null_arg("est"))?.0;
        let src: &[f64] = match column {
            CivColumn::Beta => &est.beta,
            CivColumn::SeBeta => &est.se_beta,
            CivColumn::Wald => &est.wald,
            CivColumn::SeWald => &est.se_wald,
            CivColumn::Delta => &est.cascade_delta,
            CivColumn::SeDelta => &est.se_delta,
            CivColumn::ReducedForm => &est.rf,
            CivColumn::Total => &est.cascade_t,
        };
        if len < src.len() {
            return Err(fail(&Error::LengthMismatch { left: len, right: src.len() }));
        }
        output(buf, src.len(), "buf")?.copy_from_slice(src);
        Ok(())
    })
}

/// # Safety
/// `est` must come from [`civ_estimate`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn civ_estimates_free(est: *mut CivEstimates) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Total effects `t` and cascade terms `delta` from a K x K first-stage
/// matrix (rows = treatments, columns = instruments) and the reduced form.
///
/// # Safety
/// `pi` holds k*k values; `rf`, `t_out` and `delta_out` hold k values each.
#[no_mangle]
pub unsafe extern "C" fn civ_cascade_solve(k: usize, pi: *const f64, rf: *const f64, t_out: *mut f64, delta_out: *mut f64) -> CivStatus {
    guard(|| {
        let fs = FirstStage::new(square(k, input(pi, k * k, "pi")?)).map_err(|e| fail(&e))?;
        let rf = Vector::from_column_slice(input(rf, k, "rf")?);
        let sol = cascade_solve(&fs, &rf, &CascadeOptions::default()).map_err(|e| fail(&e))?;
        output(t_out, k, "t_out")?.copy_from_slice(sol.t.as_slice());
        output(delta_out, k, "delta_out")?.copy_from_slice(sol.delta.as_slice());
        Ok(())
    })
}

/// Sums the cascade round by round from a first-stage matrix and Wald
/// ratios. Writes the total effects and the number of rounds used.
///
/// # Safety
/// `pi` holds k*k values; `wald` and `t_out` hold k values; `rounds_out` is writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn civ_neumann_solve(
    k: usize,
    pi: *const f64,
    wald: *const f64,
    tol: f64,
    max_rounds: usize,
    t_out: *mut f64,
    rounds_out: *mut usize,
) -> CivStatus {
    guard(|| {
        let fs = FirstStage::new(square(k, input(pi, k * k, "pi")?)).map_err(|e| fail(&e))?;
        let vm = VacancyMatrix::from_first_stage(&fs).map_err(|e| fail(&e))?;
        let w = Vector::from_column_slice(input(wald, k, "wald")?);
        let sol = neumann_solve(&vm, &w, tol, max_rounds).map_err(|e| fail(&e))?;
        output(t_out, k, "t_out")?.copy_from_slice(sol.t.as_slice());
        if let Some(r) = rounds_out.as_mut() {
            *r = sol.rounds.as_ref().map_or(0, Vec::len);
        }
        Ok(())
    })
}

/// Upper bound on the spectral radius of |M| for a K x K vacancy matrix.
///
/// # Safety
/// `m` holds k*k values and `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn civ_spectral_radius(k: usize, m: *const f64, out: *mut f64) -> CivStatus {
    guard(|| {
        let m = square(k, input(m, k * k, "m")?);
        *out.as_mut().ok_or_else(|| null_arg("out"))? = spectral_radius(&m, 10_000, 0);
        Ok(())
    })
}

/// Closed-form 2SLS coefficient for the second program in the two-program
/// design, from complier shares and the three pairwise effects.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn civ_three_program_beta2(p02: f64, p12: f64, e20: f64, e21: f64, e10: f64, out: *mut f64) -> CivStatus {
    guard(|| {
        let v = three_program_beta2(p02, p12, e20, e21, e10).map_err(|e| fail(&e))?;
        *out.as_mut().ok_or_else(|| null_arg("out"))? = v;
        Ok(())
    })
}

/// Runs the embedded reference-table checks. Writes the number of checks
/// and the number that failed.
///
/// # Safety
/// `total` and `failed` must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn civ_fixture_checks(total: *mut usize, failed: *mut usize) -> CivStatus {
    guard(|| {
        let report = fixture_report().map_err(|e| fail(&e))?;
        if let Some(t) = total.as_mut() {
            *t = report.checks.len();
        }
        if let Some(f) = failed.as_mut() {
            *f = report.failures().len();
        }
        Ok(())
    })
}

/// Reads a string returned by the library. Test helper, not exported.
///
/// # Safety
/// `p` must be NULL or a pointer returned by this library that is still valid.
#[doc(hidden)]
pub unsafe fn c_str(p: *const c_char) -> Option<String> {
    if p.is_null() {
        None
    } else {
        Some(CStr::from_ptr(p).to_string_lossy().into_owned())
    }
}
