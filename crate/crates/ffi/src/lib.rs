//! C ABI over `erm-core`.
//!
//! Objects are opaque handles created by `erm_*_create`-style functions and
//! released with the matching `erm_*_free`. Every fallible call returns an
//! [`ErmStatus`]; on failure [`erm_last_error_message`] describes the error
//! for the calling thread. Output pointers are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use erm_core::cloud::{sample_cloud, Cloud, CloudConfig};
use erm_core::matrix::{build_matrix, EmissionMatrix};
use erm_core::spectrum::{decay_curve, eigenvalues, Spectrum};
use erm_core::{locator, matrix, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErmStatus {
    Ok = 0,
    InvalidConfig = 1,
    Usage = 2,
    Resource = 3,
    Numerical = 4,
    InsufficientData = 5,
    Io = 6,
    Format = 7,
    Checksum = 8,
    NullPointer = 9,
    Panic = 10,
}

/// Sampled atomic cloud.
pub struct ErmCloud(Cloud);

/// Emission-rate matrix of a cloud.
pub struct ErmMatrix(EmissionMatrix);

/// Ascending eigenvalues with their provenance.
pub struct ErmSpectrum(Spectrum);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn status_of(error: &Error) -> ErmStatus {
    match error {
        Error::Config(_) => ErmStatus::InvalidConfig,
        Error::Usage(_) => ErmStatus::Usage,
        Error::Resource { .. } => ErmStatus::Resource,
        Error::Numerical { .. } => ErmStatus::Numerical,
        Error::InsufficientData(_) => ErmStatus::InsufficientData,
        Error::Format { .. } | Error::Json(_) => ErmStatus::Format,
        Error::Checksum { .. } => ErmStatus::Checksum,
        Error::Io { .. } => ErmStatus::Io,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> ErmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ErmStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("{what} is null"));
            ErmStatus::NullPointer
        }
        Ok(Err(Failure::Usage(message))) => {
            set_last_error(message);
            ErmStatus::Usage
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            ErmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_into(src: &[f64], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < src.len() {
        return Err(Failure::Usage(format!(
            "buffer holds {capacity} values, need {}",
            src.len()
        )));
    }
    if src.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(Failure::Null("output buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

unsafe fn path_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a Path, Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| Failure::Usage(format!("{what} is not valid UTF-8")))
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn erm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn erm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Samples `n_atoms` standard-Gaussian positions for realization
/// `realization_index` of `base_seed`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_sample(
    n_atoms: usize,
    b: f64,
    base_seed: u64,
    realization_index: u64,
    out: *mut *mut ErmCloud,
) -> ErmStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let cloud = sample_cloud(&CloudConfig::new(n_atoms, b, base_seed, realization_index)?)?;
        write_out(out, Box::into_raw(Box::new(ErmCloud(cloud))), "out")
    })
}

/// Builds a cloud from `n_atoms` xyz triples stored contiguously.
///
/// # Safety
/// `xyz` must point to `3 * n_atoms` doubles and `out` must be valid for one
/// pointer write.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_from_positions(
    xyz: *const f64,
    n_atoms: usize,
    b: f64,
    out: *mut *mut ErmCloud,
) -> ErmStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let flat = slice(xyz, n_atoms.saturating_mul(3), "xyz")?;
        let points = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let cloud = Cloud::from_positions(points, b)?;
        write_out(out, Box::into_raw(Box::new(ErmCloud(cloud))), "out")
    })
}

/// # Safety
/// `cloud` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_free(cloud: *mut ErmCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

/// Number of atoms, or 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_len(cloud: *const ErmCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Copies the positions as xyz triples into `out` (`3 * len` doubles).
///
/// # Safety
/// `cloud` must be a live handle and `out` valid for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn erm_cloud_positions(
    cloud: *const ErmCloud,
    out: *mut f64,
    capacity: usize,
) -> ErmStatus {
    guard(|| {
        let cloud = deref(cloud, "cloud")?;
        let flat: Vec<f64> = cloud.0.positions().iter().flatten().copied().collect();
        copy_into(&flat, out, capacity)
    })
}

/// # Safety
/// `cloud` must be a live handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn erm_matrix_build(
    cloud: *const ErmCloud,
    out: *mut *mut ErmMatrix,
) -> ErmStatus {
    guard(|| {
        let cloud = deref(cloud, "cloud")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let m = build_matrix(&cloud.0)?;
        write_out(out, Box::into_raw(Box::new(ErmMatrix(m))), "out")
    })
}

/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn erm_matrix_free(matrix: *mut ErmMatrix) {
    if !matrix.is_null() {
        drop(Box::from_raw(matrix));
    }
}

/// Matrix dimension, or 0 for a null handle.
///
/// # Safety
/// `matrix` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn erm_matrix_n(matrix: *const ErmMatrix) -> usize {
    matrix.as_ref().map_or(0, |m| m.0.n_atoms())
}

/// Copies the `N * N` row-major entries into `out`.
///
/// # Safety
/// `matrix` must be a live handle and `out` valid for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn erm_matrix_entries(
    matrix: *const ErmMatrix,
    out: *mut f64,
    capacity: usize,
) -> ErmStatus {
    guard(|| copy_into(deref(matrix, "matrix")?.0.entries(), out, capacity))
}

/// Diagonalizes the matrix and checks the spectral invariants.
///
/// # Safety
/// `matrix` must be a live handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn erm_spectrum_compute(
    matrix: *const ErmMatrix,
    out: *mut *mut ErmSpectrum,
) -> ErmStatus {
    guard(|| {
        let matrix = deref(matrix, "matrix")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let s = eigenvalues(&matrix.0)?;
        write_out(out, Box::into_raw(Box::new(ErmSpectrum(s))), "out")
    })
}

/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn erm_spectrum_free(spectrum: *mut ErmSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Number of eigenvalues, or 0 for a null handle.
///
/// # Safety
/// `spectrum` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn erm_spectrum_len(spectrum: *const ErmSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.0.eigenvalues().len())
}

/// Copies the ascending eigenvalues into `out`.
///
/// # Safety
/// `spectrum` must be a live handle and `out` valid for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn erm_spectrum_eigenvalues(
    spectrum: *const ErmSpectrum,
    out: *mut f64,
    capacity: usize,
) -> ErmStatus {
    guard(|| copy_into(deref(spectrum, "spectrum")?.0.eigenvalues(), out, capacity))
}

/// # Safety
/// `spectrum` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn erm_spectrum_min(spectrum: *const ErmSpectrum, out: *mut f64) -> ErmStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        write_out(out, s.0.min_eigenvalue(), "out")
    })
}

/// Number of eigenvalues strictly below `threshold`.
///
/// # Safety
/// `spectrum` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn erm_spectrum_count_condensate(
    spectrum: *const ErmSpectrum,
    threshold: f64,
    out: *mut usize,
) -> ErmStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        let count = s.0.count_condensate(threshold)?;
        write_out(out, count, "out")
    })
}

/// Writes the binary archive into directory `dir` under its canonical name.
///
/// # Safety
/// `spectrum` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn erm_spectrum_write_archive(
    spectrum: *const ErmSpectrum,
    dir: *const c_char,
) -> ErmStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        s.0.write_archive(path_arg(dir, "dir")?)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for one pointer
/// write.
#[no_mangle]
pub unsafe extern "C" fn erm_spectrum_read_archive(
    path: *const c_char,
    out: *mut *mut ErmSpectrum,
) -> ErmStatus {
    guard(|| {
        let path = path_arg(path, "path")?;
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let s = Spectrum::read_archive(path)?;
        write_out(out, Box::into_raw(Box::new(ErmSpectrum(s))), "out")
    })
}

/// Survival probability of the normalized state `initial` at each of the
/// `n_times` ascending times; `survival` receives `n_times` values.
///
/// # Safety
/// `matrix` must be a live handle, `initial` must hold `n_initial` doubles,
/// and `times` and `survival` must hold `n_times` doubles each.
#[no_mangle]
pub unsafe extern "C" fn erm_decay_curve(
    matrix: *const ErmMatrix,
    initial: *const f64,
    n_initial: usize,
    times: *const f64,
    n_times: usize,
    survival: *mut f64,
) -> ErmStatus {
    guard(|| {
        let matrix = deref(matrix, "matrix")?;
        let initial = slice(initial, n_initial, "initial")?;
        let times = slice(times, n_times, "times")?;
        let curve = decay_curve(&matrix.0, initial, times)?;
        copy_into(&curve.survival, survival, n_times)
    })
}

/// Unnormalized cardinal sine.
#[no_mangle]
pub extern "C" fn erm_sinc(x: f64) -> f64 {
    matrix::sinc(x)
}

/// `(2 pi b)^{3/2} / sqrt(N)`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn erm_peak_density(n_atoms: usize, b: f64, out: *mut f64) -> ErmStatus {
    guard(|| write_out(out, matrix::peak_density(n_atoms, b)?, "out"))
}

/// `exp(1 - gamma/2)`.
#[no_mangle]
pub extern "C" fn erm_lbar_analytic() -> f64 {
    locator::lbar_analytic()
}

/// `lbar^2 e`.
///
/// # Safety
/// `out` must be valid for one write.
#[no_mangle]
pub unsafe extern "C" fn erm_b_c0(lbar: f64, out: *mut f64) -> ErmStatus {
    guard(|| write_out(out, locator::b_c0(lbar)?, "out"))
}

/// Monte Carlo geometric-mean pair distance; `stderr` may be null.
///
/// # Safety
/// `estimate` must be valid for one write; `stderr` null or valid.
#[no_mangle]
pub unsafe extern "C" fn erm_lbar_monte_carlo(
    n_pairs: u64,
    seed: u64,
    estimate: *mut f64,
    stderr: *mut f64,
) -> ErmStatus {
    guard(|| {
        if estimate.is_null() {
            return Err(Failure::Null("estimate"));
        }
        let mc = locator::lbar_monte_carlo(n_pairs, seed)?;
        estimate.write(mc.estimate);
        if !stderr.is_null() {
            stderr.write(mc.stderr);
        }
        Ok(())
    })
}
