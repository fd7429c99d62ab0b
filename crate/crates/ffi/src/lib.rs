//! C ABI over the actstat core.
//!
//! Objects are opaque handles created by `*_read`/`*_from_*`/`*_load` calls and
//! released with the matching `*_free`. Every fallible call returns an
//! [`ActStatus`]; on failure `actstat_last_error()` describes the problem for
//! the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use actstat::analytics::{self, AnalysisConfig, Report};
use actstat::binarize::{self, BinaryMatrix};
use actstat::datamodel::{read_nact, write_nact, ActivationTensor, Run};
use actstat::effdim::explained_variance_ratios;
use actstat::entropy::{self, EstimatorConfig, Method};
use actstat::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Validation = 6,
    Limit = 7,
    Numeric = 8,
    Panic = 9,
}

/// Element type of a tensor.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActDtype {
    Real32 = 1,
    Binary8 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActEstimator {
    Counts = 0,
    ChainLogistic = 1,
    ChainStumps = 2,
}

/// Opaque activation tensor.
pub struct ActTensor(ActivationTensor);

/// Opaque binary rows × neurons matrix.
pub struct ActBinary(BinaryMatrix);

/// Opaque validated run (manifest plus dumps).
pub struct ActRun(Run);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ActStatus {
    match e {
        Error::Io { .. } => ActStatus::Io,
        Error::Format(_) | Error::UnsupportedVersion(_) | Error::Truncated { .. } | Error::Manifest { .. } => {
            ActStatus::Format
        }
        Error::Shape(_) => ActStatus::Shape,
        Error::Validation(_) => ActStatus::Validation,
        Error::Limit(_) => ActStatus::Limit,
        Error::Numeric(_) => ActStatus::Numeric,
    }
}

struct Fail(ActStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ActStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ActStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            ActStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(ActStatus::NullPointer, format!("{what} is null"))
}

unsafe fn get_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn c_path(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Fail(ActStatus::InvalidArgument, "path is not valid UTF-8".into()))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn estimator(method: ActEstimator, folds: usize, seed: u64) -> EstimatorConfig {
    EstimatorConfig {
        method: match method {
            ActEstimator::Counts => Method::Counts,
            ActEstimator::ChainLogistic => Method::ChainLogistic,
            ActEstimator::ChainStumps => Method::ChainStumps,
        },
        folds,
        shuffle_seed: seed,
        subsample_seed: seed,
        ..EstimatorConfig::default()
    }
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn actstat_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn actstat_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn actstat_tensor_read(path: *const c_char, out: *mut *mut ActTensor) -> ActStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        let t = read_nact(c_path(path)?)?;
        *o = Box::into_raw(Box::new(ActTensor(t)));
        Ok(())
    })
}

/// # Safety
/// `t` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn actstat_tensor_write(t: *const ActTensor, path: *const c_char) -> ActStatus {
    guard(|| {
        let t = get_ref(t, "tensor")?;
        write_nact(&t.0, c_path(path)?)?;
        Ok(())
    })
}

/// Copy `len` row-major floats with shape `dims[0..ndim]` into a new tensor.
///
/// # Safety
/// `dims` must hold `ndim` values and `data` `len` values.
#[no_mangle]
pub unsafe extern "C" fn actstat_tensor_from_f32(
    dims: *const usize,
    ndim: usize,
    data: *const f32,
    len: usize,
    out: *mut *mut ActTensor,
) -> ActStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        let dims = slice(dims, ndim, "dims")?.to_vec();
        let data = slice(data, len, "data")?.to_vec();
        *o = Box::into_raw(Box::new(ActTensor(ActivationTensor::from_f32(dims, data)?)));
        Ok(())
    })
}

/// Copy `len` row-major 0/1 bytes with shape `dims[0..ndim]` into a new tensor.
///
/// # Safety
/// `dims` must hold `ndim` values and `data` `len` values.
#[no_mangle]
pub unsafe extern "C" fn actstat_tensor_from_binary(
    dims: *const usize,
    ndim: usize,
    data: *const u8,
    len: usize,
    out: *mut *mut ActTensor,
) -> ActStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        let dims = slice(dims, ndim, "dims")?.to_vec();
        let data = slice(data, len, "data")?.to_vec();
        *o = Box::into_raw(Box::new(ActTensor(ActivationTensor::from_binary(dims, data)?)));
        Ok(())
    })
}

/// # Safety
/// `t` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn actstat_tensor_free(t: *mut ActTensor) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// # Safety
/// `t` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn actstat_tensor_dtype(t: *const ActTensor, out: *mut ActDtype) -> ActStatus {
    guard(|| {
        let t = get_ref(t, "tensor")?;
        *out_ref(out, "out")? = match t.0.dtype() {
            actstat::datamodel::DType::Real32 => ActDtype::Real32,
            actstat::datamodel::DType::Binary8 => ActDtype::Binary8,
        };
        Ok(())
    })
}

/// Writes the rank to `ndim` and, when `dims` is non-NULL, up to `capacity`
/// dimensions into `dims`.
///
/// # Safety
/// `dims` must have room for `capacity` values when non-NULL.
#[no_mangle]
pub unsafe extern "C" fn actstat_tensor_shape(
    t: *const ActTensor,
    ndim: *mut usize,
    dims: *mut usize,
    capacity: usize,
) -> ActStatus {
    guard(|| {
        let t = get_ref(t, "tensor")?;
        let d = t.0.dims();
        *out_ref(ndim, "ndim")? = d.len();
        if !dims.is_null() {
            if capacity < d.len() {
                return Err(Fail(
                    ActStatus::InvalidArgument,
                    format!("capacity {capacity} below rank {}", d.len()),
                ));
            }
            std::slice::from_raw_parts_mut(dims, d.len()).copy_from_slice(d);
        }
        Ok(())
    })
}

/// Binarize a tensor (4-D dumps are flattened to pixel rows first). With
/// `pre_activation` nonzero the θ(x ≥ 0) rule is used, otherwise x > 0.
/// Binary tensors are taken as-is.
///
/// # Safety
/// `t` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn actstat_binarize(t: *const ActTensor, pre_activation: bool, out: *mut *mut ActBinary) -> ActStatus {
    guard(|| {
        let t = get_ref(t, "tensor")?;
        let o = out_ref(out, "out")?;
        let b = if t.0.as_binary().is_some() {
            BinaryMatrix::from_tensor(&t.0)?
        } else if pre_activation {
            binarize::binarize_pre_activation(&t.0.to_matrix()?)?
        } else {
            binarize::binarize(&t.0.to_matrix()?)?
        };
        *o = Box::into_raw(Box::new(ActBinary(b)));
        Ok(())
    })
}

/// # Safety
/// `b` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn actstat_binary_free(b: *mut ActBinary) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn actstat_binary_shape(b: *const ActBinary, rows: *mut usize, cols: *mut usize) -> ActStatus {
    guard(|| {
        let b = get_ref(b, "binary")?;
        *out_ref(rows, "rows")? = b.0.rows();
        *out_ref(cols, "cols")? = b.0.cols();
        Ok(())
    })
}

/// Fraction of active bits.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn actstat_linearity(b: *const ActBinary, out: *mut f64) -> ActStatus {
    guard(|| {
        let b = get_ref(b, "binary")?;
        *out_ref(out, "out")? = binarize::linearity(&b.0);
        Ok(())
    })
}

/// Joint entropy in bits.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn actstat_complexity(
    b: *const ActBinary,
    method: ActEstimator,
    folds: usize,
    seed: u64,
    out: *mut f64,
) -> ActStatus {
    guard(|| {
        let b = get_ref(b, "binary")?;
        let o = out_ref(out, "out")?;
        let cfg = estimator(method, folds, seed);
        cfg.validate()?;
        *o = entropy::complexity(&b.0, &cfg)?.bits;
        Ok(())
    })
}

/// Normalized total correlation; `degenerate` is set when every neuron is frozen.
///
/// # Safety
/// Pointers must be valid; `degenerate` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn actstat_total_correlation(
    b: *const ActBinary,
    method: ActEstimator,
    folds: usize,
    seed: u64,
    out: *mut f64,
    degenerate: *mut bool,
) -> ActStatus {
    guard(|| {
        let b = get_ref(b, "binary")?;
        let o = out_ref(out, "out")?;
        let cfg = estimator(method, folds, seed);
        cfg.validate()?;
        let tc = entropy::total_correlation_normalized(&b.0, &cfg)?;
        *o = tc.value;
        if let Some(d) = degenerate.as_mut() {
            *d = tc.degenerate;
        }
        Ok(())
    })
}

/// PCA effective dimension of a real tensor (4-D flattened to pixel rows).
///
/// # Safety
/// Pointers must be valid; `degenerate` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn actstat_effective_dimension(t: *const ActTensor, out: *mut f64, degenerate: *mut bool) -> ActStatus {
    guard(|| {
        let t = get_ref(t, "tensor")?;
        let o = out_ref(out, "out")?;
        let s = explained_variance_ratios(&t.0.to_matrix()?)?;
        *o = s.effective_dimension;
        if let Some(d) = degenerate.as_mut() {
            *d = s.degenerate;
        }
        Ok(())
    })
}

/// Load and validate a manifest and the headers of all its dumps.
///
/// # Safety
/// `manifest` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn actstat_run_load(manifest: *const c_char, out: *mut *mut ActRun) -> ActStatus {
    guard(|| {
        let o = out_ref(out, "out")?;
        *o = Box::into_raw(Box::new(ActRun(Run::load(c_path(manifest)?)?)));
        Ok(())
    })
}

/// # Safety
/// `r` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn actstat_run_free(r: *mut ActRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn actstat_run_layer_count(r: *const ActRun, out: *mut usize) -> ActStatus {
    guard(|| {
        let r = get_ref(r, "run")?;
        *out_ref(out, "out")? = r.0.layers().len();
        Ok(())
    })
}

/// Compute per-layer observables for every captured epoch and write
/// `trajectory.csv` and `depth_profile.csv` into `out_dir`. `max_rows` 0 means
/// no row cap.
///
/// # Safety
/// `r` must come from this library; `out_dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn actstat_run_analyze(
    r: *const ActRun,
    method: ActEstimator,
    folds: usize,
    max_rows: usize,
    seed: u64,
    out_dir: *const c_char,
) -> ActStatus {
    guard(|| {
        let r = get_ref(r, "run")?;
        let dir = c_path(out_dir)?;
        let cap = (max_rows > 0).then_some(max_rows);
        let mut est = estimator(method, folds, seed);
        est.max_rows = cap;
        est.validate()?;
        let cfg = AnalysisConfig {
            estimator: est,
            effdim_max_rows: cap,
            effdim_seed: seed,
        };
        let report = Report {
            trajectory: analytics::analyze_run(&r.0, &cfg)?,
            ..Report::default()
        };
        analytics::emit_report(&report, &dir)?;
        Ok(())
    })
}
