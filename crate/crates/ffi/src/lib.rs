//! C ABI for the cbmap embedding library.
//!
//! Every function returns a [`CbmapStatus`]; on failure the message is kept in
//! a thread-local slot readable through [`cbmap_last_error_message`]. Fits and
//! models are opaque heap handles released with their `_free` function. Arrays
//! cross the boundary as row-major `double` buffers with explicit lengths.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cbmap::metrics::{global_score, knn_accuracy, HoldoutSpec};
use cbmap::{
    fit, transform, CbmapConfig, CbmapError, CenterInit, DataMatrix, FitResult, TransformOptions,
};
use ndarray::{Array2, ArrayView2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbmapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    Degenerate = 5,
    BufferTooSmall = 6,
    ParseError = 7,
    VersionMismatch = 8,
    IoError = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbmapCenterInit {
    Pca = 0,
    Random = 1,
}

/// Fit parameters. Obtain defaults from [`cbmap_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CbmapFitOptions {
    pub n_clusters: usize,
    pub out_dim: usize,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub center_init: CbmapCenterInit,
    pub init_noise_std: f64,
    pub standardize: bool,
    pub seed: u64,
}

/// Result of a fit: embedding, loss history, cluster labels and model.
pub struct CbmapFit(FitResult);

/// A fitted model that can embed new rows.
pub struct CbmapModel(cbmap::CbmapModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CbmapStatus, String);

impl From<CbmapError> for Failure {
    fn from(e: CbmapError) -> Self {
        let status = match &e {
            CbmapError::DimensionMismatch { .. } => CbmapStatus::DimensionMismatch,
            CbmapError::InvalidParameter(_) => CbmapStatus::InvalidArgument,
            CbmapError::Degenerate(_) => CbmapStatus::Degenerate,
            CbmapError::NonFinite { .. } => CbmapStatus::NonFinite,
            CbmapError::Parse { .. } | CbmapError::Json(_) => CbmapStatus::ParseError,
            CbmapError::ModelVersion { .. } => CbmapStatus::VersionMismatch,
            CbmapError::Io { .. } => CbmapStatus::IoError,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CbmapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            CbmapStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {message}"));
            CbmapStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(CbmapStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: String) -> Failure {
    Failure(CbmapStatus::InvalidArgument, message)
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn matrix<'a>(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    what: &str,
) -> Result<ArrayView2<'a, f64>, Failure> {
    if data.is_null() {
        return Err(null(what));
    }
    let len = n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| invalid(format!("{what}: {n_rows}x{n_cols} overflows")))?;
    let slice = std::slice::from_raw_parts(data, len);
    Ok(ArrayView2::from_shape((n_rows, n_cols), slice).expect("length matches shape"))
}

unsafe fn copy_out<T: Copy>(
    src: &[T],
    out: *mut T,
    out_len: usize,
    what: &str,
) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    if out_len < src.len() {
        return Err(Failure(
            CbmapStatus::BufferTooSmall,
            format!(
                "{what}: buffer holds {out_len} values, {} needed",
                src.len()
            ),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn data_matrix(view: ArrayView2<f64>) -> Result<DataMatrix, Failure> {
    Ok(DataMatrix::new(view.to_owned())?)
}

fn row_major(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next cbmap call on the same thread.
#[no_mangle]
pub extern "C" fn cbmap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cbmap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn cbmap_fit_options_default(n_clusters: usize) -> CbmapFitOptions {
    let cfg = CbmapConfig::new(n_clusters);
    CbmapFitOptions {
        n_clusters,
        out_dim: cfg.out_dim,
        max_iter: cfg.max_iter,
        learning_rate: cfg.learning_rate,
        center_init: CbmapCenterInit::Pca,
        init_noise_std: cfg.init_noise_std,
        standardize: cfg.standardize,
        seed: cfg.seed,
    }
}

impl From<&CbmapFitOptions> for CbmapConfig {
    fn from(o: &CbmapFitOptions) -> Self {
        let mut cfg = CbmapConfig::new(o.n_clusters).with_seed(o.seed);
        cfg.out_dim = o.out_dim;
        cfg.max_iter = o.max_iter;
        cfg.learning_rate = o.learning_rate;
        cfg.center_init = match o.center_init {
            CbmapCenterInit::Pca => CenterInit::Pca,
            CbmapCenterInit::Random => CenterInit::Random,
        };
        cfg.init_noise_std = o.init_noise_std;
        cfg.standardize = o.standardize;
        cfg
    }
}

/// Fit an embedding of the `n_rows x n_cols` row-major matrix `data`.
///
/// # Safety
/// `data` must point to `n_rows * n_cols` doubles, `options` to a valid
/// options struct and `out` to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn cbmap_fit(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    options: *const CbmapFitOptions,
    out: *mut *mut CbmapFit,
) -> CbmapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let x = data_matrix(matrix(data, n_rows, n_cols, "data")?)?;
        let cfg = CbmapConfig::from(handle(options, "options")?);
        let result = fit(&x, &cfg)?;
        *out = Box::into_raw(Box::new(CbmapFit(result)));
        Ok(())
    })
}

/// # Safety
/// `fit` must be a handle from [`cbmap_fit`] or NULL.
#[no_mangle]
pub unsafe extern "C" fn cbmap_fit_free(fit: *mut CbmapFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Rows and columns of the embedding.
///
/// # Safety
/// `fit` must be a live fit handle; `n_rows` and `n_cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmap_fit_shape(
    fit: *const CbmapFit,
    n_rows: *mut usize,
    n_cols: *mut usize,
) -> CbmapStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        if n_rows.is_null() || n_cols.is_null() {
            return Err(null("shape output"));
        }
        (*n_rows, *n_cols) = f.0.embedding.dim();
        Ok(())
    })
}

/// Copy the row-major embedding into `out` (at least `n_rows * n_cols` doubles).
///
/// # Safety
/// `fit` must be a live fit handle; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cbmap_fit_embedding(
    fit: *const CbmapFit,
    out: *mut f64,
    out_len: usize,
) -> CbmapStatus {
    guard(|| {
        copy_out(
            &row_major(&handle(fit, "fit")?.0.embedding),
            out,
            out_len,
            "embedding",
        )
    })
}

/// Number of recorded loss values (one per iteration).
///
/// # Safety
/// `fit` must be a live fit handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cbmap_fit_loss_history_len(fit: *const CbmapFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.loss_history.len())
}

/// # Safety
/// `fit` must be a live fit handle; `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cbmap_fit_loss_history(
    fit: *const CbmapFit,
    out: *mut f64,
    out_len: usize,
) -> CbmapStatus {
    guard(|| {
        copy_out(
            &handle(fit, "fit")?.0.loss_history,
            out,
            out_len,
            "loss history",
        )
    })
}

/// Cluster label of each input row.
///
/// # Safety
/// `fit` must be a live fit handle; `out` must hold `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn cbmap_fit_labels(
    fit: *const CbmapFit,
    out: *mut usize,
    out_len: usize,
) -> CbmapStatus {
    guard(|| copy_out(&handle(fit, "fit")?.0.labels, out, out_len, "labels"))
}

/// Copy the fitted model into a new model handle owned by the caller.
///
/// # Safety
/// `fit` must be a live fit handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmap_fit_model(
    fit: *const CbmapFit,
    out: *mut *mut CbmapModel,
) -> CbmapStatus {
    guard(|| {
        let f = handle(fit, "fit")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(CbmapModel(f.0.model.clone())));
        Ok(())
    })
}

/// # Safety
/// `model` must be a model handle from this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn cbmap_model_free(model: *mut CbmapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live model handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cbmap_model_input_dim(model: *const CbmapModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.input_dim())
}

/// # Safety
/// `model` must be a live model handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cbmap_model_output_dim(model: *const CbmapModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.output_dim())
}

/// # Safety
/// `model` must be a live model handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn cbmap_model_n_clusters(model: *const CbmapModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_clusters())
}

/// Embed `n_rows` new rows with the model's centers and bandwidths held fixed.
/// `out` receives `n_rows * output_dim` doubles, row-major.
///
/// # Safety
/// `model` must be a live model handle, `data` must point to
/// `n_rows * n_cols` doubles and `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cbmap_model_transform(
    model: *const CbmapModel,
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    iters: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> CbmapStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let x = data_matrix(matrix(data, n_rows, n_cols, "data")?)?;
        let y = transform(&m.0, &x, &TransformOptions { iters, seed })?;
        copy_out(&row_major(&y), out, out_len, "embedding")
    })
}

/// Serialize the model to a JSON string released with [`cbmap_string_free`].
///
/// # Safety
/// `model` must be a live model handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmap_model_to_json(
    model: *const CbmapModel,
    out: *mut *mut c_char,
) -> CbmapStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = m.0.to_json()?;
        *out = CString::new(json)
            .expect("JSON has no NUL bytes")
            .into_raw();
        Ok(())
    })
}

/// Parse a model from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cbmap_model_from_json(
    json: *const c_char,
    out: *mut *mut CbmapModel,
) -> CbmapStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            Failure(
                CbmapStatus::ParseError,
                format!("model JSON is not UTF-8: {e}"),
            )
        })?;
        *out = Box::into_raw(Box::new(CbmapModel(cbmap::CbmapModel::from_json(text)?)));
        Ok(())
    })
}

/// # Safety
/// `s` must be a string returned by this library or NULL.
#[no_mangle]
pub unsafe extern "C" fn cbmap_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Global score of the `n x m` embedding `y` of the `n x d` data `x`.
///
/// # Safety
/// `x` must point to `n * d` doubles, `y` to `n * m` doubles, `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn cbmap_global_score(
    x: *const f64,
    y: *const f64,
    n: usize,
    d: usize,
    m: usize,
    out: *mut f64,
) -> CbmapStatus {
    guard(|| {
        let gs = global_score(matrix(x, n, d, "x")?, matrix(y, n, m, "y")?)?;
        *out.as_mut().ok_or_else(|| null("out"))? = gs;
        Ok(())
    })
}

/// Accuracy of a `k`-nearest-neighbour classifier on a seeded stratified
/// 80/20 split of the `n x m` embedding `y`.
///
/// # Safety
/// `y` must point to `n * m` doubles, `labels` to `n` values, `out` to one double.
#[no_mangle]
pub unsafe extern "C" fn cbmap_knn_accuracy(
    y: *const f64,
    n: usize,
    m: usize,
    labels: *const usize,
    k: usize,
    seed: u64,
    out: *mut f64,
) -> CbmapStatus {
    guard(|| {
        let view = matrix(y, n, m, "y")?;
        if labels.is_null() {
            return Err(null("labels"));
        }
        let labels = std::slice::from_raw_parts(labels, n);
        let split = HoldoutSpec {
            seed,
            ..HoldoutSpec::default()
        };
        let acc = knn_accuracy(view, labels, k, &split)?;
        *out.as_mut().ok_or_else(|| null("out"))? = acc;
        Ok(())
    })
}
