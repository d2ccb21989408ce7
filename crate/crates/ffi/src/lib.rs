//! C ABI for the `sodm` library.
//!
//! Every fallible function returns a [`SodmStatus`]; on failure a description
//! is available from [`sodm_last_error_message`] on the same thread. Datasets
//! and models are opaque handles owned by the caller and released with their
//! `*_free` function. Strings returned by the library are released with
//! [`sodm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sodm::data::{parse_libsvm, Dataset, SparseVector};
use sodm::hierarchy::{train, TrainConfig};
use sodm::kernel::{CacheConfig, KernelSpec};
use sodm::solver::{HyperParams, Model};
use sodm::svrg::{dsvrg_train, SvrgConfig};
use sodm::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SodmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Unsupported = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SodmKernel {
    Linear = 0,
    Rbf = 1,
}

/// Hyperparameters and hierarchical training settings.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SodmTrainConfig {
    pub kernel: SodmKernel,
    /// RBF width; ignored by the linear kernel.
    pub gamma: f64,
    pub lambda: f64,
    pub theta: f64,
    pub nu: f64,
    pub p: usize,
    pub levels: usize,
    /// 0 picks min(32, ceil(sqrt(M))).
    pub stratums: usize,
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub workers: usize,
    /// Run the final solve on the fully merged data.
    pub final_refine: bool,
}

/// Hyperparameters and distributed SVRG settings (linear kernel).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SodmSvrgConfig {
    pub lambda: f64,
    pub theta: f64,
    pub nu: f64,
    pub nodes: usize,
    /// 0 picks min(32, ceil(sqrt(M))).
    pub stratums: usize,
    pub epochs: usize,
    /// Negative picks the default step size.
    pub eta: f64,
    pub steps_per_visit: usize,
    pub seed: u64,
    pub workers: usize,
}

/// Opaque dataset handle.
pub struct SodmDataset(Dataset);

/// Opaque model handle.
pub struct SodmModel(Model);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SodmStatus {
    match e {
        Error::Io { .. } => SodmStatus::Io,
        Error::Parse { .. } | Error::Label { .. } | Error::Json(_) => SodmStatus::Parse,
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::IndexOutOfRange { .. } => {
            SodmStatus::InvalidArgument
        }
        Error::Unsupported(_) => SodmStatus::Unsupported,
        Error::NotConverged { .. } => SodmStatus::Internal,
    }
}

struct Failure(SodmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SodmStatus::NullPointer, format!("`{what}` is null"))
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> SodmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SodmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SodmStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SodmStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next library call on this thread.
#[no_mangle]
pub extern "C" fn sodm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sodm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Fills `out` with the default hierarchical settings (linear kernel,
/// λ = 1, θ = 0.3, υ = 0.5).
///
/// # Safety
/// `out` must be null or point to writable memory for one config.
#[no_mangle]
pub unsafe extern "C" fn sodm_train_config_default(out: *mut SodmTrainConfig) -> SodmStatus {
    guard(|| {
        let d = TrainConfig::default();
        *out_ptr(out, "out")? = SodmTrainConfig {
            kernel: SodmKernel::Linear,
            gamma: 1.0,
            lambda: 1.0,
            theta: 0.3,
            nu: 0.5,
            p: d.p,
            levels: d.levels,
            stratums: 0,
            tol: d.tol,
            max_epochs: d.max_epochs,
            seed: d.seed,
            workers: d.workers,
            final_refine: d.final_refine,
        };
        Ok(())
    })
}

/// Fills `out` with the default SVRG settings (λ = 1, θ = 0.3, υ = 0.5).
///
/// # Safety
/// `out` must be null or point to writable memory for one config.
#[no_mangle]
pub unsafe extern "C" fn sodm_svrg_config_default(out: *mut SodmSvrgConfig) -> SodmStatus {
    guard(|| {
        let d = SvrgConfig::default();
        *out_ptr(out, "out")? = SodmSvrgConfig {
            lambda: 1.0,
            theta: 0.3,
            nu: 0.5,
            nodes: d.nodes,
            stratums: 0,
            epochs: d.epochs,
            eta: -1.0,
            steps_per_visit: d.steps_per_visit,
            seed: d.seed,
            workers: d.workers,
        };
        Ok(())
    })
}

/// Loads a LIBSVM file.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sodm_dataset_load_libsvm(path: *const c_char, out: *mut *mut SodmDataset) -> SodmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ds = parse_libsvm(c_str(path, "path")?)?;
        *out = Box::into_raw(Box::new(SodmDataset(ds)));
        Ok(())
    })
}

/// Builds a dataset from a row-major `rows × cols` matrix and ±1 labels.
///
/// # Safety
/// `values` must hold `rows * cols` doubles and `labels` `rows` bytes (either
/// may be null when `rows` is 0); `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sodm_dataset_from_dense(
    values: *const f64,
    labels: *const i8,
    rows: usize,
    cols: usize,
    out: *mut *mut SodmDataset,
) -> SodmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(SodmStatus::InvalidArgument, "matrix size overflows".into()))?;
        if rows > 0 && (labels.is_null() || (len > 0 && values.is_null())) {
            return Err(null(if labels.is_null() { "labels" } else { "values" }));
        }
        let (vals, labs) = if rows == 0 {
            (&[][..], &[][..])
        } else {
            let vals = if len == 0 { &[][..] } else { std::slice::from_raw_parts(values, len) };
            (vals, std::slice::from_raw_parts(labels, rows))
        };
        let matrix: Vec<Vec<f64>> = (0..rows).map(|r| vals[r * cols..(r + 1) * cols].to_vec()).collect();
        let mut ds = Dataset::from_dense(&matrix, labs)?;
        ds.num_features = cols;
        *out = Box::into_raw(Box::new(SodmDataset(ds)));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sodm_dataset_len(dataset: *const SodmDataset, out: *mut usize) -> SodmStatus {
    guard(|| {
        *out_ptr(out, "out")? = deref(dataset, "dataset")?.0.len();
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sodm_dataset_num_features(dataset: *const SodmDataset, out: *mut usize) -> SodmStatus {
    guard(|| {
        *out_ptr(out, "out")? = deref(dataset, "dataset")?.0.num_features;
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sodm_dataset_free(dataset: *mut SodmDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

fn hyper(lambda: f64, theta: f64, nu: f64) -> Result<HyperParams, Failure> {
    Ok(HyperParams::new(lambda, theta, nu)?)
}

/// Hierarchical training.
///
/// # Safety
/// `dataset` and `config` must be null or valid; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sodm_train(
    dataset: *const SodmDataset,
    config: *const SodmTrainConfig,
    out: *mut *mut SodmModel,
) -> SodmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ds = &deref(dataset, "dataset")?.0;
        let cfg = deref(config, "config")?;
        let kernel = match cfg.kernel {
            SodmKernel::Linear => KernelSpec::Linear,
            SodmKernel::Rbf => KernelSpec::rbf(cfg.gamma)?,
        };
        let hp = hyper(cfg.lambda, cfg.theta, cfg.nu)?;
        let tc = TrainConfig {
            p: cfg.p,
            levels: cfg.levels,
            stratums: (cfg.stratums > 0).then_some(cfg.stratums),
            tol: cfg.tol,
            max_epochs: cfg.max_epochs,
            seed: cfg.seed,
            workers: cfg.workers,
            final_refine: cfg.final_refine,
            cache: CacheConfig::from_env(),
        };
        let model = train(ds, &kernel, &hp, &tc)?.model;
        *out = Box::into_raw(Box::new(SodmModel(model)));
        Ok(())
    })
}

/// Distributed SVRG training with the linear kernel.
///
/// # Safety
/// `dataset` and `config` must be null or valid; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sodm_train_svrg(
    dataset: *const SodmDataset,
    config: *const SodmSvrgConfig,
    out: *mut *mut SodmModel,
) -> SodmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let ds = &deref(dataset, "dataset")?.0;
        let cfg = deref(config, "config")?;
        let hp = hyper(cfg.lambda, cfg.theta, cfg.nu)?;
        let sc = SvrgConfig {
            nodes: cfg.nodes,
            stratums: (cfg.stratums > 0).then_some(cfg.stratums),
            epochs: cfg.epochs,
            eta: (cfg.eta >= 0.0).then_some(cfg.eta),
            steps_per_visit: cfg.steps_per_visit,
            seed: cfg.seed,
            workers: cfg.workers,
        };
        let model = dsvrg_train(ds, &KernelSpec::Linear, &hp, &sc)?.model;
        *out = Box::into_raw(Box::new(SodmModel(model)));
        Ok(())
    })
}

fn prepared(model: &Model, ds: &Dataset) -> Dataset {
    match &model.normalization {
        Some(table) => table.apply(ds),
        None => ds.clone(),
    }
}

/// f(x) for one dense feature vector of length `len`.
///
/// # Safety
/// `model` must be null or live; `values` must hold `len` doubles (or be
/// null with `len` 0); `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sodm_model_decision_value(
    model: *const SodmModel,
    values: *const f64,
    len: usize,
    out: *mut f64,
) -> SodmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = &deref(model, "model")?.0;
        if len > 0 && values.is_null() {
            return Err(null("values"));
        }
        let vals = if len == 0 { &[][..] } else { std::slice::from_raw_parts(values, len) };
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Failure(SodmStatus::InvalidArgument, "feature values must be finite".into()));
        }
        let x = SparseVector::from_dense(vals);
        *out = match &model.normalization {
            Some(_) => {
                let one = Dataset {
                    instances: vec![sodm::Instance::new(x, 1)?],
                    num_features: len,
                };
                model.decision_value(&prepared(model, &one).instances[0].features)
            }
            None => model.decision_value(&x),
        };
        Ok(())
    })
}

/// Writes one ±1 prediction per dataset row into `labels`.
///
/// # Safety
/// `model` and `dataset` must be null or live; `labels` must hold `capacity`
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn sodm_model_predict(
    model: *const SodmModel,
    dataset: *const SodmDataset,
    labels: *mut i8,
    capacity: usize,
) -> SodmStatus {
    guard(|| {
        let model = &deref(model, "model")?.0;
        let ds = &deref(dataset, "dataset")?.0;
        if capacity < ds.len() {
            return Err(Failure(
                SodmStatus::InvalidArgument,
                format!("label buffer holds {capacity} entries, {} needed", ds.len()),
            ));
        }
        if ds.is_empty() {
            return Ok(());
        }
        if labels.is_null() {
            return Err(null("labels"));
        }
        let out = std::slice::from_raw_parts_mut(labels, ds.len());
        for (slot, label) in out.iter_mut().zip(model.predict_all(&prepared(model, ds))) {
            *slot = label;
        }
        Ok(())
    })
}

/// Serializes a model; free the result with [`sodm_string_free`].
///
/// # Safety
/// `model` must be null or live; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sodm_model_to_json(model: *const SodmModel, out: *mut *mut c_char) -> SodmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let text = deref(model, "model")?.0.to_json()?;
        let c = CString::new(text).map_err(|_| Failure(SodmStatus::Internal, "JSON contains NUL".into()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `json` must be null or NUL-terminated; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn sodm_model_from_json(json: *const c_char, out: *mut *mut SodmModel) -> SodmStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let model = Model::from_json(c_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(SodmModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sodm_model_free(model: *mut SodmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sodm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
