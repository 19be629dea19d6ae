//! C ABI over `semas-core`.
//!
//! Every function returns a [`SemasStatus`]. Results go through out
//! pointers. On failure the message is kept per thread and read back with
//! [`semas_last_error`]. Handles are opaque and must be released with their
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use semas_core::consensus::{fuse, ConsensusPolicy};
use semas_core::datagen::{generate, DatasetProfile, LabeledSample};
use semas_core::detect::{vote_fraction, EnsembleBank, EnsembleConfig};
use semas_core::error::Error;
use semas_core::evolve::{reward, RewardWeights};
use semas_core::federate::{aggregate, AgentContribution};
use semas_core::pipeline::{run_experiment, summarize, RunConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemasStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Config = 4,
    Data = 5,
    Detect = 6,
    Consensus = 7,
    Evolve = 8,
    Federate = 9,
    Runtime = 10,
    Panic = 11,
}

/// Generated dataset.
pub struct SemasDataset {
    samples: Vec<LabeledSample>,
    n_features: usize,
}

/// Fitted five-member detector bank.
pub struct SemasDetector {
    bank: EnsembleBank,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SemasStatus, msg: impl Into<String>) -> SemasStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> SemasStatus {
    match e {
        Error::Config(_) | Error::Json(_) => SemasStatus::Config,
        Error::Data(_) | Error::Csv(_) => SemasStatus::Data,
        Error::Detect(_) => SemasStatus::Detect,
        Error::Consensus(_) => SemasStatus::Consensus,
        Error::Evolve(_) => SemasStatus::Evolve,
        Error::Federate(_) => SemasStatus::Federate,
        _ => SemasStatus::Runtime,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SemasStatus>) -> SemasStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SemasStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => fail(SemasStatus::Panic, "internal panic"),
    }
}

fn lift<T, E: Into<Error>>(r: Result<T, E>) -> Result<T, SemasStatus> {
    r.map_err(|e| {
        let e: Error = e.into();
        fail(status_of(&e), e.to_string())
    })
}

fn nonnull<T>(p: *const T, name: &str) -> Result<(), SemasStatus> {
    if p.is_null() {
        Err(fail(SemasStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, SemasStatus> {
    nonnull(p, name)?;
    CStr::from_ptr(p).to_str().map_err(|_| fail(SemasStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn semas_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn semas_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Consensus score `w1*a1 + w2*a2` and the alert decision against `tau`.
///
/// # Safety
/// `out_score` and `out_alert` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn semas_fuse(
    a1: f64,
    a2: f64,
    w1: f64,
    w2: f64,
    tau: f64,
    out_score: *mut f64,
    out_alert: *mut bool,
) -> SemasStatus {
    guard(|| {
        nonnull(out_score, "out_score")?;
        nonnull(out_alert, "out_alert")?;
        let s = lift(fuse(a1, a2, &ConsensusPolicy { w1, w2, tau }))?;
        *out_score = s;
        *out_alert = s > tau;
        Ok(())
    })
}

/// Policy reward with the default weights.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn semas_reward(
    f1: f64,
    delta_p: f64,
    delta_r: f64,
    latency_ms: f64,
    out: *mut f64,
) -> SemasStatus {
    guard(|| {
        nonnull(out, "out")?;
        *out = reward(f1, delta_p, delta_r, latency_ms, &RewardWeights::default());
        Ok(())
    })
}

/// Sample-weighted parameter average. `params` is row-major
/// `n_agents x dim`; `out` receives `dim` values.
///
/// # Safety
/// `n_samples` must hold `n_agents` values, `params` `n_agents * dim`
/// values and `out` room for `dim` values.
#[no_mangle]
pub unsafe extern "C" fn semas_federated_aggregate(
    n_samples: *const u64,
    params: *const f64,
    n_agents: usize,
    dim: usize,
    out: *mut f64,
) -> SemasStatus {
    guard(|| {
        nonnull(n_samples, "n_samples")?;
        nonnull(params, "params")?;
        nonnull(out, "out")?;
        let counts = std::slice::from_raw_parts(n_samples, n_agents);
        let flat = std::slice::from_raw_parts(params, n_agents * dim);
        let contributions: Vec<AgentContribution> = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| AgentContribution {
                agent_id: i,
                n_samples: n,
                params: flat[i * dim..(i + 1) * dim].to_vec(),
            })
            .collect();
        let global = lift(aggregate(&contributions))?;
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(&global);
        Ok(())
    })
}

/// Generates a synthetic dataset from a named profile (`boiler`, `wind`).
/// `n_samples` of 0 keeps the profile size.
///
/// # Safety
/// `profile` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn semas_dataset_generate(
    profile: *const c_char,
    seed: u64,
    n_samples: usize,
    out: *mut *mut SemasDataset,
) -> SemasStatus {
    guard(|| {
        nonnull(out, "out")?;
        let name = read_str(profile, "profile")?;
        let mut p = DatasetProfile::by_name(name, seed)
            .ok_or_else(|| fail(SemasStatus::InvalidArgument, format!("unknown profile `{name}`")))?;
        if n_samples > 0 {
            p.n_samples = n_samples;
        }
        let samples = lift(generate(&p))?;
        *out = Box::into_raw(Box::new(SemasDataset { samples, n_features: p.n_features }));
        Ok(())
    })
}

/// # Safety
/// `ds` must come from [`semas_dataset_generate`] or be null.
#[no_mangle]
pub unsafe extern "C" fn semas_dataset_len(ds: *const SemasDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.samples.len())
}

/// # Safety
/// `ds` must come from [`semas_dataset_generate`] or be null.
#[no_mangle]
pub unsafe extern "C" fn semas_dataset_n_features(ds: *const SemasDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.n_features)
}

/// Copies row `index` into `features` (room for `capacity` values) and its
/// label into `label`.
///
/// # Safety
/// `ds` must be a live handle; `features` must hold `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn semas_dataset_row(
    ds: *const SemasDataset,
    index: usize,
    features: *mut f64,
    capacity: usize,
    label: *mut bool,
) -> SemasStatus {
    guard(|| {
        nonnull(ds, "dataset")?;
        nonnull(features, "features")?;
        nonnull(label, "label")?;
        let d = &*ds;
        let s = d
            .samples
            .get(index)
            .ok_or_else(|| fail(SemasStatus::InvalidArgument, format!("row {index} out of range")))?;
        if capacity < s.features.len() {
            return Err(fail(SemasStatus::InvalidArgument, format!("need room for {} features", s.features.len())));
        }
        std::slice::from_raw_parts_mut(features, s.features.len()).copy_from_slice(&s.features);
        *label = s.label;
        Ok(())
    })
}

/// # Safety
/// `ds` must come from [`semas_dataset_generate`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn semas_dataset_free(ds: *mut SemasDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fits the detector bank on `n_rows x n_features` row-major training data.
///
/// # Safety
/// `rows` must hold `n_rows * n_features` values and `out` be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn semas_detector_fit(
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    seed: u64,
    out: *mut *mut SemasDetector,
) -> SemasStatus {
    guard(|| {
        nonnull(rows, "rows")?;
        nonnull(out, "out")?;
        if n_features == 0 {
            return Err(fail(SemasStatus::InvalidArgument, "n_features must be positive"));
        }
        let flat = std::slice::from_raw_parts(rows, n_rows * n_features);
        let train: Vec<Vec<f64>> = flat.chunks(n_features).map(<[f64]>::to_vec).collect();
        let bank = lift(EnsembleBank::fit(&train, &EnsembleConfig { seed, ..EnsembleConfig::default() }))?;
        *out = Box::into_raw(Box::new(SemasDetector { bank }));
        Ok(())
    })
}

/// Raw member scores (5 values) and the vote fraction a2 for one sample.
///
/// # Safety
/// `det` must be a live handle, `x` must hold `n_features` values and
/// `out_scores` room for 5.
#[no_mangle]
pub unsafe extern "C" fn semas_detector_score(
    det: *const SemasDetector,
    x: *const f64,
    n_features: usize,
    out_scores: *mut f64,
    out_a2: *mut f64,
) -> SemasStatus {
    guard(|| {
        nonnull(det, "detector")?;
        nonnull(x, "x")?;
        nonnull(out_scores, "out_scores")?;
        nonnull(out_a2, "out_a2")?;
        let bank = &(*det).bank;
        let z = std::slice::from_raw_parts(x, n_features);
        let raw = lift(bank.raw_scores(z))?;
        let thr = lift(bank.thresholds())?;
        std::slice::from_raw_parts_mut(out_scores, 5).copy_from_slice(&raw.0);
        *out_a2 = vote_fraction(&EnsembleBank::votes_from_raw(&raw, &thr));
        Ok(())
    })
}

/// # Safety
/// `det` must come from [`semas_detector_fit`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn semas_detector_free(det: *mut SemasDetector) {
    if !det.is_null() {
        drop(Box::from_raw(det));
    }
}

/// Runs an experiment from a JSON run configuration and returns the
/// summary as JSON. Free the result with [`semas_string_free`].
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn semas_run_experiment_json(config_json: *const c_char, out: *mut *mut c_char) -> SemasStatus {
    guard(|| {
        nonnull(out, "out")?;
        let text = read_str(config_json, "config_json")?;
        let cfg: RunConfig = lift(serde_json::from_str(text).map_err(Error::from))?;
        let results = lift(run_experiment(&cfg))?;
        let json = lift(serde_json::to_string(&summarize(&results)).map_err(Error::from))?;
        let c = CString::new(json).map_err(|_| fail(SemasStatus::Runtime, "summary contains NUL"))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn semas_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
