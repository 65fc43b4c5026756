//! C interface to `pkgsv`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`PkgsvStatus`]; on failure the message is available from
//! [`pkgsv_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use pkgsv::cli::{cmd_sv, with_threads, Engine, RunConfig, SvOptions};
use pkgsv::shapley::{required_sample_size_range, required_sample_size_variance, SvReport};
use pkgsv::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkgsvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Numerical = 4,
    Parse = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Engine selection for [`pkgsv_sv_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PkgsvEngine {
    /// Use the engine named in the configuration.
    Configured = 0,
    Simulation = 1,
    Analytic = 2,
}

/// A parsed and validated run configuration.
pub struct PkgsvConfig {
    config: RunConfig,
    dir: PathBuf,
}

/// A Shapley-value report.
pub struct PkgsvReport {
    report: SvReport,
    input_labels: Vec<CString>,
    output_labels: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> PkgsvStatus {
    match err {
        Error::InvalidArgument(_)
        | Error::EmptyEnsemble
        | Error::EnsembleTooSmall { .. }
        | Error::InsufficientData(_)
        | Error::InstanceTooLarge(_) => PkgsvStatus::InvalidArgument,
        Error::DimensionMismatch(_) => PkgsvStatus::DimensionMismatch,
        Error::NonPositiveVolume { .. }
        | Error::NonFiniteState { .. }
        | Error::ChainDiverged(_)
        | Error::NotPositiveSemiDefinite
        | Error::ChecksumMismatch { .. } => PkgsvStatus::Numerical,
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) => PkgsvStatus::Parse,
        Error::Io(_) => PkgsvStatus::Io,
    }
}

fn fail(status: PkgsvStatus, msg: impl Into<String>) -> PkgsvStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PkgsvStatus>) -> PkgsvStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PkgsvStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(PkgsvStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: pkgsv::Result<T>) -> Result<T, PkgsvStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, PkgsvStatus> {
    if p.is_null() {
        return Err(fail(PkgsvStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(PkgsvStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn opt_path(p: *const c_char, name: &str) -> Result<Option<PathBuf>, PkgsvStatus> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(|s| Some(PathBuf::from(s)))
    }
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, PkgsvStatus> {
    p.as_mut().ok_or_else(|| fail(PkgsvStatus::NullPointer, format!("{name} is null")))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, PkgsvStatus> {
    p.as_ref().ok_or_else(|| fail(PkgsvStatus::NullPointer, format!("{name} is null")))
}

fn labels(xs: &[String]) -> Vec<CString> {
    xs.iter().map(|s| CString::new(s.replace('\0', " ")).unwrap_or_default()).collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pkgsv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null.
///
/// The pointer stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn pkgsv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a configuration file; relative paths inside it resolve against its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_config_load(path: *const c_char, out: *mut *mut PkgsvConfig) -> PkgsvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let (config, dir) = lift(RunConfig::load(Path::new(path)))?;
        *out = Box::into_raw(Box::new(PkgsvConfig { config, dir }));
        Ok(())
    })
}

/// Parses a configuration document; `base_dir` (may be null) anchors relative paths.
///
/// # Safety
/// `json` and a non-null `base_dir` must be NUL-terminated strings; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_config_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut PkgsvConfig,
) -> PkgsvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let json = str_arg(json, "json")?;
        let dir = opt_path(base_dir, "base_dir")?.unwrap_or_default();
        let config = lift(RunConfig::from_json(json))?;
        *out = Box::into_raw(Box::new(PkgsvConfig { config, dir }));
        Ok(())
    })
}

/// Seed of a configuration.
///
/// # Safety
/// `config` must come from this library and `seed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_config_seed(config: *const PkgsvConfig, seed: *mut u64) -> PkgsvStatus {
    guard(|| {
        *out_arg(seed, "seed")? = handle(config, "config")?.config.seed;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or come from this library, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_config_free(config: *mut PkgsvConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the configured Shapley analysis.
///
/// `posterior` may be null to use the configured ensemble (or the nominal
/// model); `threads = 0` uses the default pool. Results do not depend on
/// the thread count.
///
/// # Safety
/// `config` must come from this library, a non-null `posterior` must be a
/// NUL-terminated string and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_sv_run(
    config: *const PkgsvConfig,
    engine: PkgsvEngine,
    exact: bool,
    posterior: *const c_char,
    threads: usize,
    out: *mut *mut PkgsvReport,
) -> PkgsvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let cfg = handle(config, "config")?;
        let opts = SvOptions {
            engine: match engine {
                PkgsvEngine::Configured => None,
                PkgsvEngine::Simulation => Some(Engine::Simulation),
                PkgsvEngine::Analytic => Some(Engine::Analytic),
            },
            exact,
            posterior: opt_path(posterior, "posterior")?,
            permutations_out: None,
        };
        let threads = (threads > 0).then_some(threads);
        let report = lift(with_threads(threads, || cmd_sv(&cfg.config, &cfg.dir, &opts)))?;
        *out = Box::into_raw(Box::new(PkgsvReport {
            input_labels: labels(&report.input_labels),
            output_labels: labels(&report.output_labels),
            report,
        }));
        Ok(())
    })
}

/// Number of inputs (rows) of a report; 0 for a null handle.
///
/// # Safety
/// `report` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_report_num_inputs(report: *const PkgsvReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.input_labels.len())
}

/// Number of outputs (columns) of a report; 0 for a null handle.
///
/// # Safety
/// `report` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_report_num_outputs(report: *const PkgsvReport) -> usize {
    report.as_ref().map_or(0, |r| r.report.output_labels.len())
}

/// Label of an input, owned by the report; null when out of range.
///
/// # Safety
/// `report` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_report_input_label(report: *const PkgsvReport, input: usize) -> *const c_char {
    report.as_ref().and_then(|r| r.input_labels.get(input)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Label of an output, owned by the report; null when out of range.
///
/// # Safety
/// `report` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_report_output_label(report: *const PkgsvReport, output: usize) -> *const c_char {
    report.as_ref().and_then(|r| r.output_labels.get(output)).map_or(ptr::null(), |s| s.as_ptr())
}

/// Shapley value and its Monte Carlo variance for one `(input, output)` pair.
///
/// Either of `value` and `variance` may be null.
///
/// # Safety
/// `report` must come from this library; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_report_value(
    report: *const PkgsvReport,
    input: usize,
    output: usize,
    value: *mut f64,
    variance: *mut f64,
) -> PkgsvStatus {
    guard(|| {
        let r = &handle(report, "report")?.report;
        if input >= r.input_labels.len() || output >= r.output_labels.len() {
            return Err(fail(PkgsvStatus::OutOfRange, format!("({input}, {output}) is outside the report")));
        }
        if let Some(v) = value.as_mut() {
            *v = r.sv[input][output];
        }
        if let Some(v) = variance.as_mut() {
            *v = r.mc_variance[input][output];
        }
        Ok(())
    })
}

/// Writes the report as long-format CSV, or one row per input when `wide` is set.
///
/// # Safety
/// `report` must come from this library and `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_report_write_csv(report: *const PkgsvReport, path: *const c_char, wide: bool) -> PkgsvStatus {
    guard(|| {
        let r = &handle(report, "report")?.report;
        let path = str_arg(path, "path")?;
        let file = lift(std::fs::File::create(path).map_err(Error::from))?;
        let w = std::io::BufWriter::new(file);
        lift(if wide { r.write_wide_csv(w) } else { r.write_long_csv(w) })
    })
}

/// Writes the full report as JSON.
///
/// # Safety
/// `report` must come from this library and `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_report_write_json(report: *const PkgsvReport, path: *const c_char) -> PkgsvStatus {
    guard(|| {
        let r = &handle(report, "report")?.report;
        let path = str_arg(path, "path")?;
        let file = lift(std::fs::File::create(path).map_err(Error::from))?;
        lift(r.write_json(std::io::BufWriter::new(file)))
    })
}

/// # Safety
/// `report` must be null or come from this library, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_report_free(report: *mut PkgsvReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Permutations needed for error `epsilon` with probability `1 - delta`, given a variance bound.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_sample_size_variance(variance: f64, delta: f64, epsilon: f64, out: *mut u64) -> PkgsvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = lift(required_sample_size_variance(variance, delta, epsilon))? as u64;
        Ok(())
    })
}

/// Permutations needed for error `epsilon` with probability `1 - delta`, given a range bound.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pkgsv_sample_size_range(range: f64, delta: f64, epsilon: f64, out: *mut u64) -> PkgsvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = lift(required_sample_size_range(range, delta, epsilon))? as u64;
        Ok(())
    })
}
