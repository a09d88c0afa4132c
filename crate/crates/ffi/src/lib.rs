//! C interface to `sddp-core`.
//!
//! Cases and policies are opaque handles created by `sddp_*_load`/`sddp_train`
//! and released with the matching `_free`. Every function returns an
//! [`SddpStatus`]; on failure the message is available from
//! [`sddp_last_error`] on the same thread. Panics are caught at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use sddp_core::io::{self, CaseFile};
use sddp_core::risk::{self, RiskMeasure};
use sddp_core::scenario::SamplerMode;
use sddp_core::sddp::{self, BoundsLog, EngineConfig, Model, TrainedPolicy};
use sddp_core::{detequiv, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SddpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Malformed or inconsistent input data.
    DataError = 3,
    /// The solver failed or a subproblem was infeasible.
    NumericalError = 4,
    IoError = 5,
    FingerprintMismatch = 6,
    /// The destination buffer is too small; the required length was written.
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SddpSampling {
    Uniform = 0,
    Risk = 1,
    Alternating = 2,
}

/// Training parameters. Fill with [`sddp_case_default_config`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SddpConfig {
    pub max_iterations: usize,
    pub min_iterations: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// One of [`SddpSampling`].
    pub sampling: u32,
    pub lambda: f64,
    pub alpha: f64,
    pub stop_gap_tol: f64,
    pub ub_confidence: f64,
    pub parallel: bool,
}

/// One training iteration. `ub_samples` is 0 when the iteration recorded no
/// upper bound, in which case `ub_mean` and `ub_stderr` are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SddpBoundsEntry {
    pub iteration: usize,
    pub lower_bound: f64,
    pub ub_mean: f64,
    pub ub_stderr: f64,
    pub ub_samples: usize,
    pub wall_ms: u64,
}

pub struct SddpCase {
    file: CaseFile,
}

pub struct SddpPolicy {
    policy: TrainedPolicy,
    log: BoundsLog,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(SddpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            _ if e.is_numerical() => SddpStatus::NumericalError,
            Error::Io(_) => SddpStatus::IoError,
            Error::FingerprintMismatch { .. } => SddpStatus::FingerprintMismatch,
            Error::InvalidMeasure(_) | Error::InvalidConfig(_) | Error::EmptyInput => SddpStatus::InvalidArgument,
            _ => SddpStatus::DataError,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: SddpStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SddpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SddpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside sddp");
            SddpStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(SddpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(SddpStatus::NullPointer, format!("{what} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(SddpStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(SddpStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(non_null(p, what)?, len))
}

/// Message of the last failed call on this thread, empty after a success.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn sddp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Reads and validates a case file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sddp_case_load(path: *const c_char, out: *mut *mut SddpCase) -> SddpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let file = io::parse_case(&PathBuf::from(c_str(path, "path")?))?;
        *out = Box::into_raw(Box::new(SddpCase { file }));
        Ok(())
    })
}

/// Parses and validates a case from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn sddp_case_parse(json: *const c_char, out: *mut *mut SddpCase) -> SddpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let file = io::parse_case_str(c_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(SddpCase { file }));
        Ok(())
    })
}

/// # Safety
/// `case_handle` must come from `sddp_case_load`/`sddp_case_parse` and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sddp_case_free(case_handle: *mut SddpCase) {
    if !case_handle.is_null() {
        drop(Box::from_raw(case_handle));
    }
}

/// # Safety
/// `case_handle` must be a live case handle; `stages` and `openings` writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_case_dimensions(
    case_handle: *const SddpCase,
    stages: *mut usize,
    openings: *mut usize,
) -> SddpStatus {
    guard(|| {
        let case = non_null(case_handle, "case")?;
        *out_ptr(stages, "stages")? = case.file.lattice.stages();
        *out_ptr(openings, "openings")? = case.file.lattice.openings();
        Ok(())
    })
}

fn to_config(c: &SddpConfig) -> Result<EngineConfig, Failure> {
    let config = EngineConfig {
        max_iterations: c.max_iterations,
        min_iterations: c.min_iterations,
        batch_size: c.batch_size,
        seed: c.seed,
        sampler_mode: match c.sampling {
            s if s == SddpSampling::Uniform as u32 => SamplerMode::Uniform,
            s if s == SddpSampling::Risk as u32 => SamplerMode::RiskAdjusted,
            s if s == SddpSampling::Alternating as u32 => SamplerMode::Alternating,
            other => return Err(fail(SddpStatus::InvalidArgument, format!("unknown sampling mode {other}"))),
        },
        measure: RiskMeasure::new(c.lambda, c.alpha)?,
        stop_gap_tol: c.stop_gap_tol,
        ub_confidence: c.ub_confidence,
        parallel: c.parallel,
    };
    config.validate()?;
    Ok(config)
}

/// Engine defaults stored in the case file.
///
/// # Safety
/// `case_handle` must be a live case handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_case_default_config(case_handle: *const SddpCase, out: *mut SddpConfig) -> SddpStatus {
    guard(|| {
        let d = non_null(case_handle, "case")?.file.defaults;
        *out_ptr(out, "out")? = SddpConfig {
            max_iterations: d.max_iterations,
            min_iterations: d.min_iterations,
            batch_size: d.batch_size,
            seed: d.seed,
            sampling: match d.sampler_mode {
                SamplerMode::Uniform => SddpSampling::Uniform,
                SamplerMode::RiskAdjusted => SddpSampling::Risk,
                SamplerMode::Alternating => SddpSampling::Alternating,
            } as u32,
            lambda: d.measure.lambda(),
            alpha: d.measure.alpha(),
            stop_gap_tol: d.stop_gap_tol,
            ub_confidence: d.ub_confidence,
            parallel: d.parallel,
        };
        Ok(())
    })
}

/// Optimal cost of the full scenario tree under `(lambda, alpha)`.
///
/// # Safety
/// `case_handle` must be a live case handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_detequiv(
    case_handle: *const SddpCase,
    lambda: f64,
    alpha: f64,
    out: *mut f64,
) -> SddpStatus {
    guard(|| {
        let case = non_null(case_handle, "case")?;
        let out = out_ptr(out, "out")?;
        let measure = RiskMeasure::new(lambda, alpha)?;
        *out = detequiv::solve_tree(&case.file.system, &case.file.lattice, &measure)?;
        Ok(())
    })
}

/// Trains a policy.
///
/// # Safety
/// `case_handle` must be a live case handle, `config` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_train(
    case_handle: *const SddpCase,
    config: *const SddpConfig,
    out: *mut *mut SddpPolicy,
) -> SddpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let case = non_null(case_handle, "case")?;
        let config = to_config(non_null(config, "config")?)?;
        let (policy, log) = sddp::train(&case.file.system, &case.file.lattice, config)?;
        *out = Box::into_raw(Box::new(SddpPolicy { policy, log }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from `sddp_train`/`sddp_policy_load` and not be used
/// afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn sddp_policy_free(policy: *mut SddpPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Final lower bound and number of iterations run.
///
/// # Safety
/// `policy` must be a live policy handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_policy_summary(
    policy: *const SddpPolicy,
    lower_bound: *mut f64,
    iterations: *mut usize,
) -> SddpStatus {
    guard(|| {
        let p = non_null(policy, "policy")?;
        *out_ptr(lower_bound, "lower_bound")? = p.policy.lower_bound;
        *out_ptr(iterations, "iterations")? = p.policy.iterations;
        Ok(())
    })
}

/// Copies the per-iteration bounds into `buf`. `len` always receives the
/// number of entries; if `capacity` is smaller nothing is copied and
/// `BufferTooSmall` is returned. A policy read from disk has no log.
///
/// # Safety
/// `policy` must be a live policy handle, `buf` valid for `capacity`
/// entries (may be null when `capacity` is 0) and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_policy_bounds(
    policy: *const SddpPolicy,
    buf: *mut SddpBoundsEntry,
    capacity: usize,
    len: *mut usize,
) -> SddpStatus {
    guard(|| {
        let log = &non_null(policy, "policy")?.log;
        *out_ptr(len, "len")? = log.len();
        if capacity < log.len() {
            return Err(fail(SddpStatus::BufferTooSmall, format!("{} entries needed", log.len())));
        }
        if log.is_empty() {
            return Ok(());
        }
        let buf = std::slice::from_raw_parts_mut(out_ptr(buf, "buf")?, capacity);
        for (slot, e) in buf.iter_mut().zip(log) {
            *slot = SddpBoundsEntry {
                iteration: e.iteration,
                lower_bound: e.lower_bound,
                ub_mean: e.upper_bound.map_or(f64::NAN, |u| u.mean),
                ub_stderr: e.upper_bound.map_or(f64::NAN, |u| u.stderr),
                ub_samples: e.upper_bound.map_or(0, |u| u.samples),
                wall_ms: e.wall_ms,
            };
        }
        Ok(())
    })
}

/// Exact value of the policy over the whole tree, under the risk measure it
/// was trained with.
///
/// # Safety
/// `case_handle` and `policy` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_policy_evaluate(
    case_handle: *const SddpCase,
    policy: *const SddpPolicy,
    out: *mut f64,
) -> SddpStatus {
    guard(|| {
        let case = non_null(case_handle, "case")?;
        let p = &non_null(policy, "policy")?.policy;
        let out = out_ptr(out, "out")?;
        let expected = case.file.fingerprint()?;
        if p.fingerprint != expected {
            return Err(Error::FingerprintMismatch { expected, found: p.fingerprint.clone() }.into());
        }
        let model = Model::new(&case.file.system, &case.file.lattice, p.config.measure)?;
        *out = model.evaluate_policy_exact(&p.pool)?;
        Ok(())
    })
}

/// Writes the policy as JSON.
///
/// # Safety
/// `policy` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sddp_policy_save(policy: *const SddpPolicy, path: *const c_char) -> SddpStatus {
    guard(|| {
        let p = non_null(policy, "policy")?;
        io::write_policy(&p.policy, &PathBuf::from(c_str(path, "path")?))?;
        Ok(())
    })
}

/// Reads a policy and checks it belongs to `case_handle`.
///
/// # Safety
/// `case_handle` must be a live handle, `path` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_policy_load(
    case_handle: *const SddpCase,
    path: *const c_char,
    out: *mut *mut SddpPolicy,
) -> SddpStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let case = non_null(case_handle, "case")?;
        let policy = io::read_policy(&PathBuf::from(c_str(path, "path")?), &case.file)?;
        *out = Box::into_raw(Box::new(SddpPolicy { policy, log: Vec::new() }));
        Ok(())
    })
}

/// CVaR at level `alpha` of `n` equiprobable values.
///
/// # Safety
/// `values` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_cvar(values: *const f64, n: usize, alpha: f64, out: *mut f64) -> SddpStatus {
    guard(|| {
        let values = slice(values, n, "values")?;
        *out_ptr(out, "out")? = risk::cvar_oracle(values, alpha)?;
        Ok(())
    })
}

/// `(1 - lambda) E + lambda CVaR_alpha` of `n` equiprobable values.
///
/// # Safety
/// `values` must point to `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn sddp_rho(values: *const f64, n: usize, lambda: f64, alpha: f64, out: *mut f64) -> SddpStatus {
    guard(|| {
        let values = slice(values, n, "values")?;
        *out_ptr(out, "out")? = risk::rho(values, &RiskMeasure::new(lambda, alpha)?)?;
        Ok(())
    })
}

/// Risk-adjusted sampling weights of `n` cost-to-go values, written to
/// `weights` (room for `n` doubles).
///
/// # Safety
/// `betas` must point to `n` doubles and `weights` be writable for `n`.
#[no_mangle]
pub unsafe extern "C" fn sddp_sampling_weights(
    betas: *const f64,
    n: usize,
    lambda: f64,
    alpha: f64,
    weights: *mut f64,
) -> SddpStatus {
    guard(|| {
        let betas = slice(betas, n, "betas")?;
        let w = risk::sampling_weights(betas, &RiskMeasure::new(lambda, alpha)?)?;
        if n > 0 {
            std::slice::from_raw_parts_mut(out_ptr(weights, "weights")?, n).copy_from_slice(w.as_slice());
        }
        Ok(())
    })
}
