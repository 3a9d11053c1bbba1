//! C interface.
//!
//! Objects cross the boundary as opaque handles created by `eccm_*_new` /
//! `eccm_solve_*` / `eccm_simulate_json` and released with the matching
//! `*_free`. Every fallible call returns an [`EccmStatus`]; on failure the
//! message is available from [`eccm_last_error_message`] on the same thread.
//! Panics never unwind into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eccm::config::RunConfigFile;
use eccm::pap::{solve_level, sweep_levels};
use eccm::riccati::{solve_are_barrage, KinematicsModel};
use eccm::sim::run_simulation;
use eccm::{
    check_structure, CovarianceSummary, EccmError, JammingChannel, JammingGrid, PapInstance,
    PapSolution, SimulationTrace, SolveMode, UtilityParams,
};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EccmStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    NoConvergence = 3,
    SingularInnovation = 4,
    Infeasible = 5,
    MaxIterations = 6,
    IncentiveViolation = 7,
    DegenerateLikelihood = 8,
    NoIncentivizableLevel = 9,
    Config = 10,
    Io = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EccmSolveMode {
    Full = 0,
    Relaxed = 1,
    Affine = 2,
}

impl From<EccmSolveMode> for SolveMode {
    fn from(m: EccmSolveMode) -> Self {
        match m {
            EccmSolveMode::Full => SolveMode::Full,
            EccmSolveMode::Relaxed => SolveMode::Relaxed,
            EccmSolveMode::Affine => SolveMode::Affine,
        }
    }
}

/// Opaque jamming channel.
pub struct EccmChannel(JammingChannel);

/// Opaque contract solution.
pub struct EccmSolution(PapSolution);

/// Opaque simulation trace.
pub struct EccmTrace(SimulationTrace);

/// Scalar fields of a solution.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EccmSolutionSummary {
    /// 0-based grid index of the incentivized level.
    pub j_star_index: usize,
    pub j_star: f64,
    pub radar_value: f64,
    pub jammer_value: f64,
    pub kkt_residual: f64,
}

/// One simulation record.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EccmRecord {
    pub t: usize,
    pub n: usize,
    pub lambda_max: f64,
    pub snr_bar: f64,
    pub j_star: f64,
    pub radar_utility: f64,
    pub jammer_utility: f64,
    pub kkt_residual: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &EccmError) -> EccmStatus {
    match e {
        EccmError::InvalidArgument(_) => EccmStatus::InvalidArgument,
        EccmError::NoConvergence { .. } => EccmStatus::NoConvergence,
        EccmError::SingularInnovation { .. } => EccmStatus::SingularInnovation,
        EccmError::Infeasible { .. } => EccmStatus::Infeasible,
        EccmError::MaxIterations { .. } => EccmStatus::MaxIterations,
        EccmError::IncentiveViolation { .. } => EccmStatus::IncentiveViolation,
        EccmError::DegenerateLikelihood { .. } => EccmStatus::DegenerateLikelihood,
        EccmError::NoIncentivizableLevel => EccmStatus::NoIncentivizableLevel,
        EccmError::Config(_) => EccmStatus::Config,
        EccmError::Io(_) => EccmStatus::Io,
    }
}

struct Failure(EccmStatus, String);

impl From<EccmError> for Failure {
    fn from(e: EccmError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(EccmStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> EccmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EccmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            EccmStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eccm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next `eccm_*` call on the same thread.
#[no_mangle]
pub extern "C" fn eccm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a channel from `m` levels and a row-major `m×m` probability matrix.
/// Rows within 1e-3 of summing to one are renormalized.
///
/// # Safety
/// `levels` must point to `m` doubles, `probs` to `m*m` doubles, `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn eccm_channel_new(
    levels: *const f64,
    m: usize,
    probs: *const f64,
    out: *mut *mut EccmChannel,
) -> EccmStatus {
    guard(|| {
        let levels = slice(levels, m, "levels")?;
        let probs = slice(probs, m * m, "probs")?;
        let grid = JammingGrid::new(levels.to_vec())?;
        let rows = probs.chunks(m.max(1)).map(<[f64]>::to_vec).collect();
        let channel = JammingChannel::from_rounded_rows(grid, rows)?;
        write_out(out, Box::into_raw(Box::new(EccmChannel(channel))), "out")
    })
}

/// # Safety
/// `channel` must come from [`eccm_channel_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eccm_channel_free(channel: *mut EccmChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// # Safety
/// `channel` must be a live handle; `tp2` and `tail_convex` writable.
#[no_mangle]
pub unsafe extern "C" fn eccm_channel_check_structure(
    channel: *const EccmChannel,
    tp2: *mut bool,
    tail_convex: *mut bool,
) -> EccmStatus {
    guard(|| {
        let ch = channel.as_ref().ok_or_else(|| null("channel"))?;
        let report = check_structure(&ch.0);
        write_out(tp2, report.tp2, "tp2")?;
        write_out(tail_convex, report.tail_convex, "tail_convex")
    })
}

fn params(c1: f64, c2: f64, sigma: f64) -> Result<(UtilityParams, CovarianceSummary), Failure> {
    Ok((UtilityParams::new(c1, c2)?, CovarianceSummary::new(sigma)?))
}

/// Best contract over all levels.
///
/// # Safety
/// `channel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eccm_solve_pap(
    channel: *const EccmChannel,
    c1: f64,
    c2: f64,
    sigma: f64,
    mode: EccmSolveMode,
    out: *mut *mut EccmSolution,
) -> EccmStatus {
    guard(|| {
        let ch = channel.as_ref().ok_or_else(|| null("channel"))?;
        let (p, s) = params(c1, c2, sigma)?;
        let base = PapInstance::new(&ch.0, p, s, 0)?;
        let best = sweep_levels(&base, mode.into())?.into_best();
        write_out(out, Box::into_raw(Box::new(EccmSolution(best))), "out")
    })
}

/// Contract for one fixed level (0-based); `ECCM_STATUS_INFEASIBLE` when the
/// level cannot be incentivized.
///
/// # Safety
/// `channel` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eccm_solve_level(
    channel: *const EccmChannel,
    c1: f64,
    c2: f64,
    sigma: f64,
    level: usize,
    mode: EccmSolveMode,
    out: *mut *mut EccmSolution,
) -> EccmStatus {
    guard(|| {
        let ch = channel.as_ref().ok_or_else(|| null("channel"))?;
        let (p, s) = params(c1, c2, sigma)?;
        let instance = PapInstance::new(&ch.0, p, s, level)?;
        let solution = solve_level(&instance, mode.into())?;
        write_out(out, Box::into_raw(Box::new(EccmSolution(solution))), "out")
    })
}

/// # Safety
/// `solution` must come from a solve call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eccm_solution_free(solution: *mut EccmSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Number of grid levels (length of the strategy vectors).
///
/// # Safety
/// `solution` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn eccm_solution_size(solution: *const EccmSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.0.x_star.len())
}

/// # Safety
/// `solution` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eccm_solution_summary(
    solution: *const EccmSolution,
    out: *mut EccmSolutionSummary,
) -> EccmStatus {
    guard(|| {
        let s = &solution.as_ref().ok_or_else(|| null("solution"))?.0;
        let summary = EccmSolutionSummary {
            j_star_index: s.j_star_index,
            j_star: s.j_star,
            radar_value: s.radar_value,
            jammer_value: s.jammer_value,
            kkt_residual: s.kkt_residual,
        };
        write_out(out, summary, "out")
    })
}

unsafe fn copy_vector(values: &[f64], out: *mut f64, len: usize) -> Result<(), Failure> {
    if len < values.len() {
        return Err(Failure(
            EccmStatus::BufferTooSmall,
            format!("buffer holds {len} values, need {}", values.len()),
        ));
    }
    if out.is_null() {
        return Err(null("out"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

/// Copies the log-strategy `x*` into `out[0..size]`.
///
/// # Safety
/// `solution` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eccm_solution_x_star(
    solution: *const EccmSolution,
    out: *mut f64,
    len: usize,
) -> EccmStatus {
    guard(|| {
        let s = &solution.as_ref().ok_or_else(|| null("solution"))?.0;
        copy_vector(s.x_star.as_slice(), out, len)
    })
}

/// Copies the pulse powers `π* = exp(x*)` into `out[0..size]`.
///
/// # Safety
/// `solution` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn eccm_solution_pi_star(
    solution: *const EccmSolution,
    out: *mut f64,
    len: usize,
) -> EccmStatus {
    guard(|| {
        let s = &solution.as_ref().ok_or_else(|| null("solution"))?.0;
        copy_vector(s.pi_star.as_slice(), out, len)
    })
}

/// Steady-state barrage-jamming covariance for a `d`-state model observed
/// through a `p×d` matrix. Matrices are row-major. `sigma_out` may be NULL;
/// otherwise it receives the `d×d` covariance.
///
/// # Safety
/// `a` and `q` must hold `d*d` doubles, `c` `p*d`, `lambda_max` must be
/// writable, and `sigma_out` NULL or `d*d` doubles.
#[no_mangle]
pub unsafe extern "C" fn eccm_solve_are_barrage(
    a: *const f64,
    q: *const f64,
    c: *const f64,
    d: usize,
    p: usize,
    snr_bar: f64,
    lambda_max: *mut f64,
    sigma_out: *mut f64,
) -> EccmStatus {
    guard(|| {
        let a = DMatrix::from_row_slice(d, d, slice(a, d * d, "a")?);
        let q = DMatrix::from_row_slice(d, d, slice(q, d * d, "q")?);
        let c = DMatrix::from_row_slice(p, d, slice(c, p * d, "c")?);
        let model = KinematicsModel::new(a, q, c, 1.0)?;
        let sol = solve_are_barrage(&model, snr_bar)?;
        write_out(lambda_max, sol.lambda_max.value(), "lambda_max")?;
        if !sigma_out.is_null() {
            let row_major: Vec<f64> = sol.sigma_matrix.transpose().iter().copied().collect();
            copy_vector(&row_major, sigma_out, d * d)?;
        }
        Ok(())
    })
}

/// Runs the closed-loop simulation described by a JSON configuration.
///
/// # Safety
/// `config_json` must be a NUL-terminated UTF-8 string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eccm_simulate_json(
    config_json: *const c_char,
    out: *mut *mut EccmTrace,
) -> EccmStatus {
    guard(|| {
        if config_json.is_null() {
            return Err(null("config_json"));
        }
        let text = CStr::from_ptr(config_json).to_str().map_err(|e| {
            Failure(
                EccmStatus::Config,
                format!("configuration is not UTF-8: {e}"),
            )
        })?;
        let config = RunConfigFile::parse(text)?
            .validate()?
            .simulation_config()?;
        let trace = run_simulation(&config)?;
        write_out(out, Box::into_raw(Box::new(EccmTrace(trace))), "out")
    })
}

/// # Safety
/// `trace` must be a live handle or NULL (returns 0).
#[no_mangle]
pub unsafe extern "C" fn eccm_trace_len(trace: *const EccmTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.records.len())
}

/// # Safety
/// `trace` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eccm_trace_record(
    trace: *const EccmTrace,
    index: usize,
    out: *mut EccmRecord,
) -> EccmStatus {
    guard(|| {
        let t = &trace.as_ref().ok_or_else(|| null("trace"))?.0;
        let r = t.records.get(index).ok_or_else(|| {
            Failure(
                EccmStatus::InvalidArgument,
                format!("record {index} out of range ({} records)", t.records.len()),
            )
        })?;
        let record = EccmRecord {
            t: r.t,
            n: r.n,
            lambda_max: r.lambda_max,
            snr_bar: r.snr_bar,
            j_star: r.j_star,
            radar_utility: r.radar_utility,
            jammer_utility: r.jammer_utility,
            kkt_residual: r.kkt_residual,
        };
        write_out(out, record, "out")
    })
}

/// # Safety
/// `trace` must come from [`eccm_simulate_json`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eccm_trace_free(trace: *mut EccmTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}
