//! C ABI for the issparabolic toolkit.
//!
//! Objects are exposed as opaque handles created by `isp_*_new`/`parse`/
//! `load` functions and released with the matching `isp_*_free`. Every
//! fallible function returns an [`IspStatus`]; on failure a message is kept
//! per thread and can be read with [`isp_last_error`]. Panics never cross
//! the boundary and are reported as [`IspStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use issparabolic::bounds::{iss_bound, DisturbanceMagnitudes};
use issparabolic::cli::validate_scenario;
use issparabolic::exprlang::{Expression, Var};
use issparabolic::problem::BoundaryKind;
use issparabolic::scenario::Scenario;
use issparabolic::solver::{solve, SolutionTrajectory};
use issparabolic::splitting::verify_spec;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IspStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    ParseError = 4,
    EvalError = 5,
    LoadError = 6,
    ValidationFailed = 7,
    SolverFailed = 8,
    BoundViolated = 9,
    EstimatorFailed = 10,
    BufferTooSmall = 11,
    IoError = 12,
    Panic = 13,
}

/// Boundary operator selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IspBoundaryKind {
    Robin = 0,
    Neumann = 1,
    Dirichlet = 2,
}

impl From<IspBoundaryKind> for BoundaryKind {
    fn from(k: IspBoundaryKind) -> Self {
        match k {
            IspBoundaryKind::Robin => BoundaryKind::Robin,
            IspBoundaryKind::Neumann => BoundaryKind::Neumann,
            IspBoundaryKind::Dirichlet => BoundaryKind::Dirichlet,
        }
    }
}

/// Free variable selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IspVariable {
    R = 0,
    T = 1,
    U = 2,
}

impl From<IspVariable> for Var {
    fn from(v: IspVariable) -> Self {
        match v {
            IspVariable::R => Var::R,
            IspVariable::T => Var::T,
            IspVariable::U => Var::U,
        }
    }
}

/// Per-time series of a trajectory.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IspColumn {
    Time = 0,
    L2Norm = 1,
    SupNorm = 2,
    BoundaryValue = 3,
}

/// ISS envelope at one horizon. `epsilon` is NaN unless the Neumann
/// envelope was evaluated.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IspIssEstimate {
    pub horizon: f64,
    pub decay_rate: f64,
    pub transient: f64,
    pub gain_d: f64,
    pub gain_f: f64,
    pub total: f64,
    pub epsilon: f64,
}

/// Parsed expression in `r`, `t` and `u`.
pub struct IspExpression(Expression);

/// Loaded scenario.
pub struct IspScenario(Scenario);

/// Solution trajectory of a simulation.
pub struct IspTrajectory(SolutionTrajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    let c = CString::new(text).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: IspStatus, message: impl Into<String>) -> IspStatus {
    set_error(message);
    status
}

/// Runs `f`, converting panics into [`IspStatus::Panic`].
fn guard(f: impl FnOnce() -> IspStatus) -> IspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(IspStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, IspStatus> {
    if s.is_null() {
        return Err(fail(IspStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(IspStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

macro_rules! non_null {
    ($p:expr, $what:expr) => {
        if $p.is_null() {
            return fail(IspStatus::NullPointer, concat!($what, " is NULL"));
        }
    };
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn isp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn isp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses `text` into a new expression handle stored in `*out`.
#[no_mangle]
pub unsafe extern "C" fn isp_expression_parse(text: *const c_char, out: *mut *mut IspExpression) -> IspStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let text = try_status!(read_str(text, "text"));
        match Expression::parse(text) {
            Ok(e) => {
                *out = Box::into_raw(Box::new(IspExpression(e)));
                IspStatus::Ok
            }
            Err(e) => fail(IspStatus::ParseError, e.to_string()),
        }
    })
}

/// Evaluates at `(r, t, u)`.
#[no_mangle]
pub unsafe extern "C" fn isp_expression_eval(
    expr: *const IspExpression,
    r: f64,
    t: f64,
    u: f64,
    out: *mut f64,
) -> IspStatus {
    guard(|| {
        non_null!(expr, "expr");
        non_null!(out, "out");
        match (*expr).0.eval_rtu(r, t, u) {
            Ok(v) => {
                *out = v;
                IspStatus::Ok
            }
            Err(e) => fail(IspStatus::EvalError, e.to_string()),
        }
    })
}

/// Symbolic derivative with respect to `var`, as a new handle.
#[no_mangle]
pub unsafe extern "C" fn isp_expression_derivative(
    expr: *const IspExpression,
    var: IspVariable,
    out: *mut *mut IspExpression,
) -> IspStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        non_null!(expr, "expr");
        *out = Box::into_raw(Box::new(IspExpression((*expr).0.derivative(var.into()))));
        IspStatus::Ok
    })
}

/// Writes the canonical text of `expr` into `buf` (NUL-terminated).
/// `*needed` receives the required size including the NUL; if `capacity`
/// is too small nothing is written and `BufferTooSmall` is returned.
#[no_mangle]
pub unsafe extern "C" fn isp_expression_to_string(
    expr: *const IspExpression,
    buf: *mut c_char,
    capacity: usize,
    needed: *mut usize,
) -> IspStatus {
    guard(|| {
        non_null!(expr, "expr");
        let text = (*expr).0.to_string();
        let size = text.len() + 1;
        if !needed.is_null() {
            *needed = size;
        }
        if buf.is_null() || capacity < size {
            return fail(IspStatus::BufferTooSmall, format!("need {size} bytes, have {capacity}"));
        }
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
        *buf.add(text.len()) = 0;
        IspStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn isp_expression_free(expr: *mut IspExpression) {
    if !expr.is_null() {
        drop(Box::from_raw(expr));
    }
}

/// Loads a scenario file.
#[no_mangle]
pub unsafe extern "C" fn isp_scenario_load(path: *const c_char, out: *mut *mut IspScenario) -> IspStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let path = try_status!(read_str(path, "path"));
        match Scenario::load(path) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(IspScenario(s)));
                IspStatus::Ok
            }
            Err(e) => fail(IspStatus::LoadError, e.to_string()),
        }
    })
}

/// Parses scenario text.
#[no_mangle]
pub unsafe extern "C" fn isp_scenario_parse(text: *const c_char, out: *mut *mut IspScenario) -> IspStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let text = try_status!(read_str(text, "text"));
        match Scenario::parse(text, "<string>") {
            Ok(s) => {
                *out = Box::into_raw(Box::new(IspScenario(s)));
                IspStatus::Ok
            }
            Err(e) => fail(IspStatus::LoadError, e.to_string()),
        }
    })
}

/// The built-in superlinear example with the given boundary kind and
/// disturbance amplitude.
#[no_mangle]
pub unsafe extern "C" fn isp_scenario_example(
    kind: IspBoundaryKind,
    amplitude: f64,
    out: *mut *mut IspScenario,
) -> IspStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        if !amplitude.is_finite() {
            return fail(IspStatus::InvalidArgument, "amplitude must be finite");
        }
        *out = Box::into_raw(Box::new(IspScenario(Scenario::example(kind.into(), amplitude))));
        IspStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn isp_scenario_free(scenario: *mut IspScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Effective trace constant of the scenario (declared or estimated).
#[no_mangle]
pub unsafe extern "C" fn isp_scenario_trace_constant(scenario: *const IspScenario, out: *mut f64) -> IspStatus {
    guard(|| {
        non_null!(scenario, "scenario");
        non_null!(out, "out");
        *out = (*scenario).0.spec.constants.trace_constant;
        IspStatus::Ok
    })
}

/// Runs the validators. Returns `Ok` when all pass and `ValidationFailed`
/// otherwise; the failing checks are named in the last error.
#[no_mangle]
pub unsafe extern "C" fn isp_scenario_validate(scenario: *const IspScenario) -> IspStatus {
    guard(|| {
        non_null!(scenario, "scenario");
        match validate_scenario(&(*scenario).0) {
            Ok(report) if report.passed() => IspStatus::Ok,
            Ok(report) => {
                let names: Vec<&str> = report.failures().map(|c| c.name).collect();
                fail(IspStatus::ValidationFailed, format!("failed checks: {}", names.join(", ")))
            }
            Err(e) => fail(IspStatus::ValidationFailed, e.message),
        }
    })
}

/// ISS envelope of the scenario's boundary kind at horizon `horizon`.
#[no_mangle]
pub unsafe extern "C" fn isp_scenario_iss_bound(
    scenario: *const IspScenario,
    sup_f: f64,
    sup_d: f64,
    sup_phi: f64,
    l2_phi: f64,
    horizon: f64,
    out: *mut IspIssEstimate,
) -> IspStatus {
    guard(|| {
        non_null!(scenario, "scenario");
        non_null!(out, "out");
        let s = &(*scenario).0;
        let mags = match DisturbanceMagnitudes::new(sup_f, sup_d, sup_phi, l2_phi) {
            Ok(m) => m,
            Err(e) => return fail(IspStatus::InvalidArgument, e.to_string()),
        };
        let spec = &s.spec;
        match iss_bound(spec.boundary, &spec.constants, &spec.geometry, &mags, &spec.psi, horizon, s.bounds.measure()) {
            Ok(e) => {
                *out = IspIssEstimate {
                    horizon: e.horizon,
                    decay_rate: e.decay_rate,
                    transient: e.transient,
                    gain_d: e.gain_d,
                    gain_f: e.gain_f,
                    total: e.total,
                    epsilon: e.epsilon.unwrap_or(f64::NAN),
                };
                IspStatus::Ok
            }
            Err(e) => fail(IspStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Solves the scenario. On solver failure `SolverFailed` is returned and
/// `*out` holds the partial trajectory, which must still be freed.
#[no_mangle]
pub unsafe extern "C" fn isp_simulate(scenario: *const IspScenario, out: *mut *mut IspTrajectory) -> IspStatus {
    guard(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        non_null!(scenario, "scenario");
        let s = &(*scenario).0;
        let result = solve(&s.spec, &s.radial_grid(), &s.time_grid(), s.grid.snapshot_stride, &s.solver_options());
        match result {
            Ok(traj) => {
                *out = Box::into_raw(Box::new(IspTrajectory(traj)));
                IspStatus::Ok
            }
            Err(failure) => {
                *out = Box::into_raw(Box::new(IspTrajectory(*failure.partial)));
                fail(IspStatus::SolverFailed, failure.error.to_string())
            }
        }
    })
}

/// Number of recorded times.
#[no_mangle]
pub unsafe extern "C" fn isp_trajectory_len(traj: *const IspTrajectory) -> usize {
    if traj.is_null() {
        0
    } else {
        (*traj).0.len()
    }
}

/// Copies one per-time series into `buf`, which must hold at least
/// `isp_trajectory_len` values.
#[no_mangle]
pub unsafe extern "C" fn isp_trajectory_copy_column(
    traj: *const IspTrajectory,
    column: IspColumn,
    buf: *mut f64,
    capacity: usize,
) -> IspStatus {
    guard(|| {
        non_null!(traj, "traj");
        non_null!(buf, "buf");
        let t = &(*traj).0;
        let data = match column {
            IspColumn::Time => &t.times,
            IspColumn::L2Norm => &t.l2_norm,
            IspColumn::SupNorm => &t.sup_norm,
            IspColumn::BoundaryValue => &t.boundary_value,
        };
        if capacity < data.len() {
            return fail(IspStatus::BufferTooSmall, format!("need {} values, have {capacity}", data.len()));
        }
        ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        IspStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn isp_trajectory_free(traj: *mut IspTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Runs the full verification pipeline. Writes `report.csv` to `out_dir`
/// unless it is NULL. Returns `Ok` if every check passes, `BoundViolated`
/// if one fails; `*passed_claims`/`*total_claims` receive the counts when
/// non-NULL.
#[no_mangle]
pub unsafe extern "C" fn isp_verify_iss(
    scenario: *const IspScenario,
    out_dir: *const c_char,
    passed_claims: *mut c_int,
    total_claims: *mut c_int,
) -> IspStatus {
    guard(|| {
        non_null!(scenario, "scenario");
        let dir = if out_dir.is_null() { None } else { Some(try_status!(read_str(out_dir, "out_dir"))) };
        let s = &(*scenario).0;
        match validate_scenario(s) {
            Ok(report) if report.passed() => {}
            Ok(_) => return fail(IspStatus::ValidationFailed, "scenario failed validation"),
            Err(e) => return fail(IspStatus::ValidationFailed, e.message),
        }
        let v = match verify_spec(&s.spec, &s.radial_grid(), &s.time_grid(), &s.solver_options(), &s.verify_config()) {
            Ok(v) => v,
            Err(e) => return fail(IspStatus::SolverFailed, e.to_string()),
        };
        if let Some(dir) = dir {
            let dir = Path::new(dir);
            let written = std::fs::create_dir_all(dir)
                .and_then(|_| std::fs::File::create(dir.join("report.csv")))
                .and_then(|f| v.report.write_csv(std::io::BufWriter::new(f)));
            if let Err(e) = written {
                return fail(IspStatus::IoError, format!("writing report to {}: {e}", dir.display()));
            }
        }
        let passed = v.report.claims.iter().filter(|c| c.passed()).count();
        if !passed_claims.is_null() {
            *passed_claims = passed as c_int;
        }
        if !total_claims.is_null() {
            *total_claims = v.report.claims.len() as c_int;
        }
        if v.report.passed() {
            IspStatus::Ok
        } else {
            let names: Vec<&str> = v.report.failures().map(|c| c.claim.as_str()).collect();
            fail(IspStatus::BoundViolated, format!("violated: {}", names.join(", ")))
        }
    })
}
