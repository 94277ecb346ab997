//! C ABI over `qipsolve`.
//!
//! Problems and reports are opaque heap handles owned by the caller and
//! released with their `_free` function. Every entry point returns a
//! [`QipStatus`] (or a sentinel value for getters) and never unwinds across
//! the boundary; the message of the last failure on the calling thread is
//! available from [`qip_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qipsolve::probio::{build_named, generate_random, load, save};
use qipsolve::{Dims, Error, Objective, ProblemKind, ProblemSpec, SolveReport, SolverConfig, Termination};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QipStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    InfeasibleStart = 6,
    NotFound = 7,
    Numerical = 8,
    IterCap = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QipProblemKind {
    Type1 = 1,
    Type2 = 2,
    Qkd = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QipTermination {
    Converged = 0,
    IterCap = 1,
    NumericalFailure = 2,
}

/// Problem dimensions; zero fields take the generator defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct QipDims {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub big_n: usize,
    pub r1: usize,
    pub r2: usize,
}

/// Solver settings. Obtain defaults from [`qip_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct QipSolverConfig {
    pub beta0: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub kappa: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Final polish tolerance on the decrement; zero disables polishing.
    pub polish_tol: f64,
    /// Drops the log-det barrier of a QKD problem (heuristic mode).
    pub no_barrier: bool,
}

/// Opaque problem handle.
pub struct QipProblem {
    spec: ProblemSpec,
}

/// Opaque solve report handle.
pub struct QipReport {
    report: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> QipStatus {
    match e {
        Error::Io(_) => QipStatus::Io,
        Error::Parse { .. } => QipStatus::Parse,
        Error::Validation(_) | Error::ShapeError(_) | Error::ConstraintError(_) | Error::InvalidMatrix(_) => {
            QipStatus::Validation
        }
        Error::InfeasibleStart(_) => QipStatus::InfeasibleStart,
        Error::NotFound(_) => QipStatus::NotFound,
        Error::IterCap(_) => QipStatus::IterCap,
        Error::DomainViolation(_) | Error::SizeGuard(_) => QipStatus::InvalidArgument,
        _ => QipStatus::Numerical,
    }
}

struct Fail(QipStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, recording failures and panics as the last error.
fn guard<F>(f: F) -> QipStatus
where
    F: FnOnce() -> Result<(), Fail>,
{
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QipStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QipStatus::Panic
        }
    }
}

/// Getter variant of [`guard`] returning `fallback` on failure.
fn guard_value<T, F>(fallback: T, f: F) -> T
where
    F: FnOnce() -> Result<T, Fail>,
{
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => v,
        Ok(Err(Fail(_, msg))) => {
            set_error(&msg);
            fallback
        }
        Err(_) => {
            set_error("internal panic");
            fallback
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(QipStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(QipStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn problem_ref<'a>(p: *const QipProblem) -> Result<&'a QipProblem, Fail> {
    p.as_ref().ok_or_else(|| null("problem"))
}

unsafe fn report_ref<'a>(r: *const QipReport) -> Result<&'a QipReport, Fail> {
    r.as_ref().ok_or_else(|| null("report"))
}

unsafe fn emit_problem(out: *mut *mut QipProblem, spec: ProblemSpec) -> Result<(), Fail> {
    spec.validate()?;
    *out = Box::into_raw(Box::new(QipProblem { spec }));
    Ok(())
}

unsafe fn check_out<T>(out: *mut *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = ptr::null_mut();
    Ok(())
}

/// Loads and validates a problem file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qip_problem_load(path: *const c_char, out: *mut *mut QipProblem) -> QipStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        emit_problem(out, load(path)?)
    })
}

/// Builds a canonical instance such as `trace-inverse-n4` or `qkd-toy`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qip_problem_named(name: *const c_char, out: *mut *mut QipProblem) -> QipStatus {
    guard(|| {
        check_out(out)?;
        let name = str_arg(name, "name")?;
        emit_problem(out, build_named(name)?)
    })
}

/// Generates a seeded random instance.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn qip_problem_generate(
    kind: QipProblemKind,
    dims: QipDims,
    seed: u64,
    out: *mut *mut QipProblem,
) -> QipStatus {
    guard(|| {
        check_out(out)?;
        let kind = match kind {
            QipProblemKind::Type1 => ProblemKind::TypeI,
            QipProblemKind::Type2 => ProblemKind::TypeII,
            QipProblemKind::Qkd => ProblemKind::Qkd,
        };
        let dims = Dims {
            n: dims.n,
            k: dims.k,
            m: dims.m,
            big_n: dims.big_n,
            r1: dims.r1,
            r2: dims.r2,
        };
        emit_problem(out, generate_random(kind, dims, seed)?)
    })
}

/// Writes a problem file.
///
/// # Safety
/// `problem` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qip_problem_save(problem: *const QipProblem, path: *const c_char) -> QipStatus {
    guard(|| {
        let p = problem_ref(problem)?;
        let path = str_arg(path, "path")?;
        save(&p.spec, path)?;
        Ok(())
    })
}

/// Order `n` of the matrix variable, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qip_problem_order(problem: *const QipProblem) -> usize {
    guard_value(0, || Ok(problem_ref(problem)?.spec.order()))
}

/// # Safety
/// `problem` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qip_problem_free(problem: *mut QipProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

#[no_mangle]
pub extern "C" fn qip_config_default() -> QipSolverConfig {
    let d = SolverConfig::default();
    QipSolverConfig {
        beta0: d.beta0,
        theta: d.theta,
        epsilon: d.epsilon,
        kappa: d.kappa,
        max_outer: d.max_outer,
        max_inner: d.max_inner,
        polish_tol: d.polish_tol.unwrap_or(0.0),
        no_barrier: false,
    }
}

fn to_config(c: &QipSolverConfig) -> SolverConfig {
    SolverConfig {
        beta0: c.beta0,
        theta: c.theta,
        epsilon: c.epsilon,
        kappa: c.kappa,
        max_outer: c.max_outer,
        max_inner: c.max_inner,
        polish_tol: (c.polish_tol > 0.0).then_some(c.polish_tol),
        ..SolverConfig::default()
    }
}

/// Solves from the problem's declared start. `config` may be null for the
/// defaults. A report is produced (and `QIP_STATUS_OK` returned) whenever
/// the run starts; whether it converged is read from the report.
///
/// # Safety
/// `problem` must be a live handle, `config` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qip_solve(
    problem: *const QipProblem,
    config: *const QipSolverConfig,
    out: *mut *mut QipReport,
) -> QipStatus {
    guard(|| {
        check_out(out)?;
        let p = problem_ref(problem)?;
        let c = config.as_ref().copied().unwrap_or_else(|| qip_config_default());
        let mut spec = p.spec.clone();
        if c.no_barrier {
            match &mut spec.objective {
                Objective::Qkd { barrier, .. } => *barrier = false,
                _ => {
                    return Err(Fail(
                        QipStatus::InvalidArgument,
                        "no_barrier applies to qkd problems only".into(),
                    ))
                }
            }
        }
        let start = spec.start_point()?.clone();
        let report = qipsolve::solve(&spec, &start, &to_config(&c))?;
        *out = Box::into_raw(Box::new(QipReport { report }));
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qip_report_termination(report: *const QipReport) -> QipTermination {
    guard_value(QipTermination::NumericalFailure, || {
        Ok(match report_ref(report)?.report.termination {
            Termination::Converged => QipTermination::Converged,
            Termination::IterCap => QipTermination::IterCap,
            Termination::NumericalFailure => QipTermination::NumericalFailure,
        })
    })
}

/// Objective at the returned point, NaN for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qip_report_f_min(report: *const QipReport) -> f64 {
    guard_value(f64::NAN, || Ok(report_ref(report)?.report.f_min))
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qip_report_final_beta(report: *const QipReport) -> f64 {
    guard_value(f64::NAN, || Ok(report_ref(report)?.report.final_beta))
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qip_report_final_delta(report: *const QipReport) -> f64 {
    guard_value(f64::NAN, || Ok(report_ref(report)?.report.final_delta))
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qip_report_total_newton(report: *const QipReport) -> usize {
    guard_value(0, || Ok(report_ref(report)?.report.total_newton))
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qip_report_outer_iters(report: *const QipReport) -> usize {
    guard_value(0, || Ok(report_ref(report)?.report.outer_iters))
}

/// Copies the `n×n` solution, row-major, into `buf` of length `len`.
/// On `QIP_STATUS_BUFFER_TOO_SMALL` the needed length is in `needed`.
///
/// # Safety
/// `report` must be a live handle, `buf` valid for `len` writes (or null
/// when `len` is 0), `needed` null or writable.
#[no_mangle]
pub unsafe extern "C" fn qip_report_x_star(
    report: *const QipReport,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> QipStatus {
    guard(|| {
        let r = report_ref(report)?;
        let rows = &r.report.x_star;
        let total = rows.len() * rows.len();
        if let Some(n) = needed.as_mut() {
            *n = total;
        }
        if len < total {
            return Err(Fail(
                QipStatus::BufferTooSmall,
                format!("x_star needs {total} entries, buffer holds {len}"),
            ));
        }
        if total > 0 && buf.is_null() {
            return Err(null("buffer"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, total);
        for (d, s) in dst.iter_mut().zip(rows.iter().flatten()) {
            *d = *s;
        }
        Ok(())
    })
}

/// Report as JSON; release with [`qip_string_free`]. Null on failure.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qip_report_to_json(report: *const QipReport) -> *mut c_char {
    guard_value(ptr::null_mut(), || {
        let r = report_ref(report)?;
        let text = serde_json::to_string(&r.report).map_err(|e| Fail(QipStatus::Numerical, e.to_string()))?;
        let c = CString::new(text).map_err(|e| Fail(QipStatus::Numerical, e.to_string()))?;
        Ok(c.into_raw())
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qip_report_free(report: *mut QipReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn qip_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn qip_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn qip_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_map_to_status() {
        assert_eq!(status_of(&Error::NotFound("x".into())), QipStatus::NotFound);
        assert_eq!(status_of(&Error::InfeasibleStart("x".into())), QipStatus::InfeasibleStart);
        assert_eq!(status_of(&Error::NumericalFailure("x".into())), QipStatus::Numerical);
    }

    #[test]
    fn guard_catches_panics() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, QipStatus::Panic);
        assert!(!qip_last_error_message().is_null());
        assert_eq!(guard(|| Ok(())), QipStatus::Ok);
        assert!(qip_last_error_message().is_null());
    }

    #[test]
    fn default_config_round_trips() {
        let c = to_config(&qip_config_default());
        assert_eq!(c, SolverConfig::default());
    }
}
