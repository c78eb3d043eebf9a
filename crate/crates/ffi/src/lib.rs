//! C ABI for loading problems, evaluating expressions and `λ^(k)`, running
//! point estimates and hypothesis checks.
//!
//! Every entry point returns a [`DegenStatus`]; on failure a message is
//! available from [`degen_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Panics never cross the
//! boundary: they are reported as [`DegenStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use degen::check::{run_check_on, CheckOptions};
use degen::domain::Domain;
use degen::expr::{self, CompiledExpr};
use degen::problem::{self, Problem};
use degen::sde_mc::{estimate_point, EstimateError, PathConfig, Simulator};
use degen::vf_algebra::BracketSet;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Problem file or expression syntax, or an unreadable file.
    Parse = 3,
    Dimension = 4,
    /// Domain cannot be located, or the point lies outside it.
    Domain = 5,
    InvalidArgument = 6,
    /// Estimate rejected for too many unexited paths.
    Rejected = 7,
    /// Non-finite bracket values at the point.
    NonFinite = 8,
    Panic = 9,
}

/// Loaded problem with its located domain.
pub struct DegenProblem {
    problem: Problem,
    domain: Domain,
}

/// Compiled scalar expression.
pub struct DegenExpr {
    compiled: CompiledExpr,
    dim: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DegenEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub n_used: u64,
    pub unexited_frac: f64,
    pub mean_tau: f64,
    pub t_max: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DegenPathOptions {
    pub dt: f64,
    /// Path horizon; zero or negative selects the default.
    pub t_max: f64,
    pub seed: u64,
    pub bridge: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

type FfiResult = Result<(), (DegenStatus, String)>;

fn guard(f: impl FnOnce() -> FfiResult) -> DegenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DegenStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            DegenStatus::Panic
        }
    }
}

fn null(what: &str) -> (DegenStatus, String) {
    (DegenStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (DegenStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (DegenStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn point_arg<'a>(x: *const f64, len: usize, dim: usize) -> Result<&'a [f64], (DegenStatus, String)> {
    if x.is_null() {
        return Err(null("point"));
    }
    if len != dim {
        return Err((
            DegenStatus::Dimension,
            format!("point has {len} coordinates, expected {dim}"),
        ));
    }
    Ok(std::slice::from_raw_parts(x, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (DegenStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

fn wrap_problem(problem: Problem) -> Result<Box<DegenProblem>, (DegenStatus, String)> {
    let domain = Domain::new(&problem.phi, problem.dim, problem.bbox.as_deref())
        .map_err(|e| (DegenStatus::Domain, e.to_string()))?;
    Ok(Box::new(DegenProblem { problem, domain }))
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the thread.
#[no_mangle]
pub extern "C" fn degen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a problem file. On success `*out` owns a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn degen_problem_load(path: *const c_char, out: *mut *mut DegenProblem) -> DegenStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let p = problem::load_problem(path).map_err(|e| (DegenStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(wrap_problem(p)?);
        Ok(())
    })
}

/// Parse a problem from text in the problem-file format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn degen_problem_parse(text: *const c_char, out: *mut *mut DegenProblem) -> DegenStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        let p = problem::parse_problem(text).map_err(|e| (DegenStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(wrap_problem(p)?);
        Ok(())
    })
}

/// # Safety
/// `problem` must come from a `degen_problem_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn degen_problem_free(problem: *mut DegenProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Dimension `d`, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn degen_problem_dim(problem: *const DegenProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.dim)
}

/// Number of noise fields `n`, or 0 for a null handle.
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn degen_problem_noise_count(problem: *const DegenProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.problem.n_noise())
}

/// Parse an expression in variables `x1..x{dim}`.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn degen_expr_parse(source: *const c_char, dim: usize, out: *mut *mut DegenExpr) -> DegenStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let src = str_arg(source, "source")?;
        let e = expr::parse(src, dim).map_err(|e| (DegenStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(DegenExpr {
            compiled: e.compile(),
            dim,
        }));
        Ok(())
    })
}

/// # Safety
/// `e` must come from [`degen_expr_parse`] or be null.
#[no_mangle]
pub unsafe extern "C" fn degen_expr_free(e: *mut DegenExpr) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `x` must point to `len` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn degen_expr_eval(e: *const DegenExpr, x: *const f64, len: usize, out: *mut f64) -> DegenStatus {
    guard(|| {
        let e = handle(e, "expression")?;
        let x = point_arg(x, len, e.dim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = e.compiled.eval(x);
        Ok(())
    })
}

/// `λ^(k)` of the problem's fields at `x`.
///
/// # Safety
/// `x` must point to `len` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn degen_lambda_k(
    problem: *const DegenProblem,
    k: usize,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> DegenStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        let x = point_arg(x, len, p.problem.dim)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let set = BracketSet::new(&p.problem.fields, k).map_err(|e| (DegenStatus::InvalidArgument, e.to_string()))?;
        *out = set.lambda(k, x).map_err(|e| (DegenStatus::NonFinite, e.to_string()))?;
        Ok(())
    })
}

/// Default path options: `dt = 1e-4`, default horizon, seed 0, no bridge.
#[no_mangle]
pub extern "C" fn degen_path_options_default() -> DegenPathOptions {
    let d = PathConfig::default();
    DegenPathOptions {
        dt: d.dt,
        t_max: 0.0,
        seed: d.seed,
        bridge: d.bridge,
    }
}

/// Monte Carlo estimate of `u(x)` from `n_paths` paths. A rejected estimate
/// returns [`DegenStatus::Rejected`] and still fills `*out`.
///
/// # Safety
/// `x` must point to `len` doubles, `options` and `out` to one struct each.
#[no_mangle]
pub unsafe extern "C" fn degen_estimate_point(
    problem: *const DegenProblem,
    x: *const f64,
    len: usize,
    n_paths: u64,
    options: *const DegenPathOptions,
    out: *mut DegenEstimate,
) -> DegenStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        let x = point_arg(x, len, p.problem.dim)?;
        let opts = handle(options, "options")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = PathConfig {
            dt: opts.dt,
            t_max: (opts.t_max > 0.0).then_some(opts.t_max),
            seed: opts.seed,
            bridge: opts.bridge,
            ..PathConfig::default()
        };
        let sim = Simulator::with_domain(&p.problem, p.domain.clone());
        let fill = |e: &degen::sde_mc::Estimate| DegenEstimate {
            value: e.value,
            stderr: e.stderr,
            n_paths: e.n_paths as u64,
            n_used: e.n_used as u64,
            unexited_frac: e.unexited_frac,
            mean_tau: e.mean_tau,
            t_max: e.t_max,
        };
        match estimate_point(&sim, x, n_paths as usize, &cfg) {
            Ok(e) => {
                *out = fill(&e);
                Ok(())
            }
            Err(err) => {
                let msg = err.to_string();
                Err(match err {
                    EstimateError::TooManyUnexited { estimate, .. } => {
                        *out = fill(&estimate);
                        (DegenStatus::Rejected, msg)
                    }
                    EstimateError::OutsideDomain { .. } | EstimateError::Domain(_) => (DegenStatus::Domain, msg),
                    EstimateError::Dimension { .. } => (DegenStatus::Dimension, msg),
                    EstimateError::Config(_) => (DegenStatus::InvalidArgument, msg),
                })
            }
        }
    })
}

/// Run the hypothesis checks and return the report as a JSON string in
/// `*json` (release with [`degen_string_free`]) and the verdict exit code
/// (0 pass, 2 fail, 3 inconclusive) in `*verdict`.
///
/// # Safety
/// `json` and `verdict` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn degen_check_report(
    problem: *const DegenProblem,
    k_max: usize,
    grid_res: usize,
    json: *mut *mut c_char,
    verdict: *mut i32,
) -> DegenStatus {
    guard(|| {
        let p = handle(problem, "problem")?;
        if json.is_null() || verdict.is_null() {
            return Err(null("output pointer"));
        }
        if grid_res == 0 {
            return Err((DegenStatus::InvalidArgument, "grid_res must be positive".into()));
        }
        let opts = CheckOptions {
            k_max,
            grid_res,
            ..CheckOptions::default()
        };
        let report =
            run_check_on(&p.problem, &p.domain, &opts).map_err(|e| (DegenStatus::InvalidArgument, e.to_string()))?;
        let text = serde_json::to_string(&report).map_err(|e| (DegenStatus::Panic, e.to_string()))?;
        *json = CString::new(text)
            .map_err(|e| (DegenStatus::Panic, e.to_string()))?
            .into_raw();
        *verdict = report.verdict.exit_code();
        Ok(())
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn degen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
