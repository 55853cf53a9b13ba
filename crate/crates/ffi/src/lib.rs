//! C ABI for the assessment library.
//!
//! Conventions: opaque handles own Rust data and are released with their
//! matching `_free` function; every fallible call returns a status code and
//! writes its result through an out-pointer; returned strings are
//! heap-allocated C strings released with [`gridsec_string_free`]; the last
//! error message for the calling thread is available via
//! [`gridsec_last_error_message`]. Configuration and results cross the
//! boundary as JSON documents, matching the CLI artifact schemas.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gridsec_core::attack::{build_bilevel, design_attack, AttackSpec, TargetCase};
use gridsec_core::benders::MbdOptions;
use gridsec_core::config::RunConfig;
use gridsec_core::grid::{load_case, CaseFormat, GridCase, LoadOptions};
use gridsec_core::network::{build_dc, compute_factors, dc_power_flow};
use gridsec_core::rtca::{contingency_list, screen, ScreenParams};
use gridsec_core::sced::{build_sced, solve_sced};
use gridsec_core::sim::{effective_injections, implement_attack, screen_targets, SimOptions};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridsecStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    DomainError = 5,
    InternalError = 6,
}

/// Opaque case handle.
pub struct GridsecCase {
    inner: GridCase,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gridsec_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned through one of the `out`
/// parameters here, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gridsec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Release a case handle.
///
/// # Safety
/// `case` must come from a successful `gridsec_case_load_*` call and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn gridsec_case_free(case: *mut GridsecCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, GridsecStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(GridsecStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|e| {
        set_error(&format!("invalid utf-8 in argument: {e}"));
        GridsecStatus::InvalidUtf8
    })
}

fn write_string(out: *mut *mut c_char, value: String) -> GridsecStatus {
    let c = match CString::new(value) {
        Ok(c) => c,
        Err(e) => {
            set_error(&format!("result contained an interior NUL: {e}"));
            return GridsecStatus::InternalError;
        }
    };
    unsafe {
        *out = c.into_raw();
    }
    GridsecStatus::Ok
}

fn guard<F: FnOnce() -> GridsecStatus>(f: F) -> GridsecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            GridsecStatus::InternalError
        }
    }
}

fn parse_config(json: *const c_char) -> Result<RunConfig, GridsecStatus> {
    if json.is_null() {
        return Ok(RunConfig::default());
    }
    let text = unsafe { read_str(json)? };
    serde_json::from_str(text).map_err(|e| {
        set_error(&format!("config JSON: {e}"));
        GridsecStatus::ParseError
    })
}

/// Parse and validate a case from a JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gridsec_case_load_json(
    json: *const c_char,
    out: *mut *mut GridsecCase,
) -> GridsecStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return GridsecStatus::NullArgument;
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_case(
            text.as_bytes(),
            CaseFormat::NativeJson,
            &LoadOptions::default(),
        ) {
            Ok((case, _)) => {
                *out = Box::into_raw(Box::new(GridsecCase { inner: case }));
                GridsecStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                match e {
                    gridsec_core::grid::GridError::Parse(_) => GridsecStatus::ParseError,
                    _ => GridsecStatus::ValidationError,
                }
            }
        }
    })
}

/// Parse and validate a case from a file. `format` is `"native"` or
/// `"matpower"`; NULL means native.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gridsec_case_load_path(
    path: *const c_char,
    format: *const c_char,
    out: *mut *mut GridsecCase,
) -> GridsecStatus {
    guard(|| {
        if out.is_null() {
            set_error("null out pointer");
            return GridsecStatus::NullArgument;
        }
        let path = match read_str(path) {
            Ok(p) => p,
            Err(s) => return s,
        };
        let fmt = if format.is_null() {
            CaseFormat::NativeJson
        } else {
            match read_str(format).map(|f| f.parse::<CaseFormat>()) {
                Ok(Ok(f)) => f,
                Ok(Err(e)) => {
                    set_error(&e);
                    return GridsecStatus::ParseError;
                }
                Err(s) => return s,
            }
        };
        let file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) => {
                set_error(&format!("{path}: {e}"));
                return GridsecStatus::ParseError;
            }
        };
        match load_case(file, fmt, &LoadOptions::default()) {
            Ok((case, _)) => {
                *out = Box::into_raw(Box::new(GridsecCase { inner: case }));
                GridsecStatus::Ok
            }
            Err(e) => {
                set_error(&e.to_string());
                GridsecStatus::ValidationError
            }
        }
    })
}

/// Number of buses in a case.
///
/// # Safety
/// `case` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gridsec_case_bus_count(
    case: *const GridsecCase,
    out: *mut usize,
) -> GridsecStatus {
    if case.is_null() || out.is_null() {
        set_error("null argument");
        return GridsecStatus::NullArgument;
    }
    *out = (*case).inner.buses.len();
    GridsecStatus::Ok
}

/// Validation diagnostics as a JSON array (empty array means every
/// invariant holds).
///
/// # Safety
/// `case` must be a live handle; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gridsec_validate_json(
    case: *const GridsecCase,
    out_json: *mut *mut c_char,
) -> GridsecStatus {
    guard(|| {
        if case.is_null() || out_json.is_null() {
            set_error("null argument");
            return GridsecStatus::NullArgument;
        }
        let diags = gridsec_core::grid::validate(&(*case).inner);
        match serde_json::to_string_pretty(&diags) {
            Ok(json) => write_string(out_json, json),
            Err(e) => {
                set_error(&e.to_string());
                GridsecStatus::InternalError
            }
        }
    })
}

struct PipelineParts {
    net: gridsec_core::network::DcNetwork,
    factors: gridsec_core::network::DistFactors,
    eligible: Vec<gridsec_core::rtca::ContingencySpec>,
    flows: gridsec_core::network::FlowState,
}

fn pipeline(case: &GridCase, cfg: &RunConfig) -> Result<PipelineParts, String> {
    let net = build_dc(case).map_err(|e| e.to_string())?;
    let eligible = contingency_list(case, cfg.kv_min);
    let idx: Vec<usize> = eligible.iter().map(|c| c.branch_index).collect();
    let factors = compute_factors(&net, case, &idx).map_err(|e| e.to_string())?;
    let inj = effective_injections(case, &case.p0());
    let flows = dc_power_flow(&net, &inj).map_err(|e| e.to_string())?;
    Ok(PipelineParts {
        net,
        factors,
        eligible,
        flows,
    })
}

/// Contingency screening; returns the screen CSV (same columns as the CLI
/// artifact). `config_json` is a full run configuration or NULL for
/// defaults.
///
/// # Safety
/// `case` must be a live handle; `out_csv` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gridsec_rtca_csv(
    case: *const GridsecCase,
    config_json: *const c_char,
    out_csv: *mut *mut c_char,
) -> GridsecStatus {
    guard(|| {
        if case.is_null() || out_csv.is_null() {
            set_error("null argument");
            return GridsecStatus::NullArgument;
        }
        let cfg = match parse_config(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let case = &(*case).inner;
        let parts = match pipeline(case, &cfg) {
            Ok(p) => p,
            Err(e) => {
                set_error(&e);
                return GridsecStatus::DomainError;
            }
        };
        let params = ScreenParams {
            tau: cfg.tau,
            tau_base: cfg.tau_base,
        };
        match screen(case, &parts.factors, &parts.flows, &parts.eligible, &params) {
            Ok((result, _)) => write_string(out_csv, result.to_csv()),
            Err(e) => {
                set_error(&e.to_string());
                GridsecStatus::DomainError
            }
        }
    })
}

/// Security-constrained dispatch at the case state; returns the solution
/// JSON.
///
/// # Safety
/// `case` must be a live handle; `out_json` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gridsec_sced_json(
    case: *const GridsecCase,
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> GridsecStatus {
    guard(|| {
        if case.is_null() || out_json.is_null() {
            set_error("null argument");
            return GridsecStatus::NullArgument;
        }
        let cfg = match parse_config(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let case = &(*case).inner;
        let run = || -> Result<String, String> {
            let parts = pipeline(case, &cfg)?;
            let params = ScreenParams {
                tau: cfg.tau,
                tau_base: cfg.tau_base,
            };
            let (_, constraints) =
                screen(case, &parts.factors, &parts.flows, &parts.eligible, &params)
                    .map_err(|e| e.to_string())?;
            let problem = build_sced(
                case,
                &parts.factors,
                &constraints,
                &vec![0.0; case.buses.len()],
                &cfg.sced_params(),
            )
            .map_err(|e| e.to_string())?;
            let sol = solve_sced(&problem, case).map_err(|e| e.to_string())?;
            Ok(sol.to_json())
        };
        match run() {
            Ok(json) => write_string(out_json, json),
            Err(e) => {
                set_error(&e);
                GridsecStatus::DomainError
            }
        }
    })
}

fn parse_spec(spec_json: *const c_char, sigma: f64) -> Result<AttackSpec, GridsecStatus> {
    let text = unsafe { read_str(spec_json)? };
    #[derive(serde::Deserialize)]
    struct SpecDoc {
        target_line: String,
        contingency: String,
        n1: f64,
        ls: f64,
        #[serde(default)]
        sigma: Option<f64>,
    }
    let doc: SpecDoc = serde_json::from_str(text).map_err(|e| {
        set_error(&format!("attack spec JSON: {e}"));
        GridsecStatus::ParseError
    })?;
    let target_case = if doc.contingency.eq_ignore_ascii_case("base") {
        TargetCase::Base
    } else {
        TargetCase::Contingency(doc.contingency)
    };
    Ok(AttackSpec {
        target_line: doc.target_line,
        target_case,
        n1: doc.n1,
        load_shift: doc.ls,
        sigma: doc.sigma.unwrap_or(sigma),
    })
}

fn mbd_options(cfg: &RunConfig) -> MbdOptions {
    MbdOptions {
        epsilon: cfg.eps,
        max_iter: cfg.max_iter,
        u0: None,
        multistart: cfg.multistart,
        seed: cfg.seed,
        alpha_floor: -1e6,
    }
}

/// Design the worst-case attack for one target; returns the design JSON
/// (attack vector, certified flows, solve trace).
/// `spec_json`: `{"target_line": ..., "contingency": "<id>|base",
/// "n1": ..., "ls": ...}`.
///
/// # Safety
/// `case` must be a live handle; string arguments NUL-terminated;
/// `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn gridsec_design_json(
    case: *const GridsecCase,
    config_json: *const c_char,
    spec_json: *const c_char,
    out_json: *mut *mut c_char,
) -> GridsecStatus {
    guard(|| {
        if case.is_null() || out_json.is_null() {
            set_error("null argument");
            return GridsecStatus::NullArgument;
        }
        let cfg = match parse_config(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let spec = match parse_spec(spec_json, cfg.sigma) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let case = &(*case).inner;
        let run = || -> Result<String, String> {
            let parts = pipeline(case, &cfg)?;
            let params = ScreenParams {
                tau: cfg.tau,
                tau_base: cfg.tau_base,
            };
            let (_, constraints) =
                screen(case, &parts.factors, &parts.flows, &parts.eligible, &params)
                    .map_err(|e| e.to_string())?;
            let bp = build_bilevel(
                case,
                &parts.net,
                &parts.factors,
                &constraints,
                &spec,
                &cfg.sced_params(),
            )
            .map_err(|e| e.to_string())?;
            let design = design_attack(&bp, &mbd_options(&cfg)).map_err(|e| e.to_string())?;
            Ok(design.to_json())
        };
        match run() {
            Ok(json) => write_string(out_json, json),
            Err(e) => {
                set_error(&e);
                GridsecStatus::DomainError
            }
        }
    })
}

/// Design one attack and run it through the defender loop; returns the
/// assessment report JSON.
///
/// # Safety
/// `case` must be a live handle; string arguments NUL-terminated;
/// `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn gridsec_simulate_json(
    case: *const GridsecCase,
    config_json: *const c_char,
    spec_json: *const c_char,
    out_json: *mut *mut c_char,
) -> GridsecStatus {
    guard(|| {
        if case.is_null() || out_json.is_null() {
            set_error("null argument");
            return GridsecStatus::NullArgument;
        }
        let cfg = match parse_config(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        let spec = match parse_spec(spec_json, cfg.sigma) {
            Ok(s) => s,
            Err(s) => return s,
        };
        let case = &(*case).inner;
        let run = || -> Result<String, String> {
            let parts = pipeline(case, &cfg)?;
            let params = ScreenParams {
                tau: cfg.tau,
                tau_base: cfg.tau_base,
            };
            let (_, constraints) =
                screen(case, &parts.factors, &parts.flows, &parts.eligible, &params)
                    .map_err(|e| e.to_string())?;
            let bp = build_bilevel(
                case,
                &parts.net,
                &parts.factors,
                &constraints,
                &spec,
                &cfg.sced_params(),
            )
            .map_err(|e| e.to_string())?;
            let design = design_attack(&bp, &mbd_options(&cfg)).map_err(|e| e.to_string())?;
            let sim_opts = SimOptions::from(&cfg);
            let report = implement_attack(case, &parts.net, &parts.factors, &design, &sim_opts)
                .map_err(|e| e.to_string())?;
            Ok(report.to_json())
        };
        match run() {
            Ok(json) => write_string(out_json, json),
            Err(e) => {
                set_error(&e);
                GridsecStatus::DomainError
            }
        }
    })
}

/// Attack every warned pair over the configured budget grid; returns the
/// statistical table CSV.
///
/// # Safety
/// `case` must be a live handle; `out_csv` valid.
#[no_mangle]
pub unsafe extern "C" fn gridsec_screen_table_csv(
    case: *const GridsecCase,
    config_json: *const c_char,
    out_csv: *mut *mut c_char,
) -> GridsecStatus {
    guard(|| {
        if case.is_null() || out_csv.is_null() {
            set_error("null argument");
            return GridsecStatus::NullArgument;
        }
        let cfg = match parse_config(config_json) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match screen_targets(&(*case).inner, &cfg) {
            Ok(sweep) => write_string(out_csv, sweep.to_table_csv()),
            Err(e) => {
                set_error(&e.to_string());
                GridsecStatus::DomainError
            }
        }
    })
}
