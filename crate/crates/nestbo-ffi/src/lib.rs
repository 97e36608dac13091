//! C ABI for the optimization toolkit: opaque handles, integer error codes,
//! and string outputs the caller frees through this library.
//!
//! Conventions:
//! - Functions return `NESTBO_OK` (0) on success or a negative error code;
//!   the thread-local message from [`nestbo_last_error`] describes the most
//!   recent failure on the calling thread.
//! - Out-parameters are written only on success.
//! - Every pointer produced here must be released with the matching
//!   `nestbo_*_free` function, never with `free(3)`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::path::Path;
use std::ptr;

use nestbo::harness::config::ExperimentConfig;
use nestbo::harness::{run_experiment, run_replicate, RunTrace};
use nestbo::kernel::KernelParams;

pub const NESTBO_OK: c_int = 0;
/// Invalid argument or configuration.
pub const NESTBO_ERR_INVALID: c_int = -1;
/// Runtime failure (numerical breakdown, I/O, aborted replicate).
pub const NESTBO_ERR_RUNTIME: c_int = -2;
/// A required pointer was null.
pub const NESTBO_ERR_NULL: c_int = -3;
/// A string argument was not valid UTF-8.
pub const NESTBO_ERR_UTF8: c_int = -4;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<Vec<u8>>) {
    let cstring = CString::new(message).unwrap_or_else(|_| {
        CString::new("error message contained an interior NUL byte").expect("static message")
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn code_for(err: &nestbo::Error) -> c_int {
    match err {
        nestbo::Error::Argument(_) | nestbo::Error::Config(_) => NESTBO_ERR_INVALID,
        _ => NESTBO_ERR_RUNTIME,
    }
}

/// Opaque experiment configuration handle.
pub struct NestboConfig {
    inner: ExperimentConfig,
}

/// Opaque run-trace handle.
pub struct NestboTrace {
    inner: RunTrace,
}

/// Library version as a static NUL-terminated string; do not free.
#[no_mangle]
pub extern "C" fn nestbo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Most recent error message on this thread, or null when no error has been
/// recorded. Free with `nestbo_string_free`.
#[no_mangle]
pub extern "C" fn nestbo_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Free a string produced by this library. Null is ignored.
///
/// # Safety
/// `s` must have been returned by a `nestbo_*` function and not freed yet.
#[no_mangle]
pub unsafe extern "C" fn nestbo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(NESTBO_ERR_NULL);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        NESTBO_ERR_UTF8
    })
}

/// Parse a TOML experiment configuration. On success writes a config handle
/// to `out`; free it with `nestbo_config_free`.
///
/// # Safety
/// `toml` must point to a NUL-terminated string and `out` must be a valid
/// pointer to pointer storage.
#[no_mangle]
pub unsafe extern "C" fn nestbo_config_parse(
    toml: *const c_char,
    out: *mut *mut NestboConfig,
) -> c_int {
    if out.is_null() {
        set_error("null out-parameter");
        return NESTBO_ERR_NULL;
    }
    let text = match str_arg(toml) {
        Ok(t) => t,
        Err(code) => return code,
    };
    match ExperimentConfig::from_toml_str(text) {
        Ok(cfg) => {
            *out = Box::into_raw(Box::new(NestboConfig { inner: cfg }));
            NESTBO_OK
        }
        Err(e) => {
            set_error(e.to_string());
            code_for(&e)
        }
    }
}

/// Free a config handle. Null is ignored.
///
/// # Safety
/// `cfg` must have come from `nestbo_config_parse` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn nestbo_config_free(cfg: *mut NestboConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Override the base seed of a parsed configuration.
///
/// # Safety
/// `cfg` must be a live handle from `nestbo_config_parse`.
#[no_mangle]
pub unsafe extern "C" fn nestbo_config_set_seed(cfg: *mut NestboConfig, seed: u64) -> c_int {
    let Some(cfg) = cfg.as_mut() else {
        set_error("null config handle");
        return NESTBO_ERR_NULL;
    };
    cfg.inner.run.seed = seed;
    NESTBO_OK
}

/// Execute one seeded replicate. On success writes a trace handle to `out`;
/// free it with `nestbo_trace_free`. A replicate that aborted mid-run is
/// reported as a runtime error (the partial trace is not returned).
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be valid pointer storage.
#[no_mangle]
pub unsafe extern "C" fn nestbo_run_replicate(
    cfg: *const NestboConfig,
    out: *mut *mut NestboTrace,
) -> c_int {
    let Some(cfg) = cfg.as_ref() else {
        set_error("null config handle");
        return NESTBO_ERR_NULL;
    };
    if out.is_null() {
        set_error("null out-parameter");
        return NESTBO_ERR_NULL;
    }
    let trace = run_replicate(&cfg.inner);
    if let Some(reason) = &trace.failed {
        set_error(format!("replicate aborted: {reason}"));
        return NESTBO_ERR_RUNTIME;
    }
    *out = Box::into_raw(Box::new(NestboTrace { inner: trace }));
    NESTBO_OK
}

/// Free a trace handle. Null is ignored.
///
/// # Safety
/// `trace` must have come from `nestbo_run_replicate` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn nestbo_trace_free(trace: *mut NestboTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of objective evaluations recorded in the trace.
///
/// # Safety
/// `trace` must be a live trace handle.
#[no_mangle]
pub unsafe extern "C" fn nestbo_trace_len(trace: *const NestboTrace) -> u64 {
    trace.as_ref().map_or(0, |t| t.inner.evals.len() as u64)
}

/// Best observed objective value at the end of the run.
///
/// # Safety
/// `trace` must be a live trace handle; `out` must be valid storage.
#[no_mangle]
pub unsafe extern "C" fn nestbo_trace_final_best(
    trace: *const NestboTrace,
    out: *mut f64,
) -> c_int {
    let Some(trace) = trace.as_ref() else {
        set_error("null trace handle");
        return NESTBO_ERR_NULL;
    };
    if out.is_null() {
        set_error("null out-parameter");
        return NESTBO_ERR_NULL;
    }
    match trace.inner.best_so_far() {
        Some(v) => {
            *out = v;
            NESTBO_OK
        }
        None => {
            set_error("trace holds no evaluations");
            NESTBO_ERR_RUNTIME
        }
    }
}

/// Final simple regret (best observed minus known optimum). Fails when the
/// benchmark's optimum is unknown.
///
/// # Safety
/// `trace` must be a live trace handle; `out` must be valid storage.
#[no_mangle]
pub unsafe extern "C" fn nestbo_trace_final_regret(
    trace: *const NestboTrace,
    out: *mut f64,
) -> c_int {
    let Some(trace) = trace.as_ref() else {
        set_error("null trace handle");
        return NESTBO_ERR_NULL;
    };
    if out.is_null() {
        set_error("null out-parameter");
        return NESTBO_ERR_NULL;
    }
    match trace.inner.final_regret() {
        Some(v) => {
            *out = v;
            NESTBO_OK
        }
        None => {
            set_error("benchmark optimum unknown; regret undefined");
            NESTBO_ERR_RUNTIME
        }
    }
}

/// Serialize the full trace (evaluations, iterations, embedding log) as
/// JSON. Free the string with `nestbo_string_free`.
///
/// # Safety
/// `trace` must be a live trace handle; `out` must be valid storage.
#[no_mangle]
pub unsafe extern "C" fn nestbo_trace_to_json(
    trace: *const NestboTrace,
    out: *mut *mut c_char,
) -> c_int {
    let Some(trace) = trace.as_ref() else {
        set_error("null trace handle");
        return NESTBO_ERR_NULL;
    };
    if out.is_null() {
        set_error("null out-parameter");
        return NESTBO_ERR_NULL;
    }
    match trace.inner.to_json() {
        Ok(json) => match CString::new(json) {
            Ok(s) => {
                *out = s.into_raw();
                NESTBO_OK
            }
            Err(_) => {
                set_error("serialized trace contained a NUL byte");
                NESTBO_ERR_RUNTIME
            }
        },
        Err(e) => {
            set_error(e.to_string());
            code_for(&e)
        }
    }
}

/// Run `replicates` seeded replicates (seed, seed+1, …) with up to `jobs`
/// worker threads and write per-replicate trace files plus aggregate files
/// into `out_dir`.
///
/// # Safety
/// `cfg` must be a live config handle; `out_dir` must be a NUL-terminated
/// path string.
#[no_mangle]
pub unsafe extern "C" fn nestbo_run_experiment(
    cfg: *const NestboConfig,
    replicates: u64,
    jobs: u64,
    out_dir: *const c_char,
) -> c_int {
    let Some(cfg) = cfg.as_ref() else {
        set_error("null config handle");
        return NESTBO_ERR_NULL;
    };
    let dir = match str_arg(out_dir) {
        Ok(d) => d,
        Err(code) => return code,
    };
    if replicates == 0 {
        set_error("replicates must be at least 1");
        return NESTBO_ERR_INVALID;
    }
    match run_experiment(
        &cfg.inner,
        replicates as usize,
        jobs.max(1) as usize,
        Some(Path::new(dir)),
    ) {
        Ok(_) => NESTBO_OK,
        Err(e) => {
            set_error(e.to_string());
            code_for(&e)
        }
    }
}

/// Stencil power-function sweep for an isotropic SE kernel, rendered as CSV
/// (one prior row plus one row per spacing). Free with `nestbo_string_free`.
///
/// # Safety
/// `spacings` must point to `num_spacings` doubles; `out` must be valid
/// storage.
#[no_mangle]
pub unsafe extern "C" fn nestbo_vpc_csv(
    dim: u64,
    lengthscale: f64,
    signal_variance: f64,
    spacings: *const f64,
    num_spacings: u64,
    out: *mut *mut c_char,
) -> c_int {
    if out.is_null() {
        set_error("null out-parameter");
        return NESTBO_ERR_NULL;
    }
    if spacings.is_null() && num_spacings > 0 {
        set_error("null spacings array");
        return NESTBO_ERR_NULL;
    }
    let sweep: Vec<f64> = if num_spacings == 0 {
        vec![0.5, 0.2, 0.1]
    } else {
        std::slice::from_raw_parts(spacings, num_spacings as usize).to_vec()
    };
    let params = match KernelParams::isotropic(signal_variance, lengthscale, 0.0, dim as usize) {
        Ok(p) => p,
        Err(e) => {
            set_error(e.to_string());
            return code_for(&e);
        }
    };
    match nestbo::oracle::vpc_check(&params, dim as usize, &sweep) {
        Ok(table) => match CString::new(table.to_csv()) {
            Ok(s) => {
                *out = s.into_raw();
                NESTBO_OK
            }
            Err(_) => {
                set_error("CSV contained a NUL byte");
                NESTBO_ERR_RUNTIME
            }
        },
        Err(e) => {
            set_error(e.to_string());
            code_for(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = r#"
        [benchmark]
        function = "griewank"
        dimension = 2

        [run]
        method = "sobol_random"
        budget = 30
        init_points = 5
        seed = 7
    "#;

    fn cstring(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(nestbo_version()) };
        assert!(!v.to_str().unwrap().is_empty());
    }

    #[test]
    fn config_round_trip_and_replicate() {
        unsafe {
            let text = cstring(CFG);
            let mut cfg: *mut NestboConfig = ptr::null_mut();
            assert_eq!(nestbo_config_parse(text.as_ptr(), &mut cfg), NESTBO_OK);
            assert_eq!(nestbo_config_set_seed(cfg, 9), NESTBO_OK);

            let mut trace: *mut NestboTrace = ptr::null_mut();
            assert_eq!(nestbo_run_replicate(cfg, &mut trace), NESTBO_OK);
            assert_eq!(nestbo_trace_len(trace), 30);

            let mut best = f64::NAN;
            assert_eq!(nestbo_trace_final_best(trace, &mut best), NESTBO_OK);
            assert!(best.is_finite());
            let mut regret = f64::NAN;
            assert_eq!(nestbo_trace_final_regret(trace, &mut regret), NESTBO_OK);
            assert!(regret >= 0.0);

            let mut json: *mut c_char = ptr::null_mut();
            assert_eq!(nestbo_trace_to_json(trace, &mut json), NESTBO_OK);
            let parsed: serde_json_value_check::Value =
                serde_json_value_check::from_str(CStr::from_ptr(json).to_str().unwrap());
            assert!(parsed.contains_evals);

            nestbo_string_free(json);
            nestbo_trace_free(trace);
            nestbo_config_free(cfg);
        }
    }

    // tiny stand-in so the test does not pull serde_json into the ffi crate
    mod serde_json_value_check {
        pub struct Value {
            pub contains_evals: bool,
        }
        pub fn from_str(s: &str) -> Value {
            Value {
                contains_evals: s.contains("\"evals\""),
            }
        }
    }

    #[test]
    fn parse_error_sets_message_and_code() {
        unsafe {
            let text = cstring("this is not toml at all = [");
            let mut cfg: *mut NestboConfig = ptr::null_mut();
            let code = nestbo_config_parse(text.as_ptr(), &mut cfg);
            assert_eq!(code, NESTBO_ERR_INVALID);
            let msg = nestbo_last_error();
            assert!(!msg.is_null());
            let text = CStr::from_ptr(msg).to_str().unwrap().to_owned();
            assert!(text.contains("parse error"), "{text}");
            nestbo_string_free(msg);
        }
    }

    #[test]
    fn null_arguments_rejected() {
        unsafe {
            assert_eq!(
                nestbo_config_parse(ptr::null(), ptr::null_mut()),
                NESTBO_ERR_NULL
            );
            let mut out = f64::NAN;
            assert_eq!(nestbo_trace_final_best(ptr::null(), &mut out), NESTBO_ERR_NULL);
            assert_eq!(nestbo_trace_len(ptr::null()), 0);
        }
    }

    #[test]
    fn vpc_csv_prior_row() {
        unsafe {
            let mut out: *mut c_char = ptr::null_mut();
            let spacings = [0.5, 0.2, 0.1];
            let code = nestbo_vpc_csv(2, 1.0, 1.0, spacings.as_ptr(), 3, &mut out);
            assert_eq!(code, NESTBO_OK);
            let csv = CStr::from_ptr(out).to_str().unwrap().to_owned();
            assert!(csv.starts_with("h,pi_g,pi_h,status\nprior,2,8,ok\n"), "{csv}");
            nestbo_string_free(out);
        }
    }

    #[test]
    fn experiment_writes_files() {
        unsafe {
            let text = cstring(CFG);
            let mut cfg: *mut NestboConfig = ptr::null_mut();
            assert_eq!(nestbo_config_parse(text.as_ptr(), &mut cfg), NESTBO_OK);
            let dir = std::env::temp_dir().join("nestbo_ffi_test_out");
            let _ = std::fs::remove_dir_all(&dir);
            let dir_c = cstring(dir.to_str().unwrap());
            assert_eq!(nestbo_run_experiment(cfg, 2, 2, dir_c.as_ptr()), NESTBO_OK);
            assert!(dir.join("aggregate.csv").exists());
            assert!(dir.join("replicate_0007.json").exists());
            nestbo_config_free(cfg);
            let _ = std::fs::remove_dir_all(&dir);
        }
    }
}
