//! C ABI over the sampler.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free` function. Fallible calls return a [`TsmhStatus`]
//! and leave a message for [`tsmh_last_error`] on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tsmh::sampler::{run_chain, ChainResult, Method};
use tsmh::task::{validate_config, Task};
use tsmh::{Error, ErrorClass};

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsmhStatus {
    Ok = 0,
    /// Any failure not covered below.
    Other = 1,
    /// Invalid configuration, keywords, or arguments.
    Config = 2,
    /// The language model backend failed.
    Backend = 3,
    /// A required pointer was null.
    NullArgument = 4,
    /// A string argument was not UTF-8.
    InvalidUtf8 = 5,
    /// The library panicked; the handle involved should be discarded.
    Panic = 6,
}

/// A loaded task: vocabulary, categories, language model and scorers.
pub struct TsmhTask {
    task: Task,
}

/// A finished chain.
pub struct TsmhRun {
    result: ChainResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: TsmhStatus, msg: impl Into<String>) -> TsmhStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> TsmhStatus {
    let status = match e.class() {
        ErrorClass::Config => TsmhStatus::Config,
        ErrorClass::Backend => TsmhStatus::Backend,
        ErrorClass::Other => TsmhStatus::Other,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning a panic into [`TsmhStatus::Panic`].
fn guarded(f: impl FnOnce() -> TsmhStatus) -> TsmhStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            fail(TsmhStatus::Panic, msg)
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, TsmhStatus> {
    if p.is_null() {
        return Err(fail(TsmhStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TsmhStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn into_c_string(s: &str) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn tsmh_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn tsmh_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a task from a TOML config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer to
/// write the handle to.
#[no_mangle]
pub unsafe extern "C" fn tsmh_task_from_config(path: *const c_char, out: *mut *mut TsmhTask) -> TsmhStatus {
    guarded(|| {
        if out.is_null() {
            return fail(TsmhStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match validate_config(path).and_then(Task::build) {
            Ok(task) => {
                *out = Box::into_raw(Box::new(TsmhTask { task }));
                TsmhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `task` must come from [`tsmh_task_from_config`] and not be used again.
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tsmh_task_free(task: *mut TsmhTask) {
    if !task.is_null() {
        drop(Box::from_raw(task));
    }
}

/// Runs one chain. `keywords` are whitespace-separated; NULL or empty uses
/// the config's keywords. `method` is "tsmh" or "cgmh". `steps` of 0 uses
/// the configured budget for the method.
///
/// # Safety
/// `task` must be a live handle, string arguments NUL-terminated or NULL
/// where allowed, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tsmh_generate(
    task: *const TsmhTask,
    keywords: *const c_char,
    method: *const c_char,
    seed: u64,
    steps: u32,
    out: *mut *mut TsmhRun,
) -> TsmhStatus {
    guarded(|| {
        if out.is_null() {
            return fail(TsmhStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let Some(task) = task.as_ref() else {
            return fail(TsmhStatus::NullArgument, "task is null");
        };
        let method = match str_arg(method, "method").map(str::parse::<Method>) {
            Ok(Ok(m)) => m,
            Ok(Err(e)) => return from_error(e),
            Err(s) => return s,
        };
        let kws: Vec<String> = if keywords.is_null() {
            Vec::new()
        } else {
            match str_arg(keywords, "keywords") {
                Ok(k) => k.split_whitespace().map(str::to_string).collect(),
                Err(s) => return s,
            }
        };
        let kws = if kws.is_empty() { task.task.spec.task.keywords.clone() } else { kws };
        let mut cfg = task.task.method_config(method);
        cfg.seed = seed;
        if steps > 0 {
            cfg.steps = steps as usize;
        }
        let result = task
            .task
            .prepare(&kws)
            .and_then(|p| run_chain(&p.target, &p.init, &cfg));
        match result {
            Ok(result) => {
                *out = Box::into_raw(Box::new(TsmhRun { result }));
                TsmhStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `run` must come from [`tsmh_generate`] and not be used again. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn tsmh_run_free(run: *mut TsmhRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded steps; 0 for NULL.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn tsmh_run_steps(run: *const TsmhRun) -> usize {
    run.as_ref().map_or(0, |r| r.result.history.len())
}

/// Highest-scoring sentence of the chain. Free with [`tsmh_string_free`].
/// NULL for a NULL handle.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn tsmh_run_best_sentence(run: *const TsmhRun) -> *mut c_char {
    run.as_ref()
        .map_or(ptr::null_mut(), |r| into_c_string(&r.result.best_record().sentence))
}

/// `ln π` of the best sentence, NaN for NULL.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn tsmh_run_best_log_pi(run: *const TsmhRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.result.best_record().log_pi)
}

/// Violated constraints of the best sentence; -1 for NULL.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn tsmh_run_best_constraint_error(run: *const TsmhRun) -> i64 {
    run.as_ref().map_or(-1, |r| i64::from(r.result.best_record().constraint_error))
}

/// Fraction of steps accepted, NaN for NULL.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn tsmh_run_acceptance_rate(run: *const TsmhRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.result.acceptance_rate())
}

/// Fraction of recorded states with no violation, NaN for NULL.
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn tsmh_run_valid_fraction(run: *const TsmhRun) -> f64 {
    run.as_ref().map_or(f64::NAN, |r| r.result.valid_fraction())
}

/// The per-step trace as JSON lines. Free with [`tsmh_string_free`].
///
/// # Safety
/// `run` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn tsmh_run_jsonl(run: *const TsmhRun) -> *mut c_char {
    run.as_ref().map_or(ptr::null_mut(), |r| into_c_string(&r.result.to_jsonl()))
}

/// # Safety
/// `s` must be a string returned by this library and not freed before.
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tsmh_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
