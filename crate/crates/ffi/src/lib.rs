//! C ABI over the deterministic proofmill kernels, so other languages can
//! bind the toy checker, the unbiased pass@k estimator, proof-style
//! statistics, and statement normalization without shelling out to the CLI.
//!
//! Conventions: every fallible function returns a [`PmError`] code and writes
//! its result through out-pointers; `PM_ERROR_*` values never leave outputs
//! half-written. Detail for the most recent error on the calling thread is
//! available via [`pm_last_error_message`]. Strings are NUL-terminated UTF-8;
//! strings returned by the library must be released with [`pm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Duration;

use proofmill::evaluate::{pass_at_k_unbiased_f64, proof_stats};
use proofmill::text::{collapse_whitespace, strip_comments};
use proofmill::verify::toy::check_source;
use proofmill::verify::VerdictStatus;

/// Result codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmError {
    PmOk = 0,
    PmErrorNullPointer = 1,
    PmErrorInvalidUtf8 = 2,
    PmErrorInvalidArgument = 3,
    PmErrorPanic = 4,
}

/// Verdict of a toy check.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmStatus {
    PmStatusPass = 0,
    PmStatusFail = 1,
    PmStatusTimeout = 2,
}

/// Opaque deterministic checker handle.
pub struct PmToyChecker {
    _private: u8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_last_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn guard<F: FnOnce() -> PmError>(f: F) -> PmError {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_last_error("internal panic");
            PmError::PmErrorPanic
        }
    }
}

/// # Safety
/// `ptr` must be NULL or a NUL-terminated string valid for reads.
unsafe fn read_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, PmError> {
    if ptr.is_null() {
        set_last_error(&format!("{name} is null"));
        return Err(PmError::PmErrorNullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(&format!("{name} is not valid UTF-8"));
        PmError::PmErrorInvalidUtf8
    })
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn pm_version() -> *const c_char {
    static VERSION: &[u8] = concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes();
    VERSION.as_ptr() as *const c_char
}

/// Detail for the most recent error on this thread. The pointer stays valid
/// until the next proofmill call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn pm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a string returned by this library.
///
/// # Safety
/// `ptr` must be NULL or a pointer previously returned through a proofmill
/// out-parameter, passed exactly once.
#[no_mangle]
pub unsafe extern "C" fn pm_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(CString::from_raw(ptr));
    }
}

/// Create a toy checker. Release with [`pm_toy_checker_free`].
#[no_mangle]
pub extern "C" fn pm_toy_checker_new() -> *mut PmToyChecker {
    Box::into_raw(Box::new(PmToyChecker { _private: 0 }))
}

/// # Safety
/// `checker` must be NULL or a pointer from [`pm_toy_checker_new`], passed
/// exactly once.
#[no_mangle]
pub unsafe extern "C" fn pm_toy_checker_free(checker: *mut PmToyChecker) {
    if !checker.is_null() {
        drop(Box::from_raw(checker));
    }
}

/// Check `statement_body` (a `theorem <name> : <int-expr> = <int-expr> :=`
/// declaration) against `proof_text` under a wall-clock timeout.
///
/// # Safety
/// `checker` must come from [`pm_toy_checker_new`]; the strings must be
/// NUL-terminated and readable; out-pointers must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn pm_toy_checker_check(
    checker: *const PmToyChecker,
    statement_body: *const c_char,
    proof_text: *const c_char,
    timeout_ms: u64,
    out_status: *mut PmStatus,
    out_wall_time_ms: *mut u64,
) -> PmError {
    guard(|| {
        if checker.is_null() {
            set_last_error("checker is null");
            return PmError::PmErrorNullPointer;
        }
        if out_status.is_null() {
            set_last_error("out_status is null");
            return PmError::PmErrorNullPointer;
        }
        let body = match read_str(statement_body, "statement_body") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let proof = match read_str(proof_text, "proof_text") {
            Ok(s) => s,
            Err(code) => return code,
        };
        if timeout_ms == 0 {
            set_last_error("timeout_ms must be positive");
            return PmError::PmErrorInvalidArgument;
        }
        let verdict = check_source(body, proof, Duration::from_millis(timeout_ms));
        *out_status = match verdict.status {
            VerdictStatus::Pass => PmStatus::PmStatusPass,
            VerdictStatus::Fail => PmStatus::PmStatusFail,
            VerdictStatus::Timeout => PmStatus::PmStatusTimeout,
        };
        if !out_wall_time_ms.is_null() {
            *out_wall_time_ms = verdict.wall_time_ms;
        }
        if let Some(first) = verdict.diagnostics.first() {
            set_last_error(&format!(
                "{}:{}: {}",
                first.line, first.column, first.message
            ));
        } else {
            set_last_error("");
        }
        PmError::PmOk
    })
}

/// Unbiased pass@k estimate `1 - C(n-c, k)/C(n, k)`.
///
/// # Safety
/// `out_value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pm_pass_at_k_unbiased(
    n: u64,
    c: u64,
    k: u64,
    out_value: *mut f64,
) -> PmError {
    guard(|| {
        if out_value.is_null() {
            set_last_error("out_value is null");
            return PmError::PmErrorNullPointer;
        }
        match pass_at_k_unbiased_f64(n, c, k) {
            Ok(value) => {
                *out_value = value;
                PmError::PmOk
            }
            Err(e) => {
                set_last_error(&e.to_string());
                PmError::PmErrorInvalidArgument
            }
        }
    })
}

/// Proof length (characters, newline-normalized) and whitespace-delimited
/// `try` token count outside comments and strings.
///
/// # Safety
/// `proof_text` must be a readable NUL-terminated string; out-pointers must
/// be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn pm_proof_stats(
    proof_text: *const c_char,
    out_length: *mut u64,
    out_try_count: *mut u64,
) -> PmError {
    guard(|| {
        let proof = match read_str(proof_text, "proof_text") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let stats = proof_stats(proof);
        if !out_length.is_null() {
            *out_length = stats.length as u64;
        }
        if !out_try_count.is_null() {
            *out_try_count = stats.try_count as u64;
        }
        PmError::PmOk
    })
}

/// Canonical deduplication key of a statement body: comments stripped,
/// whitespace collapsed, ends trimmed. The result must be released with
/// [`pm_string_free`].
///
/// # Safety
/// `body` must be a readable NUL-terminated string; `out_key` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pm_normalized_key(
    body: *const c_char,
    out_key: *mut *mut c_char,
) -> PmError {
    guard(|| {
        if out_key.is_null() {
            set_last_error("out_key is null");
            return PmError::PmErrorNullPointer;
        }
        let body = match read_str(body, "body") {
            Ok(s) => s,
            Err(code) => return code,
        };
        let key = collapse_whitespace(&strip_comments(body));
        let sanitized: String = key.chars().filter(|&c| c != '\0').collect();
        let cstring = CString::new(sanitized).expect("NUL bytes filtered above");
        *out_key = cstring.into_raw();
        PmError::PmOk
    })
}
