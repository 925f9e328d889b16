//! C ABI for the engine.
//!
//! Every function returns a [`LucinStatus`]. Strings handed out by the
//! library are owned by the caller and must be released with
//! [`lucin_string_free`]. After a non-`Ok` status, [`lucin_last_error`]
//! describes the failure.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use lucin::calc::{show, Context};
use lucin::knowledge::Registry;
use lucin::parser::parse_formula;
use lucin::service::protocol::handle;
use lucin::service::Engine;

/// Opaque engine handle.
pub struct LucinEngine {
    engine: Engine,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LucinStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidRequest = 3,
    TheoryLoad = 4,
    Panic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).expect("nul bytes removed"));
}

fn guard(f: impl FnOnce() -> Result<(), (LucinStatus, String)>) -> LucinStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            LucinStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LucinStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LucinStatus, String)> {
    if p.is_null() {
        return Err((LucinStatus::NullArgument, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (LucinStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn hand_out(s: String, out: *mut *mut c_char) {
    let c = CString::new(s.replace('\0', " ")).expect("nul bytes removed");
    unsafe { *out = c.into_raw() };
}

/// Creates an engine. `theory_dir` may be NULL for the built-in theories.
///
/// # Safety
/// `theory_dir` must be NULL or a NUL-terminated string; `out` must be a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lucin_engine_new(theory_dir: *const c_char, out: *mut *mut LucinEngine) -> LucinStatus {
    guard(|| {
        if out.is_null() {
            return Err((LucinStatus::NullArgument, "out is NULL".into()));
        }
        *out = ptr::null_mut();
        let registry = if theory_dir.is_null() {
            Registry::builtin()
        } else {
            let dir = text(theory_dir, "theory_dir")?;
            Registry::load_dir(Path::new(dir)).map_err(|e| (LucinStatus::TheoryLoad, e.to_string()))?
        };
        *out = Box::into_raw(Box::new(LucinEngine { engine: Engine::new(registry) }));
        Ok(())
    })
}

/// Releases an engine. NULL is ignored.
///
/// # Safety
/// `engine` must be NULL or a handle from [`lucin_engine_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lucin_engine_free(engine: *mut LucinEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Handles one JSON request and stores the JSON response envelope in
/// `out`. Protocol-level failures are reported inside the envelope; a
/// request that is not a JSON object yields `InvalidRequest` and still
/// produces an envelope.
///
/// # Safety
/// `engine` must be a live handle, `request` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lucin_request(
    engine: *const LucinEngine,
    request: *const c_char,
    out: *mut *mut c_char,
) -> LucinStatus {
    guard(|| {
        if engine.is_null() || out.is_null() {
            return Err((LucinStatus::NullArgument, "engine or out is NULL".into()));
        }
        *out = ptr::null_mut();
        let req = text(request, "request")?;
        let engine = &(*engine).engine;
        match serde_json::from_str::<serde_json::Value>(req) {
            Ok(v) if v.is_object() => {
                hand_out(handle(engine, v).to_string(), out);
                Ok(())
            }
            Ok(v) => {
                hand_out(handle(engine, v).to_string(), out);
                Err((LucinStatus::InvalidRequest, "request must be a JSON object".into()))
            }
            Err(e) => {
                hand_out(lucin::service::protocol::handle_line(engine, req).to_string(), out);
                Err((LucinStatus::InvalidRequest, format!("malformed JSON: {e}")))
            }
        }
    })
}

/// Parses a formula and stores its canonical printed form in `out`.
///
/// # Safety
/// `src` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lucin_parse_formula(src: *const c_char, out: *mut *mut c_char) -> LucinStatus {
    guard(|| {
        if out.is_null() {
            return Err((LucinStatus::NullArgument, "out is NULL".into()));
        }
        *out = ptr::null_mut();
        let src = text(src, "src")?;
        let t = parse_formula(src, &Context::default()).map_err(|e| (LucinStatus::InvalidRequest, e.to_string()))?;
        hand_out(show(&t), out);
        Ok(())
    })
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lucin_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn lucin_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
