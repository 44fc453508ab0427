//! C ABI over the `iwasawa` library.
//!
//! All objects cross the boundary as opaque pointers. Every fallible call
//! returns an [`IwStatus`]; on failure a message is available from
//! [`iw_last_error`] on the same thread. Strings handed out by this library
//! must be released with [`iw_string_free`].

use iwasawa::cli::{parse_config, run_tasks};
use iwasawa::group::GroupModel;
use iwasawa::iwasawa::{TruncatedSeries, TruncationSpec};
use iwasawa::val::Val;
use iwasawa::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Model = 4,
    Precision = 5,
    Mismatch = 6,
    Config = 7,
    Other = 8,
    Panic = 9,
}

/// A truncation `Λ/F_W` of a validated group model.
pub struct IwTrunc {
    inner: Arc<TruncationSpec>,
}

/// An element of a truncated Iwasawa algebra.
pub struct IwSeries {
    inner: TruncatedSeries,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> IwStatus {
    match e {
        Error::Parse(_) => IwStatus::Parse,
        Error::NotPrime(_) | Error::Model(_) | Error::NotRepresentable(_) | Error::Automorphism(_) | Error::Subgroup(_) => {
            IwStatus::Model
        }
        Error::BadPrecision(_) | Error::PrecisionOverflow { .. } | Error::InsufficientPrecision(_) => IwStatus::Precision,
        Error::Mismatch(_) => IwStatus::Mismatch,
        Error::Config { .. } => IwStatus::Config,
        _ => IwStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), IwStatus>) -> IwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IwStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            IwStatus::Panic
        }
    }
}

fn fail(e: Error) -> IwStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, IwStatus> {
    if s.is_null() {
        set_error("null string argument");
        return Err(IwStatus::NullPointer);
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        IwStatus::InvalidUtf8
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, IwStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null handle");
        IwStatus::NullPointer
    })
}

fn out_ptr<T>(out: *mut *mut T) -> Result<(), IwStatus> {
    if out.is_null() {
        set_error("null output pointer");
        return Err(IwStatus::NullPointer);
    }
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn iw_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn iw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build the model and base truncation described by a JSON config.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn iw_trunc_from_config(config_json: *const c_char, out: *mut *mut IwTrunc) -> IwStatus {
    guard(|| {
        out_ptr(out)?;
        let text = read_str(config_json)?;
        let cfg = parse_config(text).map_err(fail)?;
        let model = GroupModel::load(&cfg.model_spec()).map_err(fail)?;
        let t = TruncationSpec::new(Arc::new(model), cfg.truncation.w).map_err(fail)?;
        *out = Box::into_raw(Box::new(IwTrunc { inner: t }));
        Ok(())
    })
}

/// Number of basis monomials of the truncation.
///
/// # Safety
/// `t` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn iw_trunc_size(t: *const IwTrunc, out: *mut usize) -> IwStatus {
    guard(|| {
        let t = deref(t)?;
        let out = out.as_mut().ok_or_else(|| {
            set_error("null output pointer");
            IwStatus::NullPointer
        })?;
        *out = t.inner.size();
        Ok(())
    })
}

/// # Safety
/// `t` must come from [`iw_trunc_from_config`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn iw_trunc_free(t: *mut IwTrunc) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Parse a series literal such as `"1 + 2*b1*b2^3"`.
///
/// # Safety
/// `t` must be a live handle, `text` NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn iw_series_parse(t: *const IwTrunc, text: *const c_char, out: *mut *mut IwSeries) -> IwStatus {
    guard(|| {
        out_ptr(out)?;
        let t = deref(t)?;
        let s = TruncatedSeries::parse(&t.inner, read_str(text)?).map_err(fail)?;
        *out = Box::into_raw(Box::new(IwSeries { inner: s }));
        Ok(())
    })
}

/// Product `a * b` in the truncated algebra.
///
/// # Safety
/// `a`, `b` must be live handles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn iw_series_mul(a: *const IwSeries, b: *const IwSeries, out: *mut *mut IwSeries) -> IwStatus {
    guard(|| {
        out_ptr(out)?;
        let (a, b) = (deref(a)?, deref(b)?);
        let c = a.inner.mul(&b.inner).map_err(fail)?;
        *out = Box::into_raw(Box::new(IwSeries { inner: c }));
        Ok(())
    })
}

/// Sum `a + b`.
///
/// # Safety
/// `a`, `b` must be live handles, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn iw_series_add(a: *const IwSeries, b: *const IwSeries, out: *mut *mut IwSeries) -> IwStatus {
    guard(|| {
        out_ptr(out)?;
        let (a, b) = (deref(a)?, deref(b)?);
        let c = a.inner.add(&b.inner).map_err(fail)?;
        *out = Box::into_raw(Box::new(IwSeries { inner: c }));
        Ok(())
    })
}

/// Filtration value in units of `1/e`. `resolved` is set to 0 when the series
/// vanishes modulo `F_W`, in which case `value` is the lower bound `W`.
///
/// # Safety
/// `s` must be a live handle; `value` and `resolved` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn iw_series_w_val(s: *const IwSeries, value: *mut i64, resolved: *mut i32) -> IwStatus {
    guard(|| {
        let s = deref(s)?;
        if value.is_null() || resolved.is_null() {
            set_error("null output pointer");
            return Err(IwStatus::NullPointer);
        }
        let (v, r) = match s.inner.w_val() {
            Val::Finite(v) => (v, 1),
            Val::AtLeast(v) => (v, 0),
        };
        *value = v;
        *resolved = r;
        Ok(())
    })
}

/// Render a series; free the result with [`iw_string_free`].
///
/// # Safety
/// `s` must be a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn iw_series_to_string(s: *const IwSeries, out: *mut *mut c_char) -> IwStatus {
    guard(|| {
        out_ptr(out)?;
        let s = deref(s)?;
        *out = to_c_string(s.inner.to_string());
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn iw_series_free(s: *mut IwSeries) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Run every task of a JSON config. The report is written as JSON lines to
/// `out_jsonl`; `any_failed` is set to 1 if some record failed.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_jsonl` and `any_failed` valid.
#[no_mangle]
pub unsafe extern "C" fn iw_run_config(config_json: *const c_char, out_jsonl: *mut *mut c_char, any_failed: *mut i32) -> IwStatus {
    guard(|| {
        out_ptr(out_jsonl)?;
        let flag = any_failed.as_mut().ok_or_else(|| {
            set_error("null output pointer");
            IwStatus::NullPointer
        })?;
        let cfg = parse_config(read_str(config_json)?).map_err(fail)?;
        let rep = run_tasks(&cfg, &[]).map_err(fail)?;
        *flag = rep.any_failed() as i32;
        *out_jsonl = to_c_string(rep.to_jsonl());
        Ok(())
    })
}
