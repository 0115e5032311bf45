//! C ABI for glaudit.
//!
//! Conventions:
//! - Opaque handles (`glaudit_lexicon_t`, `glaudit_corpus_t`,
//!   `glaudit_model_t`) are created and freed by this library only.
//! - Every fallible function returns a status code: 0 success, 1 usage
//!   error (null or invalid argument), 2 data error, 3 internal error.
//!   On failure, `glaudit_last_error_message` returns a copy of the
//!   message for the current thread.
//! - Strings returned through out-parameters are UTF-8, NUL-terminated,
//!   owned by the caller, and must be released with `glaudit_string_free`.
//!
//! The matching header lives in `include/glaudit.h`; `cbindgen.toml` is
//! provided to regenerate it.

#![allow(non_camel_case_types)]

use glaudit::corpus::Corpus;
use glaudit::degender::{apply_edg, apply_mask, MaskPlan};
use glaudit::features::Tokenizer;
use glaudit::lexicon::Lexicon;
use glaudit::model::ClassifierModel;
use glaudit::types::Gender;
use libc::{c_char, c_double, c_int, size_t};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::ptr;

pub const GLAUDIT_OK: c_int = 0;
pub const GLAUDIT_ERR_USAGE: c_int = 1;
pub const GLAUDIT_ERR_DATA: c_int = 2;
pub const GLAUDIT_ERR_INTERNAL: c_int = 3;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).ok();
    });
}

fn status_of(err: &glaudit::Error) -> c_int {
    match err.exit_code() {
        1 => GLAUDIT_ERR_USAGE,
        3 => GLAUDIT_ERR_INTERNAL,
        _ => GLAUDIT_ERR_DATA,
    }
}

/// # Safety
/// `ptr` must be a valid NUL-terminated UTF-8 string or null.
unsafe fn str_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        set_error(format!("{name} is null"));
        return Err(GLAUDIT_ERR_USAGE);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{name} is not valid UTF-8"));
        GLAUDIT_ERR_USAGE
    })
}

fn string_out(s: String, out: *mut *mut c_char) -> c_int {
    let Ok(cstring) = CString::new(s.replace('\0', " ")) else {
        set_error("output string contained an interior NUL".into());
        return GLAUDIT_ERR_INTERNAL;
    };
    unsafe { *out = cstring.into_raw() };
    GLAUDIT_OK
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn glaudit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy of the current thread's last error message, or null when no error
/// has occurred. Free with `glaudit_string_free`.
#[no_mangle]
pub extern "C" fn glaudit_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.clone().into_raw())
            .unwrap_or(ptr::null_mut())
    })
}

/// # Safety
/// `s` must be a pointer previously returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glaudit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

pub struct glaudit_lexicon_t(Lexicon);

/// Load the lexicon compiled into the library.
///
/// # Safety
/// `out` must be a valid pointer to a pointer slot.
#[no_mangle]
pub unsafe extern "C" fn glaudit_lexicon_builtin(out: *mut *mut glaudit_lexicon_t) -> c_int {
    if out.is_null() {
        set_error("out is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    *out = Box::into_raw(Box::new(glaudit_lexicon_t(Lexicon::builtin())));
    GLAUDIT_OK
}

/// Load a lexicon from a TSV file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn glaudit_lexicon_load(
    path: *const c_char,
    out: *mut *mut glaudit_lexicon_t,
) -> c_int {
    if out.is_null() {
        set_error("out is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    let path = match str_arg(path, "path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    match Lexicon::load(path) {
        Ok(lexicon) => {
            *out = Box::into_raw(Box::new(glaudit_lexicon_t(lexicon)));
            GLAUDIT_OK
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `lexicon` must come from a `glaudit_lexicon_*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glaudit_lexicon_free(lexicon: *mut glaudit_lexicon_t) {
    if !lexicon.is_null() {
        drop(Box::from_raw(lexicon));
    }
}

/// Number of terms in the lexicon; 0 for null input.
///
/// # Safety
/// `lexicon` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn glaudit_lexicon_term_count(lexicon: *const glaudit_lexicon_t) -> size_t {
    if lexicon.is_null() {
        return 0;
    }
    (*lexicon).0.len()
}

/// Replace explicit male gender markers in `text` with their female
/// counterparts. The result is written to `*out`.
///
/// # Safety
/// `lexicon` must be a valid handle; `text` a NUL-terminated UTF-8 string;
/// `out` a valid slot. Free the result with `glaudit_string_free`.
#[no_mangle]
pub unsafe extern "C" fn glaudit_degender_text(
    lexicon: *const glaudit_lexicon_t,
    text: *const c_char,
    out: *mut *mut c_char,
) -> c_int {
    if lexicon.is_null() || out.is_null() {
        set_error("lexicon or out is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    let text = match str_arg(text, "text") {
        Ok(t) => t,
        Err(code) => return code,
    };
    string_out(apply_edg(text, &(*lexicon).0).text, out)
}

/// Count lexicon matches in `text`, written to `*out_count`.
///
/// # Safety
/// Same contracts as `glaudit_degender_text`.
#[no_mangle]
pub unsafe extern "C" fn glaudit_match_count(
    lexicon: *const glaudit_lexicon_t,
    text: *const c_char,
    out_count: *mut size_t,
) -> c_int {
    if lexicon.is_null() || out_count.is_null() {
        set_error("lexicon or out_count is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    let text = match str_arg(text, "text") {
        Ok(t) => t,
        Err(code) => return code,
    };
    *out_count = (*lexicon).0.match_all(text).len();
    GLAUDIT_OK
}

/// Mask whole-word occurrences of `tokens` (array of `n_tokens` strings)
/// in `text` with `mask_symbol`.
///
/// # Safety
/// `tokens` must point to `n_tokens` valid NUL-terminated strings; `text`,
/// `mask_symbol`, and `out` as in `glaudit_degender_text`.
#[no_mangle]
pub unsafe extern "C" fn glaudit_mask_text(
    text: *const c_char,
    tokens: *const *const c_char,
    n_tokens: size_t,
    mask_symbol: *const c_char,
    out: *mut *mut c_char,
) -> c_int {
    if out.is_null() || (tokens.is_null() && n_tokens > 0) {
        set_error("tokens or out is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    let text = match str_arg(text, "text") {
        Ok(t) => t,
        Err(code) => return code,
    };
    let mask_symbol = match str_arg(mask_symbol, "mask_symbol") {
        Ok(m) => m,
        Err(code) => return code,
    };
    let mut token_list = Vec::with_capacity(n_tokens);
    for i in 0..n_tokens {
        let token_ptr = *tokens.add(i);
        match str_arg(token_ptr, "token") {
            Ok(t) => token_list.push(t.to_string()),
            Err(code) => return code,
        }
    }
    let plan = match MaskPlan::new(token_list, mask_symbol, false) {
        Ok(p) => p,
        Err(e) => {
            set_error(e.to_string());
            return GLAUDIT_ERR_USAGE;
        }
    };
    let tokenizer = Tokenizer::default().with_mask_symbol(mask_symbol);
    string_out(apply_mask(text, &plan, &tokenizer), out)
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

pub struct glaudit_corpus_t(Corpus);

/// Load a JSON-lines corpus from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn glaudit_corpus_load(
    path: *const c_char,
    out: *mut *mut glaudit_corpus_t,
) -> c_int {
    if out.is_null() {
        set_error("out is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    let path = match str_arg(path, "path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    match Corpus::load(path) {
        Ok(corpus) => {
            *out = Box::into_raw(Box::new(glaudit_corpus_t(corpus)));
            GLAUDIT_OK
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `corpus` must come from `glaudit_corpus_load`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glaudit_corpus_free(corpus: *mut glaudit_corpus_t) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of letters; 0 for null input.
///
/// # Safety
/// `corpus` must be a valid handle or null.
#[no_mangle]
pub unsafe extern "C" fn glaudit_corpus_len(corpus: *const glaudit_corpus_t) -> size_t {
    if corpus.is_null() {
        return 0;
    }
    (*corpus).0.len()
}

/// Female and male letter counts.
///
/// # Safety
/// `corpus` must be a valid handle; the out pointers valid slots.
#[no_mangle]
pub unsafe extern "C" fn glaudit_corpus_class_counts(
    corpus: *const glaudit_corpus_t,
    out_female: *mut size_t,
    out_male: *mut size_t,
) -> c_int {
    if corpus.is_null() || out_female.is_null() || out_male.is_null() {
        set_error("corpus or out pointer is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    let (female, male) = (*corpus).0.class_counts();
    *out_female = female;
    *out_male = male;
    GLAUDIT_OK
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

pub struct glaudit_model_t(ClassifierModel);

/// Load a serialized classifier model from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn glaudit_model_load(
    path: *const c_char,
    out: *mut *mut glaudit_model_t,
) -> c_int {
    if out.is_null() {
        set_error("out is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    let path = match str_arg(path, "path") {
        Ok(p) => p,
        Err(code) => return code,
    };
    match ClassifierModel::load(path) {
        Ok(model) => {
            *out = Box::into_raw(Box::new(glaudit_model_t(model)));
            GLAUDIT_OK
        }
        Err(e) => {
            set_error(e.to_string());
            status_of(&e)
        }
    }
}

/// # Safety
/// `model` must come from `glaudit_model_load`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glaudit_model_free(model: *mut glaudit_model_t) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Probability that `text` was written about a male candidate, under the
/// loaded model. External-probability models cannot score raw text and
/// return a usage error.
///
/// # Safety
/// `model` must be a valid handle; `text` a NUL-terminated UTF-8 string;
/// `out_proba` a valid slot.
#[no_mangle]
pub unsafe extern "C" fn glaudit_model_predict_proba(
    model: *const glaudit_model_t,
    text: *const c_char,
    out_proba: *mut c_double,
) -> c_int {
    if model.is_null() || out_proba.is_null() {
        set_error("model or out_proba is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    let text = match str_arg(text, "text") {
        Ok(t) => t,
        Err(code) => return code,
    };
    let model = &(*model).0;
    if matches!(model.params, glaudit::model::ModelParams::External { .. }) {
        set_error("external models predict by letter id, not raw text".into());
        return GLAUDIT_ERR_USAGE;
    }
    let letter = glaudit::corpus::Letter::new("<ffi>", text, Gender::Female);
    *out_proba = model.predict_proba(&letter);
    GLAUDIT_OK
}

/// Predicted label for `text`: 0 female, 1 male.
///
/// # Safety
/// Same contracts as `glaudit_model_predict_proba`.
#[no_mangle]
pub unsafe extern "C" fn glaudit_model_predict(
    model: *const glaudit_model_t,
    text: *const c_char,
    out_label: *mut c_int,
) -> c_int {
    if out_label.is_null() {
        set_error("out_label is null".into());
        return GLAUDIT_ERR_USAGE;
    }
    let mut proba = 0.0;
    let status = glaudit_model_predict_proba(model, text, &mut proba);
    if status != GLAUDIT_OK {
        return status;
    }
    *out_label = if proba >= 0.5 { 1 } else { 0 };
    GLAUDIT_OK
}
