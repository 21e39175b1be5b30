//! C ABI over a learned outage model.
//!
//! Every entry point returns a [`PcoStatus`]; on failure a message for the
//! calling thread is available from [`pco_last_error_message`]. Models are
//! opaque [`PcoModel`] handles owned by the caller and released with
//! [`pco_model_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use pcoutage::bayesnet::posterior_target;
use pcoutage::model::Model;
use pcoutage::preprocess::bin_of;
use pcoutage::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidModel = 5,
    InvalidArgument = 6,
    UnknownNode = 7,
    StateOutOfRange = 8,
    StateSpaceTooLarge = 9,
    BufferTooSmall = 10,
    Panic = 11,
    Internal = 12,
}

/// Opaque handle to a loaded model.
pub struct PcoModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    // Interior NULs would truncate the message, so drop them.
    let clean = CString::new(msg.replace('\0', "")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(clean));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> PcoStatus {
    match err {
        Error::Io { .. } => PcoStatus::Io,
        Error::Parse { .. } | Error::MissingColumn { .. } | Error::DuplicateTimestamp { .. } => PcoStatus::Parse,
        Error::Model(_) | Error::Graph(_) => PcoStatus::InvalidModel,
        Error::UnknownNode(_) => PcoStatus::UnknownNode,
        Error::StateOutOfRange { .. } => PcoStatus::StateOutOfRange,
        Error::StateSpaceTooLarge { .. } => PcoStatus::StateSpaceTooLarge,
        Error::InvalidArgument(_) | Error::DimensionMismatch { .. } | Error::InvalidVariables(_) => {
            PcoStatus::InvalidArgument
        }
        Error::Step { source, .. } => status_of(source),
        _ => PcoStatus::Internal,
    }
}

struct Fail(PcoStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PcoStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, recording its error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PcoStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PcoStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            PcoStatus::Panic
        }
    }
}

unsafe fn model_ref<'a>(m: *const PcoModel) -> Result<&'a Model, Fail> {
    m.as_ref().map(|h| &h.inner).ok_or_else(|| null("model"))
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(PcoStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn emit(out: *mut *mut PcoModel, model: Model) -> Result<(), Fail> {
    *out = Box::into_raw(Box::new(PcoModel { inner: model }));
    Ok(())
}

fn write_posterior(post: &[f64], out: *mut f64, out_len: usize) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out_probs"));
    }
    if out_len < post.len() {
        return Err(Fail(
            PcoStatus::BufferTooSmall,
            format!("posterior needs {} slots, got {out_len}", post.len()),
        ));
    }
    // SAFETY: caller guarantees `out` holds `out_len` doubles.
    unsafe { std::slice::from_raw_parts_mut(out, post.len()) }.copy_from_slice(post);
    Ok(())
}

/// Message for the last failed call on this thread, or null after a
/// successful call. The pointer stays valid until the next call on this
/// thread.
#[no_mangle]
pub extern "C" fn pco_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pco_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a model file. On success `*out` receives a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pco_model_load(path: *const c_char, out: *mut *mut PcoModel) -> PcoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        emit(out, Model::load(Path::new(path))?)
    })
}

/// Parses a model from its JSON text. On success `*out` receives a new handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pco_model_from_json(json: *const c_char, out: *mut *mut PcoModel) -> PcoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        emit(out, Model::from_json(text)?)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pco_model_free(model: *mut PcoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of nodes, target included.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pco_model_node_count(model: *const PcoModel, out: *mut usize) -> PcoStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.network.len();
        Ok(())
    })
}

/// Index of the target node.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pco_model_target_index(model: *const PcoModel, out: *mut usize) -> PcoStatus {
    guard(|| {
        let m = model_ref(model)?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.network.target;
        Ok(())
    })
}

/// Number of states of node `index`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pco_model_cardinality(model: *const PcoModel, index: usize, out: *mut usize) -> PcoStatus {
    guard(|| {
        let m = model_ref(model)?;
        let card = *m.network.cardinalities.get(index).ok_or_else(|| {
            Fail(PcoStatus::InvalidArgument, format!("node index {index} out of range"))
        })?;
        *out.as_mut().ok_or_else(|| null("out"))? = card;
        Ok(())
    })
}

/// Copies the name of node `index` into `buf` with a trailing NUL.
///
/// `*out_len` (if not null) receives the name length in bytes without the
/// NUL, also when `buf` is too small, so callers can size a retry.
///
/// # Safety
/// `model` must be a live handle and `buf` must hold `buf_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pco_model_node_name(
    model: *const PcoModel,
    index: usize,
    buf: *mut c_char,
    buf_len: usize,
    out_len: *mut usize,
) -> PcoStatus {
    guard(|| {
        let m = model_ref(model)?;
        let name = m.network.dag.nodes.get(index).ok_or_else(|| {
            Fail(PcoStatus::InvalidArgument, format!("node index {index} out of range"))
        })?;
        if let Some(len) = out_len.as_mut() {
            *len = name.len();
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        if buf_len < name.len() + 1 {
            return Err(Fail(
                PcoStatus::BufferTooSmall,
                format!("name needs {} bytes, got {buf_len}", name.len() + 1),
            ));
        }
        ptr::copy_nonoverlapping(name.as_ptr().cast::<c_char>(), buf, name.len());
        *buf.add(name.len()) = 0;
        Ok(())
    })
}

/// Exact target posterior given `n` evidence pairs `(nodes[i], states[i])`.
///
/// Writes one probability per target state into `out_probs`, which must
/// hold at least `out_len` doubles.
///
/// # Safety
/// `nodes` and `states` must hold `n` entries each; `out_probs` must hold
/// `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pco_model_posterior(
    model: *const PcoModel,
    nodes: *const usize,
    states: *const usize,
    n: usize,
    out_probs: *mut f64,
    out_len: usize,
) -> PcoStatus {
    guard(|| {
        let m = model_ref(model)?;
        let nodes = slice_arg(nodes, n, "nodes")?;
        let states = slice_arg(states, n, "states")?;
        let mut evidence = BTreeMap::new();
        for (&v, &s) in nodes.iter().zip(states) {
            if evidence.insert(v, s).is_some_and(|prev| prev != s) {
                return Err(Fail(
                    PcoStatus::InvalidArgument,
                    format!("node {v} given two different states"),
                ));
            }
        }
        let post = posterior_target(&m.network, &evidence)?;
        write_posterior(&post, out_probs, out_len)
    })
}

/// Outage probability for one hour of raw weather readings.
///
/// `values` holds one reading per factor node in node order (the target is
/// skipped), `n` of them. Readings are binned with the model's bin edges,
/// out-of-range values clamp, and NaN leaves that factor unobserved.
///
/// # Safety
/// `values` must hold `n` doubles and `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pco_model_predict_raw(
    model: *const PcoModel,
    values: *const f64,
    n: usize,
    out: *mut f64,
) -> PcoStatus {
    guard(|| {
        let m = model_ref(model)?;
        let bn = &m.network;
        let values = slice_arg(values, n, "values")?;
        let factors: Vec<usize> = (0..bn.len()).filter(|&v| v != bn.target).collect();
        if values.len() != factors.len() {
            return Err(Error::DimensionMismatch {
                expected: factors.len(),
                actual: values.len(),
            }
            .into());
        }
        let mut evidence = BTreeMap::new();
        for (&v, &x) in factors.iter().zip(values) {
            if x.is_nan() {
                continue;
            }
            let edges = bn.bin_edges[v].as_ref().ok_or_else(|| {
                Fail(
                    PcoStatus::InvalidModel,
                    format!("node `{}` has no bin edges", bn.node_name(v)),
                )
            })?;
            evidence.insert(v, bin_of(edges, x));
        }
        let post = posterior_target(bn, &evidence)?;
        let p = *post
            .get(1)
            .ok_or_else(|| Fail(PcoStatus::InvalidModel, "target is not binary".into()))?;
        *out.as_mut().ok_or_else(|| null("out"))? = p;
        Ok(())
    })
}
