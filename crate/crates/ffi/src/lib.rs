//! C ABI for the fsmodel library: opaque handles, status codes, and a small
//! surface covering parse → truncate → relation → report so other languages
//! can bind without touching Rust types.
//!
//! Every function is panic-safe; failures set a thread-local message
//! retrievable with `fsm_last_error`.

// Raw-pointer arguments are the contract of a C ABI; every dereference is
// null-checked first.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fsmodel::cdl::{parse_compactum, CompactumSpec};
use fsmodel::geometry::Scalar;
use fsmodel::relations::{
    check_fs_at_scale, collapse_continuum, comp_relation, fs_relation, quotient_metric, Partition,
};
use fsmodel::truncation::{truncate, Depth, TruncateOptions, TruncatedCompactum};

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum FsmStatus {
    FsmOk = 0,
    FsmNullArgument = 1,
    FsmInvalidUtf8 = 2,
    FsmParseError = 3,
    FsmTruncateError = 4,
    FsmRelationError = 5,
    FsmInvalidArgument = 6,
    FsmPanic = 7,
}

/// Opaque parsed compactum spec.
pub struct FsmSpec {
    inner: CompactumSpec,
}

/// Opaque finite truncation.
pub struct FsmTruncation {
    inner: TruncatedCompactum,
}

/// Opaque partition (quotient relation).
pub struct FsmPartition {
    inner: Partition,
}

/// Relation constructors exposed over the ABI.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum FsmRelationKind {
    FsmRelationFs = 0,
    FsmRelationComp = 1,
    FsmRelationIdentity = 2,
    /// Collapse the continuum named "H".
    FsmRelationCollapseH = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into();
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(msg.replace('\0', "?")).unwrap_or_default();
    });
}

fn guarded<T>(f: impl FnOnce() -> Result<T, FsmStatus>, out: &mut Option<T>) -> FsmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => {
            *out = Some(v);
            FsmStatus::FsmOk
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            FsmStatus::FsmPanic
        }
    }
}

unsafe fn cstr_arg<'a>(ptr: *const c_char) -> Result<&'a str, FsmStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(FsmStatus::FsmNullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        FsmStatus::FsmInvalidUtf8
    })
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len`); returns the full message length in bytes excluding the NUL.
#[no_mangle]
pub extern "C" fn fsm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Parses CDL source into a spec handle. The handle must be released with
/// `fsm_spec_free`.
#[no_mangle]
pub extern "C" fn fsm_spec_parse(source: *const c_char, out: *mut *mut FsmSpec) -> FsmStatus {
    if out.is_null() {
        set_error("null output pointer");
        return FsmStatus::FsmNullArgument;
    }
    let mut result = None;
    let status = guarded(
        || {
            let text = unsafe { cstr_arg(source) }?;
            let spec = parse_compactum(text).map_err(|e| {
                set_error(e.to_string());
                FsmStatus::FsmParseError
            })?;
            Ok(Box::into_raw(Box::new(FsmSpec { inner: spec })))
        },
        &mut result,
    );
    unsafe { *out = result.unwrap_or(ptr::null_mut()) };
    status
}

#[no_mangle]
pub extern "C" fn fsm_spec_free(spec: *mut FsmSpec) {
    if !spec.is_null() {
        drop(unsafe { Box::from_raw(spec) });
    }
}

/// Truncates a spec at depth (N, K, k) with atom granularity `delta`
/// ("p/q"). `allow_empty` != 0 lets zero-depth families instantiate empty.
#[no_mangle]
pub extern "C" fn fsm_truncate(
    spec: *const FsmSpec,
    ints: u32,
    dyadics: u32,
    words: u32,
    delta: *const c_char,
    allow_empty: c_int,
    out: *mut *mut FsmTruncation,
) -> FsmStatus {
    if out.is_null() {
        set_error("null output pointer");
        return FsmStatus::FsmNullArgument;
    }
    let mut result = None;
    let status = guarded(
        || {
            if spec.is_null() {
                set_error("null spec");
                return Err(FsmStatus::FsmNullArgument);
            }
            let delta_text = unsafe { cstr_arg(delta) }?;
            let delta = Scalar::parse(delta_text).map_err(|e| {
                set_error(e);
                FsmStatus::FsmInvalidArgument
            })?;
            if !delta.is_positive() {
                set_error("delta must be positive");
                return Err(FsmStatus::FsmInvalidArgument);
            }
            let spec = unsafe { &(*spec).inner };
            let t = truncate(
                spec,
                Depth::new(ints, dyadics, words),
                &delta,
                TruncateOptions {
                    allow_empty: allow_empty != 0,
                },
            )
            .map_err(|e| {
                set_error(e.to_string());
                FsmStatus::FsmTruncateError
            })?;
            Ok(Box::into_raw(Box::new(FsmTruncation { inner: t })))
        },
        &mut result,
    );
    unsafe { *out = result.unwrap_or(ptr::null_mut()) };
    status
}

#[no_mangle]
pub extern "C" fn fsm_truncation_free(t: *mut FsmTruncation) {
    if !t.is_null() {
        drop(unsafe { Box::from_raw(t) });
    }
}

#[no_mangle]
pub extern "C" fn fsm_truncation_atom_count(t: *const FsmTruncation) -> u64 {
    if t.is_null() {
        return 0;
    }
    unsafe { (*t).inner.atoms.len() as u64 }
}

#[no_mangle]
pub extern "C" fn fsm_truncation_piece_count(t: *const FsmTruncation) -> u64 {
    if t.is_null() {
        return 0;
    }
    unsafe { (*t).inner.pieces.len() as u64 }
}

/// Computes a quotient partition of the truncation.
#[no_mangle]
pub extern "C" fn fsm_relation(
    t: *const FsmTruncation,
    kind: FsmRelationKind,
    out: *mut *mut FsmPartition,
) -> FsmStatus {
    if out.is_null() {
        set_error("null output pointer");
        return FsmStatus::FsmNullArgument;
    }
    let mut result = None;
    let status = guarded(
        || {
            if t.is_null() {
                set_error("null truncation");
                return Err(FsmStatus::FsmNullArgument);
            }
            let t = unsafe { &(*t).inner };
            let p = match kind {
                FsmRelationKind::FsmRelationFs => fs_relation(t),
                FsmRelationKind::FsmRelationComp => comp_relation(t),
                FsmRelationKind::FsmRelationIdentity => Ok(Partition::identity(t)),
                FsmRelationKind::FsmRelationCollapseH => collapse_continuum(t, "H"),
            }
            .map_err(|e| {
                set_error(e.to_string());
                FsmStatus::FsmRelationError
            })?;
            Ok(Box::into_raw(Box::new(FsmPartition { inner: p })))
        },
        &mut result,
    );
    unsafe { *out = result.unwrap_or(ptr::null_mut()) };
    status
}

#[no_mangle]
pub extern "C" fn fsm_partition_free(p: *mut FsmPartition) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

#[no_mangle]
pub extern "C" fn fsm_partition_class_count(p: *const FsmPartition) -> u64 {
    if p.is_null() {
        return 0;
    }
    unsafe { (*p).inner.class_count() as u64 }
}

/// Serializes the partition (atom → class map plus closure trace) to JSON.
/// The returned string must be released with `fsm_string_free`.
#[no_mangle]
pub extern "C" fn fsm_partition_to_json(
    p: *const FsmPartition,
    out: *mut *mut c_char,
) -> FsmStatus {
    if out.is_null() {
        set_error("null output pointer");
        return FsmStatus::FsmNullArgument;
    }
    let mut result = None;
    let status = guarded(
        || {
            if p.is_null() {
                set_error("null partition");
                return Err(FsmStatus::FsmNullArgument);
            }
            let json = unsafe { (*p).inner.to_json() };
            let text = serde_json::to_string_pretty(&json).expect("serializable");
            Ok(CString::new(text).expect("no interior NUL").into_raw())
        },
        &mut result,
    );
    unsafe { *out = result.unwrap_or(ptr::null_mut()) };
    status
}

#[no_mangle]
pub extern "C" fn fsm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Finitely-Suslinian check of the partition at scale (ε, k); writes 1 into
/// `out_pass` when the quotient passes, 0 otherwise.
#[no_mangle]
pub extern "C" fn fsm_check_fs(
    t: *const FsmTruncation,
    p: *const FsmPartition,
    epsilon: *const c_char,
    k: u32,
    out_pass: *mut c_int,
) -> FsmStatus {
    if out_pass.is_null() {
        set_error("null output pointer");
        return FsmStatus::FsmNullArgument;
    }
    let mut result = None;
    let status = guarded(
        || {
            if t.is_null() || p.is_null() {
                set_error("null truncation or partition");
                return Err(FsmStatus::FsmNullArgument);
            }
            let eps_text = unsafe { cstr_arg(epsilon) }?;
            let eps = Scalar::parse(eps_text).map_err(|e| {
                set_error(e);
                FsmStatus::FsmInvalidArgument
            })?;
            if !eps.is_positive() || k < 3 {
                set_error("epsilon must be positive and k at least 3");
                return Err(FsmStatus::FsmInvalidArgument);
            }
            let t = unsafe { &(*t).inner };
            let p = unsafe { &(*p).inner };
            if p.n_atoms() != t.atoms.len() {
                set_error("partition universe does not match the truncation");
                return Err(FsmStatus::FsmRelationError);
            }
            let qm = quotient_metric(t, p);
            let report = check_fs_at_scale(t, p, &qm, &eps, k as usize);
            Ok(if report.pass { 1 } else { 0 })
        },
        &mut result,
    );
    if let Some(v) = result {
        unsafe { *out_pass = v };
    }
    status
}
