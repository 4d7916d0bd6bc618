//! C ABI over the acforge engine.
//!
//! Conventions:
//! - every fallible function returns an [`AcfStatus`]; on failure the message
//!   is available from [`acf_last_error`] on the same thread
//! - objects are opaque handles released with their `_free` function
//! - returned strings are UTF-8, NUL-terminated and released with
//!   [`acf_string_free`]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use acforge::ac_model::{create_element, ElementId, Kind};
use acforge::audit::{self, error_count, ExportMode};
use acforge::datasets::PredictionMatrix;
use acforge::store::{canonical_json, format_timestamp, CaseDirectory, Clock, Entry, UtcOffset};
use acforge::techniques::{compute_confident_joint, find_label_issues, IsolationForestModel, IsolationForestParams};
use acforge::Error;

/// Result codes shared by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    AlreadyExists = 5,
    StillReferenced = 6,
    Locked = 7,
    InvalidData = 8,
    ValidationFailed = 9,
    Io = 10,
    Panic = 11,
}

/// Opened case directory.
pub struct AcfCase {
    inner: CaseDirectory,
}

/// Fitted isolation forest.
pub struct AcfForest {
    inner: IsolationForestModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(AcfStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::MalformedId(_) | Error::MissingField(_) | Error::Unknown { .. } | Error::KindMismatch { .. } => {
                AcfStatus::InvalidArgument
            }
            Error::NotFound(_) => AcfStatus::NotFound,
            Error::AlreadyExists(_) | Error::DuplicateTimestamp(_) => AcfStatus::AlreadyExists,
            Error::StillReferenced { .. } => AcfStatus::StillReferenced,
            Error::Locked(_) => AcfStatus::Locked,
            Error::ValidationFailed { .. } => AcfStatus::ValidationFailed,
            Error::Io { .. } => AcfStatus::Io,
            _ => AcfStatus::InvalidData,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: AcfStatus, message: impl Into<String>) -> Failure {
    Failure(status, message.into())
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AcfStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => AcfStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            AcfStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(AcfStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AcfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn id_arg(p: *const c_char, what: &str) -> Result<ElementId, Failure> {
    Ok(ElementId::new(text(p, what)?)?)
}

unsafe fn case_ref<'a>(case: *const AcfCase) -> Result<&'a CaseDirectory, Failure> {
    case.as_ref()
        .map(|c| &c.inner)
        .ok_or_else(|| fail(AcfStatus::NullArgument, "case is null"))
}

unsafe fn put_string(out: *mut *mut c_char, value: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(AcfStatus::NullArgument, "output pointer is null"));
    }
    let c = CString::new(value).map_err(|_| fail(AcfStatus::InvalidData, "output contains NUL"))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(AcfStatus::NullArgument, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn classification_inputs(
    labels: *const usize,
    probs: *const f64,
    n: usize,
    k: usize,
) -> Result<(Vec<usize>, PredictionMatrix), Failure> {
    let cells = n.checked_mul(k).ok_or_else(|| fail(AcfStatus::InvalidArgument, "n * k overflows"))?;
    let labels = slice(labels, n, "labels")?.to_vec();
    let flat = slice(probs, cells, "probs")?;
    let rows = flat.chunks(k.max(1)).map(<[f64]>::to_vec).collect();
    Ok((labels, PredictionMatrix::from_rows(rows, k)?))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn acf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn acf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn open_with(
    path: *const c_char,
    out: *mut *mut AcfCase,
    f: fn(&str) -> acforge::Result<CaseDirectory>,
) -> AcfStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(AcfStatus::NullArgument, "output pointer is null"));
        }
        let inner = f(text(path, "path")?)?;
        *out = Box::into_raw(Box::new(AcfCase { inner }));
        Ok(())
    })
}

/// Creates (if needed) and opens a case directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn acf_case_init(path: *const c_char, out: *mut *mut AcfCase) -> AcfStatus {
    open_with(path, out, |p| CaseDirectory::init(p))
}

/// Opens an existing case directory.
///
/// # Safety
/// See [`acf_case_init`].
#[no_mangle]
pub unsafe extern "C" fn acf_case_open(path: *const c_char, out: *mut *mut AcfCase) -> AcfStatus {
    open_with(path, out, |p| CaseDirectory::open(p))
}

/// # Safety
/// `case` must come from [`acf_case_open`]/[`acf_case_init`] or be null.
#[no_mangle]
pub unsafe extern "C" fn acf_case_free(case: *mut AcfCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Pins the clock to `epoch` when `fixed` is true, otherwise uses the system clock.
///
/// # Safety
/// `case` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn acf_case_set_clock(case: *mut AcfCase, fixed: bool, epoch: i64) -> AcfStatus {
    guard(|| {
        let case = case.as_mut().ok_or_else(|| fail(AcfStatus::NullArgument, "case is null"))?;
        case.inner.set_clock(if fixed { Clock::Fixed(epoch) } else { Clock::System });
        Ok(())
    })
}

/// Creates an element of `kind` (claim, measure, blueprint) from a JSON
/// object of fields and saves it.
///
/// # Safety
/// `case` must be a live handle; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn acf_case_create(case: *const AcfCase, kind: *const c_char, fields_json: *const c_char) -> AcfStatus {
    guard(|| {
        let case = case_ref(case)?;
        let kind: Kind = text(kind, "kind")?.parse()?;
        let fields: serde_json::Value = serde_json::from_str(text(fields_json, "fields_json")?)
            .map_err(|e| fail(AcfStatus::InvalidArgument, format!("fields_json: {e}")))?;
        let map = fields
            .as_object()
            .ok_or_else(|| fail(AcfStatus::InvalidArgument, "fields_json must be an object"))?;
        let mut element = create_element(kind, map, case.now())?;
        case.save_element(&mut element, false)?;
        Ok(())
    })
}

/// Loads the stored record `id` as canonical JSON.
///
/// # Safety
/// `case` must be a live handle; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn acf_case_load_json(case: *const AcfCase, id: *const c_char, out_json: *mut *mut c_char) -> AcfStatus {
    guard(|| {
        let case = case_ref(case)?;
        let json = match case.load(&id_arg(id, "id")?, None)? {
            Entry::Element(e) => canonical_json(&e)?,
            Entry::Realization(r) => canonical_json(&r)?,
        };
        put_string(out_json, json)
    })
}

/// # Safety
/// `case` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn acf_case_delete(case: *const AcfCase, id: *const c_char) -> AcfStatus {
    guard(|| Ok(case_ref(case)?.delete(&id_arg(id, "id")?)?))
}

/// Validates the case below `root`. Findings are returned as a JSON array
/// and the number of error-severity findings through `out_errors`.
///
/// # Safety
/// `case` must be a live handle; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn acf_case_validate(
    case: *const AcfCase,
    root: *const c_char,
    out_findings_json: *mut *mut c_char,
    out_errors: *mut usize,
) -> AcfStatus {
    guard(|| {
        let case = case_ref(case)?;
        let findings = audit::validate_case(case, &id_arg(root, "root")?)?;
        if out_errors.is_null() {
            return Err(fail(AcfStatus::NullArgument, "out_errors is null"));
        }
        let json = serde_json::to_string(&findings).map_err(|e| fail(AcfStatus::InvalidData, e.to_string()))?;
        put_string(out_findings_json, json)?;
        *out_errors = error_count(&findings);
        Ok(())
    })
}

/// Exports the case below `root` in `mode` (`evidence_only` or `subtree`).
///
/// # Safety
/// `case` must be a live handle; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn acf_case_export(
    case: *const AcfCase,
    root: *const c_char,
    mode: *const c_char,
    out_json: *mut *mut c_char,
) -> AcfStatus {
    guard(|| {
        let case = case_ref(case)?;
        let mode: ExportMode = text(mode, "mode")?.parse()?;
        let (_, json) = audit::export_case(case, &id_arg(root, "root")?, mode)?;
        put_string(out_json, json)
    })
}

/// Formats `epoch` as `YYYY-MM-DD HH:MM:SS` at `offset_minutes` from UTC.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn acf_format_timestamp(epoch: i64, offset_minutes: i32, out: *mut *mut c_char) -> AcfStatus {
    guard(|| {
        let s = format_timestamp(epoch, UtcOffset::new(offset_minutes)?)?;
        put_string(out, s)
    })
}

/// Confident joint of `n` labels against an `n x k` row-major probability
/// matrix. Writes `k * k` counts (row = given label) and the number of rows
/// that reached no class threshold.
///
/// # Safety
/// `labels` holds `n` values, `probs` `n * k`, `out_counts` room for `k * k`.
#[no_mangle]
pub unsafe extern "C" fn acf_confident_joint(
    labels: *const usize,
    probs: *const f64,
    n: usize,
    k: usize,
    out_counts: *mut u64,
    out_uncounted: *mut usize,
) -> AcfStatus {
    guard(|| {
        let (labels, probs) = classification_inputs(labels, probs, n, k)?;
        let joint = compute_confident_joint(&labels, &probs)?;
        if out_counts.is_null() || out_uncounted.is_null() {
            return Err(fail(AcfStatus::NullArgument, "output pointer is null"));
        }
        for (i, v) in joint.counts.iter().flatten().enumerate() {
            *out_counts.add(i) = *v;
        }
        *out_uncounted = joint.uncounted;
        Ok(())
    })
}

/// Label-issue candidates as a JSON array of
/// `{index, given, suggested, confidence}`, most confident first.
///
/// # Safety
/// As for [`acf_confident_joint`]; `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn acf_label_issues(
    labels: *const usize,
    probs: *const f64,
    n: usize,
    k: usize,
    out_json: *mut *mut c_char,
) -> AcfStatus {
    guard(|| {
        let (labels, probs) = classification_inputs(labels, probs, n, k)?;
        let report = find_label_issues(&labels, &probs)?;
        let json = serde_json::to_string(&report.issues).map_err(|e| fail(AcfStatus::InvalidData, e.to_string()))?;
        put_string(out_json, json)
    })
}

unsafe fn matrix(rows: *const f64, n: usize, d: usize) -> Result<Vec<Vec<f64>>, Failure> {
    if d == 0 {
        return Err(fail(AcfStatus::InvalidArgument, "d must be positive"));
    }
    let cells = n.checked_mul(d).ok_or_else(|| fail(AcfStatus::InvalidArgument, "n * d overflows"))?;
    Ok(slice(rows, cells, "rows")?.chunks(d).map(<[f64]>::to_vec).collect())
}

/// Fits an isolation forest on `n x d` row-major data.
///
/// # Safety
/// `rows` holds `n * d` values; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn acf_forest_fit(
    rows: *const f64,
    n: usize,
    d: usize,
    n_trees: usize,
    psi: usize,
    seed: u64,
    out: *mut *mut AcfForest,
) -> AcfStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(AcfStatus::NullArgument, "output pointer is null"));
        }
        let data = matrix(rows, n, d)?;
        let inner = IsolationForestModel::fit(&data, IsolationForestParams { n_trees, psi, seed })?;
        *out = Box::into_raw(Box::new(AcfForest { inner }));
        Ok(())
    })
}

/// Scores `n x d` rows; writes `n` anomaly scores in (0, 1).
///
/// # Safety
/// `forest` must be live; `rows` holds `n * d` values, `out_scores` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn acf_forest_score(
    forest: *const AcfForest,
    rows: *const f64,
    n: usize,
    d: usize,
    out_scores: *mut f64,
) -> AcfStatus {
    guard(|| {
        let forest = forest.as_ref().ok_or_else(|| fail(AcfStatus::NullArgument, "forest is null"))?;
        let scores = forest.inner.score(&matrix(rows, n, d)?)?;
        if n > 0 && out_scores.is_null() {
            return Err(fail(AcfStatus::NullArgument, "out_scores is null"));
        }
        for (i, s) in scores.into_iter().enumerate() {
            *out_scores.add(i) = s;
        }
        Ok(())
    })
}

/// # Safety
/// `forest` must come from [`acf_forest_fit`] or be null.
#[no_mangle]
pub unsafe extern "C" fn acf_forest_free(forest: *mut AcfForest) {
    if !forest.is_null() {
        drop(Box::from_raw(forest));
    }
}
