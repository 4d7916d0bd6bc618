//! Versioned, file-backed persistence for a case directory.
//!
//! Layout under the case root:
//!
//! ```text
//! elements/claim/<id>.json
//! elements/measure/<id>.json
//! elements/blueprint/<id>.json
//! realizations/<id>.json
//! artifacts/<realization_id>/<name>
//! docs/<id>/<timestamp>.<ext>
//! ```
//!
//! Record files are canonical JSON (sorted keys, two-space indent, trailing
//! newline) wrapped with `"schema": 1` and `"kind"`. Every write goes through
//! a temp file and a rename, and mutations hold `.acforge.lock`.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{DateTime, NaiveDateTime};
use serde_json::{Map, Value};

use crate::ac_model::{AcElement, Blueprint, CaseRecord, Claim, DocumentationRecord, ElementId, Kind, Measure, Realization};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u64 = 1;
const LOCK_FILE: &str = ".acforge.lock";

/// Display offset from UTC in minutes, within ±14h.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct UtcOffset(i32);

impl UtcOffset {
    pub const UTC: UtcOffset = UtcOffset(0);

    pub fn new(minutes: i32) -> Result<Self> {
        if minutes.abs() <= 14 * 60 {
            Ok(UtcOffset(minutes))
        } else {
            Err(Error::data(format!("utc offset {minutes} min is outside ±14h")))
        }
    }

    pub fn minutes(self) -> i32 {
        self.0
    }
}

/// Renders `epoch` shifted by `offset` as `YYYY-MM-DD HH:MM:SS`.
pub fn format_timestamp(epoch: i64, offset: UtcOffset) -> Result<String> {
    if epoch < 0 {
        return Err(Error::data(format!("negative epoch {epoch}")));
    }
    let shifted = epoch + i64::from(offset.0) * 60;
    let dt = DateTime::from_timestamp(shifted, 0).ok_or_else(|| Error::data(format!("epoch {epoch} out of range")))?;
    Ok(dt.format("%Y-%m-%d %H:%M:%S").to_string())
}

/// Inverse of [`format_timestamp`].
pub fn parse_timestamp(text: &str, offset: UtcOffset) -> Result<i64> {
    let naive = NaiveDateTime::parse_from_str(text, "%Y-%m-%d %H:%M:%S")
        .map_err(|e| Error::data(format!("bad datetime {text:?}: {e}")))?;
    Ok(naive.and_utc().timestamp() - i64::from(offset.0) * 60)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    System,
    /// Every call to `now` returns this epoch.
    Fixed(i64),
}

impl Clock {
    pub fn now(self) -> i64 {
        match self {
            Clock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs() as i64)
                .unwrap_or(0),
            Clock::Fixed(t) => t,
        }
    }
}

/// Anything read from or written to a case directory.
#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Element(AcElement),
    Realization(Realization),
}

impl Entry {
    pub fn kind(&self) -> Kind {
        match self {
            Entry::Element(e) => e.kind(),
            Entry::Realization(_) => Kind::Realization,
        }
    }

    pub fn id(&self) -> &ElementId {
        match self {
            Entry::Element(e) => e.id(),
            Entry::Realization(r) => &r.id,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Entry::Element(e) => e.validate(),
            Entry::Realization(r) => r.validate(),
        }
    }

    pub fn references(&self) -> Vec<(&ElementId, Kind)> {
        match self {
            Entry::Element(e) => e.references(),
            Entry::Realization(r) => r.references(),
        }
    }
}

/// Held while a writer mutates the case; removes the lock file on drop.
#[derive(Debug)]
pub struct CaseLock {
    path: PathBuf,
}

impl Drop for CaseLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

#[derive(Debug)]
pub struct CaseDirectory {
    root: PathBuf,
    clock: Clock,
    offset: UtcOffset,
    fail_next_write: AtomicBool,
}

fn kind_dir(kind: Kind) -> PathBuf {
    match kind {
        Kind::Claim => Path::new("elements").join("claim"),
        Kind::Measure => Path::new("elements").join("measure"),
        Kind::Blueprint => Path::new("elements").join("blueprint"),
        Kind::Realization => PathBuf::from("realizations"),
    }
}

/// Rebuilds every object with sorted keys, independent of serde_json features.
fn canonical(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, canonical(v))).collect::<Map<_, _>>())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        other => other,
    }
}

/// Serializes `value` as canonical JSON text with a trailing newline.
pub fn canonical_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Render(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&canonical(v)).map_err(|e| Error::Render(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn encode_record<T: CaseRecord>(record: &T) -> Result<String> {
    let mut value = serde_json::to_value(record).map_err(|e| Error::Render(e.to_string()))?;
    let obj = value.as_object_mut().expect("records serialize as objects");
    obj.insert("schema".into(), Value::from(SCHEMA_VERSION));
    obj.insert("kind".into(), Value::from(T::KIND.as_str()));
    canonical_json(&value)
}

fn decode_record<T: CaseRecord>(path: &Path, text: &str, expected_id: &ElementId) -> Result<T> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut value: Value = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    let obj = value.as_object_mut().ok_or_else(|| parse_err("expected a JSON object".into()))?;
    match obj.remove("schema") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA_VERSION) => {}
        other => return Err(parse_err(format!("unsupported schema {other:?}"))),
    }
    match obj.remove("kind") {
        Some(Value::String(k)) if k == T::KIND.as_str() => {}
        Some(Value::String(k)) => {
            return Err(Error::KindMismatch {
                id: expected_id.to_string(),
                expected: T::KIND.as_str(),
                found: k.parse::<Kind>().map(Kind::as_str).unwrap_or("unknown kind"),
            })
        }
        other => return Err(parse_err(format!("missing kind, got {other:?}"))),
    }
    let record: T = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
    if record.id() != expected_id {
        return Err(parse_err(format!("file is named {expected_id} but holds {}", record.id())));
    }
    record.validate()?;
    Ok(record)
}

impl CaseDirectory {
    /// Creates the directory layout (idempotent) and opens the case.
    pub fn init(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for kind in Kind::ALL {
            let dir = root.join(kind_dir(kind));
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        for extra in ["artifacts", "docs"] {
            let dir = root.join(extra);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(Self::at(root))
    }

    /// Opens an existing case; the root must contain `elements/`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        if !root.join("elements").is_dir() {
            return Err(Error::NotFound(format!("case directory {}", root.display())));
        }
        Ok(Self::at(root))
    }

    fn at(root: PathBuf) -> Self {
        CaseDirectory {
            root,
            clock: Clock::System,
            offset: UtcOffset::UTC,
            fail_next_write: AtomicBool::new(false),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_offset(mut self, offset: UtcOffset) -> Self {
        self.offset = offset;
        self
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn now(&self) -> i64 {
        self.clock.now()
    }

    pub fn offset(&self) -> UtcOffset {
        self.offset
    }

    /// Makes the next atomic write fail after the temp file is written and
    /// before it is renamed into place.
    #[doc(hidden)]
    pub fn inject_write_fault(&self) {
        self.fail_next_write.store(true, Ordering::SeqCst);
    }

    pub fn record_path(&self, kind: Kind, id: &ElementId) -> PathBuf {
        self.root.join(kind_dir(kind)).join(format!("{id}.json"))
    }

    pub fn lock(&self) -> Result<CaseLock> {
        let path = self.root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(CaseLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(Error::Locked(path)),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    /// Writes `bytes` to `path` via a sibling temp file and rename.
    pub fn write_atomic(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let parent = path.parent().unwrap_or(&self.root);
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("record");
        let tmp = parent.join(format!(".{file_name}.tmp"));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            if self.fail_next_write.swap(false, Ordering::SeqCst) {
                return Err(io::Error::other("injected write fault"));
            }
            fs::rename(&tmp, path)
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(Error::io(path, e));
        }
        Ok(())
    }

    /// Which kind of record (if any) is stored under `id`.
    pub fn find(&self, id: &ElementId) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| self.record_path(*k, id).is_file())
    }

    pub fn exists(&self, id: &ElementId, kind: Kind) -> bool {
        self.record_path(kind, id).is_file()
    }

    /// Persists `record`. A new id is created; an existing id is replaced only
    /// with `overwrite`, in which case the element version becomes
    /// `max(now, stored + 1)` (and never less than the in-memory version).
    pub fn save<T: CaseRecord>(&self, record: &mut T, overwrite: bool) -> Result<PathBuf> {
        let _lock = self.lock()?;
        self.save_locked(record, overwrite)
    }

    pub(crate) fn save_locked<T: CaseRecord>(&self, record: &mut T, overwrite: bool) -> Result<PathBuf> {
        record.validate()?;
        let id = record.id().clone();
        if let Some(other) = self.find(&id).filter(|k| *k != T::KIND) {
            return Err(Error::AlreadyExists(format!("{id} (as {other})")));
        }
        for (target, kind) in record.references() {
            if !self.exists(target, kind) {
                return Err(Error::NotFound(format!("{kind} {target} referenced by {id}")));
            }
        }
        let path = self.record_path(T::KIND, &id);
        if path.is_file() {
            if !overwrite {
                return Err(Error::AlreadyExists(id.to_string()));
            }
            let stored: T = self.load_record(&id)?;
            let next = stored.element_version().bumped(self.now()).max(record.element_version());
            record.set_element_version(next);
        }
        self.write_atomic(&path, encode_record(record)?.as_bytes())?;
        Ok(path)
    }

    /// Saves an element of any kind (see [`CaseDirectory::save`]).
    pub fn save_element(&self, element: &mut AcElement, overwrite: bool) -> Result<PathBuf> {
        match element {
            AcElement::Claim(c) => self.save(c, overwrite),
            AcElement::Measure(m) => self.save(m, overwrite),
            AcElement::Blueprint(b) => self.save(b, overwrite),
        }
    }

    pub fn save_entry(&self, entry: &mut Entry, overwrite: bool) -> Result<PathBuf> {
        match entry {
            Entry::Element(e) => self.save_element(e, overwrite),
            Entry::Realization(r) => self.save(r, overwrite),
        }
    }

    /// Writes a record without reference checks or version bumps. Used by
    /// import, where the exchange file is trusted to be self-consistent.
    pub(crate) fn write_record_unchecked<T: CaseRecord>(&self, record: &T) -> Result<PathBuf> {
        record.validate()?;
        let path = self.record_path(T::KIND, record.id());
        self.write_atomic(&path, encode_record(record)?.as_bytes())?;
        Ok(path)
    }

    /// Loads a typed record. Kind mismatches are reported when `id` exists
    /// under a different kind.
    pub fn load_record<T: CaseRecord>(&self, id: &ElementId) -> Result<T> {
        let path = self.record_path(T::KIND, id);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(match self.find(id) {
                    Some(found) => Error::KindMismatch {
                        id: id.to_string(),
                        expected: T::KIND.as_str(),
                        found: found.as_str(),
                    },
                    None => Error::NotFound(id.to_string()),
                })
            }
            Err(e) => return Err(Error::io(path, e)),
        };
        decode_record(&path, &text, id)
    }

    /// Loads whatever is stored under `id`, optionally insisting on a kind.
    pub fn load(&self, id: &ElementId, kind: Option<Kind>) -> Result<Entry> {
        let kind = match (kind, self.find(id)) {
            (_, None) => return Err(Error::NotFound(id.to_string())),
            (Some(want), Some(found)) if want != found => {
                return Err(Error::KindMismatch {
                    id: id.to_string(),
                    expected: want.as_str(),
                    found: found.as_str(),
                })
            }
            (_, Some(found)) => found,
        };
        Ok(match kind {
            Kind::Claim => Entry::Element(AcElement::Claim(self.load_record(id)?)),
            Kind::Measure => Entry::Element(AcElement::Measure(self.load_record(id)?)),
            Kind::Blueprint => Entry::Element(AcElement::Blueprint(self.load_record(id)?)),
            Kind::Realization => Entry::Realization(self.load_record(id)?),
        })
    }

    pub fn load_element(&self, id: &ElementId) -> Result<AcElement> {
        match self.load(id, None)? {
            Entry::Element(e) => Ok(e),
            Entry::Realization(_) => Err(Error::KindMismatch {
                id: id.to_string(),
                expected: "claim, measure or blueprint",
                found: Kind::Realization.as_str(),
            }),
        }
    }

    pub fn load_claim(&self, id: &ElementId) -> Result<Claim> {
        self.load_record(id)
    }

    pub fn load_measure(&self, id: &ElementId) -> Result<Measure> {
        self.load_record(id)
    }

    pub fn load_blueprint(&self, id: &ElementId) -> Result<Blueprint> {
        self.load_record(id)
    }

    pub fn load_realization(&self, id: &ElementId) -> Result<Realization> {
        self.load_record(id)
    }

    /// Ids stored under `kind`, sorted.
    pub fn ids(&self, kind: Kind) -> Result<Vec<ElementId>> {
        let dir = self.root.join(kind_dir(kind));
        let mut ids = Vec::new();
        let read = match fs::read_dir(&dir) {
            Ok(r) => r,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(ids),
            Err(e) => return Err(Error::io(dir, e)),
        };
        for entry in read {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let name = entry.file_name();
            let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".json")) else {
                continue;
            };
            if stem.starts_with('.') {
                continue;
            }
            match ElementId::new(stem) {
                Ok(id) => ids.push(id),
                Err(_) => {
                    return Err(Error::Parse {
                        path: entry.path(),
                        message: "file name is not a valid element id".into(),
                    })
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn list<T: CaseRecord>(&self) -> Result<Vec<T>> {
        self.ids(T::KIND)?.iter().map(|id| self.load_record(id)).collect()
    }

    /// Every stored record, claims first, then measures, blueprints,
    /// realizations; each group sorted by id.
    pub fn entries(&self) -> Result<Vec<Entry>> {
        let mut out = Vec::new();
        for kind in Kind::ALL {
            for id in self.ids(kind)? {
                out.push(self.load(&id, Some(kind))?);
            }
        }
        Ok(out)
    }

    /// Removes the record stored under `id`. Refused while any other stored
    /// record still points at it.
    pub fn delete(&self, id: &ElementId) -> Result<()> {
        let _lock = self.lock()?;
        let kind = self.find(id).ok_or_else(|| Error::NotFound(id.to_string()))?;
        for entry in self.entries()? {
            if entry.id() == id {
                continue;
            }
            if entry.references().iter().any(|(target, _)| *target == id) {
                return Err(Error::StillReferenced {
                    id: id.to_string(),
                    by: entry.id().to_string(),
                });
            }
        }
        let path = self.record_path(kind, id);
        fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        if kind == Kind::Realization {
            let artifacts = self.artifact_dir(id);
            if artifacts.is_dir() {
                fs::remove_dir_all(&artifacts).map_err(|e| Error::io(&artifacts, e))?;
            }
        }
        Ok(())
    }

    /// Appends `record` to the realization's documentation table (kept sorted
    /// ascending) and saves it.
    pub fn record_documentation(&self, realization_id: &ElementId, record: DocumentationRecord) -> Result<Realization> {
        let _lock = self.lock()?;
        self.record_documentation_locked(realization_id, record)
    }

    pub(crate) fn record_documentation_locked(
        &self,
        realization_id: &ElementId,
        record: DocumentationRecord,
    ) -> Result<Realization> {
        if !record.path.starts_with("docs/") || !self.root.join(&record.path).is_file() {
            return Err(Error::NotFound(format!("documentation file {}", record.path)));
        }
        let mut realization = self.load_realization(realization_id)?;
        if realization.documentation.iter().any(|d| d.timestamp == record.timestamp) {
            return Err(Error::DuplicateTimestamp(record.timestamp));
        }
        let at = realization.documentation.partition_point(|d| d.timestamp < record.timestamp);
        realization.documentation.insert(at, record);
        self.save_locked(&mut realization, true)?;
        Ok(realization)
    }

    pub fn artifact_dir(&self, realization_id: &ElementId) -> PathBuf {
        self.root.join("artifacts").join(realization_id.as_str())
    }

    /// Stores an opaque artifact and returns its path relative to the root.
    pub fn write_artifact(&self, realization_id: &ElementId, name: &str, bytes: &[u8]) -> Result<String> {
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(Error::data(format!("invalid artifact name {name:?}")));
        }
        let rel = format!("artifacts/{realization_id}/{name}");
        self.write_atomic(&self.root.join(&rel), bytes)?;
        Ok(rel)
    }

    pub fn read_relative(&self, rel: &str) -> Result<Vec<u8>> {
        let path = self.root.join(rel);
        fs::read(&path).map_err(|e| Error::io(path, e))
    }

    pub(crate) fn doc_rel_path(id: &ElementId, timestamp: i64, ext: &str) -> String {
        format!("docs/{id}/{timestamp}.{ext}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ac_model::{create_element, DocFormat, FieldMap};
    use serde_json::json;

    fn case() -> (tempfile::TempDir, CaseDirectory) {
        let dir = tempfile::tempdir().unwrap();
        let case = CaseDirectory::init(dir.path().join("case")).unwrap().with_clock(Clock::Fixed(1000));
        (dir, case)
    }

    fn element(kind: Kind, v: Value) -> AcElement {
        let fields: FieldMap = v.as_object().unwrap().clone();
        create_element(kind, &fields, 1000).unwrap()
    }

    fn id(s: &str) -> ElementId {
        ElementId::new(s).unwrap()
    }

    fn doc_record(case: &CaseDirectory, ts: i64, v: &str) -> DocumentationRecord {
        let path = CaseDirectory::doc_rel_path(&id("lf_conf"), ts, "html");
        case.write_atomic(&case.root().join(&path), b"<html></html>").unwrap();
        DocumentationRecord {
            timestamp: ts,
            rendered_datetime: format_timestamp(ts, UtcOffset::new(120).unwrap()).unwrap(),
            data_model_version: v.into(),
            format: DocFormat::Html,
            path,
        }
    }

    fn lf_conf_case() -> (tempfile::TempDir, CaseDirectory) {
        let (dir, case) = case();
        let mut m = element(
            Kind::Measure,
            json!({"id": "detect_incorrect_labels", "name": "Detect incorrect labels and revise them", "lifecycle_phase": "analysis", "addressed_characteristic": "correct_relation"}),
        );
        case.save_element(&mut m, false).unwrap();
        let mut b = element(
            Kind::Blueprint,
            json!({"id": "lf_conf_bp", "name": "detect_label_faults_w_conf_learning", "realized_measure": "detect_incorrect_labels"}),
        );
        case.save_element(&mut b, false).unwrap();
        let mut r = Realization::new(id("lf_conf"), id("lf_conf_bp"), "v2022-08", 1000).unwrap();
        case.save(&mut r, false).unwrap();
        (dir, case)
    }

    #[test]
    fn timestamps_match_reference_rows() {
        let plus2 = UtcOffset::new(120).unwrap();
        assert_eq!(format_timestamp(1663591392, plus2).unwrap(), "2022-09-19 14:43:12");
        assert_eq!(format_timestamp(1690280832, plus2).unwrap(), "2023-07-25 12:27:12");
        assert_eq!(format_timestamp(0, UtcOffset::UTC).unwrap(), "1970-01-01 00:00:00");
        assert!(UtcOffset::new(14 * 60 + 1).is_err());
        assert!(format_timestamp(-1, UtcOffset::UTC).is_err());
    }

    #[test]
    fn save_new_then_no_clobber() {
        let (_d, case) = case();
        let mut root = element(Kind::Claim, json!({"id": "root", "statement": "s"}));
        let path = case.save_element(&mut root, false).unwrap();
        assert!(path.ends_with("elements/claim/root.json"));
        let before = fs::read(&path).unwrap();
        let mut again = element(Kind::Claim, json!({"id": "root", "statement": "changed"}));
        assert!(matches!(case.save_element(&mut again, false), Err(Error::AlreadyExists(_))));
        assert_eq!(fs::read(&path).unwrap(), before);
    }

    #[test]
    fn overwrite_bumps_version_and_updates_data_version() {
        let (_d, case) = lf_conf_case();
        let mut r = case.load_realization(&id("lf_conf")).unwrap();
        let before = r.element_version;
        r.data_model_version = "v2023-07".into();
        case.save(&mut r, true).unwrap();
        let stored = case.load_realization(&id("lf_conf")).unwrap();
        assert_eq!(stored.data_model_version, "v2023-07");
        assert!(stored.element_version > before);
    }

    #[test]
    fn file_is_canonical_json_with_schema() {
        let (_d, case) = case();
        let mut root = element(Kind::Claim, json!({"id": "root", "statement": "s"}));
        let path = case.save_element(&mut root, false).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let value: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["schema"], 1);
        assert_eq!(value["kind"], "claim");
        let keys: Vec<&String> = value.as_object().unwrap().keys().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn load_errors() {
        let (_d, case) = case();
        assert!(matches!(case.load(&id("missing"), None), Err(Error::NotFound(_))));
        let mut root = element(Kind::Claim, json!({"id": "root", "statement": "s"}));
        case.save_element(&mut root, false).unwrap();
        assert!(matches!(case.load(&id("root"), Some(Kind::Measure)), Err(Error::KindMismatch { .. })));
        assert!(matches!(case.load_measure(&id("root")), Err(Error::KindMismatch { .. })));
    }

    #[test]
    fn load_validates_hand_written_duplicates() {
        let (_d, case) = case();
        let text = r#"{"schema":1,"kind":"claim","id":"root","name":"root","statement":"s",
            "strategy":"split","subclaim_ids":["a","a"],"contexts":[],"assumptions":[],
            "measure_ids":[],"evidence_ids":[],"conclusions":[],"risk_criterion":null,"element_version":5}"#;
        fs::write(case.record_path(Kind::Claim, &id("root")), text).unwrap();
        assert!(matches!(case.load(&id("root"), None), Err(Error::Invariant { .. })));
        fs::write(case.record_path(Kind::Claim, &id("root")), "{not json").unwrap();
        assert!(matches!(case.load(&id("root"), None), Err(Error::Parse { .. })));
    }

    #[test]
    fn delete_is_guarded() {
        let (_d, case) = lf_conf_case();
        let mut extra = element(
            Kind::Measure,
            json!({"id": "unused", "name": "x", "lifecycle_phase": "testing", "addressed_characteristic": "other"}),
        );
        case.save_element(&mut extra, false).unwrap();
        case.delete(&id("unused")).unwrap();
        assert!(matches!(case.load(&id("unused"), None), Err(Error::NotFound(_))));
        // the realization still points at the blueprint
        assert!(matches!(case.delete(&id("lf_conf_bp")), Err(Error::StillReferenced { .. })));
        assert!(matches!(case.delete(&id("nope")), Err(Error::NotFound(_))));
    }

    #[test]
    fn save_requires_resolvable_references() {
        let (_d, case) = case();
        let mut c = element(Kind::Claim, json!({"id": "c", "statement": "s", "measure_ids": ["ghost"]}));
        assert!(matches!(case.save_element(&mut c, false), Err(Error::NotFound(_))));
    }

    #[test]
    fn ids_are_unique_across_kinds() {
        let (_d, case) = case();
        let mut c = element(Kind::Claim, json!({"id": "same", "statement": "s"}));
        case.save_element(&mut c, false).unwrap();
        let mut m = element(
            Kind::Measure,
            json!({"id": "same", "name": "x", "lifecycle_phase": "testing", "addressed_characteristic": "other"}),
        );
        assert!(matches!(case.save_element(&mut m, true), Err(Error::AlreadyExists(_))));
    }

    #[test]
    fn documentation_table_is_sorted_and_unique() {
        let (_d, case) = lf_conf_case();
        let rid = id("lf_conf");
        let newer = doc_record(&case, 1690280832, "v2023-07");
        let older = doc_record(&case, 1663591392, "v2022-08");
        case.record_documentation(&rid, newer.clone()).unwrap();
        let r = case.record_documentation(&rid, older).unwrap();
        let rows: Vec<(i64, &str)> = r.documentation.iter().map(|d| (d.timestamp, d.data_model_version.as_str())).collect();
        assert_eq!(rows, vec![(1663591392, "v2022-08"), (1690280832, "v2023-07")]);
        assert!(matches!(case.record_documentation(&rid, newer), Err(Error::DuplicateTimestamp(1690280832))));

        let mut missing = doc_record(&case, 5, "v");
        missing.path = "docs/lf_conf/404.html".into();
        assert!(matches!(case.record_documentation(&rid, missing), Err(Error::NotFound(_))));
    }

    #[test]
    fn injected_fault_leaves_prior_bytes() {
        let (_d, case) = case();
        let mut root = element(Kind::Claim, json!({"id": "root", "statement": "original"}));
        let path = case.save_element(&mut root, false).unwrap();
        let before = fs::read(&path).unwrap();
        let AcElement::Claim(c) = &mut root else { panic!() };
        c.statement = "changed".into();
        case.inject_write_fault();
        assert!(matches!(case.save_element(&mut root, true), Err(Error::Io { .. })));
        assert_eq!(fs::read(&path).unwrap(), before);
        let leftovers: Vec<_> = fs::read_dir(path.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn lock_excludes_second_writer() {
        let (_d, case) = case();
        let guard = case.lock().unwrap();
        let mut root = element(Kind::Claim, json!({"id": "root", "statement": "s"}));
        assert!(matches!(case.save_element(&mut root, false), Err(Error::Locked(_))));
        drop(guard);
        case.save_element(&mut root, false).unwrap();
    }

    proptest::proptest! {
        #[test]
        fn timestamp_parse_inverts_format(epoch in 0i64..(1i64 << 31), offset in -840i32..=840) {
            let off = UtcOffset::new(offset).unwrap();
            let text = format_timestamp(epoch, off).unwrap();
            proptest::prop_assert_eq!(parse_timestamp(&text, off).unwrap(), epoch);
        }
    }
}
