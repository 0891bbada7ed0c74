//! Exchange formats for annotation sets. Canonical JSON is the authoritative
//! form (import and export); WebVTT and CSV are export-only views.

mod csv;
mod webvtt;

pub use self::csv::{export_csv, CSV_HEADER};
pub use self::webvtt::{export_webvtt, format_vtt_time, DEFAULT_POINT_PADDING_MS};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical;
use crate::collab::{RevisionEntry, RevisionError, RevisionLog};
use crate::model::{
    sort_timeline, validate_set_structure, Annotation, AnnotationSet, Millis, Provenance, SetId,
    UserId, VideoReference, Violation,
};

pub const SET_FORMAT: &str = "hyvid-annotations";
pub const SET_FORMAT_VERSION: u32 = 1;
pub const LOG_FORMAT: &str = "hyvid-revlog";
pub const LOG_FORMAT_VERSION: u32 = 1;

/// Keys emitted ahead of the lexicographic order in every envelope.
pub const ENVELOPE_LEADING_KEYS: &[&str] = &["format", "version"];

/// On-disk / on-wire form of an annotation set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetDocument {
    pub format: String,
    pub version: u32,
    pub id: SetId,
    pub video: VideoReference,
    pub owner: UserId,
    pub revision: u64,
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl SetDocument {
    /// Builds the document with annotations in timeline order.
    pub fn new(set: &AnnotationSet, video: &VideoReference) -> Self {
        Self {
            format: SET_FORMAT.to_owned(),
            version: SET_FORMAT_VERSION,
            id: set.id.clone(),
            video: video.clone(),
            owner: set.owner.clone(),
            revision: set.revision,
            annotations: sort_timeline(&set.annotations),
            provenance: set.provenance.clone(),
        }
    }

    pub fn into_parts(self) -> (AnnotationSet, VideoReference) {
        let set = AnnotationSet {
            id: self.id,
            video_id: self.video.id.clone(),
            owner: self.owner,
            annotations: self.annotations,
            revision: self.revision,
            provenance: self.provenance,
        };
        (set, self.video)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("invalid annotation set:\n{}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("point padding must be > 0, got {0}")]
    BadPadding(Millis),
    #[error(transparent)]
    Serialize(#[from] serde_json::Error),
    #[error("CSV output: {0}")]
    Csv(String),
}

#[derive(Debug, thiserror::Error)]
pub enum ImportError {
    #[error("malformed JSON: {0}")]
    Json(#[source] serde_json::Error),
    #[error("unknown format tag {0:?}")]
    UnknownFormat(String),
    #[error("unsupported version {0}")]
    UnsupportedVersion(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid annotation set:\n{}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

impl ImportError {
    /// Field paths of the offending values, when known.
    pub fn paths(&self) -> Vec<String> {
        match self {
            ImportError::Schema { path, .. } => vec![path.clone()],
            ImportError::Invalid(vs) => vs.iter().map(|v| v.path.clone()).collect(),
            ImportError::UnknownFormat(_) => vec!["format".into()],
            ImportError::UnsupportedVersion(_) => vec!["version".into()],
            ImportError::Json(_) => vec![],
        }
    }
}

pub(crate) fn join_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Result of a successful import.
#[derive(Clone, Debug, PartialEq)]
pub struct ImportedSet {
    pub set: AnnotationSet,
    pub video: VideoReference,
    /// The input listed annotations in a different order than the timeline.
    pub reordered: bool,
}

pub(crate) fn ensure_valid(set: &AnnotationSet, video: &VideoReference) -> Result<(), ExportError> {
    let violations = validate_set_structure(set, video);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(ExportError::Invalid(violations))
    }
}

/// Canonical bytes of `set`. Equal sets give identical bytes regardless of
/// annotation insertion order.
pub fn export_set_json(
    set: &AnnotationSet,
    video: &VideoReference,
) -> Result<Vec<u8>, ExportError> {
    ensure_valid(set, video)?;
    Ok(canonical::to_vec_with_leading(
        &SetDocument::new(set, video),
        ENVELOPE_LEADING_KEYS,
    )?)
}

/// Parses, checks the envelope, then runs structural validation. Paths in
/// violations index the annotations as they appear in the input.
pub fn import_set_json(bytes: &[u8]) -> Result<ImportedSet, ImportError> {
    let value: Value = serde_json::from_slice(bytes).map_err(ImportError::Json)?;
    check_envelope(&value, SET_FORMAT, SET_FORMAT_VERSION)?;
    let doc: SetDocument =
        serde_path_to_error::deserialize(value).map_err(|e| ImportError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    let (mut set, video) = doc.into_parts();
    let violations = validate_set_structure(&set, &video);
    if !violations.is_empty() {
        return Err(ImportError::Invalid(violations));
    }
    let sorted = sort_timeline(&set.annotations);
    let reordered = sorted != set.annotations;
    set.annotations = sorted;
    Ok(ImportedSet {
        set,
        video,
        reordered,
    })
}

/// Checks the `format` tag and `version` of a canonical envelope.
pub fn check_envelope(value: &Value, format: &str, version: u32) -> Result<(), ImportError> {
    let obj = value.as_object().ok_or_else(|| ImportError::Schema {
        path: ".".into(),
        message: "expected a JSON object".into(),
    })?;
    match obj.get("format") {
        Some(Value::String(f)) if f == format => {}
        Some(Value::String(f)) => return Err(ImportError::UnknownFormat(f.clone())),
        Some(other) => return Err(ImportError::UnknownFormat(other.to_string())),
        None => {
            return Err(ImportError::Schema {
                path: "format".into(),
                message: "missing field".into(),
            })
        }
    }
    match obj.get("version") {
        Some(Value::Number(n)) if n.as_u64() == Some(u64::from(version)) => Ok(()),
        Some(other) => Err(ImportError::UnsupportedVersion(other.to_string())),
        None => Err(ImportError::Schema {
            path: "version".into(),
            message: "missing field".into(),
        }),
    }
}

/// Re-emits any accepted document in canonical form.
pub fn canonicalize_set_json(bytes: &[u8]) -> Result<Vec<u8>, ImportError> {
    let imported = import_set_json(bytes)?;
    export_set_json(&imported.set, &imported.video).map_err(|e| match e {
        ExportError::Invalid(vs) => ImportError::Invalid(vs),
        other => ImportError::Schema {
            path: ".".into(),
            message: other.to_string(),
        },
    })
}

/// On-disk form of a revision log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogDocument {
    pub format: String,
    pub version: u32,
    pub set_id: SetId,
    pub entries: Vec<RevisionEntry>,
}

pub fn export_log_json(log: &RevisionLog) -> Result<Vec<u8>, ExportError> {
    let doc = LogDocument {
        format: LOG_FORMAT.to_owned(),
        version: LOG_FORMAT_VERSION,
        set_id: log.set_id().clone(),
        entries: log.entries().to_vec(),
    };
    Ok(canonical::to_vec_with_leading(&doc, ENVELOPE_LEADING_KEYS)?)
}

#[derive(Debug, thiserror::Error)]
pub enum LogImportError {
    #[error(transparent)]
    Document(#[from] ImportError),
    #[error("inconsistent revision log: {0}")]
    Inconsistent(#[from] RevisionError),
}

/// Parses a log and checks that its entries number 1..n and replay cleanly.
pub fn import_log_json(bytes: &[u8]) -> Result<RevisionLog, LogImportError> {
    let value: Value = serde_json::from_slice(bytes).map_err(ImportError::Json)?;
    check_envelope(&value, LOG_FORMAT, LOG_FORMAT_VERSION)?;
    let doc: LogDocument =
        serde_path_to_error::deserialize(value).map_err(|e| ImportError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
    Ok(RevisionLog::from_entries(doc.set_id, doc.entries)?)
}
