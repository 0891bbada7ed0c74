//! Core of the hypervideo annotation platform: the annotation model and
//! fragment algebra, media-fragment URIs, canonical interchange formats, and
//! the multi-set engine (diff, merge, grading, revision logs).
//!
//! Everything here is a pure function over immutable values.

pub mod canonical;
pub mod collab;
pub mod fragment;
pub mod interchange;
pub mod model;

pub use collab::{
    diff_pair, grade, median_fragment, merge, CollabError, DiffReport, EntryDraft, GradeReport,
    MergePolicy, MergeResult, RevisionEntry, RevisionLog, RevisionOp,
};
pub use fragment::{
    annotation_fragment_uri, format_npt_time, parse_fragment_string, parse_npt_time,
    serialize_fragment, FragmentDirective, FragmentError,
};
pub use interchange::{export_csv, export_set_json, export_webvtt, import_set_json, SetDocument};
pub use model::{
    annotations_at, jaccard, overlap_ms, sort_timeline, validate_fragment, validate_set,
    Annotation, AnnotationId, AnnotationSet, Body, Millis, Resource, ResourceId, ResourceKind,
    SetId, SpatialRegion, TimeFragment, Timestamp, UserId, VideoId, VideoReference, Violation,
};
