//! Working with several annotation sets at once: side-by-side diffing,
//! consolidation into one timeline, grading against a teacher key, and the
//! per-set revision log.

mod diff;
mod grade;
mod merge;
mod revision;

pub use diff::{diff_pair, Agreement, DiffReport, Disagreement, DEFAULT_TOLERANCE_MS};
pub use grade::{grade, GradeReport, Misplaced};
pub use merge::{
    median_fragment, merge, DropReason, Dropped, MergePolicy, MergeResult, MERGED_ID_PREFIX,
};
pub use revision::{
    diff_entries, replay, EntryDraft, RevisionEntry, RevisionError, RevisionLog, RevisionOp,
    RevisionState,
};

use std::collections::BTreeMap;

use crate::model::{Annotation, AnnotationId, Millis, ResourceId, SetId, SourceRef, VideoId};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CollabError {
    #[error("sets reference different videos ({0} vs {1})")]
    VideoMismatch(VideoId, VideoId),
    #[error("tolerance must be >= 0, got {0}")]
    NegativeTolerance(Millis),
    #[error("merge needs at least one input set")]
    EmptyInput,
    #[error("quorum must be >= 1")]
    ZeroQuorum,
    #[error("quorum {quorum} exceeds the number of input sets ({sets})")]
    QuorumTooLarge { quorum: usize, sets: usize },
    #[error("selection refers to unknown annotation {0}/{1}")]
    UnknownSelection(SetId, AnnotationId),
    #[error("annotation {0}/{1} selected more than once")]
    DuplicateSelection(SetId, AnnotationId),
    #[error("set id {0} appears more than once; manual selection would be ambiguous")]
    AmbiguousSetId(SetId),
    #[error("grading key may only contain resource links; {0} is not one")]
    KeyHasNonLink(AnnotationId),
}

/// Per resource, the link with the earliest begin (timeline order breaks
/// ties). The remaining links to the same resource are returned separately.
pub(crate) fn link_representatives(
    annotations: &[Annotation],
) -> (BTreeMap<ResourceId, &Annotation>, Vec<&Annotation>) {
    let mut reps: BTreeMap<ResourceId, &Annotation> = BTreeMap::new();
    let mut surplus = Vec::new();
    let mut links: Vec<&Annotation> = annotations
        .iter()
        .filter(|a| a.is_resource_link())
        .collect();
    links.sort_by(|a, b| a.timeline_key().cmp(&b.timeline_key()));
    for a in links {
        let rid = a.body.resource_id().expect("filtered to links");
        if reps.contains_key(rid) {
            surplus.push(a);
        } else {
            reps.insert(rid.clone(), a);
        }
    }
    (reps, surplus)
}

pub(crate) fn source(set: &SetId, a: &Annotation) -> SourceRef {
    SourceRef {
        set_id: set.clone(),
        annotation_id: a.id.clone(),
    }
}
