use serde::{Deserialize, Serialize};

use super::{link_representatives, CollabError};
use crate::model::{sort_timeline, Annotation, AnnotationSet, Millis, ResourceId};

/// Default begin/end tolerance when matching placements of one resource.
pub const DEFAULT_TOLERANCE_MS: Millis = 2000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agreement {
    pub resource_id: ResourceId,
    pub a: Annotation,
    pub b: Annotation,
}

/// Deltas are `b - a`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub resource_id: ResourceId,
    pub a: Annotation,
    pub b: Annotation,
    pub delta_begin_ms: Millis,
    pub delta_end_ms: Millis,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffReport {
    pub agreements: Vec<Agreement>,
    pub disagreements: Vec<Disagreement>,
    pub unique_a: Vec<Annotation>,
    pub unique_b: Vec<Annotation>,
}

/// Aligns two sets over the same video. Only resource links are paired:
/// one representative per resource and side, compared on begin and end.
/// Everything else lands in the uniques of its side.
pub fn diff_pair(
    a: &AnnotationSet,
    b: &AnnotationSet,
    tolerance_ms: Millis,
) -> Result<DiffReport, CollabError> {
    if a.video_id != b.video_id {
        return Err(CollabError::VideoMismatch(
            a.video_id.clone(),
            b.video_id.clone(),
        ));
    }
    if tolerance_ms < 0 {
        return Err(CollabError::NegativeTolerance(tolerance_ms));
    }
    let (reps_a, _) = link_representatives(&a.annotations);
    let (reps_b, _) = link_representatives(&b.annotations);

    let mut report = DiffReport::default();
    let mut paired_a = Vec::new();
    let mut paired_b = Vec::new();
    for (rid, x) in &reps_a {
        let Some(y) = reps_b.get(rid) else { continue };
        paired_a.push(&x.id);
        paired_b.push(&y.id);
        let delta_begin_ms = y.fragment.begin_ms - x.fragment.begin_ms;
        let delta_end_ms = y.fragment.end_ms - x.fragment.end_ms;
        if delta_begin_ms.abs() <= tolerance_ms && delta_end_ms.abs() <= tolerance_ms {
            report.agreements.push(Agreement {
                resource_id: rid.clone(),
                a: (*x).clone(),
                b: (*y).clone(),
            });
        } else {
            report.disagreements.push(Disagreement {
                resource_id: rid.clone(),
                a: (*x).clone(),
                b: (*y).clone(),
                delta_begin_ms,
                delta_end_ms,
            });
        }
    }
    report.unique_a = sort_timeline(&a.annotations)
        .into_iter()
        .filter(|x| !paired_a.contains(&&x.id))
        .collect();
    report.unique_b = sort_timeline(&b.annotations)
        .into_iter()
        .filter(|y| !paired_b.contains(&&y.id))
        .collect();
    Ok(report)
}
