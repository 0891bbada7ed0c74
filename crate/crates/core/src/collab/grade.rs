use serde::{Deserialize, Serialize};

use super::{link_representatives, CollabError};
use crate::model::{AnnotationSet, Millis, ResourceId};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Misplaced {
    pub resource_id: ResourceId,
    /// Learner begin minus key begin.
    pub delta_begin_ms: Millis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradeReport {
    pub total: usize,
    pub correct: usize,
    pub missing: Vec<ResourceId>,
    pub misplaced: Vec<Misplaced>,
    pub score: f64,
}

/// Scores a learner's resource placements against a teacher key. A resource
/// is correct when the learner's earliest link to it begins within
/// `tolerance_ms` of the key's; ends are not compared.
pub fn grade(
    learner: &AnnotationSet,
    key: &AnnotationSet,
    tolerance_ms: Millis,
) -> Result<GradeReport, CollabError> {
    if learner.video_id != key.video_id {
        return Err(CollabError::VideoMismatch(
            key.video_id.clone(),
            learner.video_id.clone(),
        ));
    }
    if tolerance_ms < 0 {
        return Err(CollabError::NegativeTolerance(tolerance_ms));
    }
    if let Some(a) = key.annotations.iter().find(|a| !a.is_resource_link()) {
        return Err(CollabError::KeyHasNonLink(a.id.clone()));
    }
    let (expected, _) = link_representatives(&key.annotations);
    let (placed, _) = link_representatives(&learner.annotations);

    let mut report = GradeReport {
        total: expected.len(),
        correct: 0,
        missing: vec![],
        misplaced: vec![],
        score: 1.0,
    };
    for (rid, k) in &expected {
        match placed.get(rid) {
            None => report.missing.push(rid.clone()),
            Some(l) => {
                let delta_begin_ms = l.fragment.begin_ms - k.fragment.begin_ms;
                if delta_begin_ms.abs() <= tolerance_ms {
                    report.correct += 1;
                } else {
                    report.misplaced.push(Misplaced {
                        resource_id: rid.clone(),
                        delta_begin_ms,
                    });
                }
            }
        }
    }
    if report.total > 0 {
        report.score = report.correct as f64 / report.total as f64;
    }
    Ok(report)
}
