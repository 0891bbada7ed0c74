use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{link_representatives, source, CollabError};
use crate::model::{
    normalize_tags, sort_timeline, Annotation, AnnotationId, AnnotationSet, Body, Millis,
    Provenance, ResourceId, SetId, SourceRef, TimeFragment, UserId, VideoId,
};

/// Consolidated annotations get fresh ids `m000001`, `m000002`, ... in
/// timeline order.
pub const MERGED_ID_PREFIX: &str = "m";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MergePolicy {
    Union,
    Majority { quorum: usize },
    Manual { selected: Vec<SourceRef> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    #[serde(rename = "not subject to majority")]
    NotSubjectToMajority,
    #[serde(rename = "below quorum")]
    BelowQuorum,
    #[serde(rename = "surplus link")]
    SurplusLink,
    #[serde(rename = "not selected")]
    NotSelected,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub set_id: SetId,
    pub annotation_id: AnnotationId,
    pub reason: DropReason,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeResult {
    pub merged: Vec<Annotation>,
    pub provenance: Provenance,
    pub dropped: Vec<Dropped>,
}

impl MergeResult {
    /// Packages the consolidated timeline as a new set carrying its
    /// provenance. The revision is left at 0; callers that log the creation
    /// set it.
    pub fn into_set(
        self,
        id: impl Into<SetId>,
        video_id: impl Into<VideoId>,
        owner: impl Into<UserId>,
    ) -> AnnotationSet {
        let mut set = AnnotationSet::new(id, video_id, owner);
        set.annotations = self.merged;
        set.provenance = Some(self.provenance);
        set
    }
}

/// Component-wise median; an even count takes the mean of the two middle
/// values rounded half-up. `None` for an empty input.
pub fn median_fragment(fragments: &[TimeFragment]) -> Option<TimeFragment> {
    if fragments.is_empty() {
        return None;
    }
    let begin = median(fragments.iter().map(|f| f.begin_ms).collect());
    let end = median(fragments.iter().map(|f| f.end_ms).collect());
    Some(TimeFragment::new(begin, end.max(begin)))
}

fn median(mut values: Vec<Millis>) -> Millis {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2] + 1).div_euclid(2)
    }
}

struct Candidate {
    annotation: Annotation,
    sources: Vec<SourceRef>,
}

/// Consolidates several sets over one video into a single timeline.
pub fn merge(sets: &[AnnotationSet], policy: &MergePolicy) -> Result<MergeResult, CollabError> {
    let first = sets.first().ok_or(CollabError::EmptyInput)?;
    if let Some(other) = sets.iter().find(|s| s.video_id != first.video_id) {
        return Err(CollabError::VideoMismatch(
            first.video_id.clone(),
            other.video_id.clone(),
        ));
    }
    let (candidates, dropped) = match policy {
        MergePolicy::Union => (union(sets), Vec::new()),
        MergePolicy::Majority { quorum } => majority(sets, *quorum)?,
        MergePolicy::Manual { selected } => manual(sets, selected)?,
    };
    Ok(finish(candidates, dropped))
}

fn union(sets: &[AnnotationSet]) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = Vec::new();
    let mut index: HashMap<(Body, TimeFragment), usize> = HashMap::new();
    for set in sets {
        for a in sort_timeline(&set.annotations) {
            let key = (a.body.clone(), a.fragment);
            match index.get(&key) {
                Some(&i) => {
                    let c = &mut out[i];
                    c.sources.push(source(&set.id, &a));
                    if a.created < c.annotation.created {
                        c.annotation = a;
                    }
                }
                None => {
                    index.insert(key, out.len());
                    out.push(Candidate {
                        sources: vec![source(&set.id, &a)],
                        annotation: a,
                    });
                }
            }
        }
    }
    out
}

fn majority(
    sets: &[AnnotationSet],
    quorum: usize,
) -> Result<(Vec<Candidate>, Vec<Dropped>), CollabError> {
    if quorum == 0 {
        return Err(CollabError::ZeroQuorum);
    }
    if quorum > sets.len() {
        return Err(CollabError::QuorumTooLarge {
            quorum,
            sets: sets.len(),
        });
    }
    let mut dropped = Vec::new();
    let mut by_resource: BTreeMap<ResourceId, Vec<(&SetId, &Annotation)>> = BTreeMap::new();
    let mut reps_per_set = Vec::with_capacity(sets.len());
    for set in sets {
        let (reps, surplus) = link_representatives(&set.annotations);
        for (rid, a) in &reps {
            by_resource
                .entry(rid.clone())
                .or_default()
                .push((&set.id, *a));
        }
        let surplus: HashSet<&AnnotationId> = surplus.iter().map(|a| &a.id).collect();
        reps_per_set.push((set, surplus));
    }

    let mut kept: HashSet<&ResourceId> = HashSet::new();
    let mut out = Vec::new();
    for (rid, reps) in &by_resource {
        if reps.len() < quorum {
            continue;
        }
        kept.insert(rid);
        let fragments: Vec<TimeFragment> = reps.iter().map(|(_, a)| a.fragment).collect();
        let fragment = median_fragment(&fragments).expect("at least quorum >= 1 fragments");
        let earliest = reps
            .iter()
            .min_by_key(|(_, a)| a.created)
            .expect("non-empty")
            .1;
        let mut tags: Vec<&String> = reps.iter().flat_map(|(_, a)| &a.tags).collect();
        tags.sort();
        let mut sources: Vec<SourceRef> = reps.iter().map(|(s, a)| source(s, a)).collect();
        sources.sort();
        out.push(Candidate {
            annotation: Annotation {
                id: AnnotationId::new(""),
                author: earliest.author.clone(),
                created: earliest.created,
                modified: reps
                    .iter()
                    .map(|(_, a)| a.modified)
                    .max()
                    .expect("non-empty"),
                fragment,
                body: Body::ResourceLink {
                    resource_id: rid.clone(),
                    note: None,
                },
                tags: normalize_tags(tags),
            },
            sources,
        });
    }

    for (set, surplus) in reps_per_set {
        for a in sort_timeline(&set.annotations) {
            let reason = match a.body.resource_id() {
                None => DropReason::NotSubjectToMajority,
                Some(_) if surplus.contains(&a.id) => DropReason::SurplusLink,
                Some(rid) if !kept.contains(rid) => DropReason::BelowQuorum,
                Some(_) => continue,
            };
            dropped.push(Dropped {
                set_id: set.id.clone(),
                annotation_id: a.id.clone(),
                reason,
            });
        }
    }
    Ok((out, dropped))
}

fn manual(
    sets: &[AnnotationSet],
    selected: &[SourceRef],
) -> Result<(Vec<Candidate>, Vec<Dropped>), CollabError> {
    let mut by_id: HashMap<&SetId, &AnnotationSet> = HashMap::new();
    for set in sets {
        if by_id.insert(&set.id, set).is_some() {
            return Err(CollabError::AmbiguousSetId(set.id.clone()));
        }
    }
    let mut chosen: HashSet<&SourceRef> = HashSet::new();
    let mut out = Vec::new();
    for sel in selected {
        let a = by_id
            .get(&sel.set_id)
            .and_then(|s| s.get(&sel.annotation_id))
            .ok_or_else(|| {
                CollabError::UnknownSelection(sel.set_id.clone(), sel.annotation_id.clone())
            })?;
        if !chosen.insert(sel) {
            return Err(CollabError::DuplicateSelection(
                sel.set_id.clone(),
                sel.annotation_id.clone(),
            ));
        }
        out.push(Candidate {
            annotation: a.clone(),
            sources: vec![sel.clone()],
        });
    }
    let mut dropped = Vec::new();
    for set in sets {
        for a in sort_timeline(&set.annotations) {
            if !chosen.contains(&source(&set.id, &a)) {
                dropped.push(Dropped {
                    set_id: set.id.clone(),
                    annotation_id: a.id,
                    reason: DropReason::NotSelected,
                });
            }
        }
    }
    Ok((out, dropped))
}

/// Orders candidates by content (not by input position) and mints ids.
fn finish(mut candidates: Vec<Candidate>, dropped: Vec<Dropped>) -> MergeResult {
    candidates.sort_by_cached_key(|c| {
        let a = &c.annotation;
        (
            a.fragment.begin_ms,
            a.fragment.end_ms,
            a.created,
            serde_json::to_string(&a.body).expect("body serializes"),
            a.tags.clone(),
            a.author.clone(),
            c.sources.first().cloned(),
        )
    });
    let mut result = MergeResult {
        dropped,
        ..MergeResult::default()
    };
    for (i, mut c) in candidates.into_iter().enumerate() {
        let id = AnnotationId::new(format!("{MERGED_ID_PREFIX}{:06}", i + 1));
        c.annotation.id = id.clone();
        c.sources.sort();
        result.provenance.insert(id, c.sources);
        result.merged.push(c.annotation);
    }
    result
}
