use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{sort_timeline, Annotation, AnnotationId, SetId, Timestamp, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionOp {
    Add,
    Update,
    Remove,
}

/// A change before it has been given a place in a log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDraft {
    pub actor: UserId,
    pub at: Timestamp,
    pub op: RevisionOp,
    pub annotation_id: AnnotationId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before: Option<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<Annotation>,
}

impl EntryDraft {
    pub fn add(actor: impl Into<UserId>, at: Timestamp, after: Annotation) -> Self {
        Self {
            actor: actor.into(),
            at,
            op: RevisionOp::Add,
            annotation_id: after.id.clone(),
            before: None,
            after: Some(after),
        }
    }

    pub fn update(
        actor: impl Into<UserId>,
        at: Timestamp,
        before: Annotation,
        after: Annotation,
    ) -> Self {
        Self {
            actor: actor.into(),
            at,
            op: RevisionOp::Update,
            annotation_id: after.id.clone(),
            before: Some(before),
            after: Some(after),
        }
    }

    pub fn remove(actor: impl Into<UserId>, at: Timestamp, before: Annotation) -> Self {
        Self {
            actor: actor.into(),
            at,
            op: RevisionOp::Remove,
            annotation_id: before.id.clone(),
            before: Some(before),
            after: None,
        }
    }

    fn check_shape(&self) -> Result<(), RevisionError> {
        let id_ok = |a: &Option<Annotation>| a.as_ref().is_none_or(|a| a.id == self.annotation_id);
        let shape_ok = match self.op {
            RevisionOp::Add => self.before.is_none() && self.after.is_some(),
            RevisionOp::Update => self.before.is_some() && self.after.is_some(),
            RevisionOp::Remove => self.before.is_some() && self.after.is_none(),
        };
        if !shape_ok {
            return Err(RevisionError::Shape(
                self.op,
                "before/after presence does not match op",
            ));
        }
        if !id_ok(&self.before) || !id_ok(&self.after) {
            return Err(RevisionError::Shape(
                self.op,
                "before/after id differs from annotation_id",
            ));
        }
        Ok(())
    }

    pub fn into_entry(self, seq: u64) -> RevisionEntry {
        RevisionEntry {
            seq,
            actor: self.actor,
            at: self.at,
            op: self.op,
            annotation_id: self.annotation_id,
            before: self.before,
            after: self.after,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevisionEntry {
    pub seq: u64,
    pub actor: UserId,
    pub at: Timestamp,
    pub op: RevisionOp,
    pub annotation_id: AnnotationId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub before: Option<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<Annotation>,
}

impl RevisionEntry {
    pub fn draft(&self) -> EntryDraft {
        EntryDraft {
            actor: self.actor.clone(),
            at: self.at,
            op: self.op,
            annotation_id: self.annotation_id.clone(),
            before: self.before.clone(),
            after: self.after.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RevisionError {
    #[error("malformed {0:?} entry: {1}")]
    Shape(RevisionOp, &'static str),
    #[error("no annotation {0} to update or remove")]
    UnknownTarget(AnnotationId),
    #[error("annotation {0} already exists")]
    DuplicateId(AnnotationId),
    #[error("entry for {0} does not match the current annotation")]
    StaleBefore(AnnotationId),
    #[error("replay position {upto} out of range 0..={len}")]
    OutOfRange { upto: u64, len: u64 },
    #[error("entry seq {found} where {expected} was expected")]
    SeqGap { expected: u64, found: u64 },
}

/// Annotations reconstructed by folding entries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RevisionState {
    annotations: BTreeMap<AnnotationId, Annotation>,
}

impl RevisionState {
    pub fn from_annotations(annotations: &[Annotation]) -> Self {
        Self {
            annotations: annotations
                .iter()
                .map(|a| (a.id.clone(), a.clone()))
                .collect(),
        }
    }

    pub fn get(&self, id: &AnnotationId) -> Option<&Annotation> {
        self.annotations.get(id)
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    /// Checks `entry` against the current state without applying it.
    pub fn check(&self, entry: &EntryDraft) -> Result<(), RevisionError> {
        entry.check_shape()?;
        let current = self.annotations.get(&entry.annotation_id);
        match (entry.op, current) {
            (RevisionOp::Add, Some(_)) => {
                Err(RevisionError::DuplicateId(entry.annotation_id.clone()))
            }
            (RevisionOp::Add, None) => Ok(()),
            (_, None) => Err(RevisionError::UnknownTarget(entry.annotation_id.clone())),
            (_, Some(cur)) if entry.before.as_ref() != Some(cur) => {
                Err(RevisionError::StaleBefore(entry.annotation_id.clone()))
            }
            (_, Some(_)) => Ok(()),
        }
    }

    pub fn apply(&mut self, entry: &EntryDraft) -> Result<(), RevisionError> {
        self.check(entry)?;
        match &entry.after {
            Some(after) => {
                self.annotations
                    .insert(entry.annotation_id.clone(), after.clone());
            }
            None => {
                self.annotations.remove(&entry.annotation_id);
            }
        }
        Ok(())
    }

    fn apply_entry(&mut self, entry: &RevisionEntry) {
        match &entry.after {
            Some(after) => self
                .annotations
                .insert(entry.annotation_id.clone(), after.clone()),
            None => self.annotations.remove(&entry.annotation_id),
        };
    }

    /// Annotations in timeline order.
    pub fn annotations(&self) -> Vec<Annotation> {
        let all: Vec<Annotation> = self.annotations.values().cloned().collect();
        sort_timeline(&all)
    }
}

/// Append-only history of one set. Appending returns a new log; entries are
/// never rewritten.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevisionLog {
    set_id: SetId,
    entries: Vec<RevisionEntry>,
}

impl RevisionLog {
    pub fn new(set_id: impl Into<SetId>) -> Self {
        Self {
            set_id: set_id.into(),
            entries: Vec::new(),
        }
    }

    /// Rebuilds a log from stored entries, checking numbering and that every
    /// entry applies cleanly to the replay of its predecessors.
    pub fn from_entries(
        set_id: impl Into<SetId>,
        entries: Vec<RevisionEntry>,
    ) -> Result<Self, RevisionError> {
        let mut state = RevisionState::default();
        for (k, e) in entries.iter().enumerate() {
            let expected = k as u64 + 1;
            if e.seq != expected {
                return Err(RevisionError::SeqGap {
                    expected,
                    found: e.seq,
                });
            }
            state.apply(&e.draft())?;
        }
        Ok(Self {
            set_id: set_id.into(),
            entries,
        })
    }

    pub fn set_id(&self) -> &SetId {
        &self.set_id
    }

    pub fn entries(&self) -> &[RevisionEntry] {
        &self.entries
    }

    pub fn len(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// New log with `draft` appended as entry `len + 1`.
    pub fn append(&self, draft: EntryDraft) -> Result<RevisionLog, RevisionError> {
        self.clone().into_appended(draft)
    }

    /// Like [`append`](Self::append) but consumes `self`, avoiding a copy.
    pub fn into_appended(self, draft: EntryDraft) -> Result<RevisionLog, RevisionError> {
        let state = self.state_at(self.len())?;
        self.into_appended_from(&state, draft)
    }

    fn into_appended_from(
        mut self,
        state: &RevisionState,
        draft: EntryDraft,
    ) -> Result<RevisionLog, RevisionError> {
        state.check(&draft)?;
        let seq = self.len() + 1;
        self.entries.push(draft.into_entry(seq));
        Ok(self)
    }

    /// Appends several drafts atomically: either all apply or the log is
    /// returned unchanged inside the error.
    pub fn append_all(
        &self,
        drafts: impl IntoIterator<Item = EntryDraft>,
    ) -> Result<RevisionLog, RevisionError> {
        let mut state = self.state_at(self.len())?;
        let mut log = self.clone();
        for d in drafts {
            state.apply(&d)?;
            let seq = log.len() + 1;
            log.entries.push(d.into_entry(seq));
        }
        Ok(log)
    }

    pub fn state_at(&self, upto: u64) -> Result<RevisionState, RevisionError> {
        if upto > self.len() {
            return Err(RevisionError::OutOfRange {
                upto,
                len: self.len(),
            });
        }
        let mut state = RevisionState::default();
        for e in &self.entries[..upto as usize] {
            state.apply_entry(e);
        }
        Ok(state)
    }

    /// Annotations after the first `upto` entries, in timeline order.
    pub fn replay(&self, upto: u64) -> Result<Vec<Annotation>, RevisionError> {
        Ok(self.state_at(upto)?.annotations())
    }

    pub fn replay_all(&self) -> Vec<Annotation> {
        self.state_at(self.len())
            .expect("full length in range")
            .annotations()
    }

    /// Drops entries past `len`. Only used to discard an uncommitted tail
    /// during crash recovery.
    pub fn truncated(&self, len: u64) -> RevisionLog {
        let mut log = self.clone();
        log.entries.truncate(len as usize);
        log
    }
}

/// Free-function form of [`RevisionLog::replay`].
pub fn replay(log: &RevisionLog, upto: u64) -> Result<Vec<Annotation>, RevisionError> {
    log.replay(upto)
}

/// Entries turning `before` into `after`: removals, then updates, then
/// additions, each group in id order.
pub fn diff_entries(
    before: &[Annotation],
    after: &[Annotation],
    actor: &UserId,
    at: Timestamp,
) -> Vec<EntryDraft> {
    let old: BTreeMap<&AnnotationId, &Annotation> = before.iter().map(|a| (&a.id, a)).collect();
    let new: BTreeMap<&AnnotationId, &Annotation> = after.iter().map(|a| (&a.id, a)).collect();
    let mut out = Vec::new();
    for (id, a) in &old {
        if !new.contains_key(id) {
            out.push(EntryDraft::remove(actor.clone(), at, (*a).clone()));
        }
    }
    for (id, a) in &new {
        if let Some(prev) = old.get(id) {
            if prev != a {
                out.push(EntryDraft::update(
                    actor.clone(),
                    at,
                    (*prev).clone(),
                    (*a).clone(),
                ));
            }
        }
    }
    for (id, a) in &new {
        if !old.contains_key(id) {
            out.push(EntryDraft::add(actor.clone(), at, (*a).clone()));
        }
    }
    out
}
