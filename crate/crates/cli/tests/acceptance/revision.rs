use std::collections::BTreeMap;
use std::time::Instant;

use hyvid_core::collab::{EntryDraft, RevisionLog};
use hyvid_core::model::{
    sort_timeline, validate_set_structure, Annotation, AnnotationId, AnnotationSet, Resource,
    ResourceKind, SetId, Timestamp, VideoReference,
};
use hyvid_store::{CrashPoint, Store, StoreError, StoreOptions};
use rand::seq::IteratorRandom;
use rand::Rng as _;

use crate::gen::{self, Rng, RESOURCES};
use crate::Outcome;

const DURATION: i64 = 3_600_000;

fn video() -> VideoReference {
    VideoReference {
        id: "v".into(),
        uri: "https://example.org/v.mp4".into(),
        duration_ms: DURATION,
        title: "V".into(),
    }
}

struct Generated {
    set_id: SetId,
    drafts: Vec<EntryDraft>,
    log: RevisionLog,
    /// Expected annotations after k entries, in timeline order.
    snapshots: Vec<Vec<Annotation>>,
}

fn generate(rng: &mut Rng, n: usize) -> Result<Generated, String> {
    let set_id = SetId::new(format!("log{n}"));
    let len = rng.random_range(0..=200);
    let mut state: BTreeMap<AnnotationId, Annotation> = BTreeMap::new();
    let mut removed: Vec<AnnotationId> = Vec::new();
    let mut log = RevisionLog::new(set_id.clone());
    let mut drafts = Vec::new();
    let mut snapshots = vec![Vec::new()];
    let mut fresh = 0;
    for _ in 0..len {
        let at = gen::timestamp(rng);
        let actor = "editor";
        let roll = rng.random_range(0..100);
        let draft = if state.is_empty() || roll < 45 {
            let id = match removed.pop() {
                Some(id) if rng.random_bool(0.3) => id,
                _ => {
                    fresh += 1;
                    AnnotationId::new(format!("n{fresh}"))
                }
            };
            let a = gen::annotation(rng, id.to_string(), DURATION, RESOURCES);
            state.insert(id, a.clone());
            EntryDraft::add(actor, at, a)
        } else if roll < 80 {
            let id = state.keys().choose(rng).unwrap().clone();
            let before = state[&id].clone();
            let mut after = gen::annotation(rng, id.to_string(), DURATION, RESOURCES);
            after.created = before.created;
            after.modified = Timestamp::from_unix_millis(
                before.created.unix_millis() + rng.random_range(0..1000),
            );
            state.insert(id, after.clone());
            EntryDraft::update(actor, at, before, after)
        } else {
            let id = state.keys().choose(rng).unwrap().clone();
            let before = state.remove(&id).unwrap();
            removed.push(id);
            EntryDraft::remove(actor, at, before)
        };
        log = log
            .append(draft.clone())
            .map_err(|e| format!("log {n}: append rejected a valid entry: {e}"))?;
        drafts.push(draft);
        snapshots.push(sort_timeline(&state.values().cloned().collect::<Vec<_>>()));
    }
    Ok(Generated {
        set_id,
        drafts,
        log,
        snapshots,
    })
}

fn check_prefixes(g: &Generated, video: &VideoReference) -> Result<(), String> {
    for (k, expected) in g.snapshots.iter().enumerate() {
        let replayed = g
            .log
            .replay(k as u64)
            .map_err(|e| format!("{}: replay({k}): {e}", g.set_id))?;
        if &replayed != expected {
            return Err(format!(
                "{}: replay({k}) differs from the applied state",
                g.set_id
            ));
        }
        let set = AnnotationSet {
            annotations: replayed,
            ..AnnotationSet::new(g.set_id.clone(), "v", "editor")
        };
        if let Some(v) = validate_set_structure(&set, video).first() {
            return Err(format!("{}: replay({k}) is not a valid set: {v}", g.set_id));
        }
    }
    Ok(())
}

fn check_store(store: &Store, expected: &BTreeMap<SetId, AnnotationSet>) -> Result<(), String> {
    if store.is_read_only() {
        return Err(format!(
            "store reopened read-only: {:?}",
            store.corruption()
        ));
    }
    for (id, want) in expected {
        let stored = store.get_stored(id).map_err(|e| format!("{id}: {e}"))?;
        if &stored.set != want {
            return Err(format!("{id}: stored set differs from the last commit"));
        }
        if stored.log.replay_all() != stored.set.annotations
            || stored.set.revision != stored.log.len()
        {
            return Err(format!("{id}: replay invariant broken"));
        }
    }
    Ok(())
}

pub fn a5_replay() -> Outcome {
    let start = Instant::now();
    let mut rng = gen::rng(0xA5);
    let video = video();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = Store::open(dir.path()).map_err(|e| e.to_string())?;
    store.put_video(video.clone()).map_err(|e| e.to_string())?;
    for rid in RESOURCES {
        let r = Resource {
            id: (*rid).into(),
            title: rid.to_string(),
            kind: ResourceKind::Text,
            url: format!("https://example.org/{rid}"),
            description: None,
        };
        store
            .put_resource(&video.id, r)
            .map_err(|e| e.to_string())?;
    }

    let mut committed = BTreeMap::new();
    let mut entries = 0usize;
    for n in 0..500 {
        let g = generate(&mut rng, n)?;
        check_prefixes(&g, &video)?;
        entries += g.drafts.len();
        let annotations = g.snapshots.last().unwrap().clone();
        let set = AnnotationSet {
            annotations,
            ..AnnotationSet::new(g.set_id.clone(), "v", "editor")
        };
        let rev = store
            .put_set(set, 0, g.drafts.clone())
            .map_err(|e| format!("{}: put: {e}", g.set_id))?;
        let stored = store.get_stored(&g.set_id).map_err(|e| e.to_string())?;
        if rev != g.log.len() || stored.log != g.log || stored.set.annotations != g.log.replay_all()
        {
            return Err(format!(
                "{}: stored set or log differs from the generated log",
                g.set_id
            ));
        }
        committed.insert(g.set_id.clone(), stored.set.clone());
    }
    drop(store);

    // interrupt writes between temp-write and rename, then reopen
    let mut crashes = 0;
    for (i, point) in [CrashPoint::AfterLogTempWrite, CrashPoint::BeforeSetRename]
        .into_iter()
        .cycle()
        .take(10)
        .enumerate()
    {
        let crashing = Store::open_with(
            dir.path(),
            StoreOptions {
                crash_at: Some(point),
            },
        )
        .map_err(|e| e.to_string())?;
        let id = SetId::new(format!("log{}", i * 50));
        let set = crashing.get_set(&id).map_err(|e| e.to_string())?;
        let extra = gen::annotation(&mut rng, format!("crash{i}"), DURATION, RESOURCES);
        let draft = EntryDraft::add("editor", Timestamp::from_unix_millis(0), extra.clone());
        let mut annotations = set.annotations.clone();
        annotations.push(extra);
        let revision = set.revision;
        match crashing.put_set(AnnotationSet { annotations, ..set }, revision, vec![draft]) {
            Err(StoreError::InjectedCrash) => crashes += 1,
            other => return Err(format!("expected an injected crash, got {other:?}")),
        }
        drop(crashing);
        let reopened = Store::open(dir.path()).map_err(|e| e.to_string())?;
        check_store(&reopened, &committed)
            .map_err(|e| format!("after crash {i} ({point:?}): {e}"))?;
    }
    Ok(format!(
        "500 logs ({entries} entries): every prefix replays to a valid set, full replay equals stored; \
         {crashes} interrupted writes recovered to the last commit ({:.2} s)",
        start.elapsed().as_secs_f64()
    ))
}
