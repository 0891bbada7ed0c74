//! Plain-file store for videos, resource catalogs, users, annotation sets and
//! their revision logs.
//!
//! ```text
//! <root>/videos.json
//! <root>/users.json
//! <root>/resources/<video_id>.json
//! <root>/sets/<set_id>.json     canonical set document
//! <root>/logs/<set_id>.json     canonical revision log
//! ```
//!
//! A set write appends to the log first and then replaces the set file; the
//! set file rename is the commit point. At open, a log that runs ahead of its
//! set by an uncommitted tail is cut back; any other disagreement between a
//! set and the replay of its log marks the set corrupt and the store
//! read-only.

mod error;
mod files;
mod user;

pub use error::{Result, StoreError};
pub use user::{Role, User};

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hyvid_core::collab::{EntryDraft, RevisionLog};
use hyvid_core::interchange::{export_log_json, export_set_json, import_log_json, import_set_json};
use hyvid_core::model::{
    sort_timeline, validate_set, AnnotationSet, Resource, ResourceId, SetId, UserId, VideoId,
    VideoReference,
};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use files::{envelope_bytes, read_envelope, write_atomic};

const VIDEOS_FORMAT: &str = "hyvid-videos";
const USERS_FORMAT: &str = "hyvid-users";
const RESOURCES_FORMAT: &str = "hyvid-resources";

#[derive(Serialize, Deserialize)]
struct VideosBody {
    videos: Vec<VideoReference>,
}

#[derive(Serialize, Deserialize)]
struct UsersBody {
    users: Vec<User>,
}

#[derive(Serialize, Deserialize)]
struct ResourcesBody {
    video_id: VideoId,
    resources: Vec<Resource>,
}

/// Where a put stops when a crash is being simulated.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrashPoint {
    /// Log temp file written, nothing renamed.
    AfterLogTempWrite,
    /// Log renamed, set temp file written but not renamed.
    BeforeSetRename,
}

#[derive(Clone, Debug, Default)]
pub struct StoreOptions {
    #[doc(hidden)]
    pub crash_at: Option<CrashPoint>,
}

/// A set whose file and log disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corruption {
    pub set_id: SetId,
    pub reason: String,
}

/// A set together with the log that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredSet {
    pub set: AnnotationSet,
    pub log: RevisionLog,
}

#[derive(Default)]
struct State {
    videos: BTreeMap<VideoId, VideoReference>,
    users: Vec<User>,
    resources: BTreeMap<VideoId, Vec<Resource>>,
    sets: BTreeMap<SetId, Arc<StoredSet>>,
}

pub struct Store {
    root: PathBuf,
    options: StoreOptions,
    state: RwLock<State>,
    /// Serializes writes to one set.
    set_locks: Mutex<HashMap<SetId, Arc<Mutex<()>>>>,
    /// Serializes writes to videos, users and catalogs.
    catalog_lock: Mutex<()>,
    corrupt: Vec<Corruption>,
    recovered: Vec<SetId>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("root", &self.root)
            .field("corrupt", &self.corrupt)
            .finish()
    }
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::open_with(path, StoreOptions::default())
    }

    pub fn open_with(path: impl AsRef<Path>, options: StoreOptions) -> Result<Self> {
        let root = path.as_ref().to_path_buf();
        for dir in [
            root.clone(),
            root.join("resources"),
            root.join("sets"),
            root.join("logs"),
        ] {
            fs::create_dir_all(&dir).map_err(|e| StoreError::io(&dir, e))?;
        }
        for dir in [
            root.clone(),
            root.join("resources"),
            root.join("sets"),
            root.join("logs"),
        ] {
            files::remove_stale_tmp(&dir)?;
        }

        let mut state = State::default();
        if let Some(body) = read_envelope::<VideosBody>(&root.join("videos.json"), VIDEOS_FORMAT)? {
            state.videos = body.videos.into_iter().map(|v| (v.id.clone(), v)).collect();
        }
        if let Some(body) = read_envelope::<UsersBody>(&root.join("users.json"), USERS_FORMAT)? {
            state.users = body.users;
        }
        for path in json_files(&root.join("resources"))? {
            if let Some(body) = read_envelope::<ResourcesBody>(&path, RESOURCES_FORMAT)? {
                state.resources.insert(body.video_id, body.resources);
            }
        }

        let mut corrupt = Vec::new();
        let mut recovered = Vec::new();
        for path in json_files(&root.join("sets"))? {
            let bytes = fs::read(&path).map_err(|e| StoreError::io(&path, e))?;
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_owned();
            let mut flag = |reason: String| {
                tracing::warn!(set = %stem, %reason, "set failed the open check");
                corrupt.push(Corruption {
                    set_id: SetId::new(stem.clone()),
                    reason,
                });
            };
            let imported = match import_set_json(&bytes) {
                Ok(i) => i,
                Err(e) => {
                    flag(format!("set file: {e}"));
                    continue;
                }
            };
            let set = imported.set;
            if set.id.as_str() != stem {
                flag(format!("file name does not match set id {}", set.id));
                continue;
            }
            if !state.videos.contains_key(&set.video_id) {
                flag(format!("unknown video {}", set.video_id));
            }
            let log_path = root.join("logs").join(format!("{stem}.json"));
            let log = match fs::read(&log_path) {
                Ok(b) => match import_log_json(&b) {
                    Ok(log) => log,
                    Err(e) => {
                        flag(format!("log file: {e}"));
                        continue;
                    }
                },
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    flag("log file missing".into());
                    continue;
                }
                Err(e) => return Err(StoreError::io(&log_path, e)),
            };
            let log = match check_replay(&set, log) {
                Ok((log, cut)) => {
                    if cut {
                        recovered.push(set.id.clone());
                        tracing::info!(set = %set.id, "discarding uncommitted log tail");
                        write_atomic(&log_path, &export_log_json(&log).expect("log serializes"))?;
                    }
                    log
                }
                Err(reason) => {
                    flag(reason);
                    continue;
                }
            };
            state
                .sets
                .insert(set.id.clone(), Arc::new(StoredSet { set, log }));
        }

        Ok(Self {
            root,
            options,
            state: RwLock::new(state),
            set_locks: Mutex::new(HashMap::new()),
            catalog_lock: Mutex::new(()),
            corrupt,
            recovered,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn is_read_only(&self) -> bool {
        !self.corrupt.is_empty()
    }

    /// Sets that failed the replay check at open.
    pub fn corruption(&self) -> &[Corruption] {
        &self.corrupt
    }

    /// Sets whose log had an uncommitted tail removed at open.
    pub fn recovered(&self) -> &[SetId] {
        &self.recovered
    }

    fn ensure_writable(&self) -> Result<()> {
        if self.is_read_only() {
            Err(StoreError::ReadOnly(self.corrupt.len()))
        } else {
            Ok(())
        }
    }

    // ---- videos ----

    pub fn put_video(&self, video: VideoReference) -> Result<VideoReference> {
        self.ensure_writable()?;
        let violations = video.validate();
        if !violations.is_empty() {
            return Err(StoreError::Validation(violations));
        }
        let _guard = self.catalog_lock.lock();
        let mut videos: Vec<VideoReference> = {
            let state = self.state.read();
            if state.videos.contains_key(&video.id) {
                return Err(StoreError::Duplicate {
                    kind: "video",
                    id: video.id.to_string(),
                });
            }
            state.videos.values().cloned().collect()
        };
        videos.push(video.clone());
        videos.sort_by(|a, b| a.id.cmp(&b.id));
        write_atomic(
            &self.root.join("videos.json"),
            &envelope_bytes(VIDEOS_FORMAT, VideosBody { videos })?,
        )?;
        self.state
            .write()
            .videos
            .insert(video.id.clone(), video.clone());
        Ok(video)
    }

    pub fn get_video(&self, id: &VideoId) -> Result<VideoReference> {
        self.state
            .read()
            .videos
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound {
                kind: "video",
                id: id.to_string(),
            })
    }

    pub fn list_videos(&self) -> Vec<VideoReference> {
        self.state.read().videos.values().cloned().collect()
    }

    // ---- resources ----

    pub fn put_resource(&self, video_id: &VideoId, resource: Resource) -> Result<Resource> {
        self.ensure_writable()?;
        let violations = resource.validate();
        if !violations.is_empty() {
            return Err(StoreError::Validation(violations));
        }
        let _guard = self.catalog_lock.lock();
        let mut resources = {
            let state = self.state.read();
            if !state.videos.contains_key(video_id) {
                return Err(StoreError::NotFound {
                    kind: "video",
                    id: video_id.to_string(),
                });
            }
            let existing = state.resources.get(video_id).cloned().unwrap_or_default();
            if existing.iter().any(|r| r.id == resource.id) {
                return Err(StoreError::Duplicate {
                    kind: "resource",
                    id: resource.id.to_string(),
                });
            }
            existing
        };
        resources.push(resource.clone());
        resources.sort_by(|a, b| a.id.cmp(&b.id));
        let path = self.root.join("resources").join(format!("{video_id}.json"));
        let body = ResourcesBody {
            video_id: video_id.clone(),
            resources: resources.clone(),
        };
        write_atomic(&path, &envelope_bytes(RESOURCES_FORMAT, body)?)?;
        self.state
            .write()
            .resources
            .insert(video_id.clone(), resources);
        Ok(resource)
    }

    pub fn list_resources(&self, video_id: &VideoId) -> Result<Vec<Resource>> {
        let state = self.state.read();
        if !state.videos.contains_key(video_id) {
            return Err(StoreError::NotFound {
                kind: "video",
                id: video_id.to_string(),
            });
        }
        Ok(state.resources.get(video_id).cloned().unwrap_or_default())
    }

    pub fn get_resource(&self, video_id: &VideoId, id: &ResourceId) -> Result<Resource> {
        self.list_resources(video_id)?
            .into_iter()
            .find(|r| &r.id == id)
            .ok_or_else(|| StoreError::NotFound {
                kind: "resource",
                id: id.to_string(),
            })
    }

    // ---- users ----

    pub fn put_user(&self, user: User) -> Result<User> {
        self.ensure_writable()?;
        if !user.id.is_well_formed() {
            return Err(StoreError::Validation(vec![
                hyvid_core::model::Violation::new(
                    "id",
                    hyvid_core::model::ViolationKind::MalformedId(user.id.to_string()),
                ),
            ]));
        }
        let _guard = self.catalog_lock.lock();
        let mut users = self.state.read().users.clone();
        if users.iter().any(|u| u.id == user.id) {
            return Err(StoreError::Duplicate {
                kind: "user",
                id: user.id.to_string(),
            });
        }
        if user.token.is_empty() || users.iter().any(|u| u.token == user.token) {
            return Err(StoreError::Duplicate {
                kind: "token of user",
                id: user.id.to_string(),
            });
        }
        users.push(user.clone());
        users.sort_by(|a, b| a.id.cmp(&b.id));
        write_atomic(
            &self.root.join("users.json"),
            &envelope_bytes(
                USERS_FORMAT,
                UsersBody {
                    users: users.clone(),
                },
            )?,
        )?;
        self.state.write().users = users;
        Ok(user)
    }

    pub fn get_user(&self, id: &UserId) -> Result<User> {
        self.state
            .read()
            .users
            .iter()
            .find(|u| &u.id == id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound {
                kind: "user",
                id: id.to_string(),
            })
    }

    /// Users ordered by id.
    pub fn list_users(&self) -> Vec<User> {
        self.state.read().users.clone()
    }

    pub fn authenticate(&self, token: &str) -> Result<User> {
        if token.is_empty() {
            return Err(StoreError::Unauthenticated);
        }
        self.state
            .read()
            .users
            .iter()
            .find(|u| u.token == token)
            .cloned()
            .ok_or(StoreError::Unauthenticated)
    }

    // ---- sets ----

    pub fn get_set(&self, id: &SetId) -> Result<AnnotationSet> {
        Ok(self.get_stored(id)?.set.clone())
    }

    pub fn get_log(&self, id: &SetId) -> Result<RevisionLog> {
        Ok(self.get_stored(id)?.log.clone())
    }

    pub fn get_stored(&self, id: &SetId) -> Result<Arc<StoredSet>> {
        self.state
            .read()
            .sets
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound {
                kind: "set",
                id: id.to_string(),
            })
    }

    /// Sets over `video_id`, ordered by id.
    pub fn list_sets(&self, video_id: &VideoId) -> Vec<AnnotationSet> {
        self.state
            .read()
            .sets
            .values()
            .filter(|s| &s.set.video_id == video_id)
            .map(|s| s.set.clone())
            .collect()
    }

    /// Canonical JSON of a stored set, as written to disk.
    pub fn set_json(&self, id: &SetId) -> Result<Vec<u8>> {
        let set = self.get_set(id)?;
        let video = self.get_video(&set.video_id)?;
        export_set_json(&set, &video).map_err(|e| StoreError::Unreadable {
            path: self.set_path(id),
            message: e.to_string(),
        })
    }

    fn set_path(&self, id: &SetId) -> PathBuf {
        self.root.join("sets").join(format!("{id}.json"))
    }

    fn log_path(&self, id: &SetId) -> PathBuf {
        self.root.join("logs").join(format!("{id}.json"))
    }

    fn lock_for(&self, id: &SetId) -> Arc<Mutex<()>> {
        self.set_locks.lock().entry(id.clone()).or_default().clone()
    }

    /// Creates an empty set. Fails if the id is taken.
    pub fn create_set(&self, id: SetId, video_id: VideoId, owner: UserId) -> Result<AnnotationSet> {
        let set = AnnotationSet::new(id, video_id, owner);
        if self.state.read().sets.contains_key(&set.id) {
            return Err(StoreError::Duplicate {
                kind: "set",
                id: set.id.to_string(),
            });
        }
        self.put_set(set.clone(), 0, Vec::new())?;
        self.get_set(&set.id)
    }

    /// Replaces a set's annotations, appending `entries` to its log. The
    /// entries must turn the stored annotations into exactly
    /// `set.annotations`. A set that does not exist yet is created when
    /// `expected_revision` is 0. Returns the new revision.
    pub fn put_set(
        &self,
        mut set: AnnotationSet,
        expected_revision: u64,
        entries: Vec<EntryDraft>,
    ) -> Result<u64> {
        self.ensure_writable()?;
        let lock = self.lock_for(&set.id);
        let _guard = lock.lock();

        let (current, video, catalog) =
            {
                let state = self.state.read();
                let video = state.videos.get(&set.video_id).cloned().ok_or_else(|| {
                    StoreError::NotFound {
                        kind: "video",
                        id: set.video_id.to_string(),
                    }
                })?;
                let catalog = state
                    .resources
                    .get(&set.video_id)
                    .cloned()
                    .unwrap_or_default();
                (state.sets.get(&set.id).cloned(), video, catalog)
            };
        let actual = current.as_ref().map_or(0, |s| s.set.revision);
        if expected_revision != actual {
            return Err(StoreError::Conflict {
                expected: expected_revision,
                actual,
            });
        }
        if let Some(cur) = &current {
            if cur.set.owner != set.owner {
                return Err(StoreError::FieldChanged("owner"));
            }
            if cur.set.video_id != set.video_id {
                return Err(StoreError::FieldChanged("video_id"));
            }
        }
        let base = current
            .as_ref()
            .map_or_else(|| RevisionLog::new(set.id.clone()), |s| s.log.clone());
        let log = base.append_all(entries)?;
        set.revision = log.len();
        set.annotations = sort_timeline(&set.annotations);
        let violations = validate_set(&set, &video, &catalog);
        if !violations.is_empty() {
            return Err(StoreError::Validation(violations));
        }
        if log.replay_all() != set.annotations {
            return Err(StoreError::ReplayMismatch);
        }

        let set_bytes = export_set_json(&set, &video).map_err(|e| StoreError::Unreadable {
            path: self.set_path(&set.id),
            message: e.to_string(),
        })?;
        let log_bytes = export_log_json(&log).expect("log serializes");
        let (set_path, log_path) = (self.set_path(&set.id), self.log_path(&set.id));

        let log_tmp = files::write_tmp(&log_path, &log_bytes)?;
        if self.options.crash_at == Some(CrashPoint::AfterLogTempWrite) {
            return Err(StoreError::InjectedCrash);
        }
        files::commit(&log_tmp, &log_path)?;
        let set_tmp = files::write_tmp(&set_path, &set_bytes)?;
        if self.options.crash_at == Some(CrashPoint::BeforeSetRename) {
            return Err(StoreError::InjectedCrash);
        }
        files::commit(&set_tmp, &set_path)?;

        let revision = set.revision;
        self.state
            .write()
            .sets
            .insert(set.id.clone(), Arc::new(StoredSet { set, log }));
        Ok(revision)
    }
}

/// Accepts a log that matches its set, or one that runs ahead by an
/// uncommitted tail (returned cut back, with `true`).
fn check_replay(
    set: &AnnotationSet,
    log: RevisionLog,
) -> std::result::Result<(RevisionLog, bool), String> {
    if log.set_id() != &set.id {
        return Err(format!("log belongs to set {}", log.set_id()));
    }
    if log.len() < set.revision {
        return Err(format!(
            "set revision {} but log has {} entries",
            set.revision,
            log.len()
        ));
    }
    let replayed = log
        .replay(set.revision)
        .expect("revision within log length");
    if replayed != set.annotations {
        return Err(format!(
            "log replay at {} differs from stored annotations",
            set.revision
        ));
    }
    if log.len() == set.revision {
        Ok((log, false))
    } else {
        Ok((log.truncated(set.revision), true))
    }
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| StoreError::io(dir, e))? {
        let path = entry.map_err(|e| StoreError::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
