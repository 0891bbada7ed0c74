//! Canonical JSON file envelopes and the write-temp-then-rename discipline.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use hyvid_core::canonical;
use hyvid_core::interchange::{check_envelope, ENVELOPE_LEADING_KEYS};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StoreError};

pub(crate) const TMP_SUFFIX: &str = ".tmp";

/// `{"format":..., "version":1, "<key>": [...]}` wrapper used for the
/// store's own index files.
#[derive(Serialize, Deserialize)]
pub(crate) struct Envelope<T> {
    pub format: String,
    pub version: u32,
    #[serde(flatten)]
    pub body: T,
}

pub(crate) fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().expect("file path").to_os_string();
    name.push(TMP_SUFFIX);
    path.with_file_name(name)
}

/// Writes `bytes` to `<path>.tmp` and fsyncs it. The caller commits with
/// [`commit`].
pub(crate) fn write_tmp(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let tmp = tmp_path(path);
    let mut f = File::create(&tmp).map_err(|e| StoreError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| StoreError::io(&tmp, e))?;
    f.sync_all().map_err(|e| StoreError::io(&tmp, e))?;
    Ok(tmp)
}

pub(crate) fn commit(tmp: &Path, path: &Path) -> Result<()> {
    fs::rename(tmp, path).map_err(|e| StoreError::io(path, e))?;
    if let Some(dir) = path.parent() {
        // directory fsync makes the rename durable; not supported everywhere
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = write_tmp(path, bytes)?;
    commit(&tmp, path)
}

pub(crate) fn envelope_bytes<T: Serialize>(format: &str, body: T) -> Result<Vec<u8>> {
    let env = Envelope {
        format: format.to_owned(),
        version: 1,
        body,
    };
    canonical::to_vec_with_leading(&env, ENVELOPE_LEADING_KEYS).map_err(|e| {
        StoreError::Unreadable {
            path: PathBuf::from(format),
            message: e.to_string(),
        }
    })
}

pub(crate) fn read_envelope<T: DeserializeOwned>(path: &Path, format: &str) -> Result<Option<T>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(StoreError::io(path, e)),
    };
    let unreadable = |message: String| StoreError::Unreadable {
        path: path.to_owned(),
        message,
    };
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| unreadable(e.to_string()))?;
    check_envelope(&value, format, 1).map_err(|e| unreadable(e.to_string()))?;
    let env: Envelope<T> = serde_json::from_value(value).map_err(|e| unreadable(e.to_string()))?;
    Ok(Some(env.body))
}

pub(crate) fn remove_stale_tmp(dir: &Path) -> Result<()> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(StoreError::io(dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| StoreError::io(dir, e))?;
        let path = entry.path();
        if path.to_string_lossy().ends_with(TMP_SUFFIX) {
            tracing::info!(path = %path.display(), "removing uncommitted temp file");
            fs::remove_file(&path).map_err(|e| StoreError::io(&path, e))?;
        }
    }
    Ok(())
}
