//! The local cache: one folder per repository, dataset, version, and
//! flavour, holding a self-contained copy of the dataset. Materialization
//! of a key is exclusive via a lock file; completed keys are read lock-free.
//! Files from other cached versions are reused when their recorded digest
//! matches.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration as StdDuration, SystemTime};

use crate::deps::DependencyTable;
use crate::digest::digest_file;
use crate::error::{Error, Result};
use crate::flavour::RAW_FLAVOUR_ID;
use crate::version::Version;

/// Identifies one cache folder:
/// `<cache_root>/<repository>/<name>/<version>/<flavour_id>/`.
///
/// The repository segment is an extension over keying by version and
/// flavour alone; it keeps same-named datasets from different repositories
/// apart.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub repository: String,
    pub name: String,
    pub version: Version,
    pub flavour_id: String,
}

impl CacheKey {
    pub fn new(
        repository: impl Into<String>,
        name: impl Into<String>,
        version: Version,
        flavour_id: impl Into<String>,
    ) -> CacheKey {
        CacheKey {
            repository: repository.into(),
            name: name.into(),
            version,
            flavour_id: flavour_id.into(),
        }
    }

    pub fn is_raw(&self) -> bool {
        self.flavour_id == RAW_FLAVOUR_ID
    }
}

/// Name of the completion marker written after a full materialization.
const COMPLETE_MARKER: &str = ".complete";
/// Per-key record linking converted files to their source digests.
const MANIFEST_FILE: &str = ".files.csv";

/// Unique suffix for in-flight temp files; process id alone would collide
/// across threads.
pub(crate) fn temp_suffix() -> String {
    static COUNTER: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    format!(
        "{}.{}",
        std::process::id(),
        COUNTER.fetch_add(1, std::sync::atomic::Ordering::SeqCst)
    )
}

/// Source/local digest pairs for flavour-converted files. The source digest
/// ties a converted file to the raw content recorded in the dependency
/// table; the local digest guards against corruption.
#[derive(Debug, Clone, Default)]
pub struct FlavourManifest {
    entries: BTreeMap<String, (String, String)>,
}

impl FlavourManifest {
    pub fn load(dir: &Path) -> FlavourManifest {
        let mut manifest = FlavourManifest::default();
        let Ok(text) = fs::read_to_string(dir.join(MANIFEST_FILE)) else {
            return manifest;
        };
        for line in text.lines() {
            let mut cells = line.splitn(3, ',');
            if let (Some(path), Some(source), Some(local)) =
                (cells.next(), cells.next(), cells.next())
            {
                manifest
                    .entries
                    .insert(path.to_string(), (source.to_string(), local.to_string()));
            }
        }
        manifest
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = String::new();
        for (path, (source, local)) in &self.entries {
            text.push_str(&format!("{path},{source},{local}\n"));
        }
        let target = dir.join(MANIFEST_FILE);
        let temp = dir.join(format!(".{MANIFEST_FILE}.part.{}", temp_suffix()));
        fs::write(&temp, text).map_err(|e| Error::io(&temp, e))?;
        fs::rename(&temp, &target).map_err(|e| Error::io(&target, e))
    }

    pub fn get(&self, path: &str) -> Option<&(String, String)> {
        self.entries.get(path)
    }

    pub fn record(&mut self, path: &str, source_digest: &str, local_digest: &str) {
        self.entries.insert(
            path.to_string(),
            (source_digest.to_string(), local_digest.to_string()),
        );
    }
}

#[derive(Debug, Clone)]
pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn new(root: impl Into<PathBuf>) -> Cache {
        Cache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn key_dir(&self, key: &CacheKey) -> PathBuf {
        self.root
            .join(&key.repository)
            .join(&key.name)
            .join(key.version.as_str())
            .join(&key.flavour_id)
    }

    fn lock_file(&self, key: &CacheKey) -> PathBuf {
        self.root
            .join(&key.repository)
            .join(&key.name)
            .join(key.version.as_str())
            .join(format!(".{}.lock", key.flavour_id))
    }

    /// A cached file is a hit only when its digest agrees with the
    /// dependency table: directly for raw content, through the flavour
    /// manifest for converted files. Anything else is a miss.
    pub fn lookup(&self, key: &CacheKey, path: &str, deps: &DependencyTable) -> Option<PathBuf> {
        let entry = deps.get(path)?;
        if entry.removed {
            return None;
        }
        let dir = self.key_dir(key);
        let local = join_relative(&dir, path);
        if !local.is_file() {
            return None;
        }
        let actual = digest_file(&local).ok()?;
        if actual == entry.digest {
            return Some(local);
        }
        if !key.is_raw() {
            let manifest = FlavourManifest::load(&dir);
            if let Some((source, local_digest)) = manifest.get(path) {
                if *source == entry.digest && *local_digest == actual {
                    return Some(local);
                }
            }
        }
        None
    }

    /// Atomically places a copy of `source` at `path` below the key folder.
    pub fn store(&self, key: &CacheKey, path: &str, source: &Path) -> Result<PathBuf> {
        let dir = self.key_dir(key);
        let target = join_relative(&dir, path);
        let parent = target.parent().expect("cache paths have parents");
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let temp = parent.join(format!(
            ".{}.part.{}",
            target
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("file"),
            temp_suffix()
        ));
        fs::copy(source, &temp).map_err(|e| {
            let _ = fs::remove_file(&temp);
            Error::io(source, e)
        })?;
        fs::rename(&temp, &target).map_err(|e| {
            let _ = fs::remove_file(&temp);
            Error::io(&target, e)
        })?;
        Ok(target)
    }

    /// Moves an already materialized temp file (inside the key folder) to
    /// its final path and, for converted media, records its source digest.
    pub fn promote(
        &self,
        key: &CacheKey,
        path: &str,
        temp: &Path,
        source_digest: Option<&str>,
    ) -> Result<PathBuf> {
        let dir = self.key_dir(key);
        let target = join_relative(&dir, path);
        let parent = target.parent().expect("cache paths have parents");
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        fs::rename(temp, &target).map_err(|e| Error::io(&target, e))?;
        if let Some(source) = source_digest {
            let local = digest_file(&target)?;
            let mut manifest = FlavourManifest::load(&dir);
            manifest.record(path, source, &local);
            manifest.save(&dir)?;
        }
        Ok(target)
    }

    /// Places a hard link to `source` at `path` below the key folder.
    fn link(&self, key: &CacheKey, path: &str, source: &Path) -> Result<PathBuf> {
        let dir = self.key_dir(key);
        let target = join_relative(&dir, path);
        let parent = target.parent().expect("cache paths have parents");
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let temp = parent.join(format!(
            ".{}.part.{}",
            target
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("file"),
            temp_suffix()
        ));
        fs::hard_link(source, &temp).map_err(|e| Error::io(source, e))?;
        fs::rename(&temp, &target).map_err(|e| {
            let _ = fs::remove_file(&temp);
            Error::io(&target, e)
        })?;
        Ok(target)
    }

    /// Adopts a validated file from another cached version into this key,
    /// carrying the flavour manifest entry along. Reuse is a copy per
    /// default; `link` requests a hard link (experimental) and falls back
    /// to copying when the filesystem refuses.
    pub fn adopt_sibling(
        &self,
        key: &CacheKey,
        sibling: &CacheKey,
        path: &str,
        sibling_file: &Path,
        link: bool,
    ) -> Result<PathBuf> {
        let target = if link {
            match self.link(key, path, sibling_file) {
                Ok(target) => target,
                Err(_) => self.store(key, path, sibling_file)?,
            }
        } else {
            self.store(key, path, sibling_file)?
        };
        if !key.is_raw() {
            let sibling_manifest = FlavourManifest::load(&self.key_dir(sibling));
            if let Some((source, local)) = sibling_manifest.get(path) {
                let dir = self.key_dir(key);
                let mut manifest = FlavourManifest::load(&dir);
                manifest.record(path, source, local);
                manifest.save(&dir)?;
            }
        }
        Ok(target)
    }

    /// Other cached versions of the same dataset and flavour that hold a
    /// digest-identical, validated copy of `path`; newest version first.
    pub fn sibling_sources(
        &self,
        key: &CacheKey,
        path: &str,
        deps: &DependencyTable,
    ) -> Vec<(CacheKey, PathBuf)> {
        let Some(entry) = deps.get(path) else {
            return Vec::new();
        };
        if entry.removed {
            return Vec::new();
        }
        let mut out = Vec::new();
        let dataset_dir = self.root.join(&key.repository).join(&key.name);
        let Ok(read) = fs::read_dir(&dataset_dir) else {
            return Vec::new();
        };
        let mut versions: Vec<Version> = read
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .filter_map(|e| e.file_name().to_str().map(Version::new))
            .filter(|v| *v != key.version)
            .collect();
        versions.sort();
        versions.reverse();
        for version in versions {
            let sibling = CacheKey::new(
                key.repository.clone(),
                key.name.clone(),
                version.clone(),
                key.flavour_id.clone(),
            );
            let sibling_dir = self.key_dir(&sibling);
            let Ok(sibling_deps) = crate::deps::read_deps_file(&sibling_dir, version) else {
                continue;
            };
            let same_digest = sibling_deps
                .get(path)
                .map(|e| !e.removed && e.digest == entry.digest)
                .unwrap_or(false);
            if !same_digest {
                continue;
            }
            if let Some(file) = self.lookup(&sibling, path, &sibling_deps) {
                out.push((sibling, file));
            }
        }
        out
    }

    pub fn mark_complete(&self, key: &CacheKey) -> Result<()> {
        let path = self.key_dir(key).join(COMPLETE_MARKER);
        fs::write(&path, key.version.as_str()).map_err(|e| Error::io(&path, e))
    }

    pub fn is_complete(&self, key: &CacheKey) -> bool {
        self.key_dir(key).join(COMPLETE_MARKER).is_file()
    }

    /// Versions of a dataset with a completed folder for this flavour,
    /// ascending. Serves as the offline fallback for latest-version lookup.
    pub fn cached_versions(&self, repository: &str, name: &str, flavour_id: &str) -> Vec<Version> {
        let dataset_dir = self.root.join(repository).join(name);
        let Ok(read) = fs::read_dir(&dataset_dir) else {
            return Vec::new();
        };
        let mut versions: Vec<Version> = read
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().to_str().map(Version::new))
            .filter(|v| {
                self.is_complete(&CacheKey::new(
                    repository.to_string(),
                    name.to_string(),
                    v.clone(),
                    flavour_id.to_string(),
                ))
            })
            .collect();
        versions.sort();
        versions
    }

    /// Exclusive materialization lease for one cache key.
    pub fn lock(&self, key: &CacheKey, timeout: StdDuration) -> Result<CacheLock> {
        CacheLock::acquire(self.lock_file(key), timeout, DEFAULT_LOCK_STALE)
    }

    /// Removes everything under the cache root.
    pub fn clear(&self) -> Result<()> {
        if self.root.exists() {
            fs::remove_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        }
        Ok(())
    }
}

fn join_relative(dir: &Path, path: &str) -> PathBuf {
    let mut out = dir.to_path_buf();
    for seg in path.split('/') {
        out.push(seg);
    }
    out
}

/// Locks go stale after this long without a heartbeat; a crashed holder
/// does not block the key forever.
pub const DEFAULT_LOCK_STALE: StdDuration = StdDuration::from_secs(60 * 60);

const LOCK_POLL: StdDuration = StdDuration::from_millis(25);

/// An exclusive lease on a cache key, backed by a lock file whose mtime is
/// the heartbeat. Released on drop.
#[derive(Debug)]
pub struct CacheLock {
    path: PathBuf,
    released: bool,
}

impl CacheLock {
    pub fn acquire(
        path: PathBuf,
        timeout: StdDuration,
        stale_after: StdDuration,
    ) -> Result<CacheLock> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let started = SystemTime::now();
        loop {
            match fs::OpenOptions::new()
                .write(true)
                .create_new(true)
                .open(&path)
            {
                Ok(_) => {
                    let lock = CacheLock {
                        path,
                        released: false,
                    };
                    lock.touch();
                    return Ok(lock);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let stale = fs::metadata(&path)
                        .and_then(|m| m.modified())
                        .ok()
                        .and_then(|mtime| SystemTime::now().duration_since(mtime).ok())
                        .map(|age| age > stale_after)
                        .unwrap_or(false);
                    if stale {
                        let _ = fs::remove_file(&path);
                        continue;
                    }
                    let waited = SystemTime::now()
                        .duration_since(started)
                        .unwrap_or_default();
                    if waited >= timeout {
                        return Err(Error::LockTimeout(path.display().to_string()));
                    }
                    std::thread::sleep(LOCK_POLL);
                }
                Err(e) => return Err(Error::io(&path, e)),
            }
        }
    }

    /// Refreshes the heartbeat.
    pub fn touch(&self) {
        let _ = fs::write(
            &self.path,
            format!(
                "{}\n{}\n",
                std::process::id(),
                SystemTime::now()
                    .duration_since(SystemTime::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0)
            ),
        );
    }

    pub fn release(mut self) {
        self.release_inner();
    }

    fn release_inner(&mut self) {
        if !self.released {
            let _ = fs::remove_file(&self.path);
            self.released = true;
        }
    }
}

impl Drop for CacheLock {
    fn drop(&mut self) {
        self.release_inner();
    }
}
