//! Storage abstraction for repositories.
//!
//! A repository is a name, a host, and a backend kind. Backend kinds are
//! registered in a process-wide registry; `file-system` is built in and
//! custom backends can be added. Connections are memoized per (kind, host)
//! and instrumented with operation counters, which also gives tests a
//! download meter and an offline switch.

pub mod fs;
pub mod zip;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use once_cell::sync::Lazy;

use crate::deps::DepEntry;
use crate::error::{Error, Result};
use crate::version::Version;

pub use fs::FileSystemBackend;

/// A path below `<host>/`, as forward-slash segments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BackendPath {
    segments: Vec<String>,
}

impl BackendPath {
    pub fn root() -> BackendPath {
        BackendPath {
            segments: Vec::new(),
        }
    }

    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(segments: I) -> Result<BackendPath> {
        let segments: Vec<String> = segments.into_iter().map(Into::into).collect();
        for seg in &segments {
            if seg.is_empty() || seg == ".." || seg.contains('/') || seg.contains('\\') {
                return Err(Error::BadPath {
                    path: segments.join("/"),
                    reason: "invalid backend path segment",
                });
            }
        }
        Ok(BackendPath { segments })
    }

    pub fn parse(path: &str) -> Result<BackendPath> {
        BackendPath::new(path.split('/'))
    }

    pub fn join(&self, segment: impl Into<String>) -> Result<BackendPath> {
        let mut segments = self.segments.clone();
        segments.push(segment.into());
        BackendPath::new(segments)
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    pub fn starts_with(&self, prefix: &BackendPath) -> bool {
        self.segments.len() >= prefix.segments.len()
            && self.segments[..prefix.segments.len()] == prefix.segments[..]
    }

    /// The path interpreted below a local directory.
    pub fn to_local(&self, root: &Path) -> std::path::PathBuf {
        let mut out = root.to_path_buf();
        for seg in &self.segments {
            out.push(seg);
        }
        out
    }
}

impl fmt::Display for BackendPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.segments.join("/"))
    }
}

/// Raw storage operations a backend must provide.
pub trait Backend: Send + Sync {
    /// Atomic upload: the object appears complete or not at all.
    fn put_file(&self, local: &Path, remote: &BackendPath) -> Result<()>;
    /// Download to a local path, verifying the transferred size.
    fn get_file(&self, remote: &BackendPath, local: &Path) -> Result<()>;
    fn exists(&self, remote: &BackendPath) -> Result<bool>;
    /// Recursive listing of files under a prefix, sorted.
    fn ls(&self, prefix: &BackendPath) -> Result<Vec<BackendPath>>;
    fn delete(&self, remote: &BackendPath) -> Result<()>;
    /// Creates an object only if absent; returns whether it was created.
    fn create_exclusive(&self, remote: &BackendPath, content: &[u8]) -> Result<bool>;
}

pub type BackendFactory = Arc<dyn Fn(&str) -> Result<Arc<dyn Backend>> + Send + Sync>;

static REGISTRY: Lazy<RwLock<HashMap<String, BackendFactory>>> = Lazy::new(|| {
    let mut map: HashMap<String, BackendFactory> = HashMap::new();
    map.insert(
        "file-system".to_string(),
        Arc::new(|host: &str| Ok(Arc::new(FileSystemBackend::new(host)) as Arc<dyn Backend>)),
    );
    RwLock::new(map)
});

type InstanceKey = (String, String);

static INSTANCES: Lazy<Mutex<HashMap<InstanceKey, Arc<BackendHandle>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Registers a custom backend kind. Fails on duplicates.
pub fn register_backend(kind: &str, factory: BackendFactory) -> Result<()> {
    let mut registry = REGISTRY.write().expect("registry poisoned");
    if registry.contains_key(kind) {
        return Err(Error::DuplicateBackend(kind.to_string()));
    }
    registry.insert(kind.to_string(), factory);
    Ok(())
}

pub fn backend_registered(kind: &str) -> bool {
    REGISTRY
        .read()
        .expect("registry poisoned")
        .contains_key(kind)
}

/// A named storage location holding published datasets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Repository {
    pub name: String,
    pub host: String,
    pub backend_kind: String,
}

impl Repository {
    pub fn new(
        name: impl Into<String>,
        host: impl Into<String>,
        backend_kind: impl Into<String>,
    ) -> Repository {
        Repository {
            name: name.into(),
            host: host.into(),
            backend_kind: backend_kind.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::BadRepository("repository name is empty".into()));
        }
        if !backend_registered(&self.backend_kind) {
            return Err(Error::UnknownBackend(self.backend_kind.clone()));
        }
        Ok(())
    }

    /// Resolves the backend for this repository. Handles are memoized per
    /// (kind, host), so counters accumulate across callers.
    pub fn connect(&self) -> Result<Arc<BackendHandle>> {
        self.validate()?;
        let key = (self.backend_kind.clone(), self.host.clone());
        let mut instances = INSTANCES.lock().expect("instance cache poisoned");
        if let Some(handle) = instances.get(&key) {
            return Ok(handle.clone());
        }
        let factory = REGISTRY
            .read()
            .expect("registry poisoned")
            .get(&self.backend_kind)
            .cloned()
            .ok_or_else(|| Error::UnknownBackend(self.backend_kind.clone()))?;
        let inner = factory(&self.host)?;
        let handle = Arc::new(BackendHandle {
            inner,
            stats: BackendStats::default(),
            offline: AtomicBool::new(false),
        });
        instances.insert(key, handle.clone());
        Ok(handle)
    }
}

/// Operation counters of one backend connection.
#[derive(Debug, Default)]
pub struct BackendStats {
    pub gets: AtomicU64,
    pub puts: AtomicU64,
    pub lists: AtomicU64,
    pub exists_checks: AtomicU64,
    pub deletes: AtomicU64,
}

impl BackendStats {
    pub fn downloads(&self) -> u64 {
        self.gets.load(Ordering::SeqCst)
    }

    pub fn total_calls(&self) -> u64 {
        self.gets.load(Ordering::SeqCst)
            + self.puts.load(Ordering::SeqCst)
            + self.lists.load(Ordering::SeqCst)
            + self.exists_checks.load(Ordering::SeqCst)
            + self.deletes.load(Ordering::SeqCst)
    }
}

/// An instrumented backend connection.
pub struct BackendHandle {
    inner: Arc<dyn Backend>,
    stats: BackendStats,
    offline: AtomicBool,
}

impl BackendHandle {
    pub fn stats(&self) -> &BackendStats {
        &self.stats
    }

    /// When offline, every operation fails before reaching storage (and
    /// before being counted).
    pub fn set_offline(&self, offline: bool) {
        self.offline.store(offline, Ordering::SeqCst);
    }

    fn gate(&self) -> Result<()> {
        if self.offline.load(Ordering::SeqCst) {
            Err(Error::Offline)
        } else {
            Ok(())
        }
    }

    pub fn put_file(&self, local: &Path, remote: &BackendPath) -> Result<()> {
        self.gate()?;
        self.stats.puts.fetch_add(1, Ordering::SeqCst);
        self.inner.put_file(local, remote)
    }

    pub fn get_file(&self, remote: &BackendPath, local: &Path) -> Result<()> {
        self.gate()?;
        self.stats.gets.fetch_add(1, Ordering::SeqCst);
        self.inner.get_file(remote, local)
    }

    pub fn exists(&self, remote: &BackendPath) -> Result<bool> {
        self.gate()?;
        self.stats.exists_checks.fetch_add(1, Ordering::SeqCst);
        self.inner.exists(remote)
    }

    pub fn ls(&self, prefix: &BackendPath) -> Result<Vec<BackendPath>> {
        self.gate()?;
        self.stats.lists.fetch_add(1, Ordering::SeqCst);
        self.inner.ls(prefix)
    }

    pub fn delete(&self, remote: &BackendPath) -> Result<()> {
        self.gate()?;
        self.stats.deletes.fetch_add(1, Ordering::SeqCst);
        self.inner.delete(remote)
    }

    pub fn create_exclusive(&self, remote: &BackendPath, content: &[u8]) -> Result<bool> {
        self.gate()?;
        self.stats.puts.fetch_add(1, Ordering::SeqCst);
        self.inner.create_exclusive(remote, content)
    }
}

/// The on-server layout of a published dataset:
/// `<name>/<version>/db.yaml.zip`, `<name>/<version>/db.deps.zip`,
/// `<name>/<origin>/meta/<table>.zip`, `<name>/<origin>/media/<xx>/<digest>.zip`.
pub mod layout {
    use super::*;

    pub fn dataset(name: &str) -> Result<BackendPath> {
        BackendPath::new([name])
    }

    pub fn version_dir(name: &str, version: &Version) -> Result<BackendPath> {
        BackendPath::new([name, version.as_str()])
    }

    /// Presence of this object is what makes a version visible.
    pub fn deps(name: &str, version: &Version) -> Result<BackendPath> {
        version_dir(name, version)?.join("db.deps.zip")
    }

    pub fn header(name: &str, version: &Version) -> Result<BackendPath> {
        version_dir(name, version)?.join("db.yaml.zip")
    }

    /// Archive object of a dependency entry, under its origin version.
    pub fn archive(name: &str, entry: &DepEntry) -> Result<BackendPath> {
        let mut path = dataset(name)?;
        for seg in entry.archive_object().split('/') {
            path = path.join(seg)?;
        }
        Ok(path)
    }

    pub fn publish_lock(name: &str) -> Result<BackendPath> {
        BackendPath::new([name, ".lock"])
    }

    /// Complete (visible) versions of a dataset, sorted ascending.
    pub fn list_versions(backend: &BackendHandle, name: &str) -> Result<Vec<Version>> {
        let prefix = dataset(name)?;
        let mut versions: Vec<Version> = backend
            .ls(&prefix)?
            .into_iter()
            .filter_map(|p| {
                let segments = p.segments();
                if segments.len() == 3 && segments[2] == "db.deps.zip" {
                    Some(Version::new(segments[1].clone()))
                } else {
                    None
                }
            })
            .collect();
        versions.sort();
        Ok(versions)
    }
}

/// First repository, in configuration order, where the dataset (and
/// version, when given) exists.
pub fn resolve_repository(
    name: &str,
    version: Option<&Version>,
    repos: &[Repository],
) -> Result<(Repository, Arc<BackendHandle>)> {
    if repos.is_empty() {
        return Err(Error::NoRepositories);
    }
    for repo in repos {
        let backend = match repo.connect() {
            Ok(backend) => backend,
            Err(err) => {
                log::warn!("repository '{}' is not usable: {err}", repo.name);
                continue;
            }
        };
        let found = match version {
            Some(version) => backend
                .exists(&layout::deps(name, version)?)
                .unwrap_or(false),
            None => !layout::list_versions(&backend, name)
                .unwrap_or_default()
                .is_empty(),
        };
        if found {
            return Ok((repo.clone(), backend));
        }
    }
    Err(Error::DatasetNotFound(name.to_string()))
}
