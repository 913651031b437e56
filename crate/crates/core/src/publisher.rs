//! Publishing a dataset root as a new version, materializing an editable
//! copy for republishing, and removing media files from all published
//! versions.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::backend::zip::{zip_create, zip_create_empty, zip_extract, zip_extract_single};
use crate::backend::{layout, BackendHandle, BackendPath, Repository};
use crate::dataset::Dataset;
use crate::deps::{
    apply, diff_scanned, read_deps_file, scan_root, DepKind, DependencyTable, DEPS_FILE,
};
use crate::digest::{digest_bytes, ZERO_DIGEST};
use crate::error::{Error, Result};
use crate::version::Version;

/// Which version a publish builds on.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum PreviousVersion {
    /// The latest version on the backend, if any.
    #[default]
    Latest,
    /// A from-scratch publish, ignoring existing versions.
    None,
    /// An explicit version, which must exist.
    Explicit(String),
}

/// Outcome of a publish.
#[derive(Debug, Clone)]
pub struct PublishReport {
    pub version: Version,
    /// Content archives (media and tables) uploaded for this version.
    pub uploaded_archives: Vec<String>,
    /// Files whose content was already on the backend and was not uploaded.
    pub reused: usize,
    /// Entries of the previous version dropped from this one.
    pub deleted: usize,
    pub total_bytes_uploaded: u64,
}

/// Advisory single-writer lock on a dataset; dropped on scope exit.
struct DatasetLock {
    backend: Arc<BackendHandle>,
    path: BackendPath,
}

impl DatasetLock {
    fn acquire(backend: Arc<BackendHandle>, name: &str) -> Result<DatasetLock> {
        let path = layout::publish_lock(name)?;
        let note = format!("pid {}\n", std::process::id());
        if !backend.create_exclusive(&path, note.as_bytes())? {
            return Err(Error::PublishLocked(name.to_string()));
        }
        Ok(DatasetLock { backend, path })
    }
}

impl Drop for DatasetLock {
    fn drop(&mut self) {
        let _ = self.backend.delete(&self.path);
    }
}

fn fetch_deps(
    backend: &BackendHandle,
    work: &Path,
    name: &str,
    version: &Version,
) -> Result<DependencyTable> {
    let archive = work.join(format!("deps-{version}.zip"));
    backend.get_file(&layout::deps(name, version)?, &archive)?;
    let folder = work.join(format!("deps-{version}"));
    zip_extract(&archive, &folder)?;
    read_deps_file(&folder, version.clone())
}

fn upload_zipped(
    backend: &BackendHandle,
    work: &Path,
    root: &Path,
    members: &[PathBuf],
    remote: &BackendPath,
    bytes: &mut u64,
) -> Result<()> {
    let local = work.join(format!(
        "obj-{}.zip",
        digest_bytes(remote.to_string().as_bytes())
    ));
    zip_create(members, root, &local)?;
    *bytes += fs::metadata(&local)
        .map_err(|e| Error::io(&local, e))?
        .len();
    backend.put_file(&local, remote)?;
    let _ = fs::remove_file(&local);
    Ok(())
}

/// Publishes the dataset in `root` as `version`. Only files that are new or
/// altered relative to the previous version are uploaded; the dependency
/// table is uploaded last, which is what makes the version visible.
pub fn publish(
    root: &Path,
    version: &str,
    repo: &Repository,
    previous: PreviousVersion,
) -> Result<PublishReport> {
    let backend = repo.connect()?;
    let dataset = Dataset::from_root(root)?;
    let name = dataset.header.name.clone();
    let version = Version::new(version);

    let _lock = DatasetLock::acquire(backend.clone(), &name)?;

    if backend.exists(&layout::deps(&name, &version)?)? {
        return Err(Error::VersionExists {
            name,
            version: version.as_str().to_string(),
        });
    }

    let work = tempfile::tempdir().map_err(|e| Error::io("tempdir", e))?;
    let previous_deps = match previous {
        PreviousVersion::None => None,
        PreviousVersion::Latest => {
            let versions = layout::list_versions(&backend, &name)?;
            match versions.last() {
                Some(latest) => Some(fetch_deps(&backend, work.path(), &name, latest)?),
                None => None,
            }
        }
        PreviousVersion::Explicit(prev) => {
            let prev = Version::new(prev);
            if !backend.exists(&layout::deps(&name, &prev)?)? {
                return Err(Error::NotFound(format!(
                    "previous version '{prev}' of '{name}'"
                )));
            }
            Some(fetch_deps(&backend, work.path(), &name, &prev)?)
        }
    };

    let scanned = scan_root(root, &dataset)?;
    for file in dataset.all_referenced_files() {
        let in_root = scanned.contains_key(file.as_str());
        let in_previous = previous_deps
            .as_ref()
            .and_then(|d| d.get(file.as_str()))
            .map(|e| !e.removed)
            .unwrap_or(false);
        if !in_root && !in_previous {
            return Err(Error::MissingMedia(file.to_string()));
        }
    }

    let cs = diff_scanned(&dataset, &scanned, previous_deps.as_ref());
    let deps = apply(previous_deps.as_ref(), &cs, &version, &scanned)?;

    let mut report = PublishReport {
        version: version.clone(),
        uploaded_archives: Vec::new(),
        reused: cs.unchanged.len(),
        deleted: cs.deleted.len(),
        total_bytes_uploaded: 0,
    };

    // Content archives for added and modified files whose origin is this
    // version. Digest-deduplicated entries keep an older origin and upload
    // nothing.
    let mut uploaded: HashSet<String> = HashSet::new();
    for file in cs.added.iter().chain(&cs.modified) {
        let entry = deps
            .get(file.as_str())
            .expect("applied deps cover the change set");
        if entry.origin_version != version {
            report.reused += 1;
            continue;
        }
        if entry.kind == DepKind::Header {
            continue; // uploaded below, at its fixed per-version path
        }
        let remote = layout::archive(&name, entry)?;
        if !uploaded.insert(remote.to_string()) {
            report.reused += 1;
            continue; // identical content within this version
        }
        upload_zipped(
            &backend,
            work.path(),
            root,
            &[file.to_local(root)],
            &remote,
            &mut report.total_bytes_uploaded,
        )?;
        report.uploaded_archives.push(remote.to_string());
    }

    // Header and dependency table are stored per version; the deps object
    // goes last so partial publishes stay invisible.
    upload_zipped(
        &backend,
        work.path(),
        root,
        &[root.join("db.yaml")],
        &layout::header(&name, &version)?,
        &mut report.total_bytes_uploaded,
    )?;

    let deps_dir = work.path().join("new-deps");
    fs::create_dir_all(&deps_dir).map_err(|e| Error::io(&deps_dir, e))?;
    let deps_file = deps_dir.join(DEPS_FILE);
    fs::write(&deps_file, deps.to_csv()).map_err(|e| Error::io(&deps_file, e))?;
    upload_zipped(
        &backend,
        work.path(),
        &deps_dir,
        std::slice::from_ref(&deps_file),
        &layout::deps(&name, &version)?,
        &mut report.total_bytes_uploaded,
    )?;

    Ok(report)
}

/// Materializes header, tables, and all media of a version in their
/// original format into `dest` — an editable copy suitable for publishing
/// the next version. Cross-version dependencies are resolved; removed media
/// are skipped. Returns the list of skipped (removed) files.
pub fn load_to(
    dest: &Path,
    name: &str,
    version: Option<&str>,
    repo: &Repository,
) -> Result<Vec<String>> {
    let backend = repo.connect()?;
    let version = match version {
        Some(v) => {
            let v = Version::new(v);
            if !backend.exists(&layout::deps(name, &v)?)? {
                return Err(Error::NotFound(format!("version '{v}' of '{name}'")));
            }
            v
        }
        None => layout::list_versions(&backend, name)?
            .last()
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("any version of '{name}'")))?,
    };

    let work = tempfile::tempdir().map_err(|e| Error::io("tempdir", e))?;
    fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;

    let header_zip = work.path().join("header.zip");
    backend.get_file(&layout::header(name, &version)?, &header_zip)?;
    zip_extract(&header_zip, dest)?;

    let deps = fetch_deps(&backend, work.path(), name, &version)?;
    let mut removed = Vec::new();
    for entry in deps.entries() {
        match entry.kind {
            DepKind::Header => {}
            DepKind::Table => {
                let archive = work.path().join("table.zip");
                backend.get_file(&layout::archive(name, entry)?, &archive)?;
                zip_extract(&archive, dest)?;
            }
            DepKind::Media => {
                if entry.removed {
                    removed.push(entry.file.to_string());
                    continue;
                }
                let archive = work.path().join("media.zip");
                backend.get_file(&layout::archive(name, entry)?, &archive)?;
                let bytes = zip_extract_single(&archive)?;
                let actual = digest_bytes(&bytes);
                if actual != entry.digest {
                    return Err(Error::DigestMismatch {
                        path: entry.file.to_string(),
                        expected: entry.digest.clone(),
                        actual,
                    });
                }
                let target = entry.file.to_local(dest);
                if let Some(parent) = target.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                fs::write(&target, bytes).map_err(|e| Error::io(&target, e))?;
            }
            DepKind::Attachment => {}
        }
    }
    Ok(removed)
}

/// Report of a removal run.
#[derive(Debug, Clone)]
pub struct RemoveReport {
    pub files: Vec<String>,
    pub versions_updated: Vec<Version>,
    pub archives_replaced: usize,
}

/// Removes media files from every published version: their archives are
/// replaced by empty placeholders and every version's dependency entry is
/// flagged removed with a zeroed digest. Tables and header stay untouched;
/// the operation is idempotent.
pub fn remove_media(name: &str, files: &[String], repo: &Repository) -> Result<RemoveReport> {
    let backend = repo.connect()?;
    let _lock = DatasetLock::acquire(backend.clone(), name)?;
    let versions = layout::list_versions(&backend, name)?;
    if versions.is_empty() {
        return Err(Error::NotFound(format!("any version of '{name}'")));
    }

    let work = tempfile::tempdir().map_err(|e| Error::io("tempdir", e))?;
    let mut tables: BTreeMap<Version, DependencyTable> = BTreeMap::new();
    for version in &versions {
        tables.insert(
            version.clone(),
            fetch_deps(&backend, work.path(), name, version)?,
        );
    }

    for file in files {
        let known = tables.values().any(|deps| {
            deps.get(file)
                .map(|e| e.kind == DepKind::Media)
                .unwrap_or(false)
        });
        if !known {
            return Err(Error::NotFound(format!(
                "media file '{file}' in any version of '{name}'"
            )));
        }
    }

    let placeholder = work.path().join("placeholder.zip");
    zip_create_empty(&placeholder)?;

    let mut report = RemoveReport {
        files: files.to_vec(),
        versions_updated: Vec::new(),
        archives_replaced: 0,
    };
    let mut replaced: HashSet<String> = HashSet::new();
    for (version, deps) in tables.iter_mut() {
        let mut changed = false;
        for file in files {
            let Some(entry) = deps
                .entries_mut()
                .find(|e| e.file.as_str() == file.as_str())
            else {
                continue;
            };
            if entry.kind != DepKind::Media {
                continue;
            }
            // Replace the content archive (once per distinct object).
            let remote = layout::archive(name, entry)?;
            if replaced.insert(remote.to_string()) {
                backend.put_file(&placeholder, &remote)?;
                report.archives_replaced += 1;
            }
            if !entry.removed {
                entry.removed = true;
                entry.digest = ZERO_DIGEST.to_string();
                changed = true;
            }
        }
        if changed {
            let deps_dir = work.path().join(format!("deps-out-{version}"));
            fs::create_dir_all(&deps_dir).map_err(|e| Error::io(&deps_dir, e))?;
            let deps_file = deps_dir.join(DEPS_FILE);
            fs::write(&deps_file, deps.to_csv()).map_err(|e| Error::io(&deps_file, e))?;
            let mut bytes = 0u64;
            upload_zipped(
                &backend,
                work.path(),
                &deps_dir,
                &[deps_file],
                &layout::deps(name, version)?,
                &mut bytes,
            )?;
            report.versions_updated.push(version.clone());
        }
    }
    Ok(report)
}
