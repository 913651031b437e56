//! Load orchestration: resolve a version, gather the requested tables and
//! media, reuse cached copies (of this or other versions), download and
//! flavour-convert what is missing, and return the in-memory dataset.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration as StdDuration;

use indexmap::IndexMap;

use crate::backend::zip::{zip_extract, zip_extract_single};
use crate::backend::{layout, BackendHandle, Repository};
use crate::cache::{Cache, CacheKey};
use crate::dataset::Dataset;
use crate::deps::{DepEntry, DependencyTable, DEPS_FILE};
use crate::digest::digest_bytes;
use crate::error::{Error, Result};
use crate::flavour::{convert, Flavour};
use crate::header::{parse_header, Header};
use crate::index::FilePath;
use crate::snapshot::load_table_cached;
use crate::table::{Column, Table};
use crate::version::Version;

/// What to load.
#[derive(Debug, Clone, Default)]
pub struct LoadRequest {
    pub name: String,
    /// Defaults to the latest published version.
    pub version: Option<String>,
    pub flavour: Flavour,
    /// Table id patterns (literal or `*` glob). Misc tables always load.
    pub tables: Option<Vec<String>>,
    /// Media path patterns (literal or `*` glob); rows referencing files
    /// outside the selection are dropped from the returned tables.
    pub media: Option<Vec<String>>,
    /// Skip media entirely.
    pub only_metadata: bool,
}

impl LoadRequest {
    pub fn new(name: impl Into<String>) -> LoadRequest {
        LoadRequest {
            name: name.into(),
            ..LoadRequest::default()
        }
    }
}

/// Loader configuration: repositories in resolution order plus the cache.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub repositories: Vec<Repository>,
    pub cache: Cache,
    /// Parallel media downloads.
    pub workers: usize,
    pub lock_timeout: StdDuration,
    /// Experimental: reuse files from sibling versions by hard link
    /// instead of copy. Saves space, gives up shippability of the folder.
    pub use_hard_links: bool,
}

impl LoadOptions {
    pub fn new(repositories: Vec<Repository>, cache: Cache) -> LoadOptions {
        LoadOptions {
            repositories,
            cache,
            workers: 4,
            lock_timeout: StdDuration::from_secs(600),
            use_hard_links: false,
        }
    }
}

/// A materialized dataset.
#[derive(Debug)]
pub struct LoadedDataset {
    pub header: Header,
    pub tables: BTreeMap<String, Table>,
    /// The self-contained cache folder.
    pub root: PathBuf,
    /// Referenced media withdrawn from all versions; not on disk.
    pub removed_media: Vec<String>,
    pub deps: DependencyTable,
}

impl LoadedDataset {
    pub fn dataset(&self) -> Dataset {
        Dataset {
            header: self.header.clone(),
            tables: self.tables.clone(),
        }
    }
}

/// Literal match, or `*` wildcards matching any run of characters.
pub(crate) fn glob_match(pattern: &str, text: &str) -> bool {
    if !pattern.contains('*') {
        return pattern == text;
    }
    let parts: Vec<&str> = pattern.split('*').collect();
    let mut pos = 0;
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            continue;
        }
        if i == 0 {
            if !text.starts_with(part) {
                return false;
            }
            pos = part.len();
        } else if i == parts.len() - 1 {
            return text.len() >= pos && text[pos..].ends_with(part);
        } else {
            match text[pos..].find(part) {
                Some(found) => pos += found + part.len(),
                None => return false,
            }
        }
    }
    true
}

/// The latest complete version of a dataset in one repository.
pub fn latest_version(name: &str, repo: &Repository) -> Result<Version> {
    let backend = repo.connect()?;
    layout::list_versions(&backend, name)?
        .last()
        .cloned()
        .ok_or_else(|| Error::NotFound(format!("any version of '{name}'")))
}

/// Loads a dataset. Fully cached requests are served without touching the
/// backend; otherwise the cache key is materialized under an exclusive lock.
pub fn load(req: &LoadRequest, opts: &LoadOptions) -> Result<LoadedDataset> {
    req.flavour.validate()?;
    if opts.repositories.is_empty() {
        return Err(Error::NoRepositories);
    }
    let flavour_id = req.flavour.id();

    // Cache first: with a pinned version, a previously completed request is
    // served with zero backend operations.
    if let Some(version) = &req.version {
        let version = Version::new(version.clone());
        for repo in &opts.repositories {
            let key = CacheKey::new(&repo.name, &req.name, version.clone(), &flavour_id);
            if let Ok(loaded) = load_from_key(req, opts, &key, None) {
                return Ok(loaded);
            }
        }
    }

    // Resolve against the backends; when they are unreachable fall back to
    // the latest cached version so offline loads keep working.
    let pinned = req.version.as_ref().map(|v| Version::new(v.clone()));
    let resolved =
        crate::backend::resolve_repository(&req.name, pinned.as_ref(), &opts.repositories);
    let (repo, backend, version) = match resolved {
        Ok((repo, backend)) => {
            let version = match &pinned {
                Some(v) => v.clone(),
                None => layout::list_versions(&backend, &req.name)?
                    .last()
                    .cloned()
                    .ok_or_else(|| Error::NotFound(format!("any version of '{}'", req.name)))?,
            };
            (repo, Some(backend), version)
        }
        Err(resolve_err) => {
            let mut fallback = None;
            for repo in &opts.repositories {
                let versions = opts
                    .cache
                    .cached_versions(&repo.name, &req.name, &flavour_id);
                let candidate = match &pinned {
                    Some(v) => versions.iter().find(|c| *c == v).cloned(),
                    None => versions.last().cloned(),
                };
                if let Some(version) = candidate {
                    fallback = Some((repo.clone(), version));
                    break;
                }
            }
            match fallback {
                Some((repo, version)) => (repo, None, version),
                None => return Err(resolve_err),
            }
        }
    };

    let key = CacheKey::new(&repo.name, &req.name, version, &flavour_id);
    let lock = opts.cache.lock(&key, opts.lock_timeout)?;
    // Someone else may have materialized the key while we waited.
    if let Ok(loaded) = load_from_key(req, opts, &key, None) {
        return Ok(loaded);
    }
    let result = load_from_key(req, opts, &key, backend.as_deref());
    drop(lock);
    result
}

/// Serves a request from one cache key, fetching what is missing through
/// `backend` when given. Without a backend, any missing artifact fails the
/// attempt (used for the cache-first path).
fn load_from_key(
    req: &LoadRequest,
    opts: &LoadOptions,
    key: &CacheKey,
    backend: Option<&BackendHandle>,
) -> Result<LoadedDataset> {
    let cache = &opts.cache;
    let dir = cache.key_dir(key);
    let work = tempfile::tempdir().map_err(|e| Error::io("tempdir", e))?;

    let deps = ensure_deps(key, cache, backend, work.path())?;
    let header = ensure_header(key, cache, &deps, backend, work.path())?;

    // Table selection: requested patterns plus every misc table.
    let selected = select_tables(&header, req.tables.as_deref())?;
    let order = Dataset::table_parse_order(&header)?;
    let mut dataset = Dataset::new(header);
    for table_id in order.iter().filter(|id| selected.contains(*id)) {
        ensure_table(
            key,
            cache,
            &deps,
            table_id,
            backend,
            work.path(),
            opts.use_hard_links,
        )?;
        let decl = &dataset.header.tables[table_id];
        let misc_labels = dataset.misc_label_sets();
        let ctx = crate::table::SchemeContext::new(&dataset.header.schemes, &misc_labels);
        let table = load_table_cached(&dir, table_id, decl, ctx)?;
        dataset.tables.insert(table_id.clone(), table);
    }

    // Media selection.
    let referenced = dataset.all_referenced_files();
    let matched: Vec<FilePath> = match req.media.as_deref() {
        None => referenced,
        Some(patterns) => {
            let matched: Vec<FilePath> = referenced
                .into_iter()
                .filter(|f| patterns.iter().any(|p| glob_match(p, f.as_str())))
                .collect();
            if matched.is_empty() {
                log::warn!(
                    "media filter matched no files of '{}'; returning an empty dataset",
                    req.name
                );
            }
            matched
        }
    };
    let mut removed_media = Vec::new();
    let mut to_fetch = Vec::new();
    for file in &matched {
        match deps.get(file.as_str()) {
            Some(entry) if entry.removed => removed_media.push(file.to_string()),
            Some(entry) => to_fetch.push(entry.clone()),
            None => {
                return Err(Error::MissingMedia(file.to_string()));
            }
        }
    }

    if !req.only_metadata {
        ensure_media(key, opts, &to_fetch, backend, &req.flavour)?;
        // Final verification: the cache must never serve content whose
        // digest disagrees with the dependency table.
        for entry in &to_fetch {
            if cache.lookup(key, entry.file.as_str(), &deps).is_none() {
                return Err(Error::DigestMismatch {
                    path: entry.file.to_string(),
                    expected: entry.digest.clone(),
                    actual: "missing or invalid cached file".into(),
                });
            }
        }
    }

    // Row filtering for media selections happens on the returned tables;
    // the cached CSVs stay complete.
    let keep: Option<HashSet<&str>> = req
        .media
        .as_deref()
        .map(|_| matched.iter().map(|f| f.as_str()).collect());
    let tables = filter_tables(&dataset.tables, keep.as_ref());

    let full_load = req.tables.is_none() && req.media.is_none() && !req.only_metadata;
    if full_load {
        cache.mark_complete(key)?;
    }

    Ok(LoadedDataset {
        header: dataset.header,
        tables,
        root: dir,
        removed_media,
        deps,
    })
}

fn select_tables(header: &Header, patterns: Option<&[String]>) -> Result<BTreeSet<String>> {
    let mut selected: BTreeSet<String> = BTreeSet::new();
    match patterns {
        None => selected.extend(header.tables.keys().cloned()),
        Some(patterns) => {
            for pattern in patterns {
                let matches: Vec<&String> = header
                    .tables
                    .keys()
                    .filter(|id| glob_match(pattern, id))
                    .collect();
                if matches.is_empty() {
                    return Err(Error::NotFound(format!("table pattern '{pattern}'")));
                }
                selected.extend(matches.into_iter().cloned());
            }
        }
    }
    // Misc tables always load; they may carry labels other tables need.
    for (id, decl) in &header.tables {
        if decl.kind == crate::index::IndexKind::Misc {
            selected.insert(id.clone());
        }
    }
    Ok(selected)
}

fn ensure_deps(
    key: &CacheKey,
    cache: &Cache,
    backend: Option<&BackendHandle>,
    work: &Path,
) -> Result<DependencyTable> {
    let local = cache.key_dir(key).join(DEPS_FILE);
    if let Ok(text) = fs::read_to_string(&local) {
        if let Ok(deps) = DependencyTable::parse_csv(&text, key.version.clone()) {
            return Ok(deps);
        }
    }
    let backend =
        backend.ok_or_else(|| Error::NotFound(format!("cached deps for '{}'", key.name)))?;
    let archive = work.join("deps.zip");
    backend.get_file(&layout::deps(&key.name, &key.version)?, &archive)?;
    let extracted = work.join("deps");
    zip_extract(&archive, &extracted)?;
    let text = fs::read_to_string(extracted.join(DEPS_FILE))
        .map_err(|e| Error::io(extracted.join(DEPS_FILE), e))?;
    let deps = DependencyTable::parse_csv(&text, key.version.clone())?;
    cache.store(key, DEPS_FILE, &extracted.join(DEPS_FILE))?;
    Ok(deps)
}

fn ensure_header(
    key: &CacheKey,
    cache: &Cache,
    deps: &DependencyTable,
    backend: Option<&BackendHandle>,
    work: &Path,
) -> Result<Header> {
    let local = cache.key_dir(key).join("db.yaml");
    if let Ok(text) = fs::read_to_string(&local) {
        let valid = match deps.get("db.yaml") {
            Some(entry) => digest_bytes(text.as_bytes()) == entry.digest,
            None => true,
        };
        if valid {
            if let Ok(header) = parse_header(&text) {
                return Ok(header);
            }
        }
    }
    let backend =
        backend.ok_or_else(|| Error::NotFound(format!("cached header for '{}'", key.name)))?;
    let archive = work.join("header.zip");
    backend.get_file(&layout::header(&key.name, &key.version)?, &archive)?;
    let extracted = work.join("header");
    zip_extract(&archive, &extracted)?;
    let text = fs::read_to_string(extracted.join("db.yaml"))
        .map_err(|e| Error::io(extracted.join("db.yaml"), e))?;
    if let Some(entry) = deps.get("db.yaml") {
        let actual = digest_bytes(text.as_bytes());
        if actual != entry.digest {
            return Err(Error::DigestMismatch {
                path: "db.yaml".into(),
                expected: entry.digest.clone(),
                actual,
            });
        }
    }
    let header = parse_header(&text)?;
    cache.store(key, "db.yaml", &extracted.join("db.yaml"))?;
    Ok(header)
}

fn ensure_table(
    key: &CacheKey,
    cache: &Cache,
    deps: &DependencyTable,
    table_id: &str,
    backend: Option<&BackendHandle>,
    work: &Path,
    link: bool,
) -> Result<()> {
    let file = Header::table_file(table_id);
    let entry = deps
        .get(&file)
        .ok_or_else(|| Error::NotFound(format!("dependency entry for table '{table_id}'")))?
        .clone();
    if cache.lookup(key, &file, deps).is_some() {
        return Ok(());
    }
    for (sibling, source) in cache.sibling_sources(key, &file, deps) {
        if cache
            .adopt_sibling(key, &sibling, &file, &source, link)
            .is_ok()
        {
            return Ok(());
        }
    }
    let backend = backend.ok_or_else(|| Error::NotFound(format!("cached table '{table_id}'")))?;
    let archive = work.join(format!("table-{table_id}.zip"));
    backend.get_file(&layout::archive(&key.name, &entry)?, &archive)?;
    let extracted = work.join(format!("table-{table_id}"));
    zip_extract(&archive, &extracted)?;
    let source = extracted.join(&file);
    let digest = crate::digest::digest_file(&source)?;
    if digest != entry.digest {
        return Err(Error::DigestMismatch {
            path: file,
            expected: entry.digest.clone(),
            actual: digest,
        });
    }
    cache.store(key, &file, &source)?;
    Ok(())
}

/// Materializes the given media entries: cache hit, then sibling-version
/// copy, then backend download plus flavour conversion. Downloads run on a
/// small worker pool; results are promoted into the key folder afterwards,
/// so the final state does not depend on completion order.
fn ensure_media(
    key: &CacheKey,
    opts: &LoadOptions,
    entries: &[DepEntry],
    backend: Option<&BackendHandle>,
    flavour: &Flavour,
) -> Result<()> {
    let cache = &opts.cache;
    let deps_for_lookup = {
        // Lookups only need the entries themselves.
        let mut table = DependencyTable::new(key.version.clone());
        for entry in entries {
            table.insert(entry.clone())?;
        }
        table
    };

    let mut missing: Vec<&DepEntry> = Vec::new();
    for entry in entries {
        if cache
            .lookup(key, entry.file.as_str(), &deps_for_lookup)
            .is_some()
        {
            continue;
        }
        let mut adopted = false;
        for (sibling, source) in cache.sibling_sources(key, entry.file.as_str(), &deps_for_lookup) {
            if cache
                .adopt_sibling(
                    key,
                    &sibling,
                    entry.file.as_str(),
                    &source,
                    opts.use_hard_links,
                )
                .is_ok()
            {
                adopted = true;
                break;
            }
        }
        if !adopted {
            missing.push(entry);
        }
    }
    if missing.is_empty() {
        return Ok(());
    }
    let backend =
        backend.ok_or_else(|| Error::NotFound(format!("cached media for '{}'", key.name)))?;

    let dir = cache.key_dir(key);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let queue: Mutex<Vec<&DepEntry>> = Mutex::new(missing);
    let results: Mutex<Vec<(String, PathBuf, Option<String>)>> = Mutex::new(Vec::new());
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let counter = std::sync::atomic::AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..opts.workers.max(1) {
            scope.spawn(|| loop {
                let entry = match queue.lock().expect("queue").pop() {
                    Some(entry) => entry,
                    None => return,
                };
                let item = counter.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                match fetch_one(key, &dir, backend, entry, flavour, item) {
                    Ok((temp, source_digest)) => results.lock().expect("results").push((
                        entry.file.to_string(),
                        temp,
                        source_digest,
                    )),
                    Err(err) => {
                        failure.lock().expect("failure").get_or_insert(err);
                        queue.lock().expect("queue").clear();
                    }
                }
            });
        }
    });

    if let Some(err) = failure.into_inner().expect("failure") {
        return Err(err);
    }
    let mut results = results.into_inner().expect("results");
    results.sort_by(|a, b| a.0.cmp(&b.0));
    for (path, temp, source_digest) in results {
        cache.promote(key, &path, &temp, source_digest.as_deref())?;
    }
    Ok(())
}

fn fetch_one(
    key: &CacheKey,
    dir: &Path,
    backend: &BackendHandle,
    entry: &DepEntry,
    flavour: &Flavour,
    item: usize,
) -> Result<(PathBuf, Option<String>)> {
    let archive = dir.join(format!(
        ".download.{}.{item}.zip",
        crate::cache::temp_suffix()
    ));
    backend.get_file(&layout::archive(&key.name, entry)?, &archive)?;
    let bytes = zip_extract_single(&archive)?;
    let _ = fs::remove_file(&archive);
    let actual = digest_bytes(&bytes);
    if actual != entry.digest {
        return Err(Error::DigestMismatch {
            path: entry.file.to_string(),
            expected: entry.digest.clone(),
            actual,
        });
    }
    let raw = dir.join(format!(
        ".incoming.{}.{item}.raw",
        crate::cache::temp_suffix()
    ));
    fs::write(&raw, &bytes).map_err(|e| Error::io(&raw, e))?;
    if key.is_raw() {
        return Ok((raw, None));
    }
    let converted = dir.join(format!(
        ".incoming.{}.{item}.wav",
        crate::cache::temp_suffix()
    ));
    convert(&raw, flavour, &converted)?;
    let _ = fs::remove_file(&raw);
    Ok((converted, Some(entry.digest.clone())))
}

fn filter_tables(
    tables: &BTreeMap<String, Table>,
    keep: Option<&HashSet<&str>>,
) -> BTreeMap<String, Table> {
    let Some(keep) = keep else {
        return tables.clone();
    };
    tables
        .iter()
        .map(|(id, table)| {
            if table.is_misc() {
                return (id.clone(), table.clone());
            }
            let (index, rows) = table.index.filter_files(|f| keep.contains(f.as_str()));
            let columns: IndexMap<String, Column> = table
                .columns
                .iter()
                .map(|(col_id, column)| {
                    (
                        col_id.clone(),
                        Column {
                            scheme_id: column.scheme_id.clone(),
                            rater_id: column.rater_id.clone(),
                            values: rows.iter().map(|&i| column.values[i].clone()).collect(),
                        },
                    )
                })
                .collect();
            (
                id.clone(),
                Table {
                    id: table.id.clone(),
                    index,
                    columns,
                    split: table.split.clone(),
                },
            )
        })
        .collect()
}

/// One row of the dataset catalog.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSummary {
    pub repository: String,
    pub name: String,
    pub version: String,
    pub source: String,
    pub usage: String,
    pub description: Option<String>,
    pub license: Option<String>,
    pub schemes: Vec<String>,
}

/// Lists datasets across all repositories, one row per version or only the
/// latest per dataset. Unreachable repositories are skipped with a warning.
pub fn available(repositories: &[Repository], only_latest: bool) -> Result<Vec<DatasetSummary>> {
    if repositories.is_empty() {
        return Err(Error::NoRepositories);
    }
    let mut rows = Vec::new();
    for repo in repositories {
        let listing = repo.connect().and_then(|backend| {
            backend
                .ls(&crate::backend::BackendPath::root())
                .map(|paths| (backend, paths))
        });
        let (backend, paths) = match listing {
            Ok(ok) => ok,
            Err(err) => {
                log::warn!("skipping unreachable repository '{}': {err}", repo.name);
                continue;
            }
        };
        let mut versions_by_name: BTreeMap<String, Vec<Version>> = BTreeMap::new();
        for path in paths {
            let segments = path.segments();
            if segments.len() == 3 && segments[2] == "db.deps.zip" {
                versions_by_name
                    .entry(segments[0].clone())
                    .or_default()
                    .push(Version::new(segments[1].clone()));
            }
        }
        for (name, mut versions) in versions_by_name {
            versions.sort();
            let chosen: Vec<&Version> = if only_latest {
                versions.last().into_iter().collect()
            } else {
                versions.iter().collect()
            };
            for version in chosen {
                match fetch_header_only(&backend, &name, version) {
                    Ok(header) => rows.push(DatasetSummary {
                        repository: repo.name.clone(),
                        name: name.clone(),
                        version: version.as_str().to_string(),
                        source: header.source.clone(),
                        usage: header.usage.clone(),
                        description: header.description.clone(),
                        license: header.license.clone(),
                        schemes: header.schemes.keys().cloned().collect(),
                    }),
                    Err(err) => {
                        log::warn!("skipping '{name}' {version}: {err}");
                    }
                }
            }
        }
    }
    rows.sort_by(|a, b| (&a.name, &a.version).cmp(&(&b.name, &b.version)));
    Ok(rows)
}

fn fetch_header_only(backend: &BackendHandle, name: &str, version: &Version) -> Result<Header> {
    let work = tempfile::tempdir().map_err(|e| Error::io("tempdir", e))?;
    let archive = work.path().join("header.zip");
    backend.get_file(&layout::header(name, version)?, &archive)?;
    let extracted = work.path().join("header");
    zip_extract(&archive, &extracted)?;
    let text = fs::read_to_string(extracted.join("db.yaml"))
        .map_err(|e| Error::io(extracted.join("db.yaml"), e))?;
    parse_header(&text)
}

/// Fetches only the header of a dataset version: exactly one download, no
/// tables, no media.
pub fn info_header(
    name: &str,
    version: Option<&str>,
    repositories: &[Repository],
) -> Result<(Header, Version)> {
    let pinned = version.map(Version::new);
    let (_, backend) = crate::backend::resolve_repository(name, pinned.as_ref(), repositories)?;
    let version = match pinned {
        Some(v) => v,
        None => layout::list_versions(&backend, name)?
            .last()
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("any version of '{name}'")))?,
    };
    Ok((fetch_header_only(&backend, name, &version)?, version))
}

/// Scheme ids declared by a dataset version.
pub fn info_schemes(
    name: &str,
    version: Option<&str>,
    repositories: &[Repository],
) -> Result<Vec<String>> {
    let (header, _) = info_header(name, version, repositories)?;
    Ok(header.schemes.keys().cloned().collect())
}

/// Names of datasets whose latest version declares the given scheme, sorted.
pub fn search_by_scheme(scheme_id: &str, repositories: &[Repository]) -> Result<Vec<String>> {
    let rows = available(repositories, true)?;
    let mut names: Vec<String> = rows
        .into_iter()
        .filter(|row| row.schemes.iter().any(|s| s == scheme_id))
        .map(|row| row.name)
        .collect();
    names.sort();
    names.dedup();
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glob_matching() {
        assert!(glob_match("emotion", "emotion"));
        assert!(!glob_match("emotion", "emotion.train"));
        assert!(glob_match("emotion*", "emotion.train"));
        assert!(glob_match("*", "anything"));
        assert!(glob_match("wav/*.wav", "wav/03a01Fa.wav"));
        assert!(!glob_match("wav/*.wav", "other/03a01Fa.wav"));
        assert!(glob_match("*a*", "banana"));
        assert!(!glob_match("*z*", "banana"));
    }
}
