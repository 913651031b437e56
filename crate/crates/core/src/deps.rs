//! The dependency table: one entry per file recording its digest, media
//! properties, the version in which its content was last uploaded, and a
//! removal flag. Diffing a dataset root against the previous version's
//! table is what makes publishing incremental: only new or altered files
//! are uploaded, everything else keeps a dependency on its origin version.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::audio::scan_wav;
use crate::dataset::Dataset;
use crate::digest::{digest_file, ZERO_DIGEST};
use crate::duration::Duration;
use crate::error::{Error, Result};
use crate::header::Header;
use crate::index::FilePath;
use crate::version::Version;

/// File name of the dependency table inside a dataset folder; stored as
/// `db.deps.zip` on the backend.
pub const DEPS_FILE: &str = "db.deps.csv";

/// Fixed column order of the dependency CSV.
const COLUMNS: &str = "file,kind,archive,digest,origin_version,removed,bit_depth,channels,sampling_rate,duration,format";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepKind {
    Media,
    Table,
    Header,
    Attachment,
}

impl DepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DepKind::Media => "media",
            DepKind::Table => "table",
            DepKind::Header => "header",
            DepKind::Attachment => "attachment",
        }
    }

    fn parse(text: &str) -> Result<DepKind> {
        match text {
            "media" => Ok(DepKind::Media),
            "table" => Ok(DepKind::Table),
            "header" => Ok(DepKind::Header),
            "attachment" => Ok(DepKind::Attachment),
            other => Err(Error::DepsCsv(format!("unknown kind '{other}'"))),
        }
    }
}

/// Audio properties captured when a media file is published.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MediaProps {
    pub bit_depth: u16,
    pub channels: u16,
    pub sampling_rate: u32,
    pub duration: Duration,
}

/// Reads bit depth, channels, sampling rate, and duration from a WAV file
/// without decoding samples.
pub fn scan_media(path: &Path) -> Result<MediaProps> {
    let info = scan_wav(path)?;
    Ok(MediaProps {
        bit_depth: info.bit_depth(),
        channels: info.channels,
        sampling_rate: info.sample_rate,
        duration: info.duration(),
    })
}

/// One row of the dependency table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepEntry {
    pub file: FilePath,
    pub kind: DepKind,
    /// Backend object below `<name>/<origin_version>/`, without `.zip`.
    pub archive: String,
    pub digest: String,
    pub origin_version: Version,
    pub removed: bool,
    pub bit_depth: Option<u16>,
    pub channels: Option<u16>,
    pub sampling_rate: Option<u32>,
    pub duration: Option<Duration>,
    pub format: String,
}

impl DepEntry {
    /// Backend path of this entry's archive relative to the dataset folder.
    pub fn archive_object(&self) -> String {
        format!("{}/{}.zip", self.origin_version, self.archive)
    }
}

/// Archive id of a media file with the given content digest;
/// content-addressing makes dedup automatic, even across renames.
pub fn media_archive(digest: &str) -> String {
    format!("media/{}/{}", &digest[..2], digest)
}

/// Archive id of a table.
pub fn table_archive(table_id: &str) -> String {
    format!("meta/{table_id}")
}

/// The per-version dependency table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DependencyTable {
    entries: BTreeMap<String, DepEntry>,
    dataset_version: Version,
}

impl DependencyTable {
    pub fn new(dataset_version: Version) -> DependencyTable {
        DependencyTable {
            entries: BTreeMap::new(),
            dataset_version,
        }
    }

    pub fn dataset_version(&self) -> &Version {
        &self.dataset_version
    }

    pub fn insert(&mut self, entry: DepEntry) -> Result<()> {
        if entry.origin_version > self.dataset_version {
            return Err(Error::DepsCsv(format!(
                "entry '{}' has origin {} beyond dataset version {}",
                entry.file, entry.origin_version, self.dataset_version
            )));
        }
        self.entries.insert(entry.file.to_string(), entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, path: &str) -> Option<&DepEntry> {
        self.entries.get(path)
    }

    fn lookup(&self, path: &str) -> Result<&DepEntry> {
        self.entries
            .get(path)
            .ok_or_else(|| Error::NotFound(format!("dependency entry '{path}'")))
    }

    pub fn entries(&self) -> impl Iterator<Item = &DepEntry> {
        self.entries.values()
    }

    pub fn entries_mut(&mut self) -> impl Iterator<Item = &mut DepEntry> {
        self.entries.values_mut()
    }

    /// Media file paths, sorted.
    pub fn media(&self) -> Vec<&FilePath> {
        self.entries
            .values()
            .filter(|e| e.kind == DepKind::Media)
            .map(|e| &e.file)
            .collect()
    }

    /// Table ids, sorted.
    pub fn tables(&self) -> Vec<String> {
        self.entries
            .values()
            .filter(|e| e.kind == DepKind::Table)
            .filter_map(|e| {
                e.file
                    .as_str()
                    .strip_prefix("db.")
                    .and_then(|rest| rest.strip_suffix(".csv"))
                    .map(str::to_string)
            })
            .collect()
    }

    pub fn origin_version(&self, path: &str) -> Result<&Version> {
        Ok(&self.lookup(path)?.origin_version)
    }

    pub fn sampling_rate(&self, path: &str) -> Result<Option<u32>> {
        Ok(self.lookup(path)?.sampling_rate)
    }

    pub fn is_removed(&self, path: &str) -> Result<bool> {
        Ok(self.lookup(path)?.removed)
    }

    /// Serializes to CSV: fixed column order, rows sorted by path. Equal
    /// tables produce byte-identical output.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 + self.entries.len() * 96);
        out.push_str(COLUMNS);
        out.push('\n');
        for entry in self.entries.values() {
            let opt = |v: Option<String>| v.unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                entry.file,
                entry.kind.as_str(),
                entry.archive,
                entry.digest,
                entry.origin_version,
                entry.removed,
                opt(entry.bit_depth.map(|v| v.to_string())),
                opt(entry.channels.map(|v| v.to_string())),
                opt(entry.sampling_rate.map(|v| v.to_string())),
                opt(entry.duration.map(|v| v.to_string())),
                entry.format,
            );
        }
        out
    }

    /// Parses the CSV form. The dataset version is not a column; it comes
    /// from the version folder the table was fetched for.
    pub fn parse_csv(text: &str, dataset_version: Version) -> Result<DependencyTable> {
        let mut lines = text.lines();
        match lines.next() {
            Some(header) if header == COLUMNS => {}
            other => {
                return Err(Error::DepsCsv(format!(
                    "unexpected column header {other:?}"
                )))
            }
        }
        let mut table = DependencyTable::new(dataset_version);
        for line in lines {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 11 {
                return Err(Error::DepsCsv(format!(
                    "row has {} cells, expected 11",
                    cells.len()
                )));
            }
            let parse_opt = |cell: &str, what: &str| -> Result<Option<u64>> {
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse()
                        .map(Some)
                        .map_err(|_| Error::DepsCsv(format!("invalid {what} '{cell}'")))
                }
            };
            let entry = DepEntry {
                file: FilePath::new(cells[0])?,
                kind: DepKind::parse(cells[1])?,
                archive: cells[2].to_string(),
                digest: cells[3].to_string(),
                origin_version: Version::new(cells[4]),
                removed: match cells[5] {
                    "true" => true,
                    "false" => false,
                    other => return Err(Error::DepsCsv(format!("invalid removed flag '{other}'"))),
                },
                bit_depth: parse_opt(cells[6], "bit depth")?.map(|v| v as u16),
                channels: parse_opt(cells[7], "channels")?.map(|v| v as u16),
                sampling_rate: parse_opt(cells[8], "sampling rate")?.map(|v| v as u32),
                duration: if cells[9].is_empty() {
                    None
                } else {
                    Some(Duration::parse(cells[9])?)
                },
                format: cells[10].to_string(),
            };
            if entry.digest.len() != 32 && !(entry.removed && entry.digest == ZERO_DIGEST) {
                return Err(Error::DepsCsv(format!(
                    "invalid digest '{}' for '{}'",
                    entry.digest, entry.file
                )));
            }
            table.insert(entry)?;
        }
        Ok(table)
    }
}

/// The classification of a dataset root against the previous version.
///
/// The four lists are disjoint; added, modified, and unchanged together are
/// exactly the files present in the root. Files recorded in the previous
/// version that are locally absent but still referenced by the root's tables
/// appear in no list: they are carried into the new version unchanged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSet {
    pub added: Vec<FilePath>,
    pub modified: Vec<FilePath>,
    pub unchanged: Vec<FilePath>,
    pub deleted: Vec<FilePath>,
}

/// What the diff walker found for one root file.
#[derive(Debug, Clone)]
pub struct FileMeta {
    pub kind: DepKind,
    pub digest: String,
    pub media: Option<MediaProps>,
}

/// Digest and classification of every publishable file in a dataset root.
/// Hidden files, `db.deps.csv`, snapshot files, and declared attachment
/// paths are skipped.
pub fn scan_root(root: &Path, dataset: &Dataset) -> Result<BTreeMap<String, FileMeta>> {
    let mut out = BTreeMap::new();
    let table_files: HashSet<String> = dataset
        .header
        .tables
        .keys()
        .map(|id| Header::table_file(id))
        .collect();
    let attachment_files: HashSet<String> = dataset
        .header
        .attachments
        .values()
        .map(|p| p.to_string())
        .collect();

    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            Error::io(
                root,
                e.into_io_error()
                    .unwrap_or_else(|| std::io::Error::other("walk error")),
            )
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry
            .path()
            .strip_prefix(root)
            .expect("walked path below root");
        let rel_str = rel
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        if rel_str.split('/').any(|seg| seg.starts_with('.')) {
            continue;
        }
        if rel_str == DEPS_FILE || (rel_str.starts_with("db.") && rel_str.ends_with(".snapshot")) {
            continue;
        }
        if attachment_files.contains(&rel_str) {
            continue;
        }
        let digest = digest_file(entry.path())?;
        let meta = if rel_str == "db.yaml" {
            FileMeta {
                kind: DepKind::Header,
                digest,
                media: None,
            }
        } else if table_files.contains(&rel_str) {
            FileMeta {
                kind: DepKind::Table,
                digest,
                media: None,
            }
        } else if rel_str.ends_with(".wav") {
            FileMeta {
                kind: DepKind::Media,
                digest,
                media: Some(scan_media(entry.path())?),
            }
        } else {
            return Err(Error::UnexpectedFile(rel_str));
        };
        out.insert(rel_str, meta);
    }
    Ok(out)
}

/// Classifies the files of a dataset root against the previous version's
/// dependency table. With no previous version, everything is added.
pub fn diff(root: &Path, previous: Option<&DependencyTable>) -> Result<ChangeSet> {
    let dataset = Dataset::from_root(root)?;
    let scanned = scan_root(root, &dataset)?;
    Ok(diff_scanned(&dataset, &scanned, previous))
}

/// Diff over an already scanned root; see [`diff`].
pub fn diff_scanned(
    dataset: &Dataset,
    scanned: &BTreeMap<String, FileMeta>,
    previous: Option<&DependencyTable>,
) -> ChangeSet {
    let mut cs = ChangeSet::default();
    let Some(previous) = previous else {
        cs.added = scanned
            .keys()
            .map(|p| FilePath::new(p).expect("scanned path"))
            .collect();
        return cs;
    };

    for (path, meta) in scanned {
        let file = FilePath::new(path).expect("scanned path");
        match previous.get(path) {
            Some(entry) if !entry.removed && entry.digest == meta.digest => cs.unchanged.push(file),
            Some(_) => cs.modified.push(file),
            None => cs.added.push(file),
        }
    }

    let referenced: BTreeSet<String> = dataset
        .all_referenced_files()
        .into_iter()
        .map(|f| f.to_string())
        .collect();
    for entry in previous.entries() {
        let path = entry.file.as_str();
        if scanned.contains_key(path) || entry.removed {
            continue;
        }
        // Locally absent but still referenced files are carried, not deleted.
        if !referenced.contains(path) {
            cs.deleted.push(entry.file.clone());
        }
    }
    cs
}

/// Builds the new version's dependency table from a change set.
///
/// Unchanged entries keep their origin version; added and modified files
/// get fresh digests, metadata, and the new version as origin; deleted
/// entries are dropped; removed entries and still-referenced absent files
/// are carried forward. A new media file whose digest matches an existing
/// entry reuses that entry's archive and origin, so renames upload nothing.
pub fn apply(
    previous: Option<&DependencyTable>,
    cs: &ChangeSet,
    new_version: &Version,
    meta: &BTreeMap<String, FileMeta>,
) -> Result<DependencyTable> {
    let mut table = DependencyTable::new(new_version.clone());

    if let Some(previous) = previous {
        let in_root: HashSet<&str> = cs
            .added
            .iter()
            .chain(&cs.modified)
            .chain(&cs.unchanged)
            .map(|f| f.as_str())
            .collect();
        let deleted: HashSet<&str> = cs.deleted.iter().map(|f| f.as_str()).collect();
        for entry in previous.entries() {
            let path = entry.file.as_str();
            if deleted.contains(path) {
                continue;
            }
            if in_root.contains(path) {
                if cs.unchanged.iter().any(|f| f.as_str() == path) {
                    table.insert(entry.clone())?;
                }
                // Added/modified paths are rebuilt below.
            } else {
                table.insert(entry.clone())?;
            }
        }
    }

    for file in cs.added.iter().chain(&cs.modified) {
        let path = file.as_str();
        let file_meta = meta
            .get(path)
            .ok_or_else(|| Error::NotFound(format!("scan result for '{path}'")))?;
        let (archive, origin) = match file_meta.kind {
            DepKind::Media => {
                let reusable = previous.and_then(|prev| {
                    prev.entries().find(|e| {
                        e.kind == DepKind::Media && !e.removed && e.digest == file_meta.digest
                    })
                });
                match reusable {
                    Some(e) => (e.archive.clone(), e.origin_version.clone()),
                    None => (media_archive(&file_meta.digest), new_version.clone()),
                }
            }
            DepKind::Table => {
                let table_id = path
                    .strip_prefix("db.")
                    .and_then(|rest| rest.strip_suffix(".csv"))
                    .ok_or_else(|| Error::DepsCsv(format!("not a table file: '{path}'")))?;
                (table_archive(table_id), new_version.clone())
            }
            DepKind::Header => ("db.yaml".to_string(), new_version.clone()),
            DepKind::Attachment => {
                return Err(Error::DepsCsv("attachment content is not handled".into()))
            }
        };
        let format = match file_meta.kind {
            DepKind::Media => "wav",
            DepKind::Table => "csv",
            DepKind::Header => "yaml",
            DepKind::Attachment => "",
        };
        table.insert(DepEntry {
            file: file.clone(),
            kind: file_meta.kind,
            archive,
            digest: file_meta.digest.clone(),
            origin_version: origin,
            removed: false,
            bit_depth: file_meta.media.map(|m| m.bit_depth),
            channels: file_meta.media.map(|m| m.channels),
            sampling_rate: file_meta.media.map(|m| m.sampling_rate),
            duration: file_meta.media.map(|m| m.duration),
            format: format.to_string(),
        })?;
    }
    Ok(table)
}

/// Reads `db.deps.csv` from a folder.
pub fn read_deps_file(folder: &Path, dataset_version: Version) -> Result<DependencyTable> {
    let path = folder.join(DEPS_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    DependencyTable::parse_csv(&text, dataset_version)
}
