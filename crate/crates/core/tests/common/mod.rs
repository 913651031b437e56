//! Shared fixtures: small emodb-style datasets published into throwaway
//! file-system repositories.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use audvault_core::audio::{write_wav, AudioBuffer, SampleFormat};
use audvault_core::cache::Cache;
use audvault_core::dataset::Dataset;
use audvault_core::header::{ColumnDecl, Header, TableDecl};
use audvault_core::index::IndexKind;
use audvault_core::loader::LoadOptions;
use audvault_core::scheme::Scheme;
use audvault_core::value::{Dtype, Value};
use audvault_core::Repository;
use indexmap::IndexMap;
use tempfile::TempDir;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

/// Unique suffix so parallel tests never share repository names or hosts.
pub fn unique(prefix: &str) -> String {
    format!("{prefix}-{}", NEXT_ID.fetch_add(1, Ordering::SeqCst))
}

pub fn tone(seed: u64, frames: usize) -> Vec<f64> {
    (0..frames)
        .map(|i| 0.4 * ((i as f64 + seed as f64 * 37.0) * 0.037).sin())
        .collect()
}

pub fn write_tone(path: &Path, seed: u64, rate: u32, channels: usize) {
    let frames = rate as usize / 8;
    let buf = AudioBuffer::new(
        (0..channels)
            .map(|c| tone(seed + c as u64, frames))
            .collect(),
        rate,
    );
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    write_wav(path, &buf, SampleFormat::Int16).unwrap();
}

/// Writes an emotion-labelled filewise dataset into `root`.
pub fn make_root(root: &Path, name: &str, files: &[(&str, u64)]) {
    make_root_with_rate(root, name, files, 16_000, 1)
}

pub fn make_root_with_rate(
    root: &Path,
    name: &str,
    files: &[(&str, u64)],
    rate: u32,
    channels: usize,
) {
    let mut header = Header::new(name, "https://example.org/datasets", "research");
    header.languages = vec!["german".into()];
    header.schemes.insert(
        "emotion".into(),
        Scheme::with_labels(
            Dtype::String,
            vec![
                Value::Str("happy".into()),
                Value::Str("angry".into()),
                Value::Str("neutral".into()),
            ],
        ),
    );
    let mut columns = IndexMap::new();
    columns.insert(
        "emotion".to_string(),
        ColumnDecl {
            scheme: Some("emotion".into()),
            rater: None,
        },
    );
    header.tables.insert(
        "emotion".into(),
        TableDecl {
            kind: IndexKind::Filewise,
            misc_index: None,
            split: None,
            columns,
        },
    );
    let labels = ["happy", "angry", "neutral"];
    let mut csv = String::from("file,emotion\n");
    for (i, (file, _)) in files.iter().enumerate() {
        csv.push_str(&format!("{file},{}\n", labels[i % labels.len()]));
    }
    let mut dataset = Dataset::new(header);
    dataset.insert_table_csv("emotion", &csv).unwrap();
    dataset.write_to(root).unwrap();
    for (file, seed) in files {
        write_tone(&root.join(file), *seed, rate, channels);
    }
}

/// A throwaway repository plus cache plus dataset root.
pub struct Fixture {
    pub dir: TempDir,
    pub root: PathBuf,
    pub repo: Repository,
    pub cache_root: PathBuf,
}

impl Fixture {
    pub fn new() -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let host = dir.path().join("host");
        std::fs::create_dir_all(&host).unwrap();
        let repo = Repository::new(unique("repo"), host.to_str().unwrap(), "file-system");
        let root = dir.path().join("dataset");
        let cache_root = dir.path().join("cache");
        Fixture {
            dir,
            root,
            repo,
            cache_root,
        }
    }

    pub fn opts(&self) -> LoadOptions {
        let mut opts = LoadOptions::new(vec![self.repo.clone()], Cache::new(&self.cache_root));
        opts.lock_timeout = std::time::Duration::from_secs(30);
        opts
    }

    /// A second, independent cache for fresh-load scenarios.
    pub fn opts_with_fresh_cache(&self, label: &str) -> LoadOptions {
        let mut opts = LoadOptions::new(
            vec![self.repo.clone()],
            Cache::new(self.dir.path().join(format!("cache-{label}"))),
        );
        opts.lock_timeout = std::time::Duration::from_secs(30);
        opts
    }
}

/// Counts files under a folder with the given extension.
pub fn count_files(dir: &Path, extension: &str) -> usize {
    walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .filter(|e| {
            e.path()
                .extension()
                .map(|x| x == extension)
                .unwrap_or(false)
        })
        .count()
}
