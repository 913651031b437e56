//! End-to-end tests of the `audvault` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use audvault_core::audio::{write_wav, AudioBuffer, SampleFormat};
use audvault_core::dataset::Dataset;
use audvault_core::header::{ColumnDecl, Header, TableDecl};
use audvault_core::index::IndexKind;
use audvault_core::scheme::Scheme;
use audvault_core::value::{Dtype, Value};
use indexmap::IndexMap;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_audvault"))
}

struct CliFixture {
    dir: tempfile::TempDir,
    config: PathBuf,
    cache: PathBuf,
    root: PathBuf,
}

impl CliFixture {
    fn new() -> CliFixture {
        let dir = tempfile::tempdir().unwrap();
        let host = dir.path().join("host");
        fs::create_dir_all(&host).unwrap();
        let cache = dir.path().join("cache");
        let config = dir.path().join("audvault.yaml");
        fs::write(
            &config,
            format!(
                "repositories:\n- name: local\n  host: {}\n  backend: file-system\ncache_root: {}\n",
                host.display(),
                cache.display()
            ),
        )
        .unwrap();
        let root = dir.path().join("dataset");
        CliFixture {
            dir,
            config,
            cache,
            root,
        }
    }

    fn run(&self, args: &[&str]) -> Output {
        bin()
            .arg("--config")
            .arg(&self.config)
            .args(args)
            .output()
            .expect("binary runs")
    }

    fn run_ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "command {:?} failed:\nstdout: {}\nstderr: {}",
            args,
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn write_tone(path: &Path, seed: u64) {
    let samples: Vec<f64> = (0..2_000)
        .map(|i| 0.4 * ((i as f64 + seed as f64 * 37.0) * 0.037).sin())
        .collect();
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    write_wav(
        path,
        &AudioBuffer::new(vec![samples.clone(), samples], 16_000),
        SampleFormat::Int16,
    )
    .unwrap();
}

fn make_root(root: &Path, name: &str, files: &[&str]) {
    let mut header = Header::new(name, "https://example.org/datasets", "research");
    header.description = Some("CLI test dataset".into());
    header.license = Some("CC0-1.0".into());
    header.schemes.insert(
        "emotion".into(),
        Scheme::with_labels(
            Dtype::String,
            vec![Value::Str("happy".into()), Value::Str("angry".into())],
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
    let mut csv = String::from("file,emotion\n");
    for (i, file) in files.iter().enumerate() {
        csv.push_str(&format!("{file},{}\n", ["happy", "angry"][i % 2]));
    }
    let mut dataset = Dataset::new(header);
    dataset.insert_table_csv("emotion", &csv).unwrap();
    dataset.write_to(root).unwrap();
    for (i, file) in files.iter().enumerate() {
        write_tone(&root.join(file), i as u64);
    }
}

#[test]
fn publish_load_info_search_datacard_flow() {
    let fx = CliFixture::new();
    make_root(&fx.root, "cliemo", &["wav/a.wav", "wav/b.wav"]);

    let out = fx.run_ok(&[
        "publish",
        fx.root.to_str().unwrap(),
        "1.0.0",
        "--repo",
        "local",
    ]);
    assert!(out.contains("published version 1.0.0"), "{out}");

    // available --json round-trips through a JSON parser.
    let out = fx.run_ok(&["available", "--only-latest", "--json"]);
    let rows: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(rows[0]["name"], "cliemo");
    assert_eq!(rows[0]["version"], "1.0.0");

    let out = fx.run_ok(&["info", "cliemo", "--json"]);
    let info: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(info["name"], "cliemo");
    assert_eq!(info["source"], "https://example.org/datasets");
    assert_eq!(info["usage"], "research");
    assert_eq!(info["schemes"][0], "emotion");

    let out = fx.run_ok(&["search", "emotion"]);
    assert_eq!(out.trim(), "cliemo");
    let out = fx.run_ok(&["search", "snr"]);
    assert_eq!(out.trim(), "");

    // load prints the materialized folder; the folder is self-contained.
    let out = fx.run_ok(&["load", "cliemo", "--version", "1.0.0"]);
    let loaded = PathBuf::from(out.trim());
    assert!(loaded.starts_with(&fx.cache));
    assert!(loaded.join("db.yaml").is_file());
    assert!(loaded.join("db.emotion.csv").is_file());
    assert!(loaded.join("wav/a.wav").is_file());

    // Flavoured load lands in a different folder.
    let out = fx.run_ok(&[
        "load",
        "cliemo",
        "--version",
        "1.0.0",
        "--sampling-rate",
        "8000",
        "--mixdown",
    ]);
    let flavoured = PathBuf::from(out.trim());
    assert_ne!(flavoured, loaded);
    let info = audvault_core::audio::scan_wav(&flavoured.join("wav/a.wav")).unwrap();
    assert_eq!((info.channels, info.sample_rate), (1, 8_000));

    // Partial load via media filter.
    let out = fx.run_ok(&[
        "load",
        "cliemo",
        "--version",
        "1.0.0",
        "--media",
        "wav/a.wav",
    ]);
    assert!(!out.trim().is_empty());

    let card = fx.run_ok(&["datacard", "cliemo"]);
    assert!(card.starts_with("# cliemo"));
    assert!(card.contains("| emotion | string |"));

    // load-to materializes an editable copy byte-identical to the root.
    let copy = fx.dir.path().join("copy");
    fx.run_ok(&["load-to", copy.to_str().unwrap(), "cliemo"]);
    assert_eq!(
        fs::read(fx.root.join("wav/b.wav")).unwrap(),
        fs::read(copy.join("wav/b.wav")).unwrap()
    );

    // remove-media flags the file; subsequent loads exclude it.
    let out = fx.run_ok(&["remove-media", "cliemo", "wav/b.wav", "--repo", "local"]);
    assert!(out.contains("removed 1 file(s)"), "{out}");
    fx.run_ok(&["cache-clear"]);
    let out = fx.run(&["load", "cliemo", "--version", "1.0.0"]);
    assert!(out.status.success());
    let loaded = PathBuf::from(String::from_utf8(out.stdout).unwrap().trim().to_string());
    assert!(loaded.join("wav/a.wav").is_file());
    assert!(!loaded.join("wav/b.wav").exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("wav/b.wav"));

    // cache-clear removes the cache root.
    fx.run_ok(&["cache-clear"]);
    assert!(!fx.cache.exists());
}

#[test]
fn user_errors_exit_with_code_one() {
    let fx = CliFixture::new();

    // Unknown subcommand prints usage and exits 1.
    let out = fx.run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    // Unknown dataset.
    let out = fx.run(&["info", "nope"]);
    assert_eq!(out.status.code(), Some(1));

    // Unknown repository name.
    make_root(&fx.root, "exitcodes", &["wav/a.wav"]);
    let out = fx.run(&[
        "publish",
        fx.root.to_str().unwrap(),
        "1.0.0",
        "--repo",
        "nope",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // Publishing the same version twice.
    fx.run_ok(&[
        "publish",
        fx.root.to_str().unwrap(),
        "1.0.0",
        "--repo",
        "local",
    ]);
    let out = fx.run(&[
        "publish",
        fx.root.to_str().unwrap(),
        "1.0.0",
        "--repo",
        "local",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("already published"));
}

#[test]
fn missing_repositories_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.yaml");
    fs::write(&config, "{}\n").unwrap();
    let out = bin()
        .arg("--config")
        .arg(&config)
        .arg("available")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no repositories configured"));
}

#[test]
fn help_and_version_exit_zero() {
    for flag in ["--help", "--version"] {
        let out = bin().arg(flag).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{flag}");
    }
}
