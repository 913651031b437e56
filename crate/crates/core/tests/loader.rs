//! End-to-end load scenarios against a file-system repository.

mod common;

use std::time::Duration as StdDuration;

use audvault_core::audio::scan_wav;
use audvault_core::loader::{self, LoadRequest};
use audvault_core::publisher::{self, PreviousVersion};
use audvault_core::{Error, Flavour, Index, Version};
use common::{count_files, make_root, make_root_with_rate, write_tone, Fixture};

#[test]
fn full_load_materializes_a_self_contained_copy() {
    let fx = Fixture::new();
    make_root(&fx.root, "emodb", &[("wav/a.wav", 1), ("wav/b.wav", 2)]);
    publisher::publish(&fx.root, "1.3.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let req = LoadRequest {
        version: Some("1.3.0".into()),
        ..LoadRequest::new("emodb")
    };
    let db = loader::load(&req, &fx.opts()).unwrap();
    assert_eq!(db.tables.len(), 1);
    assert!(db.root.join("wav/a.wav").is_file());
    assert!(db.root.join("db.emotion.csv").is_file());
    assert!(db.root.join("db.yaml").is_file());
    assert!(db.removed_media.is_empty());

    // Annotations come back as file/label pairs.
    let frame = db.dataset().get("emotion", None, None).unwrap();
    assert_eq!(frame.len(), 2);
    assert_eq!(
        frame.columns["emotion"][0],
        Some(audvault_core::Value::Str("happy".into()))
    );
}

#[test]
fn only_metadata_skips_media_entirely() {
    let fx = Fixture::new();
    make_root(&fx.root, "meta-only", &[("wav/a.wav", 1), ("wav/b.wav", 2)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let req = LoadRequest {
        version: Some("1.0.0".into()),
        only_metadata: true,
        ..LoadRequest::new("meta-only")
    };
    let db = loader::load(&req, &fx.opts()).unwrap();
    assert_eq!(count_files(&db.root, "wav"), 0);
    assert_eq!(db.tables["emotion"].index.len(), 2);
}

#[test]
fn media_filter_drops_rows_and_limits_downloads() {
    let fx = Fixture::new();
    make_root(
        &fx.root,
        "filtered",
        &[
            ("wav/03a01Fa.wav", 1),
            ("wav/other.wav", 2),
            ("wav/third.wav", 3),
        ],
    );
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let req = LoadRequest {
        version: Some("1.0.0".into()),
        media: Some(vec!["wav/03a01Fa.wav".into()]),
        ..LoadRequest::new("filtered")
    };
    let db = loader::load(&req, &fx.opts()).unwrap();
    assert_eq!(count_files(&db.root, "wav"), 1);
    let table = &db.tables["emotion"];
    assert_eq!(table.index.len(), 1);
    match &table.index {
        Index::Filewise(files) => assert_eq!(files[0].as_str(), "wav/03a01Fa.wav"),
        other => panic!("unexpected index {other:?}"),
    }
}

#[test]
fn media_filter_with_no_match_yields_an_empty_dataset() {
    let fx = Fixture::new();
    make_root(&fx.root, "nomatch", &[("wav/a.wav", 1)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let req = LoadRequest {
        version: Some("1.0.0".into()),
        media: Some(vec!["nope/*.wav".into()]),
        ..LoadRequest::new("nomatch")
    };
    let db = loader::load(&req, &fx.opts()).unwrap();
    assert_eq!(db.tables["emotion"].index.len(), 0);
    assert_eq!(count_files(&db.root, "wav"), 0);
}

#[test]
fn table_patterns_select_subsets_and_unknown_patterns_error() {
    let fx = Fixture::new();
    make_root(&fx.root, "patterns", &[("wav/a.wav", 1)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let req = LoadRequest {
        version: Some("1.0.0".into()),
        tables: Some(vec!["emo*".into()]),
        ..LoadRequest::new("patterns")
    };
    let db = loader::load(&req, &fx.opts()).unwrap();
    assert!(db.tables.contains_key("emotion"));

    let req = LoadRequest {
        version: Some("1.0.0".into()),
        tables: Some(vec!["nope".into()]),
        ..LoadRequest::new("patterns")
    };
    assert!(matches!(
        loader::load(&req, &fx.opts()),
        Err(Error::NotFound(_))
    ));
}

#[test]
fn repeated_load_is_offline_capable() {
    let fx = Fixture::new();
    make_root(&fx.root, "offline", &[("wav/a.wav", 1), ("wav/b.wav", 2)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let req = LoadRequest {
        version: Some("1.0.0".into()),
        ..LoadRequest::new("offline")
    };
    let opts = fx.opts();
    loader::load(&req, &opts).unwrap();

    let backend = fx.repo.connect().unwrap();
    backend.set_offline(true);
    let before = backend.stats().total_calls();
    let db = loader::load(&req, &opts).unwrap();
    backend.set_offline(false);
    assert_eq!(backend.stats().total_calls(), before);
    assert_eq!(db.tables["emotion"].index.len(), 2);
}

#[test]
fn latest_version_resolution_ignores_incomplete_versions() {
    let fx = Fixture::new();
    make_root(&fx.root, "latest", &[("wav/a.wav", 1)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();
    publisher::publish(&fx.root, "1.1.1", &fx.repo, PreviousVersion::Latest).unwrap();
    publisher::publish(&fx.root, "1.2.0", &fx.repo, PreviousVersion::Latest).unwrap();

    assert_eq!(
        loader::latest_version("latest", &fx.repo).unwrap(),
        Version::new("1.2.0")
    );

    // Deleting the deps object makes the newest version invisible.
    let backend = fx.repo.connect().unwrap();
    backend
        .delete(&audvault_core::BackendPath::parse("latest/1.2.0/db.deps.zip").unwrap())
        .unwrap();
    assert_eq!(
        loader::latest_version("latest", &fx.repo).unwrap(),
        Version::new("1.1.1")
    );
}

#[test]
fn unpinned_load_falls_back_to_cache_when_backend_is_down() {
    let fx = Fixture::new();
    make_root(&fx.root, "fallback", &[("wav/a.wav", 1)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let opts = fx.opts();
    let req = LoadRequest::new("fallback");
    loader::load(&req, &opts).unwrap();

    let backend = fx.repo.connect().unwrap();
    backend.set_offline(true);
    let result = loader::load(&req, &opts);
    backend.set_offline(false);
    let db = result.unwrap();
    assert_eq!(db.deps.dataset_version(), &Version::new("1.0.0"));
}

#[test]
fn flavour_conversion_applies_to_all_loaded_media() {
    let fx = Fixture::new();
    make_root_with_rate(
        &fx.root,
        "flavoured",
        &[("wav/a.wav", 1), ("wav/b.wav", 2)],
        16_000,
        2,
    );
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let req = LoadRequest {
        version: Some("1.0.0".into()),
        flavour: Flavour {
            sampling_rate: Some(8_000),
            mixdown: true,
            bit_depth: Some(16),
            ..Flavour::default()
        },
        ..LoadRequest::new("flavoured")
    };
    let db = loader::load(&req, &fx.opts()).unwrap();
    for file in ["wav/a.wav", "wav/b.wav"] {
        let info = scan_wav(&db.root.join(file)).unwrap();
        assert_eq!(info.sample_rate, 8_000, "{file}");
        assert_eq!(info.channels, 1, "{file}");
        assert_eq!(info.bit_depth(), 16, "{file}");
    }

    // The raw flavour of the same version lives in a separate folder.
    let raw = loader::load(
        &LoadRequest {
            version: Some("1.0.0".into()),
            ..LoadRequest::new("flavoured")
        },
        &fx.opts(),
    )
    .unwrap();
    assert_ne!(raw.root, db.root);
    assert_eq!(
        scan_wav(&raw.root.join("wav/a.wav")).unwrap().sample_rate,
        16_000
    );
}

#[test]
fn flavoured_load_is_offline_capable_too() {
    let fx = Fixture::new();
    make_root_with_rate(&fx.root, "flav-off", &[("wav/a.wav", 1)], 16_000, 2);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let req = LoadRequest {
        version: Some("1.0.0".into()),
        flavour: Flavour {
            sampling_rate: Some(8_000),
            mixdown: true,
            ..Flavour::default()
        },
        ..LoadRequest::new("flav-off")
    };
    let opts = fx.opts();
    loader::load(&req, &opts).unwrap();
    let backend = fx.repo.connect().unwrap();
    let before = backend.stats().total_calls();
    loader::load(&req, &opts).unwrap();
    assert_eq!(backend.stats().total_calls(), before);
}

#[test]
fn misc_tables_always_load_and_feed_label_mapping() {
    use audvault_core::header::{ColumnDecl, Header, TableDecl};
    use audvault_core::value::Dtype;
    use audvault_core::{Dataset, IndexKind, Scheme};
    use indexmap::IndexMap;

    let fx = Fixture::new();
    let mut header = Header::new("speakers-db", "https://example.org", "research");
    header
        .schemes
        .insert("age".into(), Scheme::plain(Dtype::Integer));
    header.schemes.insert(
        "speaker".into(),
        Scheme::from_misc_table(Dtype::String, "speakers"),
    );
    let mut misc_index = IndexMap::new();
    misc_index.insert("speaker".to_string(), Dtype::String);
    let mut misc_columns = IndexMap::new();
    misc_columns.insert(
        "age".to_string(),
        ColumnDecl {
            scheme: Some("age".into()),
            rater: None,
        },
    );
    header.tables.insert(
        "speakers".into(),
        TableDecl {
            kind: IndexKind::Misc,
            misc_index: Some(misc_index),
            split: None,
            columns: misc_columns,
        },
    );
    let mut file_columns = IndexMap::new();
    file_columns.insert(
        "speaker".to_string(),
        ColumnDecl {
            scheme: Some("speaker".into()),
            rater: None,
        },
    );
    header.tables.insert(
        "files".into(),
        TableDecl {
            kind: IndexKind::Filewise,
            misc_index: None,
            split: None,
            columns: file_columns.clone(),
        },
    );
    // A second table referencing media the first one does not.
    header.tables.insert(
        "extra".into(),
        TableDecl {
            kind: IndexKind::Filewise,
            misc_index: None,
            split: None,
            columns: file_columns,
        },
    );
    let mut dataset = Dataset::new(header);
    dataset
        .insert_table_csv("speakers", "speaker,age\nspk01,19\nspk02,21\n")
        .unwrap();
    dataset
        .insert_table_csv("files", "file,speaker\nwav/a.wav,spk01\nwav/b.wav,spk02\n")
        .unwrap();
    dataset
        .insert_table_csv("extra", "file,speaker\nwav/c.wav,spk01\n")
        .unwrap();
    dataset.write_to(&fx.root).unwrap();
    for (file, seed) in [("wav/a.wav", 1), ("wav/b.wav", 2), ("wav/c.wav", 3)] {
        write_tone(&fx.root.join(file), seed, 16_000, 1);
    }
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    // Selecting only 'files' still loads the misc table, and only the media
    // referenced by 'files' lands on disk.
    let req = LoadRequest {
        version: Some("1.0.0".into()),
        tables: Some(vec!["files".into()]),
        media: Some(vec!["wav/a.wav".into()]),
        ..LoadRequest::new("speakers-db")
    };
    let db = loader::load(&req, &fx.opts()).unwrap();
    assert!(
        db.tables.contains_key("speakers"),
        "misc tables always load"
    );
    assert!(!db.tables.contains_key("extra"));
    assert_eq!(
        db.tables["speakers"].index.len(),
        2,
        "filters never touch misc tables"
    );
    assert_eq!(db.tables["files"].index.len(), 1);
    assert!(db.root.join("wav/a.wav").is_file());
    assert!(!db.root.join("wav/b.wav").exists());
    assert!(!db.root.join("wav/c.wav").exists());

    // The cached misc table feeds label mapping.
    let frame = db.dataset().get("files", None, Some("age")).unwrap();
    assert_eq!(
        frame.columns["age"][0],
        Some(audvault_core::Value::Integer(19))
    );
}

#[test]
fn unreachable_repositories_are_skipped_in_available() {
    let fx = Fixture::new();
    make_root(&fx.root, "reachable", &[("wav/a.wav", 1)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let ghost = audvault_core::Repository::new(
        common::unique("ghost"),
        "/definitely/not/a/host",
        "file-system",
    );
    // An existing but empty host contributes zero rows without a warning.
    let empty_host = fx.dir.path().join("empty-host");
    std::fs::create_dir_all(&empty_host).unwrap();
    let empty = audvault_core::Repository::new(
        common::unique("empty"),
        empty_host.to_str().unwrap(),
        "file-system",
    );
    let rows = loader::available(&[ghost, empty, fx.repo.clone()], true).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].name, "reachable");
}

#[test]
fn removed_media_are_excluded_and_reported() {
    let fx = Fixture::new();
    make_root(
        &fx.root,
        "withdrawn",
        &[("wav/keep.wav", 1), ("wav/gone.wav", 2)],
    );
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();
    publisher::remove_media("withdrawn", &["wav/gone.wav".to_string()], &fx.repo).unwrap();

    let req = LoadRequest {
        version: Some("1.0.0".into()),
        ..LoadRequest::new("withdrawn")
    };
    let db = loader::load(&req, &fx.opts()).unwrap();
    assert_eq!(db.removed_media, ["wav/gone.wav"]);
    assert!(db.root.join("wav/keep.wav").is_file());
    assert!(!db.root.join("wav/gone.wav").exists());
    // Rows stay in the table; the invariant holds through removed_media.
    assert_eq!(db.tables["emotion"].index.len(), 2);
}

#[test]
fn available_and_search_cover_the_catalog() {
    let fx = Fixture::new();
    make_root(&fx.root, "cat-a", &[("wav/a.wav", 1)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();
    publisher::publish(&fx.root, "1.2.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let noise_root = fx.dir.path().join("noise");
    let mut header = audvault_core::Header::new("cat-noise", "https://example.org", "research");
    header.schemes.insert(
        "snr".into(),
        audvault_core::Scheme::plain(audvault_core::Dtype::Float),
    );
    audvault_core::Dataset::new(header)
        .write_to(&noise_root)
        .unwrap();
    publisher::publish(&noise_root, "0.1.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let repos = [fx.repo.clone()];
    let latest = loader::available(&repos, true).unwrap();
    let names: Vec<(&str, &str)> = latest
        .iter()
        .map(|r| (r.name.as_str(), r.version.as_str()))
        .collect();
    assert_eq!(names, [("cat-a", "1.2.0"), ("cat-noise", "0.1.0")]);

    let all = loader::available(&repos, false).unwrap();
    assert_eq!(all.len(), 3);

    assert_eq!(
        loader::search_by_scheme("emotion", &repos).unwrap(),
        ["cat-a"]
    );
    assert_eq!(
        loader::search_by_scheme("snr", &repos).unwrap(),
        ["cat-noise"]
    );
    assert!(loader::search_by_scheme("nope", &repos).unwrap().is_empty());
}

#[test]
fn info_header_downloads_exactly_one_object() {
    let fx = Fixture::new();
    make_root(&fx.root, "info", &[("wav/a.wav", 1)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let backend = fx.repo.connect().unwrap();
    let before = backend.stats().downloads();
    let (header, version) = loader::info_header("info", Some("1.0.0"), std::slice::from_ref(&fx.repo)).unwrap();
    assert_eq!(backend.stats().downloads(), before + 1);
    assert_eq!(header.name, "info");
    assert_eq!(version, Version::new("1.0.0"));
    assert_eq!(
        loader::info_schemes("info", Some("1.0.0"), std::slice::from_ref(&fx.repo)).unwrap(),
        ["emotion"]
    );
    assert!(matches!(
        loader::info_header("no-such-dataset", None, std::slice::from_ref(&fx.repo)),
        Err(Error::DatasetNotFound(_))
    ));
}

#[test]
fn cross_version_load_reuses_cached_media() {
    let fx = Fixture::new();
    let files: Vec<(String, u64)> = (0..10)
        .map(|i| (format!("wav/f{i}.wav"), i as u64))
        .collect();
    let refs: Vec<(&str, u64)> = files.iter().map(|(f, s)| (f.as_str(), *s)).collect();
    make_root(&fx.root, "reuse", &refs);
    publisher::publish(&fx.root, "1.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let opts = fx.opts();
    loader::load(
        &LoadRequest {
            version: Some("1.0".into()),
            ..LoadRequest::new("reuse")
        },
        &opts,
    )
    .unwrap();

    write_tone(&fx.root.join("wav/f3.wav"), 999, 16_000, 1);
    publisher::publish(&fx.root, "2.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let backend = fx.repo.connect().unwrap();
    let before = backend.stats().downloads();
    let db = loader::load(
        &LoadRequest {
            version: Some("2.0".into()),
            ..LoadRequest::new("reuse")
        },
        &opts,
    )
    .unwrap();
    // Changed media + deps + header; table and 9 media come from v1.0.
    assert_eq!(backend.stats().downloads() - before, 3);

    let v1_dir = opts.cache.key_dir(&audvault_core::CacheKey::new(
        fx.repo.name.clone(),
        "reuse",
        Version::new("1.0"),
        "raw",
    ));
    for i in 0..10 {
        if i == 3 {
            continue;
        }
        let file = format!("wav/f{i}.wav");
        assert_eq!(
            std::fs::read(db.root.join(&file)).unwrap(),
            std::fs::read(v1_dir.join(&file)).unwrap(),
            "{file} should be byte-identical to the v1.0 copy"
        );
    }
}

#[test]
#[cfg(unix)]
fn experimental_link_mode_shares_inodes_across_versions() {
    use std::os::unix::fs::MetadataExt;

    let fx = Fixture::new();
    make_root(&fx.root, "linked", &[("wav/a.wav", 1), ("wav/b.wav", 2)]);
    publisher::publish(&fx.root, "1.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let mut opts = fx.opts();
    opts.use_hard_links = true;
    loader::load(
        &LoadRequest {
            version: Some("1.0".into()),
            ..LoadRequest::new("linked")
        },
        &opts,
    )
    .unwrap();

    write_tone(&fx.root.join("wav/b.wav"), 99, 16_000, 1);
    publisher::publish(&fx.root, "2.0", &fx.repo, PreviousVersion::Latest).unwrap();
    let db = loader::load(
        &LoadRequest {
            version: Some("2.0".into()),
            ..LoadRequest::new("linked")
        },
        &opts,
    )
    .unwrap();

    let v1_dir = opts.cache.key_dir(&audvault_core::CacheKey::new(
        fx.repo.name.clone(),
        "linked",
        Version::new("1.0"),
        "raw",
    ));
    let v1_ino = std::fs::metadata(v1_dir.join("wav/a.wav")).unwrap().ino();
    let v2_ino = std::fs::metadata(db.root.join("wav/a.wav")).unwrap().ino();
    assert_eq!(v1_ino, v2_ino, "unchanged file is hard-linked, not copied");
}

#[test]
fn lock_contention_times_out_cleanly() {
    let fx = Fixture::new();
    make_root(&fx.root, "locked-load", &[("wav/a.wav", 1)]);
    publisher::publish(&fx.root, "1.0.0", &fx.repo, PreviousVersion::Latest).unwrap();

    let mut opts = fx.opts();
    opts.lock_timeout = StdDuration::from_millis(80);
    let key = audvault_core::CacheKey::new(
        fx.repo.name.clone(),
        "locked-load",
        Version::new("1.0.0"),
        "raw",
    );
    let _held = opts.cache.lock(&key, StdDuration::from_millis(50)).unwrap();
    let req = LoadRequest {
        version: Some("1.0.0".into()),
        ..LoadRequest::new("locked-load")
    };
    assert!(matches!(
        loader::load(&req, &opts),
        Err(Error::LockTimeout(_))
    ));
}
