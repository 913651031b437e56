//! audvault command line interface.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use audvault_core::cache::Cache;
use audvault_core::config::Config;
use audvault_core::error::Error;
use audvault_core::loader::{self, LoadOptions, LoadRequest};
use audvault_core::publisher::{self, PreviousVersion};
use audvault_core::{render_datacard, Flavour, Repository};

#[derive(Parser)]
#[command(
    name = "audvault",
    version,
    about = "Publish, version, cache, and load annotated audio datasets"
)]
struct Cli {
    /// Config file (default: $AUDVAULT_CONFIG, ./audvault.yaml,
    /// ~/.config/audvault/config.yaml).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Publish a dataset root as a new version.
    Publish {
        root: PathBuf,
        version: String,
        /// Repository name from the config.
        #[arg(long)]
        repo: String,
        /// Build on this version instead of the latest.
        #[arg(long, conflicts_with = "no_previous")]
        previous: Option<String>,
        /// Publish from scratch, ignoring existing versions.
        #[arg(long)]
        no_previous: bool,
    },
    /// Load a dataset into the cache and print the cache folder.
    Load {
        name: String,
        #[arg(long)]
        version: Option<String>,
        #[arg(long)]
        sampling_rate: Option<u32>,
        #[arg(long)]
        bit_depth: Option<u16>,
        /// 0-based channel selection, e.g. `0,1`.
        #[arg(long, value_delimiter = ',', conflicts_with = "mixdown")]
        channels: Option<Vec<usize>>,
        #[arg(long)]
        mixdown: bool,
        /// Table id patterns (literal or `*` glob).
        #[arg(long, num_args = 1..)]
        tables: Option<Vec<String>>,
        /// Media path patterns (literal or `*` glob).
        #[arg(long, num_args = 1..)]
        media: Option<Vec<String>>,
        #[arg(long)]
        only_metadata: bool,
        /// Cache root override.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Materialize an editable copy (original format) into a folder.
    LoadTo {
        dest: PathBuf,
        name: String,
        #[arg(long)]
        version: Option<String>,
    },
    /// List datasets across all configured repositories.
    Available {
        #[arg(long)]
        only_latest: bool,
        #[arg(long)]
        json: bool,
    },
    /// Show the header of a dataset version.
    Info {
        name: String,
        #[arg(long)]
        version: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Find datasets whose latest version declares a scheme.
    Search { scheme: String },
    /// Remove media files from all published versions.
    RemoveMedia {
        name: String,
        #[arg(required = true)]
        files: Vec<String>,
        #[arg(long)]
        repo: String,
    },
    /// Render the data card of a dataset version as markdown.
    Datacard {
        name: String,
        #[arg(long)]
        version: Option<String>,
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Delete everything under the cache root.
    CacheClear {
        #[arg(long)]
        cache: Option<PathBuf>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    std::process::exit(match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    });
}

/// 1 for conditions the user can address, 2 for environment and internal
/// failures.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. }
        | Error::Zip(_)
        | Error::UnsafeZipEntry(_)
        | Error::DigestMismatch { .. }
        | Error::LockTimeout(_)
        | Error::Offline => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Publish {
            root,
            version,
            repo,
            previous,
            no_previous,
        } => {
            let repo = find_repo(&config, &repo)?;
            let previous = match (previous, no_previous) {
                (_, true) => PreviousVersion::None,
                (Some(v), _) => PreviousVersion::Explicit(v),
                (None, false) => PreviousVersion::Latest,
            };
            let report = publisher::publish(&root, &version, &repo, previous)?;
            println!(
                "published version {} ({} archive(s) uploaded, {} reused, {} deleted, {} bytes)",
                report.version,
                report.uploaded_archives.len(),
                report.reused,
                report.deleted,
                report.total_bytes_uploaded
            );
            for archive in &report.uploaded_archives {
                println!("  uploaded {archive}");
            }
            Ok(())
        }
        Command::Load {
            name,
            version,
            sampling_rate,
            bit_depth,
            channels,
            mixdown,
            tables,
            media,
            only_metadata,
            cache,
        } => {
            let req = LoadRequest {
                name,
                version,
                flavour: Flavour {
                    bit_depth,
                    sampling_rate,
                    channels,
                    mixdown,
                },
                tables,
                media,
                only_metadata,
            };
            let opts = load_options(&config, cache.as_deref())?;
            let db = loader::load(&req, &opts)?;
            if !db.removed_media.is_empty() {
                for file in &db.removed_media {
                    eprintln!("note: '{file}' was removed from all versions and is not on disk");
                }
            }
            println!("{}", db.root.display());
            Ok(())
        }
        Command::LoadTo {
            dest,
            name,
            version,
        } => {
            let repos = repositories(&config)?;
            let pinned = version.as_deref().map(audvault_core::Version::new);
            let (repo, _) = audvault_core::resolve_repository(&name, pinned.as_ref(), &repos)?;
            let removed = publisher::load_to(&dest, &name, version.as_deref(), &repo)?;
            for file in removed {
                eprintln!("note: '{file}' was removed from all versions and is not on disk");
            }
            println!("{}", dest.display());
            Ok(())
        }
        Command::Available { only_latest, json } => {
            let repos = repositories(&config)?;
            let rows = loader::available(&repos, only_latest)?;
            if json {
                let items: Vec<serde_json::Value> = rows
                    .iter()
                    .map(|r| {
                        serde_json::json!({
                            "repository": r.repository,
                            "name": r.name,
                            "version": r.version,
                            "source": r.source,
                            "usage": r.usage,
                            "description": r.description,
                            "license": r.license,
                            "schemes": r.schemes,
                        })
                    })
                    .collect();
                println!("{}", serde_json::to_string_pretty(&items).expect("json"));
            } else {
                println!(
                    "{:<20} {:<12} {:<12} schemes",
                    "name", "version", "usage"
                );
                for row in &rows {
                    println!(
                        "{:<20} {:<12} {:<12} {}",
                        row.name,
                        row.version,
                        row.usage,
                        row.schemes.join(",")
                    );
                }
            }
            Ok(())
        }
        Command::Info {
            name,
            version,
            json,
        } => {
            let repos = repositories(&config)?;
            let (header, version) = loader::info_header(&name, version.as_deref(), &repos)?;
            if json {
                let value = serde_json::json!({
                    "name": header.name,
                    "version": version.as_str(),
                    "source": header.source,
                    "usage": header.usage,
                    "author": header.author,
                    "description": header.description,
                    "expires": header.expires.map(|d| d.format("%Y-%m-%d").to_string()),
                    "languages": header.languages,
                    "license": header.license,
                    "organisation": header.organisation,
                    "custom": header.custom,
                    "schemes": header.schemes.keys().collect::<Vec<_>>(),
                    "tables": header.tables.keys().collect::<Vec<_>>(),
                    "splits": header.splits.keys().collect::<Vec<_>>(),
                    "raters": header.raters.keys().collect::<Vec<_>>(),
                });
                println!("{}", serde_json::to_string_pretty(&value).expect("json"));
            } else {
                println!("name:    {}", header.name);
                println!("version: {version}");
                println!("source:  {}", header.source);
                println!("usage:   {}", header.usage);
                if let Some(description) = &header.description {
                    println!("description: {description}");
                }
                if !header.languages.is_empty() {
                    println!("languages: {}", header.languages.join(", "));
                }
                if let Some(license) = &header.license {
                    println!("license: {license}");
                }
                println!(
                    "schemes: {}",
                    header
                        .schemes
                        .keys()
                        .cloned()
                        .collect::<Vec<_>>()
                        .join(", ")
                );
                println!(
                    "tables:  {}",
                    header.tables.keys().cloned().collect::<Vec<_>>().join(", ")
                );
            }
            Ok(())
        }
        Command::Search { scheme } => {
            let repos = repositories(&config)?;
            for name in loader::search_by_scheme(&scheme, &repos)? {
                println!("{name}");
            }
            Ok(())
        }
        Command::RemoveMedia { name, files, repo } => {
            let repo = find_repo(&config, &repo)?;
            let report = publisher::remove_media(&name, &files, &repo)?;
            println!(
                "removed {} file(s) from {} version(s), {} archive(s) replaced",
                report.files.len(),
                report.versions_updated.len(),
                report.archives_replaced
            );
            Ok(())
        }
        Command::Datacard {
            name,
            version,
            output,
        } => {
            let repos = repositories(&config)?;
            let pinned = version.as_deref().map(audvault_core::Version::new);
            let (repo, backend) =
                audvault_core::resolve_repository(&name, pinned.as_ref(), &repos)?;
            let version = match pinned {
                Some(v) => v,
                None => loader::latest_version(&name, &repo)?,
            };
            let req = LoadRequest {
                name: name.clone(),
                version: Some(version.as_str().to_string()),
                only_metadata: true,
                ..LoadRequest::new(name)
            };
            let opts = load_options(&config, None)?;
            let db = loader::load(&req, &opts)?;
            let _ = backend;
            let card = render_datacard(&db.header, &db.deps);
            match output {
                Some(path) => std::fs::write(&path, card).map_err(|e| Error::io(&path, e))?,
                None => print!("{card}"),
            }
            Ok(())
        }
        Command::CacheClear { cache } => {
            let root = config.cache_root(cache.as_deref());
            Cache::new(&root).clear()?;
            println!("cleared {}", root.display());
            Ok(())
        }
    }
}

fn repositories(config: &Config) -> Result<Vec<Repository>, Error> {
    let repos = config.repositories();
    if repos.is_empty() {
        return Err(Error::NoRepositories);
    }
    Ok(repos)
}

fn find_repo(config: &Config, name: &str) -> Result<Repository, Error> {
    repositories(config)?
        .into_iter()
        .find(|r| r.name == name)
        .ok_or_else(|| Error::Config(format!("repository '{name}' is not configured")))
}

fn load_options(config: &Config, cache: Option<&std::path::Path>) -> Result<LoadOptions, Error> {
    Ok(LoadOptions::new(
        repositories(config)?,
        Cache::new(config.cache_root(cache)),
    ))
}
