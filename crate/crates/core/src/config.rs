//! Configuration: repositories and cache location.
//!
//! The config file is YAML. Lookup order: explicit path, `AUDVAULT_CONFIG`,
//! `./audvault.yaml`, `~/.config/audvault/config.yaml`. A repository host
//! can be overridden with `AUDVAULT_HOST_<NAME>` (name uppercased, `-`
//! becomes `_`); the cache root with `AUDVAULT_CACHE_ROOT`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::backend::Repository;
use crate::error::{Error, Result};

pub const CONFIG_ENV: &str = "AUDVAULT_CONFIG";
pub const CACHE_ROOT_ENV: &str = "AUDVAULT_CACHE_ROOT";

#[derive(Debug, Clone, Deserialize)]
pub struct RepositoryConfig {
    pub name: String,
    pub host: String,
    pub backend: String,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct Config {
    #[serde(default)]
    pub repositories: Vec<RepositoryConfig>,
    #[serde(default)]
    pub cache_root: Option<PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text)
    }

    /// Loads the configuration from the first location that exists.
    pub fn load(explicit: Option<&Path>) -> Result<Config> {
        if let Some(path) = explicit {
            return Config::from_file(path);
        }
        if let Ok(path) = std::env::var(CONFIG_ENV) {
            return Config::from_file(Path::new(&path));
        }
        let local = Path::new("audvault.yaml");
        if local.is_file() {
            return Config::from_file(local);
        }
        if let Some(home) = home_dir() {
            let user = home.join(".config/audvault/config.yaml");
            if user.is_file() {
                return Config::from_file(&user);
            }
        }
        Ok(Config::default())
    }

    /// Repositories in configuration order, with host env overrides applied.
    pub fn repositories(&self) -> Vec<Repository> {
        repositories_with_env(&self.repositories, &|var| std::env::var(var).ok())
    }

    /// Cache root resolution: CLI flag, env, config, `~/.cache/audvault`.
    pub fn cache_root(&self, cli: Option<&Path>) -> PathBuf {
        if let Some(path) = cli {
            return path.to_path_buf();
        }
        if let Ok(path) = std::env::var(CACHE_ROOT_ENV) {
            return PathBuf::from(path);
        }
        if let Some(path) = &self.cache_root {
            return path.clone();
        }
        home_dir()
            .unwrap_or_else(|| PathBuf::from("."))
            .join(".cache/audvault")
    }
}

/// Env var carrying the host override of one repository.
pub fn host_env_var(repo_name: &str) -> String {
    format!(
        "AUDVAULT_HOST_{}",
        repo_name.to_uppercase().replace('-', "_")
    )
}

fn repositories_with_env(
    configs: &[RepositoryConfig],
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Vec<Repository> {
    configs
        .iter()
        .map(|c| {
            let host = lookup(&host_env_var(&c.name)).unwrap_or_else(|| c.host.clone());
            Repository::new(c.name.clone(), host, c.backend.clone())
        })
        .collect()
}

fn home_dir() -> Option<PathBuf> {
    std::env::var_os("HOME").map(PathBuf::from)
}
