//! Local file system backend. The host is a directory; objects are plain
//! files below it. Uploads go through a temp file and an atomic rename.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::backend::{Backend, BackendPath};
use crate::error::{Error, Result};

pub struct FileSystemBackend {
    root: PathBuf,
}

impl FileSystemBackend {
    pub fn new(host: impl Into<PathBuf>) -> FileSystemBackend {
        FileSystemBackend { root: host.into() }
    }

    fn local(&self, remote: &BackendPath) -> PathBuf {
        remote.to_local(&self.root)
    }

    fn check_host(&self) -> Result<()> {
        if !self.root.is_dir() {
            return Err(Error::NotFound(format!(
                "backend host '{}'",
                self.root.display()
            )));
        }
        Ok(())
    }

    fn temp_sibling(target: &Path) -> PathBuf {
        let name = target
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("object");
        target.with_file_name(format!(".{name}.part.{}", crate::cache::temp_suffix()))
    }
}

impl Backend for FileSystemBackend {
    fn put_file(&self, local: &Path, remote: &BackendPath) -> Result<()> {
        self.check_host()?;
        let target = self.local(remote);
        let parent = target.parent().expect("backend paths have parents");
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let temp = Self::temp_sibling(&target);
        fs::copy(local, &temp).map_err(|e| Error::io(local, e))?;
        fs::rename(&temp, &target).map_err(|e| {
            let _ = fs::remove_file(&temp);
            Error::io(&target, e)
        })
    }

    fn get_file(&self, remote: &BackendPath, local: &Path) -> Result<()> {
        let source = self.local(remote);
        if !source.is_file() {
            return Err(Error::NotFound(format!("backend object '{remote}'")));
        }
        if let Some(parent) = local.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let temp = Self::temp_sibling(local);
        let copied = fs::copy(&source, &temp).map_err(|e| Error::io(&source, e))?;
        let expected = fs::metadata(&source)
            .map_err(|e| Error::io(&source, e))?
            .len();
        if copied != expected {
            let _ = fs::remove_file(&temp);
            return Err(Error::Io {
                path: local.to_path_buf(),
                source: std::io::Error::other(format!(
                    "short transfer: {copied} of {expected} bytes"
                )),
            });
        }
        fs::rename(&temp, local).map_err(|e| {
            let _ = fs::remove_file(&temp);
            Error::io(local, e)
        })
    }

    fn exists(&self, remote: &BackendPath) -> Result<bool> {
        Ok(self.local(remote).is_file())
    }

    fn ls(&self, prefix: &BackendPath) -> Result<Vec<BackendPath>> {
        self.check_host()?;
        let start = self.local(prefix);
        if !start.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in walkdir::WalkDir::new(&start).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                Error::io(
                    &start,
                    e.into_io_error()
                        .unwrap_or_else(|| std::io::Error::other("walk error")),
                )
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            let name = entry
                .file_name()
                .to_str()
                .map(str::to_string)
                .unwrap_or_default();
            if name.starts_with('.') && name.contains(".part.") {
                continue; // in-flight uploads
            }
            let rel = entry.path().strip_prefix(&self.root).expect("under root");
            let segments: Vec<String> = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            out.push(BackendPath::new(segments)?);
        }
        out.sort();
        Ok(out)
    }

    fn delete(&self, remote: &BackendPath) -> Result<()> {
        let target = self.local(remote);
        if !target.is_file() {
            return Err(Error::NotFound(format!("backend object '{remote}'")));
        }
        fs::remove_file(&target).map_err(|e| Error::io(&target, e))
    }

    fn create_exclusive(&self, remote: &BackendPath, content: &[u8]) -> Result<bool> {
        self.check_host()?;
        let target = self.local(remote);
        let parent = target.parent().expect("backend paths have parents");
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&target)
        {
            Ok(mut file) => {
                file.write_all(content).map_err(|e| Error::io(&target, e))?;
                Ok(true)
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Ok(false),
            Err(e) => Err(Error::io(&target, e)),
        }
    }
}
