//! Deterministic ZIP creation and safe extraction.
//!
//! Archives carry member paths relative to a root folder, sorted, with
//! zeroed timestamps and fixed permissions, so equal content produces equal
//! archive bytes. Extraction rejects entries that would escape the target
//! folder.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use crate::error::{Error, Result};

fn zip_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Zip(format!("{}: {e}", path.display()))
}

fn member_options() -> SimpleFileOptions {
    SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default())
        .unix_permissions(0o644)
}

/// Relative forward-slash member name of `file` under `root`.
fn member_name(root: &Path, file: &Path) -> Result<String> {
    let rel = file.strip_prefix(root).map_err(|_| Error::BadPath {
        path: file.display().to_string(),
        reason: "file is not below the archive root",
    })?;
    Ok(rel
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/"))
}

/// Zips the given files, stored under their paths relative to `root`.
/// Member order is sorted by name.
pub fn zip_create(files: &[PathBuf], root: &Path, out: &Path) -> Result<()> {
    let mut members: Vec<(String, PathBuf)> = files
        .iter()
        .map(|f| Ok((member_name(root, f)?, f.clone())))
        .collect::<Result<_>>()?;
    members.sort();

    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(out).map_err(|e| Error::io(out, e))?;
    let mut writer = ZipWriter::new(BufWriter::new(file));
    for (name, path) in members {
        writer
            .start_file(&name, member_options())
            .map_err(|e| zip_err(out, e))?;
        let mut input = BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?);
        io::copy(&mut input, &mut writer).map_err(|e| Error::io(&path, e))?;
    }
    writer
        .finish()
        .map_err(|e| zip_err(out, e))?
        .flush()
        .map_err(|e| Error::io(out, e))?;
    Ok(())
}

/// Creates a zip with no members; used as the placeholder when media is
/// removed from all versions.
pub fn zip_create_empty(out: &Path) -> Result<()> {
    zip_create(&[], Path::new(""), out)
}

fn checked_member_path(dest: &Path, name: &str) -> Result<PathBuf> {
    let unsafe_name = name.starts_with('/')
        || name.contains('\\')
        || name.split('/').any(|seg| seg == ".." || seg.is_empty());
    if unsafe_name {
        return Err(Error::UnsafeZipEntry(name.to_string()));
    }
    let mut out = dest.to_path_buf();
    for seg in name.split('/') {
        out.push(seg);
    }
    Ok(out)
}

/// Extracts all members below `dest`, reproducing relative paths and bytes.
pub fn zip_extract(archive: &Path, dest: &Path) -> Result<()> {
    let file = File::open(archive).map_err(|e| Error::io(archive, e))?;
    let mut zip = ZipArchive::new(BufReader::new(file)).map_err(|e| zip_err(archive, e))?;
    for i in 0..zip.len() {
        let mut member = zip.by_index(i).map_err(|e| zip_err(archive, e))?;
        if member.is_dir() {
            continue;
        }
        let target = checked_member_path(dest, member.name())?;
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let mut out = BufWriter::new(File::create(&target).map_err(|e| Error::io(&target, e))?);
        io::copy(&mut member, &mut out).map_err(|e| Error::io(&target, e))?;
        out.flush().map_err(|e| Error::io(&target, e))?;
    }
    Ok(())
}

/// Extracts the bytes of a single-member archive, regardless of the member's
/// recorded name. Media archives are addressed by content digest and may
/// serve several file paths.
pub fn zip_extract_single(archive: &Path) -> Result<Vec<u8>> {
    let file = File::open(archive).map_err(|e| Error::io(archive, e))?;
    let mut zip = ZipArchive::new(BufReader::new(file)).map_err(|e| zip_err(archive, e))?;
    if zip.len() != 1 {
        return Err(Error::Zip(format!(
            "{}: expected exactly one member, found {}",
            archive.display(),
            zip.len()
        )));
    }
    let mut member = zip.by_index(0).map_err(|e| zip_err(archive, e))?;
    let mut bytes = Vec::with_capacity(member.size() as usize);
    member
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(archive, e))?;
    Ok(bytes)
}

/// Whether the archive has any members at all (placeholders do not).
pub fn zip_is_empty(archive: &Path) -> Result<bool> {
    let file = File::open(archive).map_err(|e| Error::io(archive, e))?;
    let zip = ZipArchive::new(BufReader::new(file)).map_err(|e| zip_err(archive, e))?;
    Ok(zip.is_empty())
}
