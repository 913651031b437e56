//! Table indices: filewise, segmented, and custom (misc).

use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;

use crate::duration::Duration;
use crate::error::{Error, Result};
use crate::value::{Dtype, Value};

/// A relative media path with forward slashes and no `..` components.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FilePath(String);

impl FilePath {
    pub fn new(path: impl Into<String>) -> Result<FilePath> {
        let path = path.into();
        let reason = if path.is_empty() {
            Some("empty path")
        } else if path.starts_with('/') || path.contains(':') {
            Some("path must be relative")
        } else if path.contains('\\') {
            Some("path must use forward slashes")
        } else if path.split('/').any(|seg| seg == "..") {
            Some("path must not contain '..'")
        } else if path.split('/').any(|seg| seg.is_empty() || seg == ".") {
            Some("path contains empty or '.' segment")
        } else {
            None
        };
        match reason {
            Some(reason) => Err(Error::BadPath { path, reason }),
            None => Ok(FilePath(path)),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The path interpreted below `root` on the local filesystem.
    pub fn to_local(&self, root: &std::path::Path) -> std::path::PathBuf {
        let mut out = root.to_path_buf();
        for seg in self.0.split('/') {
            out.push(seg);
        }
        out
    }
}

impl fmt::Display for FilePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The three index kinds a table can be bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexKind {
    Filewise,
    Segmented,
    Misc,
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndexKind::Filewise => "filewise",
            IndexKind::Segmented => "segmented",
            IndexKind::Misc => "misc",
        })
    }
}

/// One row of a segmented index. `end == None` means "until end of file".
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segment {
    pub file: FilePath,
    pub start: Duration,
    pub end: Option<Duration>,
}

impl Segment {
    pub fn new(file: FilePath, start: Duration, end: Option<Duration>) -> Result<Segment> {
        if let Some(end) = end {
            if end <= start {
                return Err(Error::TableCsv(format!(
                    "segment of '{file}' has end {end} <= start {start}"
                )));
            }
        }
        Ok(Segment { file, start, end })
    }
}

/// The index of a table. Rows are unique within an index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Index {
    Filewise(Vec<FilePath>),
    Segmented(Vec<Segment>),
    Misc {
        /// Declared key columns in order, with their dtypes.
        columns: IndexMap<String, Dtype>,
        rows: Vec<Vec<Value>>,
    },
}

impl Index {
    pub fn filewise(files: Vec<FilePath>) -> Result<Index> {
        let index = Index::Filewise(files);
        index.check_unique()?;
        Ok(index)
    }

    pub fn segmented(segments: Vec<Segment>) -> Result<Index> {
        let index = Index::Segmented(segments);
        index.check_unique()?;
        Ok(index)
    }

    pub fn misc(columns: IndexMap<String, Dtype>, rows: Vec<Vec<Value>>) -> Result<Index> {
        if columns.is_empty() {
            return Err(Error::TableCsv(
                "misc index needs at least one column".into(),
            ));
        }
        for row in &rows {
            if row.len() != columns.len() {
                return Err(Error::TableCsv(format!(
                    "misc index row has {} values, expected {}",
                    row.len(),
                    columns.len()
                )));
            }
            for (value, (col, dtype)) in row.iter().zip(columns.iter()) {
                if value.dtype() != *dtype {
                    return Err(Error::TableCsv(format!(
                        "misc index column '{col}' expects {dtype}, got '{value}'"
                    )));
                }
            }
        }
        let index = Index::Misc { columns, rows };
        index.check_unique()?;
        Ok(index)
    }

    pub fn kind(&self) -> IndexKind {
        match self {
            Index::Filewise(_) => IndexKind::Filewise,
            Index::Segmented(_) => IndexKind::Segmented,
            Index::Misc { .. } => IndexKind::Misc,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Index::Filewise(rows) => rows.len(),
            Index::Segmented(rows) => rows.len(),
            Index::Misc { rows, .. } => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column names of the index part of a CSV row.
    pub fn column_names(&self) -> Vec<String> {
        match self {
            Index::Filewise(_) => vec!["file".into()],
            Index::Segmented(_) => vec!["file".into(), "start".into(), "end".into()],
            Index::Misc { columns, .. } => columns.keys().cloned().collect(),
        }
    }

    /// CSV cells of row `i`'s index part.
    pub fn row_cells(&self, i: usize) -> Vec<String> {
        match self {
            Index::Filewise(rows) => vec![rows[i].to_string()],
            Index::Segmented(rows) => {
                let seg = &rows[i];
                vec![
                    seg.file.to_string(),
                    seg.start.to_string(),
                    seg.end.map(|e| e.to_string()).unwrap_or_default(),
                ]
            }
            Index::Misc { rows, .. } => rows[i].iter().map(Value::to_cell).collect(),
        }
    }

    /// Files referenced by this index, in row order with duplicates removed.
    pub fn files(&self) -> Vec<&FilePath> {
        let mut seen = HashSet::new();
        match self {
            Index::Filewise(rows) => rows.iter().filter(|f| seen.insert(*f)).collect(),
            Index::Segmented(rows) => rows
                .iter()
                .map(|s| &s.file)
                .filter(|f| seen.insert(*f))
                .collect(),
            Index::Misc { .. } => Vec::new(),
        }
    }

    /// The file a given row refers to, if the index is file-based.
    pub fn row_file(&self, i: usize) -> Option<&FilePath> {
        match self {
            Index::Filewise(rows) => Some(&rows[i]),
            Index::Segmented(rows) => Some(&rows[i].file),
            Index::Misc { .. } => None,
        }
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::with_capacity(self.len());
        for i in 0..self.len() {
            let key = self.row_cells(i).join("\u{1f}");
            if !seen.insert(key) {
                return Err(Error::DuplicateRow(self.row_cells(i).join(",")));
            }
        }
        Ok(())
    }

    /// Keeps only rows whose file satisfies `keep`; misc indices are
    /// returned unchanged. Also returns the kept row positions.
    pub fn filter_files<F: Fn(&FilePath) -> bool>(&self, keep: F) -> (Index, Vec<usize>) {
        match self {
            Index::Filewise(rows) => {
                let mut kept = Vec::new();
                let mut out = Vec::new();
                for (i, row) in rows.iter().enumerate() {
                    if keep(row) {
                        kept.push(i);
                        out.push(row.clone());
                    }
                }
                (Index::Filewise(out), kept)
            }
            Index::Segmented(rows) => {
                let mut kept = Vec::new();
                let mut out = Vec::new();
                for (i, row) in rows.iter().enumerate() {
                    if keep(&row.file) {
                        kept.push(i);
                        out.push(row.clone());
                    }
                }
                (Index::Segmented(out), kept)
            }
            Index::Misc { .. } => (self.clone(), (0..self.len()).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(p: &str) -> FilePath {
        FilePath::new(p).unwrap()
    }

    #[test]
    fn rejects_bad_paths() {
        assert!(FilePath::new("").is_err());
        assert!(FilePath::new("/abs/a.wav").is_err());
        assert!(FilePath::new("a/../b.wav").is_err());
        assert!(FilePath::new("a\\b.wav").is_err());
        assert!(FilePath::new("audio/a.wav").is_ok());
    }

    #[test]
    fn duplicate_rows_rejected() {
        assert!(Index::filewise(vec![fp("a.wav"), fp("a.wav")]).is_err());
        let seg = |e: u64| Segment::new(fp("c.wav"), Duration::ZERO, Some(Duration::from_secs(e)));
        assert!(Index::segmented(vec![seg(1).unwrap(), seg(1).unwrap()]).is_err());
        assert!(Index::segmented(vec![seg(1).unwrap(), seg(2).unwrap()]).is_ok());
    }

    #[test]
    fn segment_end_after_start() {
        assert!(Segment::new(
            fp("a.wav"),
            Duration::from_secs(2),
            Some(Duration::from_secs(1))
        )
        .is_err());
        assert!(Segment::new(fp("a.wav"), Duration::from_secs(2), None).is_ok());
    }

    #[test]
    fn misc_rows_match_declared_dtypes() {
        let mut cols = IndexMap::new();
        cols.insert("speaker".to_string(), Dtype::String);
        let ok = Index::misc(cols.clone(), vec![vec![Value::Str("spk0".into())]]);
        assert!(ok.is_ok());
        let bad = Index::misc(cols, vec![vec![Value::Integer(1)]]);
        assert!(bad.is_err());
    }

    #[test]
    fn files_deduplicates_in_order() {
        let idx = Index::segmented(vec![
            Segment::new(fp("b.wav"), Duration::ZERO, Some(Duration::from_secs(1))).unwrap(),
            Segment::new(fp("a.wav"), Duration::ZERO, Some(Duration::from_secs(1))).unwrap(),
            Segment::new(
                fp("b.wav"),
                Duration::from_secs(1),
                Some(Duration::from_secs(2)),
            )
            .unwrap(),
        ])
        .unwrap();
        let files: Vec<_> = idx.files().iter().map(|f| f.as_str()).collect();
        assert_eq!(files, ["b.wav", "a.wav"]);
    }
}
