//! Annotation tables and re-indexed views.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::index::{FilePath, Index, IndexKind, Segment};
use crate::scheme::{validate_value, Scheme};
use crate::value::Value;

/// One annotation column: an optional scheme and rater reference plus one
/// value slot per index row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub scheme_id: Option<String>,
    pub rater_id: Option<String>,
    pub values: Vec<Option<Value>>,
}

impl Column {
    pub fn new(scheme_id: Option<String>, values: Vec<Option<Value>>) -> Column {
        Column {
            scheme_id,
            rater_id: None,
            values,
        }
    }
}

/// Validation context for table construction: declared schemes plus the
/// resolved label sets of misc-backed schemes.
#[derive(Debug, Clone, Copy)]
pub struct SchemeContext<'a> {
    pub schemes: &'a BTreeMap<String, Scheme>,
    pub misc_labels: &'a HashMap<String, Vec<Value>>,
}

impl<'a> SchemeContext<'a> {
    pub fn new(
        schemes: &'a BTreeMap<String, Scheme>,
        misc_labels: &'a HashMap<String, Vec<Value>>,
    ) -> SchemeContext<'a> {
        SchemeContext {
            schemes,
            misc_labels,
        }
    }
}

/// An annotation table bound to an index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub id: String,
    pub index: Index,
    pub columns: IndexMap<String, Column>,
    pub split: Option<String>,
}

impl Table {
    /// Builds a table, enforcing value/scheme agreement. A table that would
    /// contain a violating value cannot be constructed.
    pub fn new(
        id: impl Into<String>,
        index: Index,
        columns: IndexMap<String, Column>,
        split: Option<String>,
        ctx: SchemeContext<'_>,
    ) -> Result<Table> {
        let id = id.into();
        // A misc table's own key column may back one of its schemes.
        let own_labels = match &index {
            Index::Misc { rows, .. } => Some(rows.iter().map(|r| r[0].clone()).collect::<Vec<_>>()),
            _ => None,
        };
        for (col_id, column) in &columns {
            if column.values.len() != index.len() {
                return Err(Error::TableCsv(format!(
                    "table '{id}' column '{col_id}' has {} values for {} index rows",
                    column.values.len(),
                    index.len()
                )));
            }
            let scheme = match &column.scheme_id {
                Some(scheme_id) => {
                    Some(
                        ctx.schemes
                            .get(scheme_id)
                            .ok_or_else(|| Error::DanglingRef {
                                kind: "scheme",
                                id: scheme_id.clone(),
                                referrer: format!("table '{id}' column '{col_id}'"),
                            })?,
                    )
                }
                None => None,
            };
            for (row, value) in column.values.iter().enumerate() {
                let Some(value) = value else { continue };
                if value.to_cell().is_empty() {
                    return Err(Error::SchemeViolation {
                        table: id.clone(),
                        column: col_id.clone(),
                        row,
                        violation: "empty string values are not representable".into(),
                    });
                }
                if let Some(scheme) = scheme {
                    let labels = scheme.labels_table().and_then(|t| {
                        if t == id {
                            own_labels.as_deref()
                        } else {
                            ctx.misc_labels.get(t).map(Vec::as_slice)
                        }
                    });
                    if let Err(violation) = validate_value(value, scheme, labels) {
                        return Err(Error::SchemeViolation {
                            table: id.clone(),
                            column: col_id.clone(),
                            row,
                            violation: violation.0,
                        });
                    }
                }
            }
        }
        Ok(Table {
            id,
            index,
            columns,
            split,
        })
    }

    pub fn is_misc(&self) -> bool {
        self.index.kind() == IndexKind::Misc
    }

    /// First index column values of a misc table; the label set when a
    /// scheme references this table.
    pub fn misc_labels(&self) -> Option<Vec<Value>> {
        match &self.index {
            Index::Misc { rows, .. } => Some(rows.iter().map(|r| r[0].clone()).collect()),
            _ => None,
        }
    }

    /// Returns the table's values, optionally re-indexed onto another
    /// file-based index and mapped through a misc table column.
    ///
    /// Filewise values broadcast to every segment of the same file. Rows of
    /// the target index with no counterpart in this table are dropped. With
    /// `map`, labels are replaced by the backing misc table's value in that
    /// column and the output column is renamed accordingly.
    pub fn get(
        &self,
        index: Option<&Index>,
        map: Option<&str>,
        ctx: GetContext<'_>,
    ) -> Result<ValueFrame> {
        let (out_index, row_map) = match index {
            None => (
                self.index.clone(),
                (0..self.index.len()).collect::<Vec<_>>(),
            ),
            Some(target) => self.match_rows(target)?,
        };

        let mut columns: IndexMap<String, Vec<Option<Value>>> = IndexMap::new();
        for (col_id, column) in &self.columns {
            let picked: Vec<Option<Value>> = row_map
                .iter()
                .map(|&src| column.values[src].clone())
                .collect();
            let (out_id, out_values) = match map {
                None => (col_id.clone(), picked),
                Some(map_col) => {
                    let mapper = MiscMapper::resolve(self, col_id, column, map_col, &ctx)?;
                    (map_col.to_string(), mapper.apply(&picked))
                }
            };
            if columns.insert(out_id.clone(), out_values).is_some() {
                return Err(Error::TableQuery(format!(
                    "duplicate output column '{out_id}'"
                )));
            }
        }
        Ok(ValueFrame {
            index: out_index,
            columns,
        })
    }

    /// Restricts the target index to rows present in this table and records,
    /// per kept row, the source row the value comes from.
    fn match_rows(&self, target: &Index) -> Result<(Index, Vec<usize>)> {
        if self.is_misc() {
            return Err(Error::TableQuery(format!(
                "misc table '{}' cannot be re-indexed onto a file-based index",
                self.id
            )));
        }
        match target {
            Index::Misc { .. } => Err(Error::TableQuery(
                "target index must be filewise or segmented".into(),
            )),
            Index::Filewise(files) => {
                let by_file = self.filewise_lookup();
                let mut out = Vec::new();
                let mut rows = Vec::new();
                for file in files {
                    if let Some(&src) = by_file.get(file) {
                        out.push(file.clone());
                        rows.push(src);
                    }
                }
                Ok((Index::Filewise(out), rows))
            }
            Index::Segmented(segments) => match &self.index {
                Index::Filewise(_) => {
                    let by_file = self.filewise_lookup();
                    let mut out: Vec<Segment> = Vec::new();
                    let mut rows = Vec::new();
                    for seg in segments {
                        if let Some(&src) = by_file.get(&seg.file) {
                            out.push(seg.clone());
                            rows.push(src);
                        }
                    }
                    Ok((Index::Segmented(out), rows))
                }
                Index::Segmented(own) => {
                    let by_segment: HashMap<(&FilePath, i64, Option<i64>), usize> = own
                        .iter()
                        .enumerate()
                        .map(|(i, s)| {
                            (
                                (&s.file, s.start.as_nanos(), s.end.map(|e| e.as_nanos())),
                                i,
                            )
                        })
                        .collect();
                    let mut out: Vec<Segment> = Vec::new();
                    let mut rows = Vec::new();
                    for seg in segments {
                        let key = (
                            &seg.file,
                            seg.start.as_nanos(),
                            seg.end.map(|e| e.as_nanos()),
                        );
                        if let Some(&src) = by_segment.get(&key) {
                            out.push(seg.clone());
                            rows.push(src);
                        }
                    }
                    Ok((Index::Segmented(out), rows))
                }
                Index::Misc { .. } => unreachable!("handled above"),
            },
        }
    }

    fn filewise_lookup(&self) -> HashMap<&FilePath, usize> {
        match &self.index {
            Index::Filewise(files) => files.iter().enumerate().map(|(i, f)| (f, i)).collect(),
            Index::Segmented(segments) => {
                // First segment of each file wins; only used when the source
                // index is filewise, where this map is one-to-one anyway.
                let mut out = HashMap::new();
                for (i, seg) in segments.iter().enumerate() {
                    out.entry(&seg.file).or_insert(i);
                }
                out
            }
            Index::Misc { .. } => HashMap::new(),
        }
    }
}

/// Lookup context for [`Table::get`]: the declared schemes and the other
/// tables of the dataset (for misc-backed label mapping).
#[derive(Debug, Clone, Copy)]
pub struct GetContext<'a> {
    pub schemes: &'a BTreeMap<String, Scheme>,
    pub tables: &'a BTreeMap<String, Table>,
}

/// Translates labels of one column into another column of the backing
/// misc table.
struct MiscMapper {
    lookup: HashMap<String, Option<Value>>,
}

impl MiscMapper {
    fn resolve(
        table: &Table,
        col_id: &str,
        column: &Column,
        map_col: &str,
        ctx: &GetContext<'_>,
    ) -> Result<MiscMapper> {
        let scheme_id = column.scheme_id.as_deref().ok_or_else(|| {
            Error::TableQuery(format!(
                "column '{col_id}' of table '{}' has no misc-backed scheme",
                table.id
            ))
        })?;
        let scheme = ctx
            .schemes
            .get(scheme_id)
            .ok_or_else(|| Error::DanglingRef {
                kind: "scheme",
                id: scheme_id.to_string(),
                referrer: format!("table '{}' column '{col_id}'", table.id),
            })?;
        let misc_id = scheme.labels_table().ok_or_else(|| {
            Error::TableQuery(format!(
                "column '{col_id}' of table '{}' has no misc-backed scheme",
                table.id
            ))
        })?;
        let misc = ctx.tables.get(misc_id).ok_or_else(|| Error::DanglingRef {
            kind: "table",
            id: misc_id.to_string(),
            referrer: format!("scheme '{scheme_id}'"),
        })?;
        let map_values = misc
            .columns
            .get(map_col)
            .map(|c| c.values.clone())
            .ok_or_else(|| {
                Error::TableQuery(format!(
                    "column '{map_col}' is absent from misc table '{misc_id}'"
                ))
            })?;
        let labels = misc
            .misc_labels()
            .ok_or_else(|| Error::TableQuery(format!("table '{misc_id}' is not a misc table")))?;
        let mut lookup = HashMap::with_capacity(labels.len());
        for (label, value) in labels.into_iter().zip(map_values) {
            if lookup.insert(label.to_cell(), value).is_some() {
                return Err(Error::TableQuery(format!(
                    "misc table '{misc_id}' has ambiguous key '{}'",
                    "duplicate first index column value"
                )));
            }
        }
        Ok(MiscMapper { lookup })
    }

    fn apply(&self, values: &[Option<Value>]) -> Vec<Option<Value>> {
        values
            .iter()
            .map(|v| {
                v.as_ref()
                    .and_then(|label| self.lookup.get(&label.to_cell()).cloned().flatten())
            })
            .collect()
    }
}

/// The result of [`Table::get`]: an index plus plain value columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueFrame {
    pub index: Index,
    pub columns: IndexMap<String, Vec<Option<Value>>>,
}

impl ValueFrame {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// CSV rendering with the index columns first.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<String> = self.index.column_names();
        header.extend(self.columns.keys().cloned());
        out.push_str(&crate::table_csv::csv_line(&header));
        for i in 0..self.index.len() {
            let mut cells = self.index.row_cells(i);
            for values in self.columns.values() {
                cells.push(values[i].as_ref().map(Value::to_cell).unwrap_or_default());
            }
            out.push_str(&crate::table_csv::csv_line(&cells));
        }
        out
    }
}
