//! The human readable CSV form of tables: `db.<table id>.csv`.
//!
//! Dialect: comma separated, UTF-8, LF line ends, `"`-quoting only where a
//! cell contains comma/quote/newline, missing value = empty cell. Index
//! columns come first, then annotation columns in declaration order.

use indexmap::IndexMap;

use crate::duration::Duration;
use crate::error::{Error, Result};
use crate::header::TableDecl;
use crate::index::{FilePath, Index, IndexKind, Segment};
use crate::table::{Column, SchemeContext, Table};
use crate::value::{Dtype, Value};

/// Formats one CSV line, quoting cells only when required.
pub(crate) fn csv_line(cells: &[String]) -> String {
    let mut out = String::new();
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        if cell.contains(',') || cell.contains('"') || cell.contains('\n') || cell.contains('\r') {
            out.push('"');
            out.push_str(&cell.replace('"', "\"\""));
            out.push('"');
        } else {
            out.push_str(cell);
        }
    }
    out.push('\n');
    out
}

/// Serializes a table to CSV. Durations are emitted in day-clock form.
pub fn serialize_table_csv(table: &Table) -> String {
    let mut out = String::new();
    let mut header = table.index.column_names();
    header.extend(table.columns.keys().cloned());
    out.push_str(&csv_line(&header));
    for i in 0..table.index.len() {
        let mut cells = table.index.row_cells(i);
        for column in table.columns.values() {
            cells.push(
                column.values[i]
                    .as_ref()
                    .map(Value::to_cell)
                    .unwrap_or_default(),
            );
        }
        out.push_str(&csv_line(&cells));
    }
    out
}

/// Parses a table CSV under its header declaration, validating every value
/// against its scheme.
pub fn parse_table_csv(
    text: &str,
    table_id: &str,
    decl: &TableDecl,
    ctx: SchemeContext<'_>,
) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(text.as_bytes());

    let mut records = reader.records();
    let header_row = match records.next() {
        Some(row) => row.map_err(|e| Error::TableCsv(format!("table '{table_id}': {e}")))?,
        None => return Err(Error::TableCsv(format!("table '{table_id}' is empty"))),
    };

    let index_columns: Vec<String> = match decl.kind {
        IndexKind::Filewise => vec!["file".into()],
        IndexKind::Segmented => vec!["file".into(), "start".into(), "end".into()],
        IndexKind::Misc => decl
            .misc_index
            .as_ref()
            .map(|cols| cols.keys().cloned().collect())
            .unwrap_or_default(),
    };
    let mut expected: Vec<String> = index_columns.clone();
    expected.extend(decl.columns.keys().cloned());
    let actual: Vec<String> = header_row.iter().map(str::to_string).collect();
    if actual != expected {
        return Err(Error::TableCsv(format!(
            "table '{table_id}' header row is [{}], expected [{}]",
            actual.join(","),
            expected.join(",")
        )));
    }

    let n_index = index_columns.len();
    let mut files: Vec<FilePath> = Vec::new();
    let mut segments: Vec<Segment> = Vec::new();
    let mut misc_rows: Vec<Vec<Value>> = Vec::new();
    let mut value_rows: Vec<Vec<Option<Value>>> = vec![Vec::new(); decl.columns.len()];

    for record in records {
        let record = record.map_err(|e| Error::TableCsv(format!("table '{table_id}': {e}")))?;
        let cells: Vec<&str> = record.iter().collect();
        match decl.kind {
            IndexKind::Filewise => files.push(FilePath::new(cells[0])?),
            IndexKind::Segmented => {
                let file = FilePath::new(cells[0])?;
                let start = Duration::parse(cells[1])?;
                let end = if cells[2].is_empty() {
                    None
                } else {
                    Some(Duration::parse(cells[2])?)
                };
                segments.push(Segment::new(file, start, end)?);
            }
            IndexKind::Misc => {
                let dtypes = decl.misc_index.as_ref().expect("validated misc decl");
                let mut row = Vec::with_capacity(n_index);
                for (cell, (col, dtype)) in cells[..n_index].iter().zip(dtypes.iter()) {
                    if cell.is_empty() {
                        return Err(Error::TableCsv(format!(
                            "table '{table_id}': missing index value in column '{col}'"
                        )));
                    }
                    row.push(Value::parse(cell, *dtype)?);
                }
                misc_rows.push(row);
            }
        }
        for (j, (_, col_decl)) in decl.columns.iter().enumerate() {
            let cell = cells[n_index + j];
            let value = if cell.is_empty() {
                None
            } else {
                let dtype = col_decl
                    .scheme
                    .as_ref()
                    .and_then(|s| ctx.schemes.get(s))
                    .map(|s| s.dtype)
                    .unwrap_or(Dtype::Object);
                Some(Value::parse(cell, dtype)?)
            };
            value_rows[j].push(value);
        }
    }

    let index = match decl.kind {
        IndexKind::Filewise => Index::filewise(files)?,
        IndexKind::Segmented => Index::segmented(segments)?,
        IndexKind::Misc => Index::misc(
            decl.misc_index.clone().expect("validated misc decl"),
            misc_rows,
        )?,
    };
    let mut columns = IndexMap::new();
    for ((col_id, col_decl), values) in decl.columns.iter().zip(value_rows) {
        columns.insert(
            col_id.clone(),
            Column {
                scheme_id: col_decl.scheme.clone(),
                rater_id: col_decl.rater.clone(),
                values,
            },
        );
    }
    Table::new(table_id, index, columns, decl.split.clone(), ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::header::ColumnDecl;
    use crate::scheme::Scheme;
    use std::collections::{BTreeMap, HashMap};

    fn emotion_ctx() -> BTreeMap<String, Scheme> {
        let mut schemes = BTreeMap::new();
        schemes.insert(
            "emotion".to_string(),
            Scheme::with_labels(
                Dtype::String,
                vec![
                    Value::Str("happy".into()),
                    Value::Str("angry".into()),
                    Value::Str("neutral".into()),
                ],
            ),
        );
        schemes
    }

    fn filewise_decl() -> TableDecl {
        let mut columns = IndexMap::new();
        columns.insert(
            "emotion".to_string(),
            ColumnDecl {
                scheme: Some("emotion".into()),
                rater: None,
            },
        );
        TableDecl {
            kind: IndexKind::Filewise,
            misc_index: None,
            split: None,
            columns,
        }
    }

    #[test]
    fn parses_filewise_table() {
        let schemes = emotion_ctx();
        let labels = HashMap::new();
        let table = parse_table_csv(
            "file,emotion\na.wav,happy\nb.wav,angry\n",
            "emotion",
            &filewise_decl(),
            SchemeContext::new(&schemes, &labels),
        )
        .unwrap();
        assert_eq!(table.index.len(), 2);
        assert_eq!(
            table.columns["emotion"].values[0],
            Some(Value::Str("happy".into()))
        );
    }

    #[test]
    fn parses_segmented_table_with_day_clock_times() {
        let schemes = emotion_ctx();
        let labels = HashMap::new();
        let mut decl = filewise_decl();
        decl.kind = IndexKind::Segmented;
        let text = "file,start,end,emotion\n\
                    c.wav,0 days 00:00:01.0,0 days 00:00:03.3,happy\n\
                    c.wav,0 days 00:00:03.5,0 days 00:00:07.8,angry\n";
        let table = parse_table_csv(
            text,
            "emotion",
            &decl,
            SchemeContext::new(&schemes, &labels),
        )
        .unwrap();
        match &table.index {
            Index::Segmented(rows) => {
                assert_eq!(rows[0].start, Duration::from_secs(1));
                assert_eq!(rows[1].end, Some(Duration::from_nanos(7_800_000_000)));
            }
            other => panic!("expected segmented index, got {other:?}"),
        }
    }

    #[test]
    fn parses_misc_table() {
        let mut schemes = BTreeMap::new();
        schemes.insert(
            "age".to_string(),
            Scheme::with_range(
                Dtype::Integer,
                Some(Value::Integer(0)),
                Some(Value::Integer(120)),
            ),
        );
        schemes.insert("gender".to_string(), Scheme::plain(Dtype::String));
        let labels = HashMap::new();
        let mut misc_index = IndexMap::new();
        misc_index.insert("speaker".to_string(), Dtype::String);
        let mut columns = IndexMap::new();
        columns.insert(
            "age".to_string(),
            ColumnDecl {
                scheme: Some("age".into()),
                rater: None,
            },
        );
        columns.insert(
            "gender".to_string(),
            ColumnDecl {
                scheme: Some("gender".into()),
                rater: None,
            },
        );
        let decl = TableDecl {
            kind: IndexKind::Misc,
            misc_index: Some(misc_index),
            split: None,
            columns,
        };
        let text = "speaker,age,gender\nspk0,29,female\nspk1,93,male\n";
        let table = parse_table_csv(
            text,
            "speakers",
            &decl,
            SchemeContext::new(&schemes, &labels),
        )
        .unwrap();
        assert_eq!(table.index.len(), 2);
        assert_eq!(table.columns["age"].values[1], Some(Value::Integer(93)));
    }

    #[test]
    fn round_trips_preserve_rows_and_values() {
        let schemes = emotion_ctx();
        let labels = HashMap::new();
        let ctx = SchemeContext::new(&schemes, &labels);
        let texts = [
            ("file,emotion\na.wav,happy\nb.wav,angry\n", IndexKind::Filewise),
            (
                "file,start,end,emotion\nc.wav,0 days 00:00:01,0 days 00:00:03.3,happy\nc.wav,0 days 00:00:03.5,,\n",
                IndexKind::Segmented,
            ),
        ];
        for (text, kind) in texts {
            let mut decl = filewise_decl();
            decl.kind = kind;
            let table = parse_table_csv(text, "t", &decl, ctx).unwrap();
            let out = serialize_table_csv(&table);
            let again = parse_table_csv(&out, "t", &decl, ctx).unwrap();
            assert_eq!(table, again);
        }
    }

    #[test]
    fn value_violating_scheme_is_rejected() {
        let schemes = emotion_ctx();
        let labels = HashMap::new();
        let err = parse_table_csv(
            "file,emotion\na.wav,bored\n",
            "emotion",
            &filewise_decl(),
            SchemeContext::new(&schemes, &labels),
        );
        assert!(matches!(err, Err(Error::SchemeViolation { .. })));
    }

    #[test]
    fn duplicate_rows_are_rejected() {
        let schemes = emotion_ctx();
        let labels = HashMap::new();
        let err = parse_table_csv(
            "file,emotion\na.wav,happy\na.wav,angry\n",
            "emotion",
            &filewise_decl(),
            SchemeContext::new(&schemes, &labels),
        );
        assert!(matches!(err, Err(Error::DuplicateRow(_))));
    }

    #[test]
    fn header_row_mismatch_is_rejected() {
        let schemes = emotion_ctx();
        let labels = HashMap::new();
        let err = parse_table_csv(
            "file,mood\na.wav,happy\n",
            "emotion",
            &filewise_decl(),
            SchemeContext::new(&schemes, &labels),
        );
        assert!(matches!(err, Err(Error::TableCsv(_))));
    }

    #[test]
    fn quoting_round_trips_commas_and_quotes() {
        let mut schemes = BTreeMap::new();
        schemes.insert("note".to_string(), Scheme::plain(Dtype::String));
        let labels = HashMap::new();
        let ctx = SchemeContext::new(&schemes, &labels);
        let mut columns = IndexMap::new();
        columns.insert(
            "note".to_string(),
            ColumnDecl {
                scheme: Some("note".into()),
                rater: None,
            },
        );
        let decl = TableDecl {
            kind: IndexKind::Filewise,
            misc_index: None,
            split: None,
            columns,
        };
        let text = "file,note\na.wav,\"hello, \"\"world\"\"\"\n";
        let table = parse_table_csv(text, "notes", &decl, ctx).unwrap();
        assert_eq!(
            table.columns["note"].values[0],
            Some(Value::Str("hello, \"world\"".into()))
        );
        assert_eq!(serialize_table_csv(&table), text);
    }
}
