//! Binary table snapshots, written alongside the cached CSVs for fast
//! loading. The format is little-endian, length-prefixed, and carries a
//! format tag; readers fall back to the CSV on any mismatch or corruption.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use indexmap::IndexMap;

use crate::duration::Duration;
use crate::error::{Error, Result};
use crate::header::TableDecl;
use crate::index::{FilePath, Index, Segment};
use crate::table::{Column, SchemeContext, Table};
use crate::table_csv::parse_table_csv;
use crate::value::{Dtype, Value};

const MAGIC: &[u8; 6] = b"AVSNAP";
pub const FORMAT_TAG: u16 = 1;

pub fn snapshot_file(table_id: &str) -> String {
    format!("db.{table_id}.snapshot")
}

fn corrupt(what: &str) -> Error {
    Error::TableCsv(format!("snapshot: {what}"))
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new() -> Writer {
        Writer {
            buf: Vec::with_capacity(4096),
        }
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn opt_str(&mut self, s: Option<&str>) {
        match s {
            Some(s) => {
                self.u8(1);
                self.str(s);
            }
            None => self.u8(0),
        }
    }

    fn value(&mut self, v: &Value) {
        match v {
            Value::Bool(b) => {
                self.u8(0);
                self.u8(*b as u8);
            }
            Value::Date(d) => {
                self.u8(1);
                self.i64(d.num_days_from_ce() as i64);
            }
            Value::Float(f) => {
                self.u8(2);
                self.u64(f.to_bits());
            }
            Value::Integer(i) => {
                self.u8(3);
                self.i64(*i);
            }
            Value::Object(s) => {
                self.u8(4);
                self.str(s);
            }
            Value::Str(s) => {
                self.u8(5);
                self.str(s);
            }
            Value::Time(t) => {
                self.u8(6);
                self.i64(t.as_nanos());
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Reader<'a> {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(corrupt("unexpected end of data"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn str(&mut self) -> Result<String> {
        let len = self.u64()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| corrupt("invalid utf-8"))
    }

    fn opt_str(&mut self) -> Result<Option<String>> {
        Ok(match self.u8()? {
            0 => None,
            _ => Some(self.str()?),
        })
    }

    fn value(&mut self) -> Result<Value> {
        Ok(match self.u8()? {
            0 => Value::Bool(self.u8()? != 0),
            1 => {
                let days = self.i64()?;
                let date = NaiveDate::from_num_days_from_ce_opt(
                    i32::try_from(days).map_err(|_| corrupt("date out of range"))?,
                )
                .ok_or_else(|| corrupt("date out of range"))?;
                Value::Date(date)
            }
            2 => Value::Float(f64::from_bits(self.u64()?)),
            3 => Value::Integer(self.i64()?),
            4 => Value::Object(self.str()?),
            5 => Value::Str(self.str()?),
            6 => Value::Time(Duration::from_nanos(self.i64()?)),
            _ => return Err(corrupt("unknown value tag")),
        })
    }
}

fn dtype_tag(dtype: Dtype) -> u8 {
    match dtype {
        Dtype::Bool => 0,
        Dtype::Date => 1,
        Dtype::Float => 2,
        Dtype::Integer => 3,
        Dtype::Object => 4,
        Dtype::String => 5,
        Dtype::Time => 6,
    }
}

fn dtype_from_tag(tag: u8) -> Result<Dtype> {
    Ok(match tag {
        0 => Dtype::Bool,
        1 => Dtype::Date,
        2 => Dtype::Float,
        3 => Dtype::Integer,
        4 => Dtype::Object,
        5 => Dtype::String,
        6 => Dtype::Time,
        _ => return Err(corrupt("unknown dtype tag")),
    })
}

/// Serializes one table to the snapshot byte format.
pub fn encode_table(table: &Table) -> Vec<u8> {
    let mut w = Writer::new();
    w.buf.extend_from_slice(MAGIC);
    w.u16(FORMAT_TAG);
    w.str(&table.id);
    w.opt_str(table.split.as_deref());
    match &table.index {
        Index::Filewise(files) => {
            w.u8(0);
            w.u64(files.len() as u64);
            for f in files {
                w.str(f.as_str());
            }
        }
        Index::Segmented(segments) => {
            w.u8(1);
            w.u64(segments.len() as u64);
            for s in segments {
                w.str(s.file.as_str());
                w.i64(s.start.as_nanos());
                match s.end {
                    Some(end) => {
                        w.u8(1);
                        w.i64(end.as_nanos());
                    }
                    None => w.u8(0),
                }
            }
        }
        Index::Misc { columns, rows } => {
            w.u8(2);
            w.u64(columns.len() as u64);
            for (name, dtype) in columns {
                w.str(name);
                w.u8(dtype_tag(*dtype));
            }
            w.u64(rows.len() as u64);
            for row in rows {
                for value in row {
                    w.value(value);
                }
            }
        }
    }
    w.u64(table.columns.len() as u64);
    for (id, column) in &table.columns {
        w.str(id);
        w.opt_str(column.scheme_id.as_deref());
        w.opt_str(column.rater_id.as_deref());
        for value in &column.values {
            match value {
                Some(v) => {
                    w.u8(1);
                    w.value(v);
                }
                None => w.u8(0),
            }
        }
    }
    w.buf
}

/// Decodes a snapshot. The table is trusted (no scheme re-validation), so
/// loading skips the CSV parser's per-value checks.
pub fn decode_table(bytes: &[u8]) -> Result<Table> {
    let mut r = Reader::new(bytes);
    if r.take(MAGIC.len())? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let tag = r.u16()?;
    if tag != FORMAT_TAG {
        return Err(corrupt(&format!("format tag {tag}, expected {FORMAT_TAG}")));
    }
    let id = r.str()?;
    let split = r.opt_str()?;
    let index = match r.u8()? {
        0 => {
            let n = r.u64()? as usize;
            let mut files = Vec::with_capacity(n);
            for _ in 0..n {
                files.push(FilePath::new(r.str()?)?);
            }
            Index::Filewise(files)
        }
        1 => {
            let n = r.u64()? as usize;
            let mut segments = Vec::with_capacity(n);
            for _ in 0..n {
                let file = FilePath::new(r.str()?)?;
                let start = Duration::from_nanos(r.i64()?);
                let end = match r.u8()? {
                    0 => None,
                    _ => Some(Duration::from_nanos(r.i64()?)),
                };
                segments.push(Segment { file, start, end });
            }
            Index::Segmented(segments)
        }
        2 => {
            let n_cols = r.u64()? as usize;
            let mut columns = IndexMap::with_capacity(n_cols);
            for _ in 0..n_cols {
                let name = r.str()?;
                columns.insert(name, dtype_from_tag(r.u8()?)?);
            }
            let n_rows = r.u64()? as usize;
            let mut rows = Vec::with_capacity(n_rows);
            for _ in 0..n_rows {
                let mut row = Vec::with_capacity(n_cols);
                for _ in 0..n_cols {
                    row.push(r.value()?);
                }
                rows.push(row);
            }
            Index::Misc { columns, rows }
        }
        _ => return Err(corrupt("unknown index kind")),
    };
    let rows = index.len();
    let n_columns = r.u64()? as usize;
    let mut columns = IndexMap::with_capacity(n_columns);
    for _ in 0..n_columns {
        let col_id = r.str()?;
        let scheme_id = r.opt_str()?;
        let rater_id = r.opt_str()?;
        let mut values = Vec::with_capacity(rows);
        for _ in 0..rows {
            values.push(match r.u8()? {
                0 => None,
                _ => Some(r.value()?),
            });
        }
        columns.insert(
            col_id,
            Column {
                scheme_id,
                rater_id,
                values,
            },
        );
    }
    if r.pos != bytes.len() {
        return Err(corrupt("trailing bytes"));
    }
    Ok(Table {
        id,
        index,
        columns,
        split,
    })
}

/// Writes snapshots for the given tables next to their CSVs.
pub fn snapshot_tables<'a, I: IntoIterator<Item = &'a Table>>(dir: &Path, tables: I) -> Result<()> {
    for table in tables {
        write_snapshot(dir, table)?;
    }
    Ok(())
}

fn write_snapshot(dir: &Path, table: &Table) -> Result<()> {
    let target = dir.join(snapshot_file(&table.id));
    let temp = dir.join(format!(
        ".{}.part.{}",
        snapshot_file(&table.id),
        crate::cache::temp_suffix()
    ));
    fs::write(&temp, encode_table(table)).map_err(|e| Error::io(&temp, e))?;
    fs::rename(&temp, &target).map_err(|e| Error::io(&target, e))
}

/// Loads a cached table, preferring the snapshot. A missing, stale, or
/// corrupt snapshot falls back to the CSV and the snapshot is rewritten.
pub fn load_table_cached(
    dir: &Path,
    table_id: &str,
    decl: &TableDecl,
    ctx: SchemeContext<'_>,
) -> Result<Table> {
    let snap_path = dir.join(snapshot_file(table_id));
    if let Ok(bytes) = fs::read(&snap_path) {
        if let Ok(table) = decode_table(&bytes) {
            if table.id == table_id {
                return Ok(table);
            }
        }
    }
    let csv_path = csv_path(dir, table_id);
    let text = fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let table = parse_table_csv(&text, table_id, decl, ctx)?;
    write_snapshot(dir, &table)?;
    Ok(table)
}

fn csv_path(dir: &Path, table_id: &str) -> PathBuf {
    dir.join(crate::header::Header::table_file(table_id))
}
