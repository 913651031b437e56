//! The dataset header: identity, metadata, and declarations of schemes,
//! tables, splits, raters, and attachments. Stored as `db.yaml` in the
//! dataset root.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde_yaml::{Mapping, Value as Yaml};

use crate::error::{Error, Result};
use crate::index::{FilePath, IndexKind};
use crate::scheme::{Labels, Scheme};
use crate::value::{Dtype, Value};

/// Declaration of a table in the header. The actual rows live in
/// `db.<table id>.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDecl {
    pub kind: IndexKind,
    /// Key columns of a misc index, in declaration order.
    pub misc_index: Option<IndexMap<String, Dtype>>,
    pub split: Option<String>,
    pub columns: IndexMap<String, ColumnDecl>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnDecl {
    pub scheme: Option<String>,
    pub rater: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Dev,
    Test,
    Other,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Dev => "dev",
            SplitKind::Test => "test",
            SplitKind::Other => "other",
        }
    }

    pub fn parse(text: &str) -> Result<SplitKind> {
        match text {
            "train" => Ok(SplitKind::Train),
            "dev" => Ok(SplitKind::Dev),
            "test" => Ok(SplitKind::Test),
            "other" => Ok(SplitKind::Other),
            _ => Err(Error::Header(format!("unknown split type '{text}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDecl {
    pub kind: SplitKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RaterDecl {
    pub kind: Option<String>,
    pub description: Option<String>,
}

/// The dataset header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Header {
    pub name: String,
    pub source: String,
    pub usage: String,
    pub author: Option<String>,
    pub description: Option<String>,
    pub expires: Option<NaiveDate>,
    pub languages: Vec<String>,
    pub license: Option<String>,
    pub organisation: Option<String>,
    /// Unknown top-level keys, preserved across parse/serialize.
    pub custom: BTreeMap<String, String>,
    pub schemes: BTreeMap<String, Scheme>,
    pub tables: BTreeMap<String, TableDecl>,
    pub splits: BTreeMap<String, SplitDecl>,
    pub raters: BTreeMap<String, RaterDecl>,
    pub attachments: BTreeMap<String, FilePath>,
}

const KNOWN_KEYS: &[&str] = &[
    "name",
    "source",
    "usage",
    "author",
    "description",
    "expires",
    "languages",
    "license",
    "organisation",
    "attachments",
    "raters",
    "schemes",
    "splits",
    "tables",
];

impl Header {
    pub fn new(
        name: impl Into<String>,
        source: impl Into<String>,
        usage: impl Into<String>,
    ) -> Header {
        Header {
            name: name.into(),
            source: source.into(),
            usage: usage.into(),
            author: None,
            description: None,
            expires: None,
            languages: Vec::new(),
            license: None,
            organisation: None,
            custom: BTreeMap::new(),
            schemes: BTreeMap::new(),
            tables: BTreeMap::new(),
            splits: BTreeMap::new(),
            raters: BTreeMap::new(),
            attachments: BTreeMap::new(),
        }
    }

    /// Checks the header's internal invariants: mandatory fields, scheme
    /// structure, and that every reference resolves.
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::MissingField("name"));
        }
        if self.source.is_empty() {
            return Err(Error::MissingField("source"));
        }
        if self.usage.is_empty() {
            return Err(Error::MissingField("usage"));
        }
        for key in self.custom.keys() {
            if KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Header(format!(
                    "custom field '{key}' collides with a standard field"
                )));
            }
        }
        for (id, scheme) in &self.schemes {
            scheme.validate(id)?;
            if let Some(table_id) = scheme.labels_table() {
                let decl = self
                    .tables
                    .get(table_id)
                    .ok_or_else(|| Error::DanglingRef {
                        kind: "table",
                        id: table_id.to_string(),
                        referrer: format!("scheme '{id}'"),
                    })?;
                let misc_index = decl
                    .misc_index
                    .as_ref()
                    .filter(|_| decl.kind == IndexKind::Misc);
                let first = misc_index.and_then(|cols| cols.values().next());
                match first {
                    Some(dtype) if *dtype == scheme.dtype => {}
                    Some(dtype) => {
                        return Err(Error::Header(format!(
                            "scheme '{id}' has dtype {} but misc table '{table_id}' is keyed by {dtype}",
                            scheme.dtype
                        )))
                    }
                    None => {
                        return Err(Error::Header(format!(
                            "scheme '{id}' references '{table_id}', which is not a misc table"
                        )))
                    }
                }
            }
        }
        for (id, decl) in &self.tables {
            match decl.kind {
                IndexKind::Misc => {
                    let cols = decl.misc_index.as_ref().ok_or_else(|| {
                        Error::Header(format!("misc table '{id}' declares no index columns"))
                    })?;
                    if cols.is_empty() {
                        return Err(Error::Header(format!(
                            "misc table '{id}' declares no index columns"
                        )));
                    }
                    for col in decl.columns.keys() {
                        if cols.contains_key(col) {
                            return Err(Error::Header(format!(
                                "table '{id}' column '{col}' collides with an index column"
                            )));
                        }
                    }
                }
                _ => {
                    if decl.misc_index.is_some() {
                        return Err(Error::Header(format!(
                            "table '{id}' is not misc but declares index columns"
                        )));
                    }
                }
            }
            if let Some(split) = &decl.split {
                if !self.splits.contains_key(split) {
                    return Err(Error::DanglingRef {
                        kind: "split",
                        id: split.clone(),
                        referrer: format!("table '{id}'"),
                    });
                }
            }
            for (col_id, col) in &decl.columns {
                if let Some(scheme) = &col.scheme {
                    if !self.schemes.contains_key(scheme) {
                        return Err(Error::DanglingRef {
                            kind: "scheme",
                            id: scheme.clone(),
                            referrer: format!("table '{id}' column '{col_id}'"),
                        });
                    }
                }
                if let Some(rater) = &col.rater {
                    if !self.raters.contains_key(rater) {
                        return Err(Error::DanglingRef {
                            kind: "rater",
                            id: rater.clone(),
                            referrer: format!("table '{id}' column '{col_id}'"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Table file name for a table id.
    pub fn table_file(table_id: &str) -> String {
        format!("db.{table_id}.csv")
    }
}

/// Parses a `db.yaml` document into a validated [`Header`].
pub fn parse_header(text: &str) -> Result<Header> {
    let doc: Yaml =
        serde_yaml::from_str(text).map_err(|e| Error::Header(format!("invalid yaml: {e}")))?;
    let map = as_mapping(&doc, "document")?;

    let mut header = Header::new("", "", "");
    for (key, value) in map {
        let key = key
            .as_str()
            .ok_or_else(|| Error::Header("non-string top-level key".into()))?;
        match key {
            "name" => header.name = scalar_string(value, key)?,
            "source" => header.source = scalar_string(value, key)?,
            "usage" => header.usage = scalar_string(value, key)?,
            "author" => header.author = Some(scalar_string(value, key)?),
            "description" => header.description = Some(scalar_string(value, key)?),
            "license" => header.license = Some(scalar_string(value, key)?),
            "organisation" => header.organisation = Some(scalar_string(value, key)?),
            "expires" => {
                let text = scalar_string(value, key)?;
                header.expires = Some(
                    NaiveDate::parse_from_str(&text, "%Y-%m-%d")
                        .map_err(|_| Error::BadDate(text))?,
                );
            }
            "languages" => {
                let seq = value
                    .as_sequence()
                    .ok_or_else(|| Error::Header("'languages' must be a list".into()))?;
                header.languages = seq
                    .iter()
                    .map(|v| scalar_string(v, "languages"))
                    .collect::<Result<_>>()?;
            }
            "attachments" => {
                for (id, path) in as_mapping(value, key)? {
                    let id = scalar_string(id, "attachment id")?;
                    let path = FilePath::new(scalar_string(path, "attachment path")?)?;
                    header.attachments.insert(id, path);
                }
            }
            "raters" => {
                for (id, decl) in as_mapping(value, key)? {
                    let id = scalar_string(id, "rater id")?;
                    header.raters.insert(id, parse_rater(decl)?);
                }
            }
            "schemes" => {
                for (id, decl) in as_mapping(value, key)? {
                    let id = scalar_string(id, "scheme id")?;
                    let scheme = parse_scheme(&id, decl)?;
                    header.schemes.insert(id, scheme);
                }
            }
            "splits" => {
                for (id, decl) in as_mapping(value, key)? {
                    let id = scalar_string(id, "split id")?;
                    header.splits.insert(id, parse_split(decl)?);
                }
            }
            "tables" => {
                for (id, decl) in as_mapping(value, key)? {
                    let id = scalar_string(id, "table id")?;
                    let table = parse_table_decl(&id, decl)?;
                    header.tables.insert(id, table);
                }
            }
            // Unknown top-level scalars are preserved as custom metadata.
            other => {
                let text = scalar_string(value, other).map_err(|_| {
                    Error::Header(format!("custom field '{other}' must be a scalar"))
                })?;
                header.custom.insert(other.to_string(), text);
            }
        }
    }
    header.validate()?;
    Ok(header)
}

/// Serializes a header to YAML. Output is deterministic: fixed key order for
/// standard fields, custom keys and sections sorted by id.
pub fn serialize_header(header: &Header) -> String {
    let mut root = Mapping::new();
    root.insert("name".into(), header.name.clone().into());
    root.insert("source".into(), header.source.clone().into());
    root.insert("usage".into(), header.usage.clone().into());
    if let Some(v) = &header.author {
        root.insert("author".into(), v.clone().into());
    }
    if let Some(v) = &header.description {
        root.insert("description".into(), v.clone().into());
    }
    if let Some(v) = &header.expires {
        root.insert("expires".into(), v.format("%Y-%m-%d").to_string().into());
    }
    if !header.languages.is_empty() {
        let seq: Vec<Yaml> = header.languages.iter().map(|l| l.clone().into()).collect();
        root.insert("languages".into(), Yaml::Sequence(seq));
    }
    if let Some(v) = &header.license {
        root.insert("license".into(), v.clone().into());
    }
    if let Some(v) = &header.organisation {
        root.insert("organisation".into(), v.clone().into());
    }
    for (key, value) in &header.custom {
        root.insert(key.clone().into(), value.clone().into());
    }
    if !header.attachments.is_empty() {
        let mut map = Mapping::new();
        for (id, path) in &header.attachments {
            map.insert(id.clone().into(), path.to_string().into());
        }
        root.insert("attachments".into(), Yaml::Mapping(map));
    }
    if !header.raters.is_empty() {
        let mut map = Mapping::new();
        for (id, rater) in &header.raters {
            let mut decl = Mapping::new();
            if let Some(kind) = &rater.kind {
                decl.insert("type".into(), kind.clone().into());
            }
            if let Some(desc) = &rater.description {
                decl.insert("description".into(), desc.clone().into());
            }
            map.insert(id.clone().into(), Yaml::Mapping(decl));
        }
        root.insert("raters".into(), Yaml::Mapping(map));
    }
    if !header.schemes.is_empty() {
        let mut map = Mapping::new();
        for (id, scheme) in &header.schemes {
            map.insert(id.clone().into(), scheme_to_yaml(scheme));
        }
        root.insert("schemes".into(), Yaml::Mapping(map));
    }
    if !header.splits.is_empty() {
        let mut map = Mapping::new();
        for (id, split) in &header.splits {
            let mut decl = Mapping::new();
            decl.insert("type".into(), split.kind.as_str().into());
            map.insert(id.clone().into(), Yaml::Mapping(decl));
        }
        root.insert("splits".into(), Yaml::Mapping(map));
    }
    if !header.tables.is_empty() {
        let mut map = Mapping::new();
        for (id, table) in &header.tables {
            map.insert(id.clone().into(), table_decl_to_yaml(table));
        }
        root.insert("tables".into(), Yaml::Mapping(map));
    }
    serde_yaml::to_string(&Yaml::Mapping(root)).expect("yaml serialization cannot fail")
}

fn parse_scheme(id: &str, decl: &Yaml) -> Result<Scheme> {
    let map = as_mapping(decl, "scheme")?;
    let dtype_text = map
        .get("dtype")
        .map(|v| scalar_string(v, "dtype"))
        .transpose()?
        .ok_or_else(|| Error::Header(format!("scheme '{id}' has no dtype")))?;
    let dtype = Dtype::parse(&dtype_text)?;
    let mut scheme = Scheme::plain(dtype);
    for (key, value) in map {
        let key = scalar_string(key, "scheme key")?;
        match key.as_str() {
            "dtype" => {}
            "labels" => {
                scheme.labels = Some(match value {
                    Yaml::Sequence(seq) => {
                        let values = seq
                            .iter()
                            .map(|v| Value::parse(&scalar_string(v, "label")?, dtype))
                            .collect::<Result<Vec<_>>>()?;
                        Labels::Inline(values)
                    }
                    other => Labels::MiscTable(scalar_string(other, "labels")?),
                });
            }
            "min" => scheme.min = Some(Value::parse(&scalar_string(value, "min")?, dtype)?),
            "max" => scheme.max = Some(Value::parse(&scalar_string(value, "max")?, dtype)?),
            other => {
                return Err(Error::Header(format!(
                    "scheme '{id}' has unknown key '{other}'"
                )))
            }
        }
    }
    Ok(scheme)
}

fn scheme_to_yaml(scheme: &Scheme) -> Yaml {
    let mut map = Mapping::new();
    map.insert("dtype".into(), scheme.dtype.as_str().into());
    match &scheme.labels {
        Some(Labels::Inline(labels)) => {
            let seq: Vec<Yaml> = labels.iter().map(value_to_yaml).collect();
            map.insert("labels".into(), Yaml::Sequence(seq));
        }
        Some(Labels::MiscTable(table)) => {
            map.insert("labels".into(), table.clone().into());
        }
        None => {}
    }
    if let Some(min) = &scheme.min {
        map.insert("min".into(), value_to_yaml(min));
    }
    if let Some(max) = &scheme.max {
        map.insert("max".into(), value_to_yaml(max));
    }
    Yaml::Mapping(map)
}

fn value_to_yaml(value: &Value) -> Yaml {
    match value {
        Value::Bool(v) => Yaml::Bool(*v),
        Value::Integer(v) => Yaml::Number((*v).into()),
        Value::Float(v) => Yaml::Number((*v).into()),
        other => other.to_cell().into(),
    }
}

fn parse_split(decl: &Yaml) -> Result<SplitDecl> {
    let map = as_mapping(decl, "split")?;
    let kind = map
        .get("type")
        .map(|v| scalar_string(v, "split type"))
        .transpose()?
        .ok_or_else(|| Error::Header("split declares no type".into()))?;
    Ok(SplitDecl {
        kind: SplitKind::parse(&kind)?,
    })
}

fn parse_rater(decl: &Yaml) -> Result<RaterDecl> {
    let map = as_mapping(decl, "rater")?;
    Ok(RaterDecl {
        kind: map
            .get("type")
            .map(|v| scalar_string(v, "rater type"))
            .transpose()?,
        description: map
            .get("description")
            .map(|v| scalar_string(v, "rater description"))
            .transpose()?,
    })
}

fn parse_table_decl(id: &str, decl: &Yaml) -> Result<TableDecl> {
    let map = as_mapping(decl, "table")?;
    let kind_text = map
        .get("type")
        .map(|v| scalar_string(v, "table type"))
        .transpose()?
        .ok_or_else(|| Error::Header(format!("table '{id}' declares no type")))?;
    let kind = match kind_text.as_str() {
        "filewise" => IndexKind::Filewise,
        "segmented" => IndexKind::Segmented,
        "misc" => IndexKind::Misc,
        other => return Err(Error::Header(format!("unknown table type '{other}'"))),
    };
    let misc_index = match map.get("index") {
        None => None,
        Some(value) => {
            let mut cols = IndexMap::new();
            for (col, dtype) in as_mapping(value, "index")? {
                cols.insert(
                    scalar_string(col, "index column")?,
                    Dtype::parse(&scalar_string(dtype, "index dtype")?)?,
                );
            }
            Some(cols)
        }
    };
    let split = map
        .get("split")
        .map(|v| scalar_string(v, "split"))
        .transpose()?;
    let mut columns = IndexMap::new();
    if let Some(value) = map.get("columns") {
        for (col_id, col_decl) in as_mapping(value, "columns")? {
            let col_map = as_mapping(col_decl, "column")?;
            columns.insert(
                scalar_string(col_id, "column id")?,
                ColumnDecl {
                    scheme: col_map
                        .get("scheme")
                        .map(|v| scalar_string(v, "scheme"))
                        .transpose()?,
                    rater: col_map
                        .get("rater")
                        .map(|v| scalar_string(v, "rater"))
                        .transpose()?,
                },
            );
        }
    }
    Ok(TableDecl {
        kind,
        misc_index,
        split,
        columns,
    })
}

fn table_decl_to_yaml(decl: &TableDecl) -> Yaml {
    let mut map = Mapping::new();
    let kind = match decl.kind {
        IndexKind::Filewise => "filewise",
        IndexKind::Segmented => "segmented",
        IndexKind::Misc => "misc",
    };
    map.insert("type".into(), kind.into());
    if let Some(cols) = &decl.misc_index {
        let mut index = Mapping::new();
        for (col, dtype) in cols {
            index.insert(col.clone().into(), dtype.as_str().into());
        }
        map.insert("index".into(), Yaml::Mapping(index));
    }
    if let Some(split) = &decl.split {
        map.insert("split".into(), split.clone().into());
    }
    if !decl.columns.is_empty() {
        let mut columns = Mapping::new();
        for (col_id, col) in &decl.columns {
            let mut col_map = Mapping::new();
            if let Some(scheme) = &col.scheme {
                col_map.insert("scheme".into(), scheme.clone().into());
            }
            if let Some(rater) = &col.rater {
                col_map.insert("rater".into(), rater.clone().into());
            }
            columns.insert(col_id.clone().into(), Yaml::Mapping(col_map));
        }
        map.insert("columns".into(), Yaml::Mapping(columns));
    }
    Yaml::Mapping(map)
}

fn as_mapping<'a>(value: &'a Yaml, what: &str) -> Result<&'a Mapping> {
    value
        .as_mapping()
        .ok_or_else(|| Error::Header(format!("'{what}' must be a mapping")))
}

fn scalar_string(value: &Yaml, what: &str) -> Result<String> {
    match value {
        Yaml::String(s) => Ok(s.clone()),
        Yaml::Number(n) => Ok(n.to_string()),
        Yaml::Bool(b) => Ok(b.to_string()),
        _ => Err(Error::Header(format!("'{what}' must be a scalar"))),
    }
}
