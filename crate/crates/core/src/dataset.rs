//! A dataset in memory: header plus parsed tables, read from and written to
//! a root folder.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::header::{parse_header, serialize_header, Header};
use crate::index::FilePath;
use crate::table::{GetContext, SchemeContext, Table, ValueFrame};
use crate::table_csv::{parse_table_csv, serialize_table_csv};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub header: Header,
    pub tables: BTreeMap<String, Table>,
}

impl Dataset {
    pub fn new(header: Header) -> Dataset {
        Dataset {
            header,
            tables: BTreeMap::new(),
        }
    }

    /// Reads `db.yaml` and every declared table from a root folder.
    pub fn from_root(root: &Path) -> Result<Dataset> {
        let header_path = root.join("db.yaml");
        let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
        let header = parse_header(&text)?;
        let order = Dataset::table_parse_order(&header)?;
        let mut dataset = Dataset::new(header);
        for table_id in order {
            let path = root.join(Header::table_file(&table_id));
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            dataset.insert_table_csv(&table_id, &text)?;
        }
        dataset.check_complete()?;
        Ok(dataset)
    }

    /// Parses and adds one table from CSV text. Tables whose schemes are
    /// backed by misc tables require those tables to be added first.
    pub fn insert_table_csv(&mut self, table_id: &str, text: &str) -> Result<()> {
        let decl = self
            .header
            .tables
            .get(table_id)
            .ok_or_else(|| Error::DanglingRef {
                kind: "table",
                id: table_id.to_string(),
                referrer: "table file".into(),
            })?;
        let misc_labels = self.misc_label_sets();
        let ctx = SchemeContext::new(&self.header.schemes, &misc_labels);
        let table = parse_table_csv(text, table_id, decl, ctx)?;
        self.tables.insert(table_id.to_string(), table);
        Ok(())
    }

    /// Order in which table files must be parsed so that misc label sources
    /// come before their dependents. Errors on circular references.
    pub fn table_parse_order(header: &Header) -> Result<Vec<String>> {
        let needs: BTreeMap<&str, HashSet<&str>> = header
            .tables
            .iter()
            .map(|(id, decl)| {
                let deps: HashSet<&str> = decl
                    .columns
                    .values()
                    .filter_map(|c| c.scheme.as_deref())
                    .filter_map(|s| header.schemes.get(s))
                    .filter_map(|s| s.labels_table())
                    .filter(|t| *t != id.as_str())
                    .collect();
                (id.as_str(), deps)
            })
            .collect();
        let mut order: Vec<String> = Vec::new();
        let mut done: HashSet<&str> = HashSet::new();
        while order.len() < header.tables.len() {
            let mut progressed = false;
            for (id, deps) in &needs {
                if !done.contains(id) && deps.iter().all(|d| done.contains(d)) {
                    done.insert(id);
                    order.push(id.to_string());
                    progressed = true;
                }
            }
            if !progressed {
                return Err(Error::Header(
                    "circular misc table references between schemes".into(),
                ));
            }
        }
        Ok(order)
    }

    /// Label sets of all parsed misc tables, keyed by table id.
    pub fn misc_label_sets(&self) -> HashMap<String, Vec<Value>> {
        self.tables
            .iter()
            .filter_map(|(id, t)| t.misc_labels().map(|l| (id.clone(), l)))
            .collect()
    }

    /// Verifies that every declared table has been parsed.
    pub fn check_complete(&self) -> Result<()> {
        for id in self.header.tables.keys() {
            if !self.tables.contains_key(id) {
                return Err(Error::NotFound(format!("table '{id}' was not loaded")));
            }
        }
        Ok(())
    }

    /// Writes `db.yaml` and all tables into a folder.
    pub fn write_to(&self, root: &Path) -> Result<()> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let header_path = root.join("db.yaml");
        fs::write(&header_path, serialize_header(&self.header))
            .map_err(|e| Error::io(&header_path, e))?;
        for (id, table) in &self.tables {
            let path = root.join(Header::table_file(id));
            fs::write(&path, serialize_table_csv(table)).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// All media files referenced by the given tables, in first-seen order.
    pub fn referenced_files<'a, I: IntoIterator<Item = &'a str>>(
        &self,
        table_ids: I,
    ) -> Vec<FilePath> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for id in table_ids {
            if let Some(table) = self.tables.get(id) {
                for file in table.index.files() {
                    if seen.insert(file.clone()) {
                        out.push(file.clone());
                    }
                }
            }
        }
        out
    }

    /// All media files referenced by any table.
    pub fn all_referenced_files(&self) -> Vec<FilePath> {
        self.referenced_files(self.tables.keys().map(String::as_str))
    }

    /// Re-indexed, optionally mapped view of one table; see [`Table::get`].
    pub fn get(
        &self,
        table_id: &str,
        index: Option<&crate::index::Index>,
        map: Option<&str>,
    ) -> Result<ValueFrame> {
        let table = self
            .tables
            .get(table_id)
            .ok_or_else(|| Error::NotFound(format!("table '{table_id}'")))?;
        table.get(
            index,
            map,
            GetContext {
                schemes: &self.header.schemes,
                tables: &self.tables,
            },
        )
    }
}
