//! Data card generation: a markdown document summarising a dataset's
//! metadata, tables, columns, schemes, and media statistics.

use std::fmt::Write as _;

use crate::deps::{DepKind, DependencyTable};
use crate::duration::Duration;
use crate::header::Header;
use crate::index::IndexKind;
use crate::scheme::Labels;
use crate::value::Value;

/// Renders the data card for one dataset version. Output is deterministic:
/// two renders of the same inputs are byte-identical.
pub fn render_datacard(header: &Header, deps: &DependencyTable) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}\n", header.name);

    let _ = writeln!(out, "## Metadata\n");
    let _ = writeln!(out, "| Field | Value |");
    let _ = writeln!(out, "| --- | --- |");
    let mut field = |name: &str, value: &str| {
        let _ = writeln!(
            out,
            "| {name} | {} |",
            value.replace('|', "\\|").replace('\n', " ")
        );
    };
    field("name", &header.name);
    field("source", &header.source);
    field("usage", &header.usage);
    if let Some(author) = &header.author {
        field("author", author);
    }
    if let Some(expires) = &header.expires {
        field("expires", &expires.format("%Y-%m-%d").to_string());
    }
    if !header.languages.is_empty() {
        field("languages", &header.languages.join(", "));
    }
    if let Some(license) = &header.license {
        field("license", license);
    }
    if let Some(organisation) = &header.organisation {
        field("organisation", organisation);
    }
    for (key, value) in &header.custom {
        field(key, value);
    }
    field("version", deps.dataset_version().as_str());
    out.push('\n');

    if let Some(description) = &header.description {
        let _ = writeln!(out, "## Description\n");
        let _ = writeln!(out, "{description}\n");
    }

    let media: Vec<_> = deps
        .entries()
        .filter(|e| e.kind == DepKind::Media && !e.removed)
        .collect();
    let total = media
        .iter()
        .filter_map(|e| e.duration)
        .fold(Duration::ZERO, |acc, d| {
            Duration::from_nanos(acc.as_nanos() + d.as_nanos())
        });
    let mut rates: Vec<u32> = media.iter().filter_map(|e| e.sampling_rate).collect();
    rates.sort_unstable();
    rates.dedup();
    let rates = if rates.is_empty() {
        "-".to_string()
    } else {
        rates
            .iter()
            .map(|r| format!("{r} Hz"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let _ = writeln!(out, "## Media\n");
    let _ = writeln!(out, "| Files | Total duration | Sampling rates |");
    let _ = writeln!(out, "| --- | --- | --- |");
    let _ = writeln!(out, "| {} | {total} | {rates} |\n", media.len());

    let _ = writeln!(out, "## Tables\n");
    let _ = writeln!(out, "| ID | Type | Split | Columns |");
    let _ = writeln!(out, "| --- | --- | --- | --- |");
    for (id, decl) in &header.tables {
        let kind = match decl.kind {
            IndexKind::Filewise => "filewise",
            IndexKind::Segmented => "segmented",
            IndexKind::Misc => "misc",
        };
        let split = decl.split.as_deref().unwrap_or("-");
        let columns = if decl.columns.is_empty() {
            "-".to_string()
        } else {
            decl.columns
                .iter()
                .map(|(col, c)| match (&c.scheme, &c.rater) {
                    (Some(s), Some(r)) => format!("{col} (scheme: {s}, rater: {r})"),
                    (Some(s), None) => format!("{col} (scheme: {s})"),
                    (None, Some(r)) => format!("{col} (rater: {r})"),
                    (None, None) => col.clone(),
                })
                .collect::<Vec<_>>()
                .join(", ")
        };
        let _ = writeln!(out, "| {id} | {kind} | {split} | {columns} |");
    }
    out.push('\n');

    let _ = writeln!(out, "## Schemes\n");
    let _ = writeln!(out, "| ID | Dtype | Constraints |");
    let _ = writeln!(out, "| --- | --- | --- |");
    for (id, scheme) in &header.schemes {
        let constraints = match (&scheme.labels, &scheme.min, &scheme.max) {
            (Some(Labels::Inline(labels)), _, _) => {
                let mut cells: Vec<String> = labels.iter().map(Value::to_cell).collect();
                cells.sort();
                format!("labels: {}", cells.join(", "))
            }
            (Some(Labels::MiscTable(table)), _, _) => {
                format!("labels from misc table '{table}'")
            }
            (None, None, None) => "-".to_string(),
            (None, min, max) => {
                let min = min
                    .as_ref()
                    .map(Value::to_cell)
                    .unwrap_or_else(|| "-".into());
                let max = max
                    .as_ref()
                    .map(Value::to_cell)
                    .unwrap_or_else(|| "-".into());
                format!("range: {min} .. {max}")
            }
        };
        let _ = writeln!(out, "| {id} | {} | {constraints} |", scheme.dtype);
    }

    out
}
