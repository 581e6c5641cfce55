//! CSV output with `#`-prefixed metadata lines ahead of the header row.

use std::fmt::Write as _;

/// Ordered `key = value` pairs echoed at the top of every output file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn extend(&mut self, other: &Metadata) -> &mut Self {
        self.entries.extend(other.entries.iter().cloned());
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }
}

/// A CSV document under construction.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: String,
    rows: Vec<String>,
}

impl CsvTable {
    pub fn new(header: &str) -> Self {
        Self {
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: String) {
        debug_assert_eq!(
            row.split(',').count(),
            self.header.split(',').count(),
            "row does not match header `{}`",
            self.header
        );
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self, meta: &Metadata) -> String {
        let mut out = meta.render();
        out.push_str(&self.header);
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

/// Formats an optional float as an empty cell when absent.
pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
