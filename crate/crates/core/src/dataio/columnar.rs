//! Tab-separated columnar text with a leading schema line:
//!
//! ```text
//! #schema_version=1 kind=<kind>
//! col_a    col_b
//! 0        0.5
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Accumulates rows in memory and writes the file in one go.
#[derive(Debug, Clone)]
pub struct ColumnarWriter {
    buf: String,
    columns: usize,
}

impl ColumnarWriter {
    pub fn new(kind: &str, columns: &[&str]) -> Self {
        let mut buf = format!("#schema_version={SCHEMA_VERSION} kind={kind}\n");
        buf.push_str(&columns.join("\t"));
        buf.push('\n');
        ColumnarWriter {
            buf,
            columns: columns.len(),
        }
    }

    pub fn row(&mut self, fields: &[&dyn std::fmt::Display]) {
        assert_eq!(fields.len(), self.columns, "row width does not match header");
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push('\t');
            }
            write!(self.buf, "{f}").expect("writing to a String cannot fail");
        }
        self.buf.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(path, &self.buf)?;
        Ok(())
    }
}

/// One data row with its 1-based line number in the file.
#[derive(Debug, Clone)]
pub struct Row {
    pub line: usize,
    pub fields: Vec<String>,
}

impl Row {
    pub fn parse<T: std::str::FromStr>(&self, path: &Path, col: usize, name: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.fields[col]
            .parse()
            .map_err(|e| Error::parse(path, self.line, format!("column `{name}`: {e}")))
    }
}

/// Reads a columnar file, checking the schema line, the kind and the header.
pub fn read(path: &Path, kind: &str, columns: &[&str]) -> Result<Vec<Row>> {
    let text = fs::read_to_string(path)?;
    parse(path, &text, kind, columns)
}

pub fn parse(path: &Path, text: &str, kind: &str, columns: &[&str]) -> Result<Vec<Row>> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    let mut version = None;
    let mut found_kind = None;
    for tok in first.trim_start_matches('#').split_whitespace() {
        if let Some(v) = tok.strip_prefix("schema_version=") {
            version = Some(
                v.parse::<u32>()
                    .map_err(|e| Error::parse(path, 1, format!("bad schema_version: {e}")))?,
            );
        } else if let Some(k) = tok.strip_prefix("kind=") {
            found_kind = Some(k.to_string());
        }
    }
    if !first.starts_with('#') || version.is_none() {
        return Err(Error::parse(path, 1, "missing `#schema_version=` line"));
    }
    let version = version.unwrap();
    if version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            found: version,
            expected: SCHEMA_VERSION,
        });
    }
    if found_kind.as_deref() != Some(kind) {
        return Err(Error::parse(
            path,
            1,
            format!("expected kind `{kind}`, found `{}`", found_kind.unwrap_or_default()),
        ));
    }
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 2, "missing column header"))?;
    let header: Vec<&str> = header.split('\t').collect();
    if header != columns {
        return Err(Error::parse(
            path,
            2,
            format!("expected columns {columns:?}, found {header:?}"),
        ));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(str::to_string).collect();
        if fields.len() != columns.len() {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        rows.push(Row { line: i + 1, fields });
    }
    Ok(rows)
}
