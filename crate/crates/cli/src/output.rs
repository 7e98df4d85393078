//! Column tables and their CSV / JSON serialization.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Column {
    pub name: String,
    /// Non-finite samples are written as `null`.
    pub values: Vec<Option<f64>>,
}

/// Named columns of equal length plus the run metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table {
    pub columns: Vec<Column>,
    pub meta: serde_json::Value,
}

impl Table {
    pub fn new(meta: serde_json::Value) -> Table {
        Table { columns: Vec::new(), meta }
    }

    pub fn column(mut self, name: &str, values: impl IntoIterator<Item = f64>) -> Table {
        let values = values.into_iter().map(|v| v.is_finite().then_some(v)).collect();
        self.columns.push(Column { name: name.to_string(), values });
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    #[cfg(test)]
    pub fn get(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    /// `,`-delimited with a header row and 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| match c.values[r] {
                    Some(v) => format!("{v:.11e}"),
                    None => "nan".to_string(),
                })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Writes through a temporary file in the target directory and renames, so
/// a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().context("output path has no file name")?.to_string_lossy().into_owned();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Emits the table to `path` (plus a `.meta.json` sidecar) or to stdout.
pub fn emit(table: &Table, format: Format, path: Option<&Path>) -> Result<()> {
    let body = table.render(format);
    match path {
        Some(p) => {
            let mut meta = serde_json::to_string_pretty(&table.meta)?;
            meta.push('\n');
            write_atomic(p, &body)?;
            write_atomic(&sidecar_path(p), &meta)
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_layout() {
        let t = Table::new(json!({})).column("t", [0.0, 1.5]).column("F", [1.0, f64::NAN]);
        assert_eq!(t.to_csv(), "t,F\n0.00000000000e0,1.00000000000e0\n1.50000000000e0,nan\n");
        let empty = Table::new(json!({})).column("t", []).column("F", []);
        assert_eq!(empty.to_csv(), "t,F\n");
        assert_eq!(t.get("F"), Some(&[Some(1.0), None][..]));
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/x.csv")), PathBuf::from("out/x.csv.meta.json"));
    }
}
