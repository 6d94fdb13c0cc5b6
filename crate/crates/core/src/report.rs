//! Report emission: CSV tables and JSON summaries with deterministic bytes.

use crate::config::Configuration;
use crate::error::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Rows of a CSV table; cells are already formatted.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} cells, header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Table from the CSV text produced by the `write_csv` methods of the numeric modules.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let mut t = Table::new(lines.next().unwrap_or("").split(','));
        for line in lines.filter(|l| !l.is_empty()) {
            t.push(line.split(',').map(String::from).collect())?;
        }
        Ok(t)
    }

    /// `'\n'`-terminated CSV with `'.'` decimals.
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// Number cell in round-trip scientific notation.
pub fn cell(x: f64) -> String {
    format!("{x:.17e}")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub config_hash: String,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: Option<u64>,
    pub summary: BTreeMap<String, serde_json::Value>,
    #[serde(skip)]
    pub table: Table,
}

impl Report {
    pub fn new(command: &str, cfg: Option<&Configuration>) -> Self {
        Report {
            command: command.to_string(),
            config_hash: cfg.map(config_hash).unwrap_or_default(),
            tolerances: BTreeMap::new(),
            seed: None,
            summary: BTreeMap::new(),
            table: Table::default(),
        }
    }

    pub fn tolerance(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        self.summary.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// SHA-256 of the canonical JSON form of the configuration, as lowercase hex.
pub fn config_hash(cfg: &Configuration) -> String {
    let digest = Sha256::digest(cfg.to_json_string().as_bytes());
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Writes the table (`Csv`) or the summary (`Json`) to `path`.
pub fn emit_report(report: &Report, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Csv => report.table.to_csv(),
        Format::Json => report.to_json()?,
    };
    Ok(std::fs::write(path, body)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let cfg = Configuration::single(-0.25);
        let mut r = Report::new("spectrum", Some(&cfg)).tolerance("root", 1e-12);
        r.set("count", 1).unwrap();
        r.table = Table::new(["index", "lambda"]);
        r.table.push(vec!["0".into(), cell(1.0)]).unwrap();
        r
    }

    #[test]
    fn same_inputs_give_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        for fmt in [Format::Csv, Format::Json] {
            let a = dir.path().join(format!("a.{}", fmt.extension()));
            let b = dir.path().join(format!("b.{}", fmt.extension()));
            emit_report(&sample(), fmt, &a).unwrap();
            emit_report(&sample(), fmt, &b).unwrap();
            assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        }
    }

    #[test]
    fn json_summary_schema() {
        let v: serde_json::Value = serde_json::from_str(&sample().to_json().unwrap()).unwrap();
        for key in ["command", "config_hash", "tolerances"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
        assert_eq!(v["tolerances"]["root"], 1e-12);
    }

    #[test]
    fn csv_format_contract() {
        let text = sample().table.to_csv();
        assert_eq!(text, "index,lambda\n0,1.00000000000000000e0\n");
        assert!(!text.contains('\r'));
        assert_eq!(Table::from_csv(&text).unwrap(), sample().table);
    }

    #[test]
    fn hash_depends_on_the_configuration() {
        let a = config_hash(&Configuration::single(0.0));
        assert_eq!(a, config_hash(&Configuration::single(0.0)));
        assert_ne!(a, config_hash(&Configuration::single(1.0)));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let mut t = Table::new(["a", "b"]);
        assert!(t.push(vec!["1".into()]).is_err());
    }
}
