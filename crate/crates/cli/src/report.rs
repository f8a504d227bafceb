//! CSV tables, the config digest and the run record.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// RFC 4180 body followed by `# run=<digest> seed=<seed> version=<ver>`.
    pub fn to_csv(&self, digest: &str, seed: u64) -> CliResult<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let mut bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        bytes.extend_from_slice(format!("# run={digest} seed={seed} version={TOOL_VERSION}\r\n").as_bytes());
        Ok(bytes)
    }
}

/// Shortest round-trip formatting, so equal values print identically.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

/// SHA-256 of the canonical JSON of `value` (object keys sorted).
pub fn digest<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config serializes to JSON");
    let text = serde_json::to_string(&v).expect("JSON value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Debug, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunRecord {
    pub command: String,
    pub config_digest: String,
    pub master_seed: u64,
    pub tool_version: String,
    pub defaults_version: u32,
    pub stages: Vec<Stage>,
    pub files: Vec<PathBuf>,
}

impl RunRecord {
    pub fn write(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join("run.json");
        let text = serde_json::to_string_pretty(self).map_err(|e| std::io::Error::other(e.to_string()))?;
        std::fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn csv_quoting_and_trailer() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x,y".into(), "say \"hi\"".into()]);
        let s = String::from_utf8(t.to_csv("00ff", 7).unwrap()).unwrap();
        assert_eq!(s, "a,b\r\n\"x,y\",\"say \"\"hi\"\"\"\r\n# run=00ff seed=7 version=0.1.0\r\n");
    }

    #[test]
    fn digest_is_key_order_free() {
        let mut a = BTreeMap::new();
        a.insert("b", 1);
        a.insert("a", 2);
        let b: serde_json::Value = serde_json::from_str(r#"{"a":2,"b":1}"#).unwrap();
        assert_eq!(digest(&a), digest(&b));
        assert_eq!(digest(&a).len(), 64);
        assert_ne!(digest(&a), digest(&3));
    }

    #[test]
    fn numbers() {
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(f64::NEG_INFINITY), "-inf");
        assert_eq!(num(-2.5e-300), "-2.5e-300");
    }
}
