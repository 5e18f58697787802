//! Report assembly: one tabular schema, two encodings.
//!
//! Every CLI command produces a [`Report`]: a command name, the resolved
//! configuration as ordered key/value pairs, a header + rows table, and a
//! list of violation messages. CSV output is RFC-4180 (header row first,
//! quoting handled by the writer); JSON output is the object
//! `{command, config, rows, violations}` with each row keyed by column
//! name. Cell values are preformatted strings so identical configurations
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::io::Write;

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(OutputFormat::Csv),
            "json" => Some(OutputFormat::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    /// Resolved configuration; BTreeMap so serialization order is fixed.
    pub config: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub violations: Vec<String>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Report {
            command: command.to_string(),
            config: BTreeMap::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
            violations: vec![],
        }
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn push_violation(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }

    pub fn has_violations(&self) -> bool {
        !self.violations.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)
            .map_err(|e| std::io::Error::other(e))?;
        for row in &self.rows {
            out.write_record(row).map_err(|e| std::io::Error::other(e))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        let rows: Vec<BTreeMap<&str, &str>> = self
            .rows
            .iter()
            .map(|row| {
                self.columns
                    .iter()
                    .map(String::as_str)
                    .zip(row.iter().map(String::as_str))
                    .collect()
            })
            .collect();
        let doc = serde_json::json!({
            "command": self.command,
            "config": self.config,
            "rows": rows,
            "violations": self.violations,
        });
        serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| std::io::Error::other(e))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: W, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Csv => self.write_csv(w),
            OutputFormat::Json => self.write_json(w),
        }
    }
}

/// Deterministic float formatting for report cells: the shortest
/// round-trip representation.
pub fn num(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut r = Report::new("eval", &["n", "x", "value"]);
        r.set("f", "exp_neg");
        r.set("a", num(1.0));
        r.push_row(vec!["64".into(), num(1.0), num(0.25)]);
        r.push_row(vec!["128".into(), num(2.5), "quote,me".into()]);
        r
    }

    #[test]
    fn csv_is_rfc4180() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "n,x,value\r\n64,1,0.25\r\n128,2.5,\"quote,me\"\r\n"
        );
    }

    #[test]
    fn json_schema_and_determinism() {
        let mut buf = Vec::new();
        sample().write_json(&mut buf).unwrap();
        let doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(doc["command"], "eval");
        assert_eq!(doc["config"]["f"], "exp_neg");
        assert_eq!(doc["rows"][0]["value"], "0.25");
        assert_eq!(doc["violations"].as_array().unwrap().len(), 0);
        // Byte-identical on re-emission.
        let mut buf2 = Vec::new();
        sample().write_json(&mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn violations_tracked() {
        let mut r = sample();
        assert!(!r.has_violations());
        r.push_violation("bound exceeded");
        assert!(r.has_violations());
    }
}
