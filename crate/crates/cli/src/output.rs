//! Result files: `#`-headed CSV, JSON, and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ionring::RingConfig;
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// An output directory bound to one config; records every file it writes.
pub struct Emitter {
    dir: PathBuf,
    hash: String,
    echo: String,
    files: Vec<String>,
}

impl Emitter {
    pub fn new(dir: &Path, config: Option<&RingConfig>) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let (hash, echo) = match config {
            Some(c) => (c.hash(), c.emit()),
            None => ("none".to_string(), String::new()),
        };
        Ok(Emitter {
            dir: dir.to_path_buf(),
            hash,
            echo,
            files: Vec::new(),
        })
    }

    #[cfg(test)]
    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn header(&self, units: &str) -> String {
        let mut h = String::new();
        let _ = writeln!(h, "# ionring {TOOL_VERSION}");
        let _ = writeln!(h, "# config_hash = {}", self.hash);
        for line in self.echo.lines() {
            let _ = writeln!(h, "# {line}");
        }
        if !units.is_empty() {
            let _ = writeln!(h, "# units: {units}");
        }
        h
    }

    fn put(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Numeric table with a column header line after the `#` block.
    pub fn csv<I>(
        &mut self,
        name: &str,
        units: &str,
        columns: &[&str],
        rows: I,
    ) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<f64>>,
    {
        let mut body = self.header(units);
        body.push_str(&columns.join(","));
        body.push('\n');
        for row in rows {
            let cells: Vec<String> = row.into_iter().map(fmt_f64).collect();
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        self.put(name, &body)
    }

    /// `{config_hash, tool_version, result}` with `result` the serialised value.
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<(), CliError> {
        let value = json!({
            "config_hash": self.hash,
            "tool_version": TOOL_VERSION,
            "result": serde_json::to_value(result).map_err(|e| CliError::Output(e.to_string()))?,
        });
        self.put_json(name, &value)
    }

    fn put_json(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        self.put(name, &text)
    }

    /// Writes `manifest.json`; not listed among its own outputs.
    pub fn manifest(
        &self,
        subcommand: &str,
        timings: &[(&str, f64)],
        extra: Value,
    ) -> Result<(), CliError> {
        let timings: serde_json::Map<String, Value> = timings
            .iter()
            .map(|(k, v)| (k.to_string(), json!(v)))
            .collect();
        let value = json!({
            "tool_version": TOOL_VERSION,
            "subcommand": subcommand,
            "config_hash": self.hash,
            "config_echo": self.echo,
            "outputs": self.files,
            "timings_s": timings,
            "run": extra,
        });
        let path = self.dir.join("manifest.json");
        let mut text =
            serde_json::to_string_pretty(&value).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, 0.0, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_header_carries_hash_and_echo() {
        let dir = std::env::temp_dir().join(format!("ionring-out-{}", std::process::id()));
        let cfg = RingConfig::thermality_reference();
        let mut e = Emitter::new(&dir, Some(&cfg)).unwrap();
        e.csv("a.csv", "none", &["x", "y"], vec![vec![1.0, 0.5]])
            .unwrap();
        let text = fs::read_to_string(dir.join("a.csv")).unwrap();
        assert!(text.contains(&format!("# config_hash = {}", cfg.hash())));
        assert!(text.contains("# n_ions = 1000"));
        assert!(text.ends_with("x,y\n1.0,0.5\n"));
        assert_eq!(e.files(), ["a.csv"]);
        fs::remove_dir_all(dir).unwrap();
    }
}
