//! Artifact files: a versioned JSON report, CSV tables and gnuplot-ready
//! whitespace columns.

use crate::commands::CliError;
use crate::config::{ExperimentConfig, Format};
use anyhow::Context;
use fas_core::Complex;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

pub fn cplx(z: Complex) -> Value {
    json!([z.re, z.im])
}

pub struct Writer<'a> {
    dir: PathBuf,
    formats: Vec<Format>,
    command: &'static str,
    config: &'a ExperimentConfig,
    pub written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    pub fn new(dir: &Path, formats: &[Format], command: &'static str, config: &'a ExperimentConfig) -> Writer<'a> {
        Writer { dir: dir.to_path_buf(), formats: formats.to_vec(), command, config, written: Vec::new() }
    }

    fn put(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let path = self.dir.join(name);
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }

    /// CSV and gnuplot copies of the same columns, as enabled.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        if self.formats.contains(&Format::Csv) {
            let mut s = header.join(",");
            s.push('\n');
            for r in rows {
                let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            self.put(&format!("{name}.csv"), &s)?;
        }
        self.gnuplot(name, header, rows)
    }

    pub fn gnuplot(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        if !self.formats.contains(&Format::Gnuplot) {
            return Ok(());
        }
        let mut s = format!("# {}\n", header.join(" "));
        for r in rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        self.put(&format!("{name}.dat"), &s)
    }

    /// `<command>.json` with the schema version, a timestamp and the
    /// effective configuration.
    pub fn json(&mut self, result: Value) -> Result<(), CliError> {
        if !self.formats.contains(&Format::Json) {
            return Ok(());
        }
        let doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "timestamp": chrono::Utc::now().to_rfc3339(),
            "config": self.config,
            "result": result,
        });
        let text = serde_json::to_string_pretty(&doc).context("serializing report")?;
        self.put(&format!("{}.json", self.command), &(text + "\n"))
    }
}
