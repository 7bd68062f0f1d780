//! CSV and JSON writers. Floats go out with 17 significant digits.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::{CliError, CliResult, RunConfig};

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A CSV table with string cells; numbers go through [`num`].
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, name: &str) -> CliResult<()> {
        let mut w = csv::Writer::from_path(dir.join(name))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    /// value ≤ limit.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, passed: value <= limit }
    }

    /// value ≥ limit.
    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, passed: value >= limit }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Check { name: name.into(), value: v, limit: 1.0, passed: ok }
    }
}

/// Common shape of every JSON file the CLI writes.
#[derive(Serialize)]
pub struct Report<'a, R: Serialize> {
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    #[serde(flatten)]
    pub results: R,
}

impl<'a, R: Serialize> Report<'a, R> {
    pub fn new(config: &'a RunConfig, checks: Vec<Check>, results: R) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Report { command: &config.command, config, passed, checks, results }
    }

    pub fn write(&self, dir: &Path, name: &str) -> CliResult<()> {
        let mut f = File::create(dir.join(name))?;
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Exit code 4 when any check failed.
    pub fn verdict(&self) -> CliResult<()> {
        let failed: Vec<&str> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Assertion(failed.join(", ")))
        }
    }
}
