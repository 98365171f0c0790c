//! Result persistence. JSON output is wrapped in a versioned envelope that
//! echoes the effective configuration; CSV output is a header row plus data
//! rows, and when written to a file it gets a `.config.json` sidecar with the
//! same envelope minus the result.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliResult;

pub const SCHEMA_VERSION: u32 = 1;

/// Schema name for a command, e.g. `bound srec-lp` → `bound-srec-lp`; the
/// schema file is `schemas/<name>.schema.json`.
pub fn schema_name(command: &str) -> String {
    command.replace(' ', "-")
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema: String,
    schema_version: u32,
    command: &'a str,
    config: &'a RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<&'a T>,
}

/// A CSV table. Cells are already formatted.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Table {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| crate::error::CliError::Internal(e.to_string()))
    }
}

/// Shortest round-trip form; infinities as `inf`/`-inf`.
pub fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn json_document<T: Serialize>(command: &str, config: &RunConfig, result: Option<&T>) -> CliResult<Vec<u8>> {
    let env = Envelope { schema: format!("rectbound/{}", schema_name(command)), schema_version: SCHEMA_VERSION, command, config, result };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

/// Writes `result` in the requested format to `output` or stdout.
pub fn emit<T: Serialize>(
    command: &str,
    config: &RunConfig,
    format: Format,
    output: Option<&Path>,
    result: &T,
    table: impl FnOnce() -> Table,
) -> CliResult<()> {
    let bytes = match format {
        Format::Json => json_document(command, config, Some(result))?,
        Format::Csv => table().to_csv()?,
    };
    match output {
        Some(path) => {
            std::fs::write(path, &bytes)?;
            if format == Format::Csv {
                std::fs::write(sidecar(path), json_document::<()>(command, config, None)?)?;
            }
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quotes_per_rfc() {
        let mut t = Table::new(&["name", "value"]);
        t.push(vec!["a, \"b\"".into(), num(0.1)]);
        t.push(vec!["plain".into(), num(f64::INFINITY)]);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(text, "name,value\r\n\"a, \"\"b\"\"\",0.1\r\nplain,inf\r\n");
    }

    #[test]
    fn envelope_fields() {
        let cfg = RunConfig { eps: Some(0.5), ..Default::default() };
        let doc = json_document("bound rec", &cfg, Some(&3.0)).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&doc).unwrap();
        assert_eq!(v["schema"], "rectbound/bound-rec");
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["config"]["eps"], 0.5);
        assert_eq!(v["result"], 3.0);
    }
}
