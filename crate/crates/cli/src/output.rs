//! CSV and JSON artifacts.
//!
//! Every subcommand writes `<out>/<command>.csv` with the fixed header
//! [`CSV_HEADER`], preceded by `#` lines carrying the tool version, the SHA-256
//! of the body (header row plus data rows) and the full run configuration.
//! The body depends only on the configuration and seed, never on timing or
//! thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CSV_HEADER: &str = "experiment,k,eps_exp,p,index,t,value,error,theory,pass,note";

/// One measured or derived quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub k: usize,
    pub eps_exp: Option<i32>,
    pub p: Option<f64>,
    /// Tube index `ι` or shell index `j`.
    pub index: Option<usize>,
    pub t: Option<f64>,
    pub value: f64,
    pub error: Option<f64>,
    /// Closed-form value where one applies.
    pub theory: Option<f64>,
    /// `None` for rows that carry no acceptance tolerance.
    pub pass: Option<bool>,
    pub note: String,
}

impl ResultRow {
    pub fn new(experiment: &str, k: usize, value: f64) -> Self {
        Self {
            experiment: experiment.into(),
            k,
            eps_exp: None,
            p: None,
            index: None,
            t: None,
            value,
            error: None,
            theory: None,
            pass: None,
            note: String::new(),
        }
    }

    pub fn eps(mut self, e: i32) -> Self {
        self.eps_exp = Some(e);
        self
    }

    pub fn p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn index(mut self, i: usize) -> Self {
        self.index = Some(i);
        self
    }

    pub fn t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn error(mut self, e: f64) -> Self {
        self.error = Some(e);
        self
    }

    pub fn theory(mut self, v: f64) -> Self {
        self.theory = Some(v);
        self
    }

    pub fn pass(mut self, ok: bool) -> Self {
        self.pass = Some(ok);
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.note = s.into();
        self
    }

    fn csv_line(&self) -> String {
        fn num(v: f64) -> String {
            if v.is_finite() {
                format!("{v:.12e}")
            } else {
                format!("{v}")
            }
        }
        fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
            v.map(f).unwrap_or_default()
        }
        let note = if self.note.contains([',', '"', '\n']) {
            format!("\"{}\"", self.note.replace('"', "\"\"").replace('\n', " "))
        } else {
            self.note.clone()
        };
        [
            self.experiment.clone(),
            self.k.to_string(),
            opt(self.eps_exp, |e| e.to_string()),
            opt(self.p, |p| p.to_string()),
            opt(self.index, |i| i.to_string()),
            opt(self.t, num),
            num(self.value),
            opt(self.error, num),
            opt(self.theory, num),
            opt(self.pass, |b| if b { "pass".into() } else { "fail".into() }),
            note,
        ]
        .join(",")
    }
}

pub fn csv_body(rows: &[ResultRow]) -> String {
    let mut body = String::with_capacity(128 * (rows.len() + 1));
    body.push_str(CSV_HEADER);
    body.push('\n');
    for r in rows {
        body.push_str(&r.csv_line());
        body.push('\n');
    }
    body
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Lines of a CSV file that are not `#` metadata.
pub fn strip_metadata(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect()
}

#[derive(Debug, Serialize)]
struct Report<'a, S: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a RunConfig,
    csv: PathBuf,
    body_sha256: String,
    passed: bool,
    rows: &'a [ResultRow],
    details: S,
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Writes `<out>/<command>.csv` and `<out>/<command>.json`; returns whether
/// every flagged row passed.
pub fn write_outputs<S: Serialize>(
    config: &RunConfig,
    command: &str,
    rows: &[ResultRow],
    details: S,
) -> CliResult<bool> {
    create_dir(&config.out)?;
    let body = csv_body(rows);
    let hash = sha256_hex(&body);
    let mut text = String::new();
    let version = env!("CARGO_PKG_VERSION");
    let _ = writeln!(text, "# mtubes {command} {version}");
    let _ = writeln!(text, "# body-sha256: {hash}");
    for line in config.to_toml().lines() {
        let _ = writeln!(text, "# config: {line}");
    }
    text.push_str(&body);
    let csv = config.out.join(format!("{command}.csv"));
    write_file(&csv, &text)?;
    let passed = rows.iter().all(|r| r.pass != Some(false));
    let report = Report {
        command,
        version,
        config,
        csv: csv.clone(),
        body_sha256: hash,
        passed,
        rows,
        details,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&config.out.join(format!("{command}.json")), &json)?;
    Ok(passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_line_layout() {
        let r = ResultRow::new("frenet", 2, 0.0).t(0.5).theory(0.0).pass(true).note("a b");
        assert_eq!(r.csv_line(), "frenet,2,,,,5.000000000000e-1,0.000000000000e0,,0.000000000000e0,pass,a b");
        let q = ResultRow::new("x", 3, f64::NAN).note("with, comma");
        assert!(q.csv_line().ends_with(",NaN,,,,\"with, comma\""));
    }

    #[test]
    fn metadata_is_stripped() {
        assert_eq!(strip_metadata("# a\nh\n1\n# b\n2\n"), "h\n1\n2\n");
    }
}
