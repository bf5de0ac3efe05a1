//! Tabular rows and structured output.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use qdiscord_core::monogamy::InequalityCheck;
use qdiscord_core::{DiscordResult, OptimizerConfig};
use serde::Serialize;

pub const HEADER: [&str; 10] = [
    "state_id", "seed", "measure", "partition", "value", "rhs", "margin", "verdict", "spread", "wall_time_s",
];

/// One CSV row per computed value or checked inequality.
#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub state_id: String,
    pub seed: Option<u64>,
    pub measure: String,
    /// Partition label or inequality statement.
    pub partition: String,
    pub value: f64,
    pub rhs: Option<f64>,
    pub margin: Option<f64>,
    pub verdict: String,
    pub spread: Option<f64>,
    pub wall_time_s: Option<f64>,
}

impl ReportRow {
    pub fn from_result(state_id: &str, r: &DiscordResult) -> Self {
        Self {
            state_id: state_id.to_string(),
            seed: None,
            measure: r.kind.as_str().to_string(),
            partition: r.label.clone(),
            value: r.value,
            rhs: None,
            margin: None,
            verdict: String::new(),
            spread: Some(r.opt.spread),
            wall_time_s: None,
        }
    }

    pub fn from_check(state_id: &str, measure: &str, c: &InequalityCheck) -> Self {
        Self {
            state_id: state_id.to_string(),
            seed: None,
            measure: measure.to_string(),
            partition: format!("{}: {}", c.name, c.statement),
            value: c.lhs,
            rhs: Some(c.rhs),
            margin: Some(c.margin),
            verdict: c.verdict.as_str().to_string(),
            spread: Some(c.lhs_spread),
            wall_time_s: None,
        }
    }
}

/// Writes the header even when `rows` is empty.
pub fn write_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Provenance wrapper for JSON reports.
#[derive(Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub state: Option<&'a str>,
    pub config: &'a OptimizerConfig,
    pub result: T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(command: &'a str, state: Option<&'a str>, config: &'a OptimizerConfig, result: T) -> Self {
        Self {
            tool: "qdiscord",
            version: env!("CARGO_PKG_VERSION"),
            command,
            state,
            config,
            result,
        }
    }
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

pub fn write_rows(path: Option<&Path>, rows: &[ReportRow]) -> Result<()> {
    match path {
        Some(p) => {
            let f = std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
            write_csv(f, rows)
        }
        None => write_csv(std::io::stdout().lock(), rows),
    }
}

pub fn print_check(c: &InequalityCheck) {
    println!(
        "{:<8} {}: {}  lhs={:.6} rhs={:.6} margin={:.6}{}",
        c.verdict.as_str(),
        c.name,
        c.statement,
        c.lhs,
        c.rhs,
        c.margin,
        if c.lhs_certified { "" } else { " (lhs not certified)" }
    );
    for a in &c.assumptions {
        println!(
            "         assumes {}: {:.6} vs {:.6} {}",
            a.statement,
            a.lhs,
            a.rhs,
            if a.satisfied { "ok" } else { "fails" }
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), HEADER.join(",") + "\n");
    }

    #[test]
    fn missing_fields_are_empty() {
        let row = ReportRow {
            state_id: "s".into(),
            seed: Some(3),
            measure: "mqd".into(),
            partition: "D_{A;B}".into(),
            value: 0.5,
            rhs: None,
            margin: None,
            verdict: String::new(),
            spread: None,
            wall_time_s: None,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[row]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "s,3,mqd,D_{A;B},0.5,,,,,");
    }
}
