//! Versioned text format for states.
//!
//! ```text
//! qdiscord-state 1
//! labels A:2 B:2
//! # row col re im, zero entries omitted
//! 0 0 0.5 0
//! 0 3 0.5 0
//! 3 0 0.5 0
//! 3 3 0.5 0
//! end
//! ```
//!
//! Floats are written in shortest round-trip form, so `parse(write(rho))`
//! reproduces every entry exactly.

use std::fmt::Write as _;
use std::path::Path;

use super::{DensityMatrix, SubsystemLabel};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

pub const STATE_FILE_VERSION: u32 = 1;
const MAGIC: &str = "qdiscord-state";

pub fn write_state(rho: &DensityMatrix) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {STATE_FILE_VERSION}").unwrap();
    let labels: Vec<String> = rho
        .labels()
        .iter()
        .map(|l| format!("{}:{}", l.name, l.dim))
        .collect();
    writeln!(out, "labels {}", labels.join(" ")).unwrap();
    let m = rho.matrix();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            if z.re != 0.0 || z.im != 0.0 {
                writeln!(out, "{r} {c} {} {}", z.re, z.im).unwrap();
            }
        }
    }
    out.push_str("end\n");
    out
}

fn perr(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("state file line {line}: {msg}"))
}

pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (n, header) = lines.next().ok_or_else(|| perr(0, "empty file"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(perr(n, format!("expected `{MAGIC} <version>`")));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| perr(n, "missing version"))?;
    if version != STATE_FILE_VERSION {
        return Err(perr(n, format!("unsupported version {version}")));
    }

    let (n, label_line) = lines.next().ok_or_else(|| perr(n, "missing labels line"))?;
    let mut parts = label_line.split_whitespace();
    if parts.next() != Some("labels") {
        return Err(perr(n, "expected `labels NAME:DIM ...`"));
    }
    let labels = parts
        .enumerate()
        .map(|(index, tok)| {
            let (name, dim) = tok
                .split_once(':')
                .ok_or_else(|| perr(n, format!("bad label {tok:?}")))?;
            let dim = dim
                .parse()
                .map_err(|_| perr(n, format!("bad dimension in {tok:?}")))?;
            Ok(SubsystemLabel {
                name: name.to_string(),
                index,
                dim,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let d: usize = labels.iter().map(|l| l.dim).product();

    let mut m = CMatrix::zeros(d, d);
    let mut ended = false;
    for (n, line) in lines {
        if ended {
            return Err(perr(n, "content after `end`"));
        }
        if line == "end" {
            ended = true;
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(perr(n, "expected `row col re im`"));
        }
        let r: usize = toks[0].parse().map_err(|_| perr(n, "bad row"))?;
        let c: usize = toks[1].parse().map_err(|_| perr(n, "bad column"))?;
        let re: f64 = toks[2].parse().map_err(|_| perr(n, "bad real part"))?;
        let im: f64 = toks[3].parse().map_err(|_| perr(n, "bad imaginary part"))?;
        if r >= d || c >= d {
            return Err(perr(n, format!("entry ({r},{c}) outside {d}x{d}")));
        }
        m[(r, c)] = C64::new(re, im);
    }
    if !ended {
        return Err(Error::Parse("state file is missing `end`".into()));
    }
    DensityMatrix::new(labels, m)
}

pub fn save_state(path: impl AsRef<Path>, rho: &DensityMatrix) -> Result<()> {
    std::fs::write(path, write_state(rho))?;
    Ok(())
}

pub fn load_state(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    parse_state(&std::fs::read_to_string(path)?)
}
