use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{DatasetError, FeatureSpace, GroundTruth, Sampler};
use crate::expr::{parse, ExprError};

/// The equations shipped with the crate.
pub const BUNDLED_MANIFEST: &str = include_str!("../../data/equations.txt");

/// Parses the bundled manifest.
pub fn registry() -> Vec<GroundTruth> {
    parse_manifest(BUNDLED_MANIFEST).expect("bundled manifest is valid")
}

fn err(line: usize, column: usize, msg: impl Into<String>) -> DatasetError {
    DatasetError::Manifest { line, column, msg: msg.into() }
}

/// Parses `name | expression | var:lo:hi,... | train | test` records, one
/// per line. Blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<GroundTruth>, DatasetError> {
    let mut out: Vec<GroundTruth> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let mut fields = Vec::new();
        let mut offset = 0;
        for f in body.split('|') {
            let lead = f.len() - f.trim_start().len();
            fields.push((offset + lead + 1, f.trim()));
            offset += f.len() + 1;
        }
        if fields.len() != 5 {
            return Err(err(line, 1, format!("expected 5 `|`-separated fields, found {}", fields.len())));
        }
        let (ncol, name) = fields[0];
        if name.is_empty() {
            return Err(err(line, ncol, "empty name"));
        }
        if out.iter().any(|g| g.name == name) {
            return Err(err(line, ncol, format!("duplicate equation `{name}`")));
        }
        let (vcol, vars) = fields[2];
        let space = parse_vars(vars).map_err(|(c, m)| err(line, vcol + c, m))?;
        let (ecol, expr) = fields[1];
        let tree = parse(expr, &space.name_refs()).map_err(|e| match e {
            ExprError::Syntax { pos, msg } => err(line, ecol + pos, msg),
            ExprError::UnknownIdentifier { pos, name } => {
                err(line, ecol + pos, format!("unknown identifier `{name}`"))
            }
            other => err(line, ecol, other.to_string()),
        })?;
        let (tcol, train) = fields[3];
        let train = parse_sampler(train).map_err(|e| err(line, tcol, e.to_string()))?;
        if matches!(train, Sampler::LatinHypercube { .. }) {
            return Err(err(line, tcol, "LHS needs training data and cannot be a train sampler"));
        }
        let (scol, test) = fields[4];
        let test = parse_sampler(test).map_err(|e| err(line, scol, e.to_string()))?;
        out.push(GroundTruth { name: name.to_string(), tree, space, train, test });
    }
    Ok(out)
}

fn parse_vars(text: &str) -> Result<FeatureSpace, (usize, String)> {
    let mut names = Vec::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut offset = 0;
    for item in text.split(',') {
        let parts: Vec<&str> = item.trim().split(':').collect();
        if parts.len() != 3 {
            return Err((offset, format!("expected `name:lo:hi`, found `{}`", item.trim())));
        }
        let lo: f64 = parts[1].parse().map_err(|_| (offset, format!("bad bound `{}`", parts[1])))?;
        let hi: f64 = parts[2].parse().map_err(|_| (offset, format!("bad bound `{}`", parts[2])))?;
        names.push(parts[0].to_string());
        lower.push(lo);
        upper.push(hi);
        offset += item.len() + 1;
    }
    FeatureSpace::from_parts(names, lower, upper).map_err(|e| (0, e.to_string()))
}

/// Parses `U(lo,hi,n)`, `U(n)`, `E(start,stop,step)` or `LHS(n)`.
pub fn parse_sampler(text: &str) -> Result<Sampler, DatasetError> {
    let bad = || DatasetError::Sampler(format!("cannot parse `{text}`"));
    let t = text.trim();
    let open = t.find('(').ok_or_else(bad)?;
    let args = t[open + 1..].strip_suffix(')').ok_or_else(bad)?;
    let args: Vec<&str> = args.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
    let count = |s: &str| s.parse::<usize>().map_err(|_| bad());
    let s = match (&t[..open], args.as_slice()) {
        ("U", [n]) => Sampler::Uniform { n: count(n)?, bounds: None },
        ("U", [lo, hi, n]) => Sampler::Uniform { n: count(n)?, bounds: Some((num(lo)?, num(hi)?)) },
        ("E", [a, b, s]) => Sampler::Grid { start: num(a)?, stop: num(b)?, step: num(s)? },
        ("LHS", [n]) => Sampler::LatinHypercube { n: count(n)? },
        _ => return Err(bad()),
    };
    match s {
        Sampler::Uniform { bounds: Some((lo, hi)), .. } if !(lo < hi) => Err(bad()),
        Sampler::Grid { start, stop, step } if !(step > 0.0 && start < stop) => Err(bad()),
        Sampler::LatinHypercube { n: 0 } => Err(bad()),
        s => Ok(s),
    }
}
