//! Loading spaces, families, targets and function specs from disk.

use std::fs;
use std::path::Path;

use monoapprox::bernstein::Interpolant;
use monoapprox::order::SpaceSpec;
use monoapprox::{FinitePreorder, FunctionFamily, GridFunction, PhiSpec, TargetFunction};
use serde::Deserialize;

use crate::error::{CliError, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: invalid JSON: {e}", path.display())))
}

pub fn load_space(path: &Path) -> Result<FinitePreorder> {
    let spec: SpaceSpec = parse_json(path)?;
    Ok(spec.build()?)
}

pub fn load_family(path: &Path) -> Result<FunctionFamily> {
    parse_json(path)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TargetRepr {
    Wrapped { values: Vec<f64> },
    Bare(Vec<f64>),
}

/// `{"values": [...]}` or a bare array.
pub fn load_target(path: &Path) -> Result<GridFunction> {
    let values = match parse_json::<TargetRepr>(path)? {
        TargetRepr::Wrapped { values } | TargetRepr::Bare(values) => values,
    };
    Ok(GridFunction::new(values)?)
}

/// A named variant, `pwl:x:y,...`, inline JSON, or a path to a JSON file.
pub fn parse_phi(name: &str, a: Option<f64>) -> Result<PhiSpec> {
    let spec = match name {
        "alpha" => PhiSpec::Alpha { a: a.unwrap_or(1.0) },
        "beta" => PhiSpec::Beta,
        "gamma" => PhiSpec::Gamma,
        "chi" => PhiSpec::Chi,
        s if s.starts_with("pwl:") => {
            let points = s["pwl:".len()..]
                .split(',')
                .map(|pair| {
                    let (x, y) = pair
                        .split_once(':')
                        .ok_or_else(|| CliError::input(format!("expected x:y, got {pair:?}")))?;
                    Ok([parse_f64(x)?, parse_f64(y)?])
                })
                .collect::<Result<Vec<_>>>()?;
            PhiSpec::PiecewiseLinear { points }
        }
        s if s.trim_start().starts_with('{') => serde_json::from_str(s)?,
        s if Path::new(s).is_file() => parse_json(Path::new(s))?,
        s => return Err(CliError::input(format!("unknown phi {s:?}"))),
    };
    if a.is_some() && !matches!(spec, PhiSpec::Alpha { .. }) {
        return Err(CliError::input("--a only applies to --phi alpha"));
    }
    spec.validate()?;
    Ok(spec)
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::input(format!("bad number {s:?}")))
}

/// Comma-separated positive integers.
pub fn parse_n_list(s: &str) -> Result<Vec<usize>> {
    let ns = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| CliError::input(format!("bad n {t:?}: expected a positive integer")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ns)
}

/// Built-in function name, or `data:<path>` for a CSV of `x,f` pairs.
pub fn parse_function(spec: &str) -> Result<TargetFunction> {
    match spec.strip_prefix("data:") {
        Some(path) => Ok(TargetFunction::Linear(load_samples(Path::new(path))?)),
        None => Ok(spec.parse()?),
    }
}

/// Reads `x,f` rows; a non-numeric first row is taken as a header.
fn load_samples(path: &Path) -> Result<Interpolant> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if record.len() != 2 {
            return Err(CliError::Input(format!(
                "{}: row {} has {} fields, expected 2",
                path.display(),
                i + 1,
                record.len()
            )));
        }
        match (record[0].parse::<f64>(), record[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => points.push((x, y)),
            _ if i == 0 => continue,
            _ => {
                return Err(CliError::Input(format!(
                    "{}: row {} is not numeric",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(Interpolant::new(points)?)
}
