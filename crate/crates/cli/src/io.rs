//! Field CSV files and fixed-precision JSON reports.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;

use notchwall::field::lift;
use notchwall::{AngleField, Grid, MagnetizationField};

/// Significant digits kept for every float in a JSON report.
pub const JSON_DIGITS: usize = 12;

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            let rounded: f64 = format!("{:.*e}", JSON_DIGITS - 1, x).parse().unwrap_or(x);
            *v = serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to [`JSON_DIGITS`] significant digits.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)?).with_context(|| format!("writing {}", path.display()))
}

/// Writes a CSV with the given header and columns of equal length.
pub fn write_columns(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(header)?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// A field read from CSV: `x, theta` or `x, m1, m2, m3`, with extra columns ignored.
pub struct FieldFile {
    pub grid: Grid,
    pub theta: AngleField,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

pub fn read_field(path: &Path) -> Result<FieldFile> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let Some(ix) = column(&headers, "x") else {
        bail!("{}: missing column x", path.display());
    };
    let angle = column(&headers, "theta");
    let comps = ["m1", "m2", "m3"].map(|c| column(&headers, c));
    if angle.is_none() && comps.iter().any(Option::is_none) {
        bail!("{}: need a theta column or m1, m2, m3", path.display());
    }
    let mut xs = Vec::new();
    let mut thetas = Vec::new();
    let mut ms = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let get =
            |k: usize| -> Result<f64> {
                rec.get(k).unwrap_or("").trim().parse().with_context(|| {
                    format!("{}: bad number on data row {}", path.display(), line + 1)
                })
            };
        xs.push(get(ix)?);
        match angle {
            Some(k) => thetas.push(get(k)?),
            None => {
                let c = comps.map(|k| k.unwrap_or(0));
                ms.push([get(c[0])?, get(c[1])?, get(c[2])?]);
            }
        }
    }
    let grid = infer_grid(&xs).with_context(|| format!("{}: x column", path.display()))?;
    let theta = if angle.is_some() {
        AngleField::new(thetas)
    } else {
        lift(&MagnetizationField::new(ms))?.0
    };
    Ok(FieldFile { grid, theta })
}

/// The symmetric uniform grid whose nodes are `xs`.
pub fn infer_grid(xs: &[f64]) -> Result<Grid> {
    let n = xs.len();
    if n < 3 {
        bail!("need at least 3 nodes");
    }
    let g = Grid::new(xs[n - 1], n)?;
    let tol = 1e-9 * g.half_length().max(1.0);
    if let Some(i) = g
        .nodes()
        .iter()
        .zip(xs)
        .position(|(a, b)| (a - b).abs() > tol)
    {
        bail!(
            "nodes must be uniform and symmetric about 0 (row {} has x = {})",
            i + 1,
            xs[i]
        );
    }
    Ok(g)
}

/// Checks that a grid read from a file agrees with a requested one.
pub fn same_grid(a: &Grid, b: &Grid) -> bool {
    a.len() == b.len()
        && (a.half_length() - b.half_length()).abs() <= 1e-9 * a.half_length().max(1.0)
}
