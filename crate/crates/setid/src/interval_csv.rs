//! Interval-outcome regression data in CSV form.
//!
//! The file has a header row naming the columns `y_lo`, `y_hi`, the
//! regressors `x1..xd` and the instrument, either a single column `z` or a
//! group `z1..zm` whose value combinations define the support.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use setid_core::interval_iv::IntervalIVDataset;
use setid_core::model::BoxBounds;

use crate::error::{Error, Result};

/// Separator between the parts of a tuple-valued instrument label.
pub const LABEL_SEP: &str = "|";

/// Box half-width used when none is supplied.
pub const DEFAULT_BOX: f64 = 1e6;

/// Column names. `None` fields are inferred from the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub y_lo: String,
    pub y_hi: String,
    pub x: Option<Vec<String>>,
    pub z: Option<Vec<String>>,
    /// Labels the instrument may take. Declared labels that never occur
    /// are dropped with a warning; undeclared labels are an error.
    pub declared: Option<Vec<String>>,
}

impl Default for Schema {
    fn default() -> Self {
        Self { y_lo: "y_lo".into(), y_hi: "y_hi".into(), x: None, z: None, declared: None }
    }
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: IntervalIVDataset,
    pub warnings: Vec<String>,
}

/// `prefix1, prefix2, ...` as long as they are present.
fn numbered(headers: &[String], prefix: &str) -> Vec<String> {
    (1..)
        .map(|i| format!("{prefix}{i}"))
        .take_while(|name| headers.contains(name))
        .collect()
}

fn position(headers: &[String], name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::parse(None, name, "missing column"))
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<Loaded> {
    let mut text = String::new();
    File::open(path)
        .map(BufReader::new)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_csv(&text, schema)
}

/// [`load_csv`] on in-memory text.
pub fn parse_csv(text: &str, schema: &Schema) -> Result<Loaded> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(None, "", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let x_names = match &schema.x {
        Some(x) => x.clone(),
        None => numbered(&headers, "x"),
    };
    if x_names.is_empty() {
        return Err(Error::parse(None, "x1", "missing column"));
    }
    let z_names = match &schema.z {
        Some(z) => z.clone(),
        None if headers.iter().any(|h| h == "z") => vec!["z".into()],
        None => numbered(&headers, "z"),
    };
    if z_names.is_empty() {
        return Err(Error::parse(None, "z", "missing column"));
    }
    let lo_col = position(&headers, &schema.y_lo)?;
    let hi_col = position(&headers, &schema.y_hi)?;
    let x_cols = x_names.iter().map(|n| position(&headers, n)).collect::<Result<Vec<_>>>()?;
    let z_cols = z_names.iter().map(|n| position(&headers, n)).collect::<Result<Vec<_>>>()?;

    let (mut y_lo, mut y_hi, mut x, mut z) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::parse(Some(row), "", e.to_string()))?;
        let num = |c: usize| -> Result<f64> {
            let field = record.get(c).unwrap_or("");
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::parse(Some(row), headers[c].clone(), format!("`{field}` is not a finite number"))),
            }
        };
        let lo = num(lo_col)?;
        let hi = num(hi_col)?;
        if lo > hi {
            return Err(setid_core::Error::IntervalViolation { row }.into());
        }
        y_lo.push(lo);
        y_hi.push(hi);
        x.push(x_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>>>()?);
        let parts: Vec<&str> = z_cols.iter().map(|&c| record.get(c).unwrap_or("")).collect();
        if let Some(k) = parts.iter().position(|p| p.is_empty()) {
            return Err(Error::parse(Some(row), headers[z_cols[k]].clone(), "empty instrument value"));
        }
        z.push(parts.join(LABEL_SEP));
    }
    if y_lo.is_empty() {
        return Err(Error::parse(None, "", "no data rows"));
    }

    let mut warnings = Vec::new();
    if let Some(declared) = &schema.declared {
        if let Some((i, label)) = z.iter().enumerate().find(|(_, l)| !declared.contains(l)) {
            return Err(Error::parse(Some(i + 1), z_names.join(LABEL_SEP), format!("undeclared instrument value `{label}`")));
        }
        for label in declared.iter().filter(|l| !z.contains(l)) {
            warnings.push(format!("instrument value `{label}` has no observations and is dropped"));
        }
    }
    let dataset = IntervalIVDataset::new(y_lo, y_hi, x, z)?;
    warnings.extend(dataset.warnings());
    Ok(Loaded { dataset, warnings })
}

/// Parameter box from optional per-coordinate or scalar bounds. Missing
/// bounds fall back to `±1e6` with a warning.
pub fn box_bounds(d: usize, lo: Option<&[f64]>, hi: Option<&[f64]>) -> Result<(BoxBounds, Option<String>)> {
    let expand = |v: Option<&[f64]>, default: f64| -> Result<Vec<f64>> {
        match v {
            None => Ok(vec![default; d]),
            Some([s]) => Ok(vec![*s; d]),
            Some(v) if v.len() == d => Ok(v.to_vec()),
            Some(v) => Err(setid_core::Error::DimensionMismatch(format!(
                "box bound has {} entries for {d} regressors",
                v.len()
            ))
            .into()),
        }
    };
    let warning = (lo.is_none() || hi.is_none()).then(|| {
        format!("WARNING: no parameter box given, using ±{DEFAULT_BOX:e}; bounds on θ affect the multiplier bounds and should come from model knowledge")
    });
    let bounds = BoxBounds::new(expand(lo, -DEFAULT_BOX)?, expand(hi, DEFAULT_BOX)?)?;
    Ok((bounds, warning))
}
