//! Model and sample files.
//!
//! A model file is a JSON object `{k, d, p, eq_idx, box_lo, box_hi, A, b}`
//! with `A` flattened row-major. A sample is a headerless CSV with one
//! observation per line (the `k × (d+1)` matrix `w_i` flattened row-major)
//! and a sidecar JSON header `{n, k, d, p, det_mask, eq_idx, box}` stored
//! next to it as `<sample>.json`. Floats are written in shortest
//! round-trip form, so both formats reload bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use setid_core::model::{AffineMomentModel, BoxBounds, MomentSample};
use setid_core::qp::ConstraintSystem;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub k: usize,
    pub d: usize,
    pub p: usize,
    pub eq_idx: Vec<usize>,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ModelFile {
    pub fn from_model(model: &AffineMomentModel) -> Result<Self> {
        let bounds = model
            .bounds()
            .ok_or_else(|| Error::Core(setid_core::Error::InvalidInput("model has no parameter box".into())))?;
        let cs = model.cs();
        let (k, d) = (cs.k(), cs.d());
        let a = (0..k).flat_map(|j| (0..d).map(move |l| cs.a()[(j, l)])).collect();
        Ok(Self {
            k,
            d,
            p: cs.p(),
            eq_idx: cs.eq_idx(),
            box_lo: bounds.lo.clone(),
            box_hi: bounds.hi.clone(),
            a,
            b: cs.b().iter().copied().collect(),
        })
    }

    pub fn to_model(&self) -> Result<AffineMomentModel> {
        if self.a.len() != self.k * self.d || self.b.len() != self.k {
            return Err(Error::parse(None, "A", format!("expected {} × {} entries and {} right-hand sides", self.k, self.d, self.k)));
        }
        if self.eq_idx.len() != self.p {
            return Err(Error::parse(None, "p", "p must equal the length of eq_idx"));
        }
        let cs = ConstraintSystem::new(
            DMatrix::from_row_slice(self.k, self.d, &self.a),
            DVector::from_column_slice(&self.b),
            &self.eq_idx,
        )?;
        Ok(AffineMomentModel::new(cs, BoxBounds::new(self.box_lo.clone(), self.box_hi.clone())?)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Sidecar header of a sample CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub p: usize,
    pub det_mask: Vec<bool>,
    #[serde(default)]
    pub eq_idx: Vec<usize>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoxSpec>,
}

impl SampleHeader {
    pub fn of(sample: &MomentSample) -> Self {
        Self {
            n: sample.n(),
            k: sample.k(),
            d: sample.d(),
            p: sample.p(),
            det_mask: sample.det_mask().to_vec(),
            eq_idx: sample.eq_idx().to_vec(),
            bounds: sample.bounds().map(|b| BoxSpec { lo: b.lo.clone(), hi: b.hi.clone() }),
        }
    }
}

/// `<sample>.json`.
pub fn sidecar_path(sample: &Path) -> PathBuf {
    let mut s = sample.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_model(path: &Path, model: &AffineMomentModel) -> Result<()> {
    write_json(path, &ModelFile::from_model(model)?)
}

pub fn read_model(path: &Path) -> Result<AffineMomentModel> {
    let file: ModelFile = serde_json::from_str(&read_to_string(path)?)?;
    file.to_model()
}

/// Writes the CSV and its sidecar.
pub fn write_sample(path: &Path, sample: &MomentSample) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(create(path)?);
    for i in 0..sample.n() {
        let row = sample.flat_observation(i);
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), &SampleHeader::of(sample))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(None, "", format!("{other:?}")),
    }
}

pub fn read_header(path: &Path) -> Result<SampleHeader> {
    Ok(serde_json::from_str(&read_to_string(&sidecar_path(path))?)?)
}

/// Reads the CSV at `path` together with its sidecar.
pub fn read_sample(path: &Path) -> Result<MomentSample> {
    let header = read_header(path)?;
    let width = header.k * (header.d + 1);
    if header.det_mask.len() != header.k {
        return Err(Error::parse(None, "det_mask", format!("expected {} entries", header.k)));
    }
    if header.eq_idx.len() != header.p {
        return Err(Error::parse(None, "p", "p must equal the length of eq_idx"));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut obs = Vec::with_capacity(header.n);
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != width {
            return Err(Error::parse(Some(row), "", format!("expected {width} fields, found {}", record.len())));
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(Some(row), (c + 1).to_string(), format!("`{f}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        obs.push(DMatrix::from_row_slice(header.k, header.d + 1, &values));
    }
    if obs.len() != header.n {
        return Err(Error::parse(None, "n", format!("header declares {} rows, file has {}", header.n, obs.len())));
    }
    let sample = MomentSample::from_observations(&obs, header.det_mask, &header.eq_idx)?;
    match header.bounds {
        Some(b) => Ok(sample.with_box(BoxBounds::new(b.lo, b.hi)?)?),
        None => Ok(sample),
    }
}
