//! Moment matrices for linear models with an interval-valued outcome and
//! discrete instruments: `E[Y̲ | Z] ≤ E[X | Z]ᵀθ ≤ E[Ȳ | Z]`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{BoxBounds, MomentSample};

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalIVDataset {
    y_lo: Vec<f64>,
    y_hi: Vec<f64>,
    x: Vec<Vec<f64>>,
    z: Vec<usize>,
    support: Vec<String>,
}

impl IntervalIVDataset {
    /// Rows `(y_lo, y_hi, x, z)`. The support is the distinct instrument
    /// labels in order of first appearance.
    pub fn new(y_lo: Vec<f64>, y_hi: Vec<f64>, x: Vec<Vec<f64>>, z: Vec<String>) -> Result<Self> {
        let n = y_lo.len();
        if y_hi.len() != n || x.len() != n || z.len() != n {
            return Err(Error::DimensionMismatch("columns of unequal length".into()));
        }
        if n == 0 {
            return Err(Error::InvalidInput("dataset is empty".into()));
        }
        let d = x[0].len();
        if d == 0 || x.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("regressor rows must share a positive length".into()));
        }
        for i in 0..n {
            if !(y_lo[i].is_finite() && y_hi[i].is_finite()) || x[i].iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i} has a non-finite value")));
            }
            if y_lo[i] > y_hi[i] {
                return Err(Error::IntervalViolation { row: i });
            }
        }
        let mut support: Vec<String> = Vec::new();
        let mut codes = Vec::with_capacity(n);
        for label in z {
            let code = match support.iter().position(|s| *s == label) {
                Some(c) => c,
                None => {
                    support.push(label);
                    support.len() - 1
                }
            };
            codes.push(code);
        }
        Ok(Self { y_lo, y_hi, x, z: codes, support })
    }

    pub fn n(&self) -> usize {
        self.y_lo.len()
    }

    pub fn d(&self) -> usize {
        self.x[0].len()
    }

    pub fn support(&self) -> &[String] {
        &self.support
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.support.len() < self.d() {
            w.push(format!(
                "{} instrument values for {} regressors: the identified set may be unbounded within the box",
                self.support.len(),
                self.d()
            ));
        }
        w
    }
}

/// Builds the moment sample. For every label `z` not in `collapse` there is
/// a lower row `(-X 1{Z=z}, -Y̲ 1{Z=z})` and an upper row
/// `(X 1{Z=z}, Ȳ 1{Z=z})`; a collapsed label instead gives one equality
/// row `(X 1{Z=z}, (Y̲+Ȳ)/2 1{Z=z})`. Rows are ordered lower, upper,
/// equality, then box.
pub fn build_moments(ds: &IntervalIVDataset, collapse: &[String], bounds: BoxBounds) -> Result<MomentSample> {
    let mut collapsed = vec![false; ds.support.len()];
    for label in collapse {
        let c = ds
            .support
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::UnknownLabel(label.clone()))?;
        collapsed[c] = true;
    }
    let open: Vec<usize> = (0..ds.support.len()).filter(|&c| !collapsed[c]).collect();
    let closed: Vec<usize> = (0..ds.support.len()).filter(|&c| collapsed[c]).collect();
    let d = ds.d();
    let w = d + 1;
    let k = 2 * open.len() + closed.len();
    let mut data = Vec::with_capacity(ds.n() * k * w);
    for i in 0..ds.n() {
        let zi = ds.z[i];
        let x = &ds.x[i];
        let mut block = vec![0.0; k * w];
        if let Some(pos) = open.iter().position(|&c| c == zi) {
            let lo = &mut block[pos * w..(pos + 1) * w];
            for l in 0..d {
                lo[l] = -x[l];
            }
            lo[d] = -ds.y_lo[i];
            let row = open.len() + pos;
            let hi = &mut block[row * w..(row + 1) * w];
            hi[..d].copy_from_slice(x);
            hi[d] = ds.y_hi[i];
        } else if let Some(pos) = closed.iter().position(|&c| c == zi) {
            let row = 2 * open.len() + pos;
            let eq = &mut block[row * w..(row + 1) * w];
            eq[..d].copy_from_slice(x);
            eq[d] = 0.5 * (ds.y_lo[i] + ds.y_hi[i]);
        }
        data.extend_from_slice(&block);
    }
    let eq_idx: Vec<usize> = (2 * open.len()..k).collect();
    MomentSample::from_parts(ds.n(), d, vec![false; k], &eq_idx, vec![0.0; k * w], data)?.with_box(bounds)
}
