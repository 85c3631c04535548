use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::BoxBounds;
use crate::error::{Error, Result};

/// `n` observations of `k × (d+1)` moment matrices `w_i = (A_i, b_i)`.
///
/// Deterministic rows are stored once; stochastic rows are stored densely,
/// observation-major and row-major within an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSample {
    n: usize,
    k: usize,
    d: usize,
    eq_idx: Vec<usize>,
    det_mask: Vec<bool>,
    stochastic: Vec<usize>,
    slot: Vec<usize>,
    det: Vec<f64>,
    data: Vec<f64>,
    bounds: Option<BoxBounds>,
    box_rows: Vec<usize>,
}

impl MomentSample {
    /// Builds a sample from its storage blocks.
    ///
    /// `det` holds all `k` rows (row-major, `d+1` entries each); entries of
    /// stochastic rows are ignored. `data` holds `n` blocks of the stochastic
    /// rows in index order.
    pub fn from_parts(
        n: usize,
        d: usize,
        det_mask: Vec<bool>,
        eq_idx: &[usize],
        mut det: Vec<f64>,
        data: Vec<f64>,
    ) -> Result<Self> {
        let k = det_mask.len();
        let w = d + 1;
        if n == 0 {
            return Err(Error::InvalidInput("sample must contain at least one observation".into()));
        }
        if d == 0 || k == 0 {
            return Err(Error::InvalidInput("empty moment system".into()));
        }
        let stochastic: Vec<usize> = (0..k).filter(|&j| !det_mask[j]).collect();
        let mut slot = vec![usize::MAX; k];
        for (s, &j) in stochastic.iter().enumerate() {
            slot[j] = s;
        }
        if det.len() != k * w {
            return Err(Error::DimensionMismatch(format!(
                "deterministic block has {} entries, expected {}",
                det.len(),
                k * w
            )));
        }
        if data.len() != n * stochastic.len() * w {
            return Err(Error::DimensionMismatch(format!(
                "stochastic block has {} entries, expected {}",
                data.len(),
                n * stochastic.len() * w
            )));
        }
        for &j in &stochastic {
            det[j * w..(j + 1) * w].fill(0.0);
        }
        if det.iter().chain(data.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("observations must be finite".into()));
        }
        let mut sorted_eq = eq_idx.to_vec();
        sorted_eq.sort_unstable();
        sorted_eq.dedup();
        if sorted_eq.len() != eq_idx.len() || sorted_eq.last().is_some_and(|&j| j >= k) {
            return Err(Error::InvalidInput("invalid equality indices".into()));
        }
        let mut sample = Self {
            n,
            k,
            d,
            eq_idx: sorted_eq,
            det_mask,
            stochastic,
            slot,
            det,
            data,
            bounds: None,
            box_rows: Vec::new(),
        };
        if let Some((bounds, rows)) = sample.detect_box() {
            sample.bounds = Some(bounds);
            sample.box_rows = rows;
        }
        Ok(sample)
    }

    /// Builds a sample from full observation matrices, checking that rows
    /// flagged deterministic agree across observations.
    pub fn from_observations(obs: &[DMatrix<f64>], det_mask: Vec<bool>, eq_idx: &[usize]) -> Result<Self> {
        let first = obs
            .first()
            .ok_or_else(|| Error::InvalidInput("sample must contain at least one observation".into()))?;
        let k = first.nrows();
        if first.ncols() < 2 {
            return Err(Error::InvalidInput("observations need at least two columns".into()));
        }
        let d = first.ncols() - 1;
        if det_mask.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "det_mask has length {}, expected {k}",
                det_mask.len()
            )));
        }
        if obs.iter().any(|o| o.shape() != (k, d + 1)) {
            return Err(Error::DimensionMismatch("observations of unequal shape".into()));
        }
        let mut det = vec![0.0; k * (d + 1)];
        let mut data = Vec::with_capacity(obs.len() * k * (d + 1));
        for j in 0..k {
            if det_mask[j] {
                for l in 0..=d {
                    det[j * (d + 1) + l] = first[(j, l)];
                }
                if obs.iter().any(|o| o.row(j) != first.row(j)) {
                    return Err(Error::InvalidInput(format!(
                        "row {j} is flagged deterministic but varies across observations"
                    )));
                }
            }
        }
        for o in obs {
            for j in (0..k).filter(|&j| !det_mask[j]) {
                data.extend(o.row(j).iter());
            }
        }
        Self::from_parts(obs.len(), d, det_mask, eq_idx, det, data)
    }

    /// Appends deterministic box rows `-θ_l ≤ -lo_l`, `θ_l ≤ hi_l` unless
    /// the sample already carries them.
    pub fn with_box(mut self, bounds: BoxBounds) -> Result<Self> {
        bounds.validate(self.d)?;
        if let Some(existing) = &self.bounds {
            if *existing == bounds {
                return Ok(self);
            }
        }
        let w = self.d + 1;
        let mut rows = Vec::with_capacity(2 * self.d);
        for (lower, l) in (0..self.d).map(|l| (true, l)).chain((0..self.d).map(|l| (false, l))) {
            let target = box_row(self.d, l, lower, &bounds);
            let found = (0..self.k).find(|&j| {
                self.det_mask[j] && !self.is_equality(j) && self.det[j * w..(j + 1) * w] == target[..]
            });
            let j = match found {
                Some(j) => j,
                None => {
                    self.det.extend_from_slice(&target);
                    self.det_mask.push(true);
                    self.slot.push(usize::MAX);
                    self.k += 1;
                    self.k - 1
                }
            };
            rows.push(j);
        }
        self.bounds = Some(bounds);
        self.box_rows = rows;
        Ok(self)
    }

    fn detect_box(&self) -> Option<(BoxBounds, Vec<usize>)> {
        let w = self.d + 1;
        let mut lo = vec![0.0; self.d];
        let mut hi = vec![0.0; self.d];
        let mut rows = vec![usize::MAX; 2 * self.d];
        // Box rows are appended last, so later rows take precedence.
        for j in (0..self.k).rev().filter(|&j| self.det_mask[j] && !self.is_equality(j)) {
            let r = &self.det[j * w..(j + 1) * w];
            let nz: Vec<usize> = (0..self.d).filter(|&l| r[l] != 0.0).collect();
            if let [l] = nz[..] {
                if r[l] == -1.0 && rows[l] == usize::MAX {
                    lo[l] = -r[self.d];
                    rows[l] = j;
                } else if r[l] == 1.0 && rows[self.d + l] == usize::MAX {
                    hi[l] = r[self.d];
                    rows[self.d + l] = j;
                }
            }
        }
        if rows.contains(&usize::MAX) {
            return None;
        }
        let bounds = BoxBounds::new(lo, hi).ok()?;
        Some((bounds, rows))
    }

    /// The sample restricted to `rows` (sorted, distinct), keeping the
    /// equality flags of the retained rows.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.windows(2).any(|w| w[0] >= w[1]) || rows.last().is_some_and(|&j| j >= self.k) {
            return Err(Error::InvalidInput("row selection must be sorted, distinct and in range".into()));
        }
        let w = self.d + 1;
        let det_mask: Vec<bool> = rows.iter().map(|&j| self.det_mask[j]).collect();
        let eq_idx: Vec<usize> = (0..rows.len()).filter(|&t| self.is_equality(rows[t])).collect();
        let mut det = vec![0.0; rows.len() * w];
        for (t, &j) in rows.iter().enumerate() {
            if self.det_mask[j] {
                det[t * w..(t + 1) * w].copy_from_slice(self.w(0, j));
            }
        }
        let stoch: Vec<usize> = rows.iter().copied().filter(|&j| !self.det_mask[j]).collect();
        let mut data = Vec::with_capacity(self.n * stoch.len() * w);
        for i in 0..self.n {
            for &j in &stoch {
                data.extend_from_slice(self.w(i, j));
            }
        }
        let mut out = Self::from_parts(self.n, self.d, det_mask, &eq_idx, det, data)?;
        let mapped: Option<Vec<usize>> = self.box_rows.iter().map(|j| rows.binary_search(j).ok()).collect();
        if let (Some(bounds), Some(mapped)) = (&self.bounds, mapped) {
            out.bounds = Some(bounds.clone());
            out.box_rows = mapped;
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn p(&self) -> usize {
        self.eq_idx.len()
    }

    pub fn eq_idx(&self) -> &[usize] {
        &self.eq_idx
    }

    pub fn is_equality(&self, j: usize) -> bool {
        self.eq_idx.binary_search(&j).is_ok()
    }

    pub fn det_mask(&self) -> &[bool] {
        &self.det_mask
    }

    /// Indices of the rows that vary across observations.
    pub fn stochastic_rows(&self) -> &[usize] {
        &self.stochastic
    }

    pub fn bounds(&self) -> Option<&BoxBounds> {
        self.bounds.as_ref()
    }

    /// Box row indices, lower bounds first.
    pub fn box_rows(&self) -> &[usize] {
        &self.box_rows
    }

    /// Row `j` of observation `i`, `d+1` entries.
    pub fn w(&self, i: usize, j: usize) -> &[f64] {
        let w = self.d + 1;
        if self.det_mask[j] {
            &self.det[j * w..(j + 1) * w]
        } else {
            let ks = self.stochastic.len();
            let start = (i * ks + self.slot[j]) * w;
            &self.data[start..start + w]
        }
    }

    /// Observation `i` as a `k × (d+1)` matrix.
    pub fn observation(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.d + 1, |j, l| self.w(i, j)[l])
    }

    /// Observation `i` flattened row-major, `k (d+1)` entries.
    pub fn flat_observation(&self, i: usize) -> Vec<f64> {
        (0..self.k).flat_map(|j| self.w(i, j).iter().copied()).collect()
    }

    /// Sample mean of the `k × (d+1)` matrices.
    pub fn mean(&self) -> DMatrix<f64> {
        let w = self.d + 1;
        let mut m = DMatrix::zeros(self.k, w);
        for j in 0..self.k {
            if self.det_mask[j] {
                for l in 0..w {
                    m[(j, l)] = self.det[j * w + l];
                }
            }
        }
        let ks = self.stochastic.len();
        let mut acc = vec![0.0; ks * w];
        for block in self.data.chunks_exact(ks * w) {
            for (a, x) in acc.iter_mut().zip(block) {
                *a += x;
            }
        }
        let n = self.n as f64;
        for (s, &j) in self.stochastic.iter().enumerate() {
            for l in 0..w {
                m[(j, l)] = acc[s * w + l] / n;
            }
        }
        m
    }
}

pub(super) fn box_row(d: usize, l: usize, lower: bool, bounds: &BoxBounds) -> Vec<f64> {
    let mut r = vec![0.0; d + 1];
    if lower {
        r[l] = -1.0;
        r[d] = -bounds.lo[l];
    } else {
        r[l] = 1.0;
        r[d] = bounds.hi[l];
    }
    r
}
