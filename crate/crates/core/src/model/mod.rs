//! Affine moment models `E[m(W, θ)] = E[W](θ, -1)ᵀ` and their samples.
//!
//! Each observation is a `k × (d+1)` matrix `w_i = (A_i, b_i)` and the
//! moment function is `m(w_i, θ) = A_i θ - b_i`. Rows in the equality set
//! must vanish at the true parameter; all other rows must be nonpositive.

mod diagnostics;
mod sample;

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::qp::ConstraintSystem;

pub use diagnostics::{diagnose, eta, s_min, DiagnosticsReport, DEFAULT_DIAGNOSTIC_FLOOR};
pub use sample::MomentSample;

/// Tolerance on `‖a‖ - 1` for a direction to count as a unit vector.
pub const UNIT_TOL: f64 = 1e-10;

/// Axis-aligned bounds `lo ≤ θ ≤ hi` on the parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = Self { lo, hi };
        b.validate(b.lo.len())?;
        Ok(b)
    }

    /// The cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(alloc::vec![lo; d], alloc::vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn validate(&self, d: usize) -> Result<()> {
        if self.lo.len() != d || self.hi.len() != d {
            return Err(Error::DimensionMismatch(format!("box bounds must have length {d}")));
        }
        for l in 0..d {
            if !(self.lo[l].is_finite() && self.hi[l].is_finite() && self.lo[l] < self.hi[l]) {
                return Err(Error::InvalidInput(format!(
                    "box bounds for coordinate {l} must be finite with lo < hi"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Population,
    Empirical { n: usize },
}

/// A constraint system whose inequality rows include the parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMomentModel {
    cs: ConstraintSystem,
    bounds: Option<BoxBounds>,
    box_rows: Vec<usize>,
    source: Source,
}

impl AffineMomentModel {
    /// A population model. Box rows are appended when not already present.
    pub fn new(cs: ConstraintSystem, bounds: BoxBounds) -> Result<Self> {
        bounds.validate(cs.d())?;
        let d = cs.d();
        let mut cs = cs;
        let mut box_rows = Vec::with_capacity(2 * d);
        for (lower, l) in (0..d).map(|l| (true, l)).chain((0..d).map(|l| (false, l))) {
            let target = sample::box_row(d, l, lower, &bounds);
            let found = (0..cs.k()).find(|&j| {
                !cs.is_equality(j)
                    && cs.b()[j] == target[d]
                    && cs.a().row(j).iter().zip(&target[..d]).all(|(x, y)| x == y)
            });
            let j = match found {
                Some(j) => j,
                None => cs.push_row(&DVector::from_column_slice(&target[..d]), target[d], false)?,
            };
            box_rows.push(j);
        }
        Ok(Self { cs, bounds: Some(bounds), box_rows, source: Source::Population })
    }

    pub fn cs(&self) -> &ConstraintSystem {
        &self.cs
    }

    pub fn bounds(&self) -> Option<&BoxBounds> {
        self.bounds.as_ref()
    }

    /// Indices of the rows that bound the parameter space.
    pub fn box_rows(&self) -> &[usize] {
        &self.box_rows
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn k(&self) -> usize {
        self.cs.k()
    }

    pub fn d(&self) -> usize {
        self.cs.d()
    }

    pub fn p(&self) -> usize {
        self.cs.p()
    }

    pub fn is_box_row(&self, j: usize) -> bool {
        self.box_rows.contains(&j)
    }

    /// Inequality rows that are not box rows.
    pub fn moment_ineq_rows(&self) -> Vec<usize> {
        self.cs.ineq_idx().into_iter().filter(|&j| !self.is_box_row(j)).collect()
    }

    /// The submodel made of `rows` together with every equality and box row.
    /// Returns the model and the original index of each of its rows.
    pub fn restrict(&self, rows: &[usize]) -> (Self, Vec<usize>) {
        let mut keep: Vec<usize> = rows
            .iter()
            .copied()
            .chain(self.cs.eq_idx())
            .chain(self.box_rows.iter().copied())
            .collect();
        keep.sort_unstable();
        keep.dedup();
        let cs = self.cs.select_rows(&keep);
        let box_rows = self
            .box_rows
            .iter()
            .map(|j| keep.binary_search(j).expect("box row retained"))
            .collect();
        (Self { cs, bounds: self.bounds.clone(), box_rows, source: self.source }, keep)
    }
}

/// `(1/n) Σ w_i` as a model. Deterministic rows pass through unchanged.
pub fn empirical_model(sample: &MomentSample) -> Result<AffineMomentModel> {
    let m = sample.mean();
    let d = sample.d();
    let a = m.columns(0, d).into_owned();
    let b = m.column(d).into_owned();
    let cs = ConstraintSystem::new(a, b, sample.eq_idx())?;
    let bounds = sample.bounds().cloned().ok_or_else(|| {
        Error::InvalidInput("sample carries no box rows; attach bounds with `with_box`".into())
    })?;
    Ok(AffineMomentModel {
        cs,
        bounds: Some(bounds),
        box_rows: sample.box_rows().to_vec(),
        source: Source::Empirical { n: sample.n() },
    })
}

/// Checks that `a` has unit norm.
pub fn check_direction(a: &DVector<f64>) -> Result<()> {
    let norm = a.norm();
    if !((norm - 1.0).abs() <= UNIT_TOL) {
        return Err(Error::NonUnitDirection { norm });
    }
    Ok(())
}

/// `e_i` in dimension `d`.
pub fn unit(d: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(d);
    e[i] = 1.0;
    e
}

/// Symmetric orthogonal `U` with `U e₁ = a` (so also `e₁ᵀU = aᵀ`): the
/// Householder reflection through `e₁ - a`, or the identity when `a = e₁`.
pub fn householder(a: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_direction(a)?;
    let d = a.len();
    let mut v = -a;
    v[0] += 1.0;
    let vv = v.norm_squared();
    if vv == 0.0 {
        return Ok(DMatrix::identity(d, d));
    }
    Ok(DMatrix::identity(d, d) - (&v * v.transpose()) * (2.0 / vv))
}

/// The model in coordinates `ϑ = Uθ`, `U` from [`householder`], so that
/// `ϑ₁ = aᵀθ`. The box rows keep their indices but are no longer
/// axis-aligned.
pub fn rotate(model: &AffineMomentModel, a: &DVector<f64>) -> Result<AffineMomentModel> {
    if a.len() != model.d() {
        return Err(Error::DimensionMismatch(format!(
            "direction has length {}, expected {}",
            a.len(),
            model.d()
        )));
    }
    let u = householder(a)?;
    Ok(AffineMomentModel {
        cs: model.cs.transform_columns(&u),
        bounds: None,
        box_rows: model.box_rows.clone(),
        source: model.source,
    })
}

/// Influence values `ψ_i = λᵀ(A_i θ - b_i)`.
pub fn influence_rows(sample: &MomentSample, theta: &DVector<f64>, lambda: &DVector<f64>) -> Result<Vec<f64>> {
    let d = sample.d();
    if theta.len() != d || lambda.len() != sample.k() {
        return Err(Error::DimensionMismatch(format!(
            "expected θ of length {d} and λ of length {}",
            sample.k()
        )));
    }
    let active: Vec<usize> = (0..sample.k()).filter(|&j| lambda[j] != 0.0).collect();
    let det_part: f64 = active
        .iter()
        .filter(|&&j| sample.det_mask()[j])
        .map(|&j| lambda[j] * moment(sample.w(0, j), theta))
        .sum();
    let random: Vec<usize> = active.into_iter().filter(|&j| !sample.det_mask()[j]).collect();
    Ok((0..sample.n())
        .map(|i| det_part + random.iter().map(|&j| lambda[j] * moment(sample.w(i, j), theta)).sum::<f64>())
        .collect())
}

fn moment(w: &[f64], theta: &DVector<f64>) -> f64 {
    let d = theta.len();
    w[..d].iter().zip(theta.iter()).map(|(a, t)| a * t).sum::<f64>() - w[d]
}
