//! Simulation designs: a population model together with a sampler that adds
//! independent Gaussian noise to every entry of the stochastic rows.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::interval_iv::IntervalIVDataset;
use crate::model::{unit, AffineMomentModel, BoxBounds, MomentSample};
use crate::qp::ConstraintSystem;
use crate::regsf::support_lp;

/// Half-width of the parameter box used by the built-in designs.
pub const DESIGN_BOX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    d: usize,
    det_mask: Vec<bool>,
    eq_idx: Vec<usize>,
    det: Vec<f64>,
    stochastic_mean: Vec<f64>,
    noise_sd: f64,
    population: AffineMomentModel,
}

impl Design {
    /// `w` holds the expected moment matrix `(A, b)`; rows with
    /// `det_mask[j]` are noise-free. Box rows are appended to both the
    /// population model and every sample.
    pub fn new(w: DMatrix<f64>, det_mask: Vec<bool>, eq_idx: &[usize], noise_sd: f64, bounds: BoxBounds) -> Result<Self> {
        let d = w.ncols() - 1;
        let template = MomentSample::from_observations(&[w], det_mask, eq_idx)?.with_box(bounds.clone())?;
        let mean = template.observation(0);
        let k = template.k();
        let mut det = vec![0.0; k * (d + 1)];
        let mut stochastic_mean = Vec::new();
        for j in 0..k {
            if template.det_mask()[j] {
                det[j * (d + 1)..(j + 1) * (d + 1)].copy_from_slice(template.w(0, j));
            } else {
                stochastic_mean.extend_from_slice(template.w(0, j));
            }
        }
        let cs = ConstraintSystem::new(
            mean.columns(0, d).into_owned(),
            mean.column(d).into_owned(),
            template.eq_idx(),
        )?;
        let population = AffineMomentModel::new(cs, bounds)?;
        Ok(Self {
            d,
            det_mask: template.det_mask().to_vec(),
            eq_idx: template.eq_idx().to_vec(),
            det,
            stochastic_mean,
            noise_sd,
            population,
        })
    }

    pub fn population(&self) -> &AffineMomentModel {
        &self.population
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// A copy of the design with a different noise level.
    pub fn with_noise_sd(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    /// Population `(min θ₁, max θ₁)` from the linear program.
    pub fn truth(&self) -> Result<(f64, f64)> {
        let e1 = unit(self.d, 0);
        let lo = support_lp(&self.population, &e1)?.value;
        let hi = -support_lp(&self.population, &(-e1))?.value;
        Ok((lo, hi))
    }

    /// `n` i.i.d. observations.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<MomentSample> {
        let mut data = Vec::with_capacity(n * self.stochastic_mean.len());
        for _ in 0..n {
            for &m in &self.stochastic_mean {
                let z: f64 = rng.sample(StandardNormal);
                data.push(m + self.noise_sd * z);
            }
        }
        MomentSample::from_parts(n, self.d, self.det_mask.clone(), &self.eq_idx, self.det.clone(), data)
    }
}

/// The parallelogram design indexed by the angle `ω` in degrees:
///
/// ```text
/// E W = ( -cos ω  -sin ω  cos ω + sin ω
///          cos ω   sin ω  cos ω + sin ω
///          0      -1      1
///          0       1      1 )
/// ```
///
/// with noise variance `0.01` on every entry.
pub fn design_2d(omega_deg: f64) -> Result<Design> {
    let w = omega_deg.to_radians();
    let (s, c) = (libm::sin(w), libm::cos(w));
    let mean = DMatrix::from_row_slice(4, 3, &[-c, -s, c + s, c, s, c + s, 0.0, -1.0, 1.0, 0.0, 1.0, 1.0]);
    Design::new(mean, vec![false; 4], &[], 0.1, BoxBounds::cube(2, -DESIGN_BOX, DESIGN_BOX)?)
}

/// The cube `[-1, 1]^d` written as `E W = (-I, 1; I, 1)`, with noise
/// variance `0.09 / (1 + 4d)`.
pub fn design_nd(d: usize) -> Result<Design> {
    let mut mean = DMatrix::zeros(2 * d, d + 1);
    for l in 0..d {
        mean[(l, l)] = -1.0;
        mean[(d + l, l)] = 1.0;
        mean[(l, d)] = 1.0;
        mean[(d + l, d)] = 1.0;
    }
    let sd = libm::sqrt(0.09 / (1.0 + 4.0 * d as f64));
    Design::new(mean, vec![false; 2 * d], &[], sd, BoxBounds::cube(d, -DESIGN_BOX, DESIGN_BOX)?)
}

/// Four inequalities `±(½θ₁ + ρθ₂) ≤ Δ₁/2`, `±½θ₂ ≤ Δ₀/2`, whose projection
/// on `θ₁` is `[-Δ₁ - 2|ρ|Δ₀, Δ₁ + 2|ρ|Δ₀]`.
pub fn running_example_subsystem(delta0: f64, delta1: f64, rho: f64) -> Result<AffineMomentModel> {
    let cs = ConstraintSystem::from_rows(
        &[vec![-0.5, -rho], vec![0.5, rho], vec![0.0, -0.5], vec![0.0, 0.5]],
        &[delta1 / 2.0, delta1 / 2.0, delta0 / 2.0, delta0 / 2.0],
        &[],
    )?;
    AffineMomentModel::new(cs, BoxBounds::cube(2, -DESIGN_BOX, DESIGN_BOX)?)
}

/// A 100-row dataset whose empirical distribution is a population with
/// binary instruments `Z = X ∈ {0,1}²`, cell frequencies
/// `P(00) = P(11) = (1+r)/4` and `P(01) = P(10) = (1-r)/4`, and outcome
/// bounds `r z₂ ∓ Δ_{z₁}/2`. Its moment model has eight inequality rows.
pub fn running_example_dataset(delta0: f64, delta1: f64, r: f64) -> Result<IntervalIVDataset> {
    let same = libm::round(25.0 * (1.0 + r)) as usize;
    let cross = 50 - same;
    let (mut y_lo, mut y_hi, mut x, mut z) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (z1, z2, count) in [(0u8, 0u8, same), (0, 1, cross), (1, 0, cross), (1, 1, same)] {
        let half = if z1 == 1 { delta1 } else { delta0 } / 2.0;
        let mid = r * f64::from(z2);
        for _ in 0..count {
            y_lo.push(mid - half);
            y_hi.push(mid + half);
            x.push(vec![f64::from(z1), f64::from(z2)]);
            z.push(format!("{z1}{z2}"));
        }
    }
    IntervalIVDataset::new(y_lo, y_hi, x, z)
}
