//! Confidence sets for support functions: delta-method bands and
//! intervals, multiplier-bootstrap critical values, and polygon sets built
//! from several directions.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{empirical_model, AffineMomentModel, MomentSample};
use crate::regsf::{estimate, RegularizedEstimate, Tuning, TuningRule};
use crate::stats::{empirical_quantile, normal_quantile};

/// Default floor on standard errors in the uniform constructions.
pub const DEFAULT_SIGMA0: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsKind {
    CbPointwise,
    CiTheta1,
    CiSetBonferroni,
    CbUniform,
    CiSetUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Inner,
    Outer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSet {
    pub kind: CsKind,
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    /// Standard error used for the lower end.
    pub sigma_used: f64,
    /// Standard error used for the upper end of two-sided sets.
    pub sigma_upper: Option<f64>,
    pub estimator_used: Estimator,
    pub tuning: Tuning,
    pub warnings: Vec<String>,
}

impl ConfidenceSet {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Halfspaces `a_mᵀθ ≤ c_m` with unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonCS {
    pub halfspaces: Vec<(DVector<f64>, f64)>,
    pub alpha: f64,
    pub critical_value: f64,
}

impl PolygonCS {
    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        self.halfspaces.iter().all(|(a, c)| a.dot(theta) <= *c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightLaw {
    StandardGaussian,
}

/// Multiplier bootstrap settings. Draw `b` uses the ChaCha stream `b` of
/// the generator seeded with `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapConfig {
    pub draws: usize,
    pub weight_law: WeightLaw,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { draws: 1000, weight_law: WeightLaw::StandardGaussian, seed: 0 }
    }
}

/// How the common critical value of a polygon set is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalValue {
    Bootstrap(BootstrapConfig),
    /// `z_{1-α/M}` for `M` halfspaces.
    Bonferroni,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    Ok(())
}

fn sqrt_n(est: &RegularizedEstimate) -> f64 {
    libm::sqrt(est.n as f64)
}

struct Sides {
    lower: RegularizedEstimate,
    upper: RegularizedEstimate,
}

fn both_sides(sample: &MomentSample, direction: &DVector<f64>, rule: &TuningRule) -> Result<Sides> {
    let model = empirical_model(sample)?;
    let lower = estimate(sample, &model, direction, rule)?;
    let upper = estimate(sample, &model, &(-direction), rule)?;
    Ok(Sides { lower, upper })
}

/// `[v̂_in - z_{1-α} σ̂/√n, ∞)` for `min aᵀθ`.
pub fn cb_pointwise(sample: &MomentSample, direction: &DVector<f64>, alpha: f64, rule: &TuningRule) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    let model = empirical_model(sample)?;
    let est = estimate(sample, &model, direction, rule)?;
    Ok(cb_from(&est, alpha, Estimator::Inner, None))
}

/// `[v̂_out - z_{1-α} max(σ̂, σ₀)/√n, ∞)` for `min aᵀθ`.
pub fn cb_uniform(
    sample: &MomentSample,
    direction: &DVector<f64>,
    alpha: f64,
    rule: &TuningRule,
    sigma0: f64,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    check_sigma0(sigma0)?;
    let model = empirical_model(sample)?;
    let est = estimate(sample, &model, direction, rule)?;
    Ok(cb_from(&est, alpha, Estimator::Outer, Some(sigma0)))
}

/// One-sided band from an estimate. `sigma0` selects the uniform variant.
pub fn cb_from(est: &RegularizedEstimate, alpha: f64, estimator: Estimator, sigma0: Option<f64>) -> ConfidenceSet {
    let z = normal_quantile(1.0 - alpha);
    let sigma = sigma0.map_or(est.sigma_hat, |s0| est.sigma_hat.max(s0));
    let value = match estimator {
        Estimator::Inner => est.v_in,
        Estimator::Outer => est.v_out,
    };
    ConfidenceSet {
        kind: if sigma0.is_some() { CsKind::CbUniform } else { CsKind::CbPointwise },
        alpha,
        lower: value - z * sigma / sqrt_n(est),
        upper: f64::INFINITY,
        sigma_used: sigma,
        sigma_upper: None,
        estimator_used: estimator,
        tuning: est.tuning,
        warnings: Vec::new(),
    }
}

fn two_sided(sides: &Sides, alpha: f64, kind: CsKind, sigma0: Option<f64>) -> ConfidenceSet {
    let z = normal_quantile(1.0 - alpha);
    let floor = |s: f64| sigma0.map_or(s, |s0| s.max(s0));
    let (sl, su) = (floor(sides.lower.sigma_hat), floor(sides.upper.sigma_hat));
    let (lo, hi, estimator) = if sigma0.is_some() {
        (sides.lower.v_out, -sides.upper.v_out, Estimator::Outer)
    } else {
        (sides.lower.v_in, -sides.upper.v_in, Estimator::Inner)
    };
    ConfidenceSet {
        kind,
        alpha,
        lower: lo - z * sl / sqrt_n(&sides.lower),
        upper: hi + z * su / sqrt_n(&sides.upper),
        sigma_used: sl,
        sigma_upper: Some(su),
        estimator_used: estimator,
        tuning: sides.lower.tuning,
        warnings: Vec::new(),
    }
}

/// Two-sided interval for a point `aᵀθ` of the identified set.
pub fn ci_theta1(sample: &MomentSample, direction: &DVector<f64>, alpha: f64, rule: &TuningRule) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    let sides = both_sides(sample, direction, rule)?;
    let mut cs = two_sided(&sides, alpha, CsKind::CiTheta1, None);
    if sample.p() > 0 {
        cs.warnings.push(String::from(
            "coverage of this interval is not guaranteed with equality restrictions; prefer the Bonferroni set",
        ));
    }
    Ok(cs)
}

/// Two-sided interval for the whole projection: [`ci_theta1`] at `α/2`.
pub fn ci_set(sample: &MomentSample, direction: &DVector<f64>, alpha: f64, rule: &TuningRule) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    let sides = both_sides(sample, direction, rule)?;
    let mut cs = two_sided(&sides, alpha / 2.0, CsKind::CiSetBonferroni, None);
    cs.alpha = alpha;
    Ok(cs)
}

/// Uniformly valid version of [`ci_set`].
pub fn ci_set_uniform(
    sample: &MomentSample,
    direction: &DVector<f64>,
    alpha: f64,
    rule: &TuningRule,
    sigma0: f64,
) -> Result<ConfidenceSet> {
    check_alpha(alpha)?;
    check_sigma0(sigma0)?;
    let sides = both_sides(sample, direction, rule)?;
    let mut cs = two_sided(&sides, alpha / 2.0, CsKind::CiSetUniform, Some(sigma0));
    cs.alpha = alpha;
    Ok(cs)
}

fn check_sigma0(sigma0: f64) -> Result<()> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma0 must be positive, got {sigma0}")));
    }
    Ok(())
}

/// `1-α` quantile over draws of `max_m Σ_i ξ_i ψ_im / (√n σ_m)` with
/// standard Gaussian `ξ` shared across directions. Each `ψ_m` is centered
/// first.
pub fn bootstrap_quantile(psi: &[Vec<f64>], sigmas: &[f64], alpha: f64, cfg: &BootstrapConfig) -> Result<f64> {
    if psi.is_empty() || psi.len() != sigmas.len() {
        return Err(Error::DimensionMismatch("one standard error per direction is required".into()));
    }
    if cfg.draws < 100 {
        return Err(Error::InvalidInput(format!("at least 100 draws are required, got {}", cfg.draws)));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(index) = sigmas.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateSigma { index });
    }
    let n = psi[0].len();
    if n == 0 || psi.iter().any(|p| p.len() != n) {
        return Err(Error::DimensionMismatch("influence vectors of unequal length".into()));
    }
    let scale = libm::sqrt(n as f64);
    let centered: Vec<Vec<f64>> = psi
        .iter()
        .zip(sigmas)
        .map(|(p, &s)| {
            let m = crate::stats::mean(p);
            p.iter().map(|x| (x - m) / (scale * s)).collect()
        })
        .collect();
    let mut xi = alloc::vec![0.0; n];
    let stats: Vec<f64> = (0..cfg.draws)
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(b as u64);
            for x in xi.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            centered
                .iter()
                .map(|p| p.iter().zip(&xi).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(empirical_quantile(&stats, 1.0 - alpha))
}

fn critical(critical: &CriticalValue, psi: &[Vec<f64>], sigmas: &[f64], alpha: f64) -> Result<f64> {
    match critical {
        CriticalValue::Bonferroni => Ok(normal_quantile(1.0 - alpha / psi.len() as f64)),
        CriticalValue::Bootstrap(cfg) => bootstrap_quantile(psi, sigmas, alpha, cfg),
    }
}

/// `{θ : aᵀθ ≤ -v̂_out(-a) + c max(σ̂(-a), σ₀)/√n, a ∈ A}`.
pub fn joint_cs(
    sample: &MomentSample,
    directions: &[DVector<f64>],
    alpha: f64,
    rule: &TuningRule,
    sigma0: f64,
    cv: &CriticalValue,
) -> Result<PolygonCS> {
    check_alpha(alpha)?;
    check_sigma0(sigma0)?;
    if directions.is_empty() {
        return Err(Error::InvalidInput("at least one direction is required".into()));
    }
    let model = empirical_model(sample)?;
    let ests = directions
        .iter()
        .map(|a| estimate(sample, &model, &(-a), rule))
        .collect::<Result<Vec<_>>>()?;
    let sigmas: Vec<f64> = ests.iter().map(|e| e.sigma_hat.max(sigma0)).collect();
    let psi: Vec<Vec<f64>> = ests.iter().map(|e| e.psi.clone()).collect();
    let c = critical(cv, &psi, &sigmas, alpha)?;
    let root_n = libm::sqrt(sample.n() as f64);
    let halfspaces = directions
        .iter()
        .zip(&ests)
        .zip(&sigmas)
        .map(|((a, e), s)| (a.clone(), -e.v_out + c * s / root_n))
        .collect();
    Ok(PolygonCS { halfspaces, alpha, critical_value: c })
}

/// Tight bound for every inequality row: `â_jᵀθ ≤ b̂_j^out + c max(σ̂_j, σ₀)/√n`,
/// with `b̂_j^out` the outer estimate of `max â_jᵀθ` over the identified set.
/// Equality rows pass through as two halfspaces.
pub fn natural_cs(
    sample: &MomentSample,
    alpha: f64,
    rule: &TuningRule,
    sigma0: f64,
    cv: &CriticalValue,
) -> Result<PolygonCS> {
    check_alpha(alpha)?;
    check_sigma0(sigma0)?;
    let model = empirical_model(sample)?;
    let rows = natural_rows(&model);
    let mut ests = Vec::with_capacity(rows.len());
    for &(j, norm) in &rows {
        let u = model.cs().row(j) / norm;
        ests.push(estimate(sample, &model, &(-u), rule)?);
    }
    let sigmas: Vec<f64> = rows.iter().zip(&ests).map(|((_, nrm), e)| (nrm * e.sigma_hat).max(sigma0)).collect();
    let psi: Vec<Vec<f64>> = rows
        .iter()
        .zip(&ests)
        .map(|((_, nrm), e)| e.psi.iter().map(|x| nrm * x).collect())
        .collect();
    let c = critical(cv, &psi, &sigmas, alpha)?;
    let root_n = libm::sqrt(sample.n() as f64);
    let mut halfspaces: Vec<(DVector<f64>, f64)> = rows
        .iter()
        .zip(&ests)
        .zip(&sigmas)
        .map(|(((_, nrm), e), s)| {
            let u = -&e.direction;
            let b_out = -nrm * e.v_out;
            (u, (b_out + c * s / root_n) / nrm)
        })
        .collect();
    for j in model.cs().eq_idx() {
        let row = model.cs().row(j);
        let norm = row.norm();
        if norm > 0.0 {
            let u = row / norm;
            let rhs = model.cs().b()[j] / norm;
            halfspaces.push((u.clone(), rhs));
            halfspaces.push((-u, -rhs));
        }
    }
    Ok(PolygonCS { halfspaces, alpha, critical_value: c })
}

/// Inequality rows with a nonzero coefficient vector, with their norms.
fn natural_rows(model: &AffineMomentModel) -> Vec<(usize, f64)> {
    model
        .cs()
        .ineq_idx()
        .into_iter()
        .map(|j| (j, model.cs().row(j).norm()))
        .filter(|&(_, nrm)| nrm > 0.0)
        .collect()
}

/// `m` unit vectors at evenly spaced angles in the plane.
pub fn direction_grid_2d(m: usize) -> Vec<DVector<f64>> {
    (0..m)
        .map(|i| {
            let t = 2.0 * core::f64::consts::PI * i as f64 / m as f64;
            DVector::from_vec(alloc::vec![libm::cos(t), libm::sin(t)])
        })
        .collect()
}
