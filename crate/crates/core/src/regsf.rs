//! Regularized support functions and their bias-corrected bounds.
//!
//! For a unit direction `a` the regularized program is
//! `v(μ) = min aᵀθ + μ‖θ‖²` over the moment polytope. Since `‖θ‖` is
//! invariant under the rotation that maps `e₁` to `a`, it is solved in the
//! original coordinates; only `θ*` depends on the rotated basis.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{check_direction, householder, influence_rows, AffineMomentModel, MomentSample, Source};
use crate::qp::{solve_qp, solve_qp_from, FeasiblePoint, QpSolution, Solution, Status};
use crate::stats;

/// Value of `μ̂₁` used when the estimated scale is zero.
pub const DEFAULT_MU1_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mu1Mode {
    /// `μ̂^in = √(tr sVar(λ̂(0)ᵀ w_i))`.
    Inner,
    /// `μ̂^in / max(‖θ*‖², 1)`.
    Outer,
    Fixed(f64),
}

/// Rule mapping a sample to the regularization levels `(μ_n, κ_n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningRule {
    pub mode: Mu1Mode,
    pub floor: f64,
}

impl TuningRule {
    pub fn inner() -> Self {
        Self { mode: Mu1Mode::Inner, floor: DEFAULT_MU1_FLOOR }
    }

    pub fn outer() -> Self {
        Self { mode: Mu1Mode::Outer, floor: DEFAULT_MU1_FLOOR }
    }

    pub fn fixed(mu1: f64) -> Self {
        Self { mode: Mu1Mode::Fixed(mu1), floor: DEFAULT_MU1_FLOOR }
    }

    /// `μ_n = μ₁√(log n / n)` and `κ_n = max(2μ_n, μ₁√(log log n / n))`.
    pub fn rates(mu1: f64, n: usize) -> (f64, f64) {
        let nf = n as f64;
        let mu = mu1 * libm::sqrt(libm::log(nf).max(0.0) / nf);
        let loglog = if nf > core::f64::consts::E { libm::log(libm::log(nf)) } else { 0.0 };
        let kappa = (2.0 * mu).max(mu1 * libm::sqrt(loglog / nf));
        (mu, kappa)
    }
}

impl Default for TuningRule {
    fn default() -> Self {
        Self::inner()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuning {
    pub mu1: f64,
    pub mu_n: f64,
    pub kappa_n: f64,
    /// `μ̂^in` before any floor or outer scaling.
    pub mu_in: f64,
}

/// Per-direction output of the estimation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizedEstimate {
    pub direction: DVector<f64>,
    pub n: usize,
    pub tuning: Tuning,
    pub mu: f64,
    pub kappa: f64,
    /// Unregularized value `v(0)`.
    pub v0: f64,
    pub v_mu: f64,
    pub theta_mu: DVector<f64>,
    pub lambda_mu: DVector<f64>,
    pub theta_kappa: DVector<f64>,
    pub sigma_hat: f64,
    pub v_in: f64,
    pub v_out: f64,
    pub theta_star: DVector<f64>,
    /// Uncentered influence values `λ̂ᵀ(A_i θ̂ - b_i)`.
    pub psi: Vec<f64>,
}

fn checked(model: &AffineMomentModel, direction: &DVector<f64>) -> Result<()> {
    if direction.len() != model.d() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "direction has length {}, expected {}",
            direction.len(),
            model.d()
        )));
    }
    check_direction(direction)
}

fn optimal(model: &AffineMomentModel, sol: Solution) -> Result<Solution> {
    match sol.status {
        Status::Optimal => Ok(sol),
        Status::Infeasible => Err(match model.source() {
            Source::Population => Error::InfeasibleModel,
            Source::Empirical { .. } => Error::EmptyEmpiricalSet,
        }),
        Status::Unbounded => Err(Error::NumericalFailure("support program is unbounded".into())),
    }
}

/// `v(0) = min aᵀθ` over the model.
pub fn support_lp(model: &AffineMomentModel, direction: &DVector<f64>) -> Result<Solution> {
    checked(model, direction)?;
    optimal(model, solve_qp(direction, 0.0, model.cs())?)
}

/// `v(μ) = min aᵀθ + μ‖θ‖²` with its unique argmin and multipliers.
pub fn reg_support(model: &AffineMomentModel, mu: f64, direction: &DVector<f64>) -> Result<QpSolution> {
    checked(model, direction)?;
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(alloc::format!("regularization must be positive, got {mu}")));
    }
    optimal(model, solve_qp(direction, mu, model.cs())?)
}

fn reg_support_from(
    model: &AffineMomentModel,
    mu: f64,
    direction: &DVector<f64>,
    start: &FeasiblePoint,
) -> Result<QpSolution> {
    optimal(model, solve_qp_from(direction, mu, model.cs(), start)?)
}

/// `σ̂ = √((1/n) Σ ψ_i²)`.
pub fn sigma_hat(sample: &MomentSample, theta: &DVector<f64>, lambda: &DVector<f64>) -> Result<f64> {
    Ok(libm::sqrt(stats::second_moment(&influence_rows(sample, theta, lambda)?)))
}

/// `θ*_i = max |ϑ_i|` over `{θ ∈ Θ : aᵀθ ≤ v(0) + slack}`, with `ϑ` the
/// coordinates in which `a` is the first axis.
///
/// `lp` is the solution of the unregularized program; it seeds every one
/// of the `2d` linear programs.
pub fn theta_star(model: &AffineMomentModel, direction: &DVector<f64>, slack: f64, lp: &Solution) -> Result<DVector<f64>> {
    checked(model, direction)?;
    match theta_star_at(model, direction, slack, lp) {
        Err(Error::EmptyEmpiricalSet | Error::InfeasibleModel) => {
            theta_star_at(model, direction, 2.0 * slack, lp)
        }
        other => other,
    }
}

fn theta_star_at(model: &AffineMomentModel, direction: &DVector<f64>, slack: f64, lp: &Solution) -> Result<DVector<f64>> {
    let d = model.d();
    let u = householder(direction)?;
    let mut cs = model.cs().clone();
    cs.push_row(direction, lp.value + slack, false)?;
    let start = lp.warm_start();
    let mut out = DVector::zeros(d);
    for i in 0..d {
        let q = u.column(i).into_owned();
        let lo = optimal(model, solve_qp_from(&q, 0.0, &cs, &start)?)?.value;
        let hi = -optimal(model, solve_qp_from(&(-&q), 0.0, &cs, &start)?)?.value;
        out[i] = lo.abs().max(hi.abs());
    }
    Ok(out)
}

/// `v(μ) - μ‖θ̂(κ)‖²`.
pub fn inner_bound(model: &AffineMomentModel, mu: f64, kappa: f64, direction: &DVector<f64>) -> Result<f64> {
    if kappa < mu {
        return Err(Error::InvalidInput("kappa must be at least mu".into()));
    }
    let v = reg_support(model, mu, direction)?;
    let t = reg_support_from(model, kappa, direction, &v.warm_start())?;
    Ok(v.value - mu * t.argmin.norm_squared())
}

/// `v(μ) - μ‖θ*‖²` with `θ*` computed at slack `μ`.
pub fn outer_bound(model: &AffineMomentModel, mu: f64, direction: &DVector<f64>) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(alloc::format!("regularization must be positive, got {mu}")));
    }
    let lp = support_lp(model, direction)?;
    let v = reg_support_from(model, mu, direction, &lp.warm_start())?;
    let ts = theta_star(model, direction, mu, &lp)?;
    Ok(v.value - mu * ts.norm_squared())
}

/// `√(tr sVar(λᵀ w_i))`, the scale of the linear functional `λᵀ w_i`.
fn scale_in(sample: &MomentSample, lambda: &DVector<f64>) -> f64 {
    let w = sample.d() + 1;
    let rows: Vec<usize> = sample
        .stochastic_rows()
        .iter()
        .copied()
        .filter(|&j| lambda[j] != 0.0)
        .collect();
    if rows.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    let mut u = alloc::vec![0.0; sample.n()];
    for l in 0..w {
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = rows.iter().map(|&j| lambda[j] * sample.w(i, j)[l]).sum();
        }
        total += stats::sample_variance(&u);
    }
    libm::sqrt(total)
}

fn tuning_from_lp(
    sample: &MomentSample,
    model: &AffineMomentModel,
    direction: &DVector<f64>,
    rule: &TuningRule,
    lp: &Solution,
) -> Result<(Tuning, Option<DVector<f64>>)> {
    let n = sample.n();
    let mu_in = scale_in(sample, &lp.multipliers);
    let base = if mu_in > 0.0 { mu_in } else { rule.floor };
    let (mu1, star) = match rule.mode {
        Mu1Mode::Inner => (base, None),
        Mu1Mode::Fixed(m) => {
            if !(m > 0.0) {
                return Err(Error::InvalidInput("fixed mu1 must be positive".into()));
            }
            (m, None)
        }
        Mu1Mode::Outer => {
            let (mu_inner, _) = TuningRule::rates(base, n);
            let ts = theta_star(model, direction, mu_inner, lp)?;
            (base / ts.norm_squared().max(1.0), Some(ts))
        }
    };
    let (mu_n, kappa_n) = TuningRule::rates(mu1, n);
    Ok((Tuning { mu1, mu_n, kappa_n, mu_in }, star))
}

/// `(μ_n, κ_n)` for a sample and direction under the given rule.
pub fn tuning(sample: &MomentSample, model: &AffineMomentModel, direction: &DVector<f64>, rule: &TuningRule) -> Result<Tuning> {
    let lp = support_lp(model, direction)?;
    Ok(tuning_from_lp(sample, model, direction, rule, &lp)?.0)
}

/// Full pipeline for one direction on the empirical model of `sample`.
pub fn estimate(
    sample: &MomentSample,
    model: &AffineMomentModel,
    direction: &DVector<f64>,
    rule: &TuningRule,
) -> Result<RegularizedEstimate> {
    if sample.n() < 3 {
        return Err(Error::InvalidInput("at least three observations are required".into()));
    }
    if sample.k() != model.k() || sample.d() != model.d() {
        return Err(Error::DimensionMismatch("sample and model disagree in shape".into()));
    }
    let lp = support_lp(model, direction)?;
    let (tuning, _) = tuning_from_lp(sample, model, direction, rule, &lp)?;
    estimate_at(sample, model, direction, tuning, &lp)
}

/// Pipeline at given regularization levels.
pub fn estimate_with(
    sample: &MomentSample,
    model: &AffineMomentModel,
    direction: &DVector<f64>,
    tuning: Tuning,
) -> Result<RegularizedEstimate> {
    let lp = support_lp(model, direction)?;
    estimate_at(sample, model, direction, tuning, &lp)
}

fn estimate_at(
    sample: &MomentSample,
    model: &AffineMomentModel,
    direction: &DVector<f64>,
    tuning: Tuning,
    lp: &Solution,
) -> Result<RegularizedEstimate> {
    let (mu, kappa) = (tuning.mu_n, tuning.kappa_n);
    let reg = reg_support_from(model, mu, direction, &lp.warm_start())?;
    let reg_kappa = reg_support_from(model, kappa, direction, &reg.warm_start())?;
    let theta_star = theta_star(model, direction, mu, lp)?;
    let psi = influence_rows(sample, &reg.argmin, &reg.multipliers)?;
    let sigma_hat = libm::sqrt(stats::second_moment(&psi));
    let v_in = reg.value - mu * reg_kappa.argmin.norm_squared();
    let v_out = reg.value - mu * theta_star.norm_squared();
    Ok(RegularizedEstimate {
        direction: direction.clone(),
        n: sample.n(),
        tuning,
        mu,
        kappa,
        v0: lp.value,
        v_mu: reg.value,
        theta_mu: reg.argmin,
        lambda_mu: reg.multipliers,
        theta_kappa: reg_kappa.argmin,
        sigma_hat,
        v_in,
        v_out,
        theta_star,
        psi,
    })
}
