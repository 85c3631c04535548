//! Inference when the full system is overidentified: bounds from
//! subsystems that each satisfy the rank conditions, their joint
//! covariance, a regularized combination, and a compatibility check.

use alloc::format;
use alloc::vec::Vec;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{empirical_model, AffineMomentModel, MomentSample};
use crate::qp::{binomial, enumerate_basic_solutions, solve_qp, ConstraintSystem, Status};
use crate::regsf::{estimate, reg_support, tuning, RegularizedEstimate, TuningRule};
use crate::stats::{mean, normal_quantile, sample_variance, second_moment};

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Every subset of this many non-box inequality rows.
    AllSubsetsOfSize(usize),
    UserProvided(Vec<Vec<usize>>),
}

impl Strategy {
    /// Subsets of `d - p` rows.
    pub fn default_for(model: &AffineMomentModel) -> Self {
        Self::AllSubsetsOfSize(model.d() - model.p())
    }
}

/// One subsystem: the chosen rows plus all equality and box rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    pub chosen: Vec<usize>,
    /// Original indices of every row in `model`, in order.
    pub rows: Vec<usize>,
    pub model: AffineMomentModel,
    pub feasible: bool,
}

/// Splits a model into subsystems.
pub fn decompose(model: &AffineMomentModel, strategy: &Strategy, cap: u128) -> Result<Vec<Subproblem>> {
    let subsets: Vec<Vec<usize>> = match strategy {
        Strategy::AllSubsetsOfSize(size) => {
            let pool = model.moment_ineq_rows();
            let count = binomial(pool.len(), *size);
            if count > cap {
                return Err(Error::CapExceeded { count, cap });
            }
            if count == 0 {
                return Err(Error::InvalidInput(format!(
                    "cannot choose {size} of {} moment inequalities",
                    pool.len()
                )));
            }
            pool.into_iter().combinations(*size).collect()
        }
        Strategy::UserProvided(list) => {
            if list.is_empty() {
                return Err(Error::InvalidInput("no subsets provided".into()));
            }
            for s in list {
                if let Some(&j) = s.iter().find(|&&j| j >= model.k()) {
                    return Err(Error::InvalidInput(format!("row {j} out of range")));
                }
            }
            list.clone()
        }
    };
    subsets
        .into_iter()
        .map(|chosen| {
            let (sub, rows) = model.restrict(&chosen);
            let feasible = matches!(
                crate::qp::phase1_feasible(sub.cs())?,
                crate::qp::Phase1::Feasible(_)
            );
            Ok(Subproblem { chosen, rows, model: sub, feasible })
        })
        .collect()
}

/// `max_s v_s` over feasible subsystems (`None` marks an infeasible one);
/// `+∞` when none is feasible.
pub fn max_lower_bound(values: &[Option<f64>]) -> f64 {
    values
        .iter()
        .flatten()
        .copied()
        .reduce(f64::max)
        .unwrap_or(f64::INFINITY)
}

/// `Ω̂_{ss'} = (1/n) Σ_i ψ_i^(s) ψ_i^(s')`.
pub fn omega_hat(estimates: &[&RegularizedEstimate]) -> Result<DMatrix<f64>> {
    let l = estimates.len();
    let n = estimates.first().map_or(0, |e| e.psi.len());
    if estimates.iter().any(|e| e.psi.len() != n) {
        return Err(Error::DimensionMismatch("influence vectors of unequal length".into()));
    }
    let mut omega = DMatrix::zeros(l, l);
    for s in 0..l {
        for t in s..l {
            let v = estimates[s].psi.iter().zip(&estimates[t].psi).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            omega[(s, t)] = v;
            omega[(t, s)] = v;
        }
    }
    Ok(omega)
}

/// `argmax_γ Σ γ_s v_s - μ‖γ‖²` over the simplex and the combined value.
pub fn second_stage(values: &[f64], mu_n: f64) -> Result<(DVector<f64>, f64)> {
    let l = values.len();
    if l == 0 {
        return Err(Error::InvalidInput("no values to combine".into()));
    }
    if !(mu_n > 0.0) {
        return Err(Error::InvalidInput(format!("regularization must be positive, got {mu_n}")));
    }
    let mut a = DMatrix::zeros(l + 1, l);
    let mut b = DVector::zeros(l + 1);
    for s in 0..l {
        a[(s, s)] = -1.0;
        a[(l, s)] = 1.0;
    }
    b[l] = 1.0;
    let cs = ConstraintSystem::new(a, b, &[l])?;
    let c = -DVector::from_column_slice(values);
    let sol = solve_qp(&c, mu_n, &cs)?;
    if sol.status != Status::Optimal {
        return Err(Error::NumericalFailure("simplex program did not solve".into()));
    }
    let gamma = sol.argmin.map(|g| g.max(0.0));
    let combined = gamma.dot(&DVector::from_column_slice(values));
    Ok((gamma, combined))
}

/// A subsystem together with its estimate, absent when infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemEstimate {
    pub chosen: Vec<usize>,
    pub rows: Vec<usize>,
    pub estimate: Option<RegularizedEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub subproblems: Vec<SubproblemEstimate>,
    /// Positions in `subproblems` of the feasible ones, indexing `omega_hat`
    /// and `gamma_hat`.
    pub feasible: Vec<usize>,
    pub omega_hat: DMatrix<f64>,
    pub gamma_hat: DVector<f64>,
    pub max_lower_bound: f64,
    pub combined_value: f64,
    pub combined_sigma: f64,
    pub mu_n: f64,
    pub n: usize,
}

impl Decomposition {
    /// `combined - μ_n - z_{1-α} max(σ, σ₀)/√n`; the `μ_n` term covers the
    /// regularization gap of the combination.
    pub fn lower_confidence_bound(&self, alpha: f64, sigma0: f64) -> f64 {
        let z = normal_quantile(1.0 - alpha);
        self.combined_value - self.mu_n - z * self.combined_sigma.max(sigma0) / libm::sqrt(self.n as f64)
    }
}

fn estimate_subproblems(
    sample: &MomentSample,
    direction: &DVector<f64>,
    strategy: &Strategy,
    rule: &TuningRule,
    cap: u128,
) -> Result<Vec<SubproblemEstimate>> {
    let model = empirical_model(sample)?;
    decompose(&model, strategy, cap)?
        .into_iter()
        .map(|sp| {
            let estimate = if sp.feasible {
                let sub_sample = sample.select_rows(&sp.rows)?;
                match estimate(&sub_sample, &sp.model, direction, rule) {
                    Ok(e) => Some(e),
                    Err(Error::EmptyEmpiricalSet) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            Ok(SubproblemEstimate { chosen: sp.chosen, rows: sp.rows, estimate })
        })
        .collect()
}

/// Estimates every subsystem in direction `a` and combines the outer
/// lower bounds.
pub fn overid_estimate(
    sample: &MomentSample,
    direction: &DVector<f64>,
    strategy: &Strategy,
    rule: &TuningRule,
    cap: u128,
) -> Result<Decomposition> {
    let subproblems = estimate_subproblems(sample, direction, strategy, rule, cap)?;
    let feasible: Vec<usize> = (0..subproblems.len()).filter(|&s| subproblems[s].estimate.is_some()).collect();
    let values: Vec<Option<f64>> = subproblems.iter().map(|s| s.estimate.as_ref().map(|e| e.v_out)).collect();
    let max_lb = max_lower_bound(&values);
    if feasible.is_empty() {
        return Ok(Decomposition {
            subproblems,
            feasible,
            omega_hat: DMatrix::zeros(0, 0),
            gamma_hat: DVector::zeros(0),
            max_lower_bound: max_lb,
            combined_value: f64::INFINITY,
            combined_sigma: 0.0,
            mu_n: 0.0,
            n: sample.n(),
        });
    }
    let ests: Vec<&RegularizedEstimate> = feasible.iter().map(|&s| subproblems[s].estimate.as_ref().unwrap()).collect();
    let omega = omega_hat(&ests)?;
    let mu_n = ests.iter().map(|e| e.mu).fold(0.0, f64::max);
    let v: Vec<f64> = ests.iter().map(|e| e.v_out).collect();
    let (gamma, combined) = second_stage(&v, mu_n)?;
    let n = sample.n();
    let combined_sigma = libm::sqrt(second_moment(&combined_influence(&ests, &gamma)));
    Ok(Decomposition {
        subproblems,
        feasible,
        omega_hat: omega,
        gamma_hat: gamma,
        max_lower_bound: max_lb,
        combined_value: combined,
        combined_sigma,
        mu_n,
        n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecTest {
    pub reject: bool,
    pub t_stat: f64,
    pub critical_value: f64,
    /// Subset chosen for the lower and the upper bound in the least
    /// favorable pair.
    pub lower_subproblem: Vec<usize>,
    pub upper_subproblem: Vec<usize>,
}

/// One-sided t-test of `v̲^(s),out ≤ v̄^(s'),out` over all pairs of
/// subsystems, reporting the least favorable pair.
pub fn spec_test(
    sample: &MomentSample,
    direction: &DVector<f64>,
    alpha: f64,
    strategy: &Strategy,
    rule: &TuningRule,
    sigma0: f64,
    cap: u128,
) -> Result<SpecTest> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidInput(format!("alpha must lie in (0, 1/2), got {alpha}")));
    }
    let lower = estimate_subproblems(sample, direction, strategy, rule, cap)?;
    let upper = estimate_subproblems(sample, &(-direction), strategy, rule, cap)?;
    let root_n = libm::sqrt(sample.n() as f64);
    let mut best: Option<(f64, usize, usize)> = None;
    for (s, lo) in lower.iter().enumerate() {
        let Some(lo_est) = &lo.estimate else { continue };
        for (t, up) in upper.iter().enumerate() {
            let Some(up_est) = &up.estimate else { continue };
            // v̄ = -v(-a), so its influence values are -ψ(-a).
            let diff = -up_est.v_out - lo_est.v_out;
            let infl: Vec<f64> = lo_est.psi.iter().zip(&up_est.psi).map(|(a, b)| -b - a).collect();
            let se = libm::sqrt(sample_variance(&infl)).max(sigma0) / root_n;
            let t_stat = diff / se;
            if best.is_none_or(|(b, _, _)| t_stat < b) {
                best = Some((t_stat, s, t));
            }
        }
    }
    let (t_stat, s, t) = best.ok_or(Error::NoFeasibleSubproblem)?;
    let z = normal_quantile(1.0 - alpha);
    Ok(SpecTest {
        reject: t_stat < -z,
        t_stat,
        critical_value: z,
        lower_subproblem: lower[s].chosen.clone(),
        upper_subproblem: upper[t].chosen.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// Row subsets `J ⊇ E` of size `d`, in enumeration order.
    pub b_hat: Vec<Vec<usize>>,
    pub solutions: Vec<DVector<f64>>,
    pub mu_n: f64,
}

/// Basic solutions `θ̂_J` within `μ_n` of the regularized minimizer in
/// direction `a` and violating no inequality by more than `μ_n`.
pub fn basic_superset(
    sample: &MomentSample,
    direction: &DVector<f64>,
    rule: &TuningRule,
    cap: u128,
) -> Result<SelectionResult> {
    let model = empirical_model(sample)?;
    let mu_n = tuning(sample, &model, direction, rule)?.mu_n;
    select_basic(&model, direction, mu_n, cap)
}

/// [`basic_superset`] at a given `μ_n`.
pub fn select_basic(model: &AffineMomentModel, direction: &DVector<f64>, mu_n: f64, cap: u128) -> Result<SelectionResult> {
    let reg = reg_support(model, mu_n, direction)?;
    let target = direction.dot(&reg.argmin) + mu_n;
    let cs = model.cs();
    let ineq = cs.ineq_idx();
    let mut b_hat = Vec::new();
    let mut solutions = Vec::new();
    for basic in enumerate_basic_solutions(cs, cap)? {
        if direction.dot(&basic.theta) > target {
            continue;
        }
        let r = cs.residuals(&basic.theta);
        if ineq.iter().all(|&j| r[j] <= mu_n) {
            b_hat.push(basic.rows);
            solutions.push(basic.theta);
        }
    }
    Ok(SelectionResult { b_hat, solutions, mu_n })
}

/// Influence values of a combination `Σ γ_s ψ^(s)`, centered.
pub fn combined_influence(estimates: &[&RegularizedEstimate], gamma: &DVector<f64>) -> Vec<f64> {
    let n = estimates.first().map_or(0, |e| e.psi.len());
    let combo: Vec<f64> = (0..n).map(|i| estimates.iter().zip(gamma.iter()).map(|(e, g)| g * e.psi[i]).sum()).collect();
    let m = mean(&combo);
    combo.into_iter().map(|x| x - m).collect()
}
