//! Rank diagnostics: the smallest singular value `η` over square row
//! blocks of `(A, b)` and the smallest residual norm `s` of `d-p+1` rows
//! over the feasible set.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use itertools::Itertools;
use nalgebra::DMatrix;

use super::{empirical_model, AffineMomentModel, MomentSample};
use crate::error::{Error, Result};
use crate::qp::{binomial, phase1_feasible, solve_qp, Phase1, Status};

/// Default floor below which `η` and `s` raise a warning.
pub const DEFAULT_DIAGNOSTIC_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    pub eta: f64,
    pub s_min: f64,
    pub feasible: bool,
    /// Largest per-row sample mean of `‖w_ij‖³`.
    pub moment_bound: f64,
    pub eta_subsets: u128,
    pub s_subsets: u128,
    pub warnings: Vec<String>,
}

/// `min_J σ_min((A, b)_{J∪E})` over inequality subsets `J` of size `d-p`.
pub fn eta(model: &AffineMomentModel, cap: u128) -> Result<f64> {
    let cs = model.cs();
    let (d, p) = (cs.d(), cs.p());
    if p > d {
        return Err(Error::InvalidInput(format!("{p} equality rows exceed dimension {d}")));
    }
    let ineq = cs.ineq_idx();
    let count = binomial(ineq.len(), d - p);
    if count == 0 {
        return Err(Error::InvalidInput("too few inequality rows".into()));
    }
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let mut w = DMatrix::zeros(cs.k(), d + 1);
    w.columns_mut(0, d).copy_from(cs.a());
    w.column_mut(d).copy_from(cs.b());
    let eq = cs.eq_idx();
    let mut best = f64::INFINITY;
    for subset in ineq.into_iter().combinations(d - p) {
        let rows: Vec<usize> = eq.iter().copied().chain(subset).collect();
        let block = w.select_rows(rows.iter());
        let sv = block.singular_values();
        best = best.min(sv.min());
    }
    Ok(best)
}

/// `min_J min_{θ ∈ Θ} ‖(Aθ - b)_{J∪E}‖` over inequality subsets `J` of size
/// `d-p+1`.
///
/// Each inner problem minimizes `‖A_S θ - b_S‖²` over the polytope. With
/// `RᵀR = A_Sᵀ A_S` and `y = Rθ` it becomes `min cᵀy + ‖y‖²` over
/// `A R⁻¹ y ≤ b`, which [`solve_qp`] handles directly.
pub fn s_min(model: &AffineMomentModel, cap: u128) -> Result<f64> {
    let cs = model.cs();
    let (d, p) = (cs.d(), cs.p());
    if p > d {
        return Err(Error::InvalidInput(format!("{p} equality rows exceed dimension {d}")));
    }
    let ineq = cs.ineq_idx();
    let count = binomial(ineq.len(), d - p + 1);
    if count == 0 {
        return Err(Error::InvalidInput("too few inequality rows".into()));
    }
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    if let Phase1::Infeasible(_) = phase1_feasible(cs)? {
        return Err(Error::InfeasibleModel);
    }
    let eq = cs.eq_idx();
    let mut best = f64::INFINITY;
    for subset in ineq.into_iter().combinations(d - p + 1) {
        let rows: Vec<usize> = eq.iter().copied().chain(subset).collect();
        best = best.min(min_residual(model, &rows)?);
        if best == 0.0 {
            break;
        }
    }
    Ok(best)
}

fn min_residual(model: &AffineMomentModel, rows: &[usize]) -> Result<f64> {
    let cs = model.cs();
    let d = cs.d();
    let a_s = cs.a().select_rows(rows.iter());
    let b_s = cs.b().select_rows(rows.iter());
    let mut gram = a_s.tr_mul(&a_s);
    let chol = match gram.clone().cholesky() {
        Some(c) => c,
        None => {
            let ridge = 1e-12 * (1.0 + gram.trace());
            for l in 0..d {
                gram[(l, l)] += ridge;
            }
            gram.cholesky()
                .ok_or_else(|| Error::NumericalFailure("ridge Gram matrix not positive definite".into()))?
        }
    };
    let l = chol.l();
    // M = A R⁻¹ = (L⁻¹ Aᵀ)ᵀ and c = -2 L⁻¹ A_Sᵀ b_S.
    let m = l
        .solve_lower_triangular(&cs.a().transpose())
        .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?
        .transpose();
    let c = l
        .solve_lower_triangular(&(a_s.tr_mul(&b_s) * -2.0))
        .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
    let lifted = crate::qp::ConstraintSystem::new(m, cs.b().clone(), &cs.eq_idx())?;
    let sol = solve_qp(&c, 1.0, &lifted)?;
    if sol.status != Status::Optimal {
        return Err(Error::NumericalFailure("residual program did not solve".into()));
    }
    let theta = l
        .transpose()
        .solve_upper_triangular(&sol.argmin)
        .ok_or_else(|| Error::NumericalFailure("singular Cholesky factor".into()))?;
    Ok((&a_s * theta - b_s).norm())
}

fn moment_bound(sample: &MomentSample) -> f64 {
    let n = sample.n() as f64;
    (0..sample.k())
        .map(|j| {
            (0..sample.n())
                .map(|i| {
                    let r = sample.w(i, j).iter().map(|x| x * x).sum::<f64>();
                    r * libm::sqrt(r)
                })
                .sum::<f64>()
                / n
        })
        .fold(0.0, f64::max)
}

/// Sample analogs of the rank conditions on the empirical model.
pub fn diagnose(sample: &MomentSample, cap: u128, floor: f64) -> Result<DiagnosticsReport> {
    let model = empirical_model(sample)?;
    let cs = model.cs();
    let (d, p) = (cs.d(), cs.p());
    let n_ineq = cs.ineq_idx().len();
    let feasible = matches!(phase1_feasible(cs)?, Phase1::Feasible(_));
    let eta = eta(&model, cap)?;
    let s_min = if feasible { s_min(&model, cap)? } else { 0.0 };
    let mut warnings = Vec::new();
    if !feasible {
        warnings.push(String::from("empirical moment polytope is empty"));
    }
    if eta < floor {
        warnings.push(format!("eta = {eta:e} is below the floor {floor:e}"));
    }
    if feasible && s_min < floor {
        warnings.push(format!("s_min = {s_min:e} is below the floor {floor:e}"));
    }
    Ok(DiagnosticsReport {
        eta,
        s_min,
        feasible,
        moment_bound: moment_bound(sample),
        eta_subsets: binomial(n_ineq, d - p),
        s_subsets: binomial(n_ineq, d - p + 1),
        warnings,
    })
}
