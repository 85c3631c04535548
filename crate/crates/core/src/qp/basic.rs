use alloc::vec::Vec;

use itertools::Itertools;
use nalgebra::DVector;

use super::{binomial, ConstraintSystem, Tolerances};
use crate::error::{Error, Result};

/// Default limit on the number of row subsets any enumeration may visit.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// Relative singular-value threshold below which `A_J` counts as singular.
const SINGULAR_RTOL: f64 = 1e-12;

/// Solution of `A_J θ = b_J` for a size-`d` row subset `J ⊇ E`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicSolution {
    pub rows: Vec<usize>,
    pub theta: DVector<f64>,
    pub feasible: bool,
}

/// Every basic solution of the system: all size-`d` subsets containing the
/// equality rows whose coefficient block is invertible.
pub fn enumerate_basic_solutions(cs: &ConstraintSystem, cap: u128) -> Result<Vec<BasicSolution>> {
    let d = cs.d();
    let eq = cs.eq_idx();
    let ineq = cs.ineq_idx();
    if eq.len() > d {
        return Ok(Vec::new());
    }
    let count = binomial(ineq.len(), d - eq.len());
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let tol = Tolerances::new(&DVector::zeros(d), cs);
    let mut out = Vec::new();
    for subset in ineq.iter().copied().combinations(d - eq.len()) {
        let mut rows = eq.clone();
        rows.extend(subset);
        rows.sort_unstable();
        if let Some(theta) = solve_square(cs, &rows) {
            let feasible = cs.max_violation(&theta) <= tol.feas;
            out.push(BasicSolution { rows, theta, feasible });
        }
    }
    Ok(out)
}

/// Solves `A_J θ = b_J`, returning `None` for a (numerically) singular block.
pub(crate) fn solve_square(cs: &ConstraintSystem, rows: &[usize]) -> Option<DVector<f64>> {
    let a_j = cs.a().select_rows(rows.iter());
    let b_j = cs.b().select_rows(rows.iter());
    let sv = a_j.clone().singular_values();
    let smax = sv.max();
    if !(smax > 0.0) || sv.min() <= SINGULAR_RTOL * smax {
        return None;
    }
    a_j.lu().solve(&b_j)
}
