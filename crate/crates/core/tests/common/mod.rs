//! Brute-force oracles shared by the integration tests.

#![allow(dead_code)]

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use setid_core::qp::ConstraintSystem;

/// `min cᵀθ + μ‖θ‖²` (`μ > 0`) by trying every linearly independent
/// candidate active set `W ⊇ E`: solve the equality-constrained KKT system,
/// keep primal feasible points with `λ_I ≥ 0`, return the best value.
pub fn qp_by_active_sets(c: &DVector<f64>, mu: f64, cs: &ConstraintSystem) -> Option<(f64, DVector<f64>)> {
    let d = cs.d();
    let eq = cs.eq_idx();
    let ineq = cs.ineq_idx();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for size in 0..=(d - eq.len().min(d)) {
        for extra in ineq.iter().copied().combinations(size) {
            let w: Vec<usize> = eq.iter().copied().chain(extra).collect();
            let m = w.len();
            let mut kkt = DMatrix::zeros(d + m, d + m);
            let mut rhs = DVector::zeros(d + m);
            for l in 0..d {
                kkt[(l, l)] = 2.0 * mu;
                rhs[l] = -c[l];
            }
            for (t, &j) in w.iter().enumerate() {
                for l in 0..d {
                    kkt[(l, d + t)] = cs.a()[(j, l)];
                    kkt[(d + t, l)] = cs.a()[(j, l)];
                }
                rhs[d + t] = cs.b()[j];
            }
            let Some(sol) = kkt.clone().lu().solve(&rhs) else { continue };
            if (&kkt * &sol - &rhs).amax() > 1e-9 {
                continue;
            }
            let theta = sol.rows(0, d).into_owned();
            let lambda = sol.rows(d, m).into_owned();
            let scale = 1.0 + cs.b().amax();
            if cs.max_violation(&theta) > 1e-9 * scale {
                continue;
            }
            if w.iter().enumerate().any(|(t, &j)| !cs.is_equality(j) && lambda[t] < -1e-9) {
                continue;
            }
            let value = c.dot(&theta) + mu * theta.norm_squared();
            if best.as_ref().is_none_or(|(v, _)| value < *v) {
                best = Some((value, theta));
            }
        }
    }
    best
}

/// `min cᵀθ` over the feasible basic solutions.
pub fn lp_by_vertices(c: &DVector<f64>, cs: &ConstraintSystem) -> f64 {
    setid_core::qp::enumerate_basic_solutions(cs, 1_000_000)
        .unwrap()
        .into_iter()
        .filter(|s| s.feasible)
        .map(|s| c.dot(&s.theta))
        .fold(f64::INFINITY, f64::min)
}
