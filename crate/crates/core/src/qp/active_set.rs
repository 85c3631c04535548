//! Primal active-set iteration.
//!
//! With a Hessian of `2μI` the equality-constrained subproblem on a working
//! set `W` reduces to a projection: the step is `-P g / (2μ)` for `μ > 0`
//! and the ray `-P g` for `μ = 0`, where `P` projects onto the null space of
//! `A_W` and `g = c + 2μθ`. Both cases share one loop.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{
    Certificate, ConstraintSystem, Solution, SolverOptions, Status, Tolerances,
};
use crate::error::{Error, Result};

/// A feasible point together with a linearly independent set of rows that
/// are active there.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasiblePoint {
    pub x: DVector<f64>,
    pub working: Vec<usize>,
}

/// Weights `y` with `y_I ≥ 0` and `yᵀA = 0` but `yᵀb = -residual < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    /// Scaled so that the largest weight has magnitude one.
    pub weights: DVector<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Phase1 {
    Feasible(FeasiblePoint),
    Infeasible(InfeasibilityCertificate),
}

/// Finds a feasible point or proves the system empty.
pub fn phase1_feasible(cs: &ConstraintSystem) -> Result<Phase1> {
    let d = cs.d();
    let k = cs.k();
    let tol = Tolerances::new(&DVector::zeros(d), cs);

    // Maximal independent subset of the equality rows.
    let mut basis: Vec<usize> = Vec::new();
    for j in cs.eq_idx() {
        let row = cs.row(j);
        let row_norm = row.norm();
        if basis.is_empty() {
            if row_norm > 0.0 {
                basis.push(j);
                continue;
            }
            if cs.b()[j].abs() > tol.feas {
                let mut w = DVector::zeros(k);
                w[j] = -cs.b()[j].signum();
                return Ok(Phase1::Infeasible(certificate(w, cs)));
            }
            continue;
        }
        let a_s = cs.a().select_rows(basis.iter());
        let chol = gram(&a_s)?;
        let beta = chol.solve(&(&a_s * &row));
        let resid = &row - a_s.tr_mul(&beta);
        if resid.norm() > 1e-10 * row_norm.max(1.0) {
            basis.push(j);
            continue;
        }
        let b_s = cs.b().select_rows(basis.iter());
        let gap = cs.b()[j] - beta.dot(&b_s);
        if gap.abs() > tol.feas {
            let mut w = DVector::zeros(k);
            w[j] = 1.0;
            for (pos, &s) in basis.iter().enumerate() {
                w[s] = -beta[pos];
            }
            if gap > 0.0 {
                w = -w;
            }
            return Ok(Phase1::Infeasible(certificate(w, cs)));
        }
    }

    let x0 = if basis.is_empty() {
        DVector::zeros(d)
    } else {
        let a_s = cs.a().select_rows(basis.iter());
        let b_s = cs.b().select_rows(basis.iter());
        let chol = gram(&a_s)?;
        a_s.tr_mul(&chol.solve(&b_s))
    };
    let r0 = cs.residuals(&x0);
    let t0 = cs.ineq_idx().iter().map(|&j| r0[j]).fold(0.0, f64::max);
    if t0 <= tol.feas {
        return Ok(Phase1::Feasible(FeasiblePoint { x: x0, working: basis }));
    }

    // min t  s.t.  a_jᵀx - t ≤ b_j (j ∈ I),  a_jᵀx = b_j (j ∈ E),  -t ≤ 0.
    let mut a_aug = DMatrix::zeros(k + 1, d + 1);
    a_aug.view_mut((0, 0), (k, d)).copy_from(cs.a());
    for j in cs.ineq_idx() {
        a_aug[(j, d)] = -1.0;
    }
    a_aug[(k, d)] = -1.0;
    let b_aug = cs.b().clone().push(0.0);
    let aug = ConstraintSystem::new(a_aug, b_aug, &cs.eq_idx())?;
    let mut c_aug = DVector::zeros(d + 1);
    c_aug[d] = 1.0;
    let start = FeasiblePoint { x: x0.push(t0), working: basis.clone() };
    let aug_tol = Tolerances::new(&c_aug, &aug);
    let sol = solve_from(&c_aug, 0.0, &aug, start, &aug_tol, SolverOptions::default())?;
    if sol.status != Status::Optimal {
        return Err(Error::NumericalFailure("phase 1 program did not terminate optimally".into()));
    }
    let t = sol.argmin[d];
    if t <= tol.feas {
        let x = sol.argmin.rows(0, d).into_owned();
        return Ok(Phase1::Feasible(FeasiblePoint { x, working: basis }));
    }
    let weights = sol.multipliers.rows(0, k).into_owned();
    Ok(Phase1::Infeasible(certificate(weights, cs)))
}

fn certificate(weights: DVector<f64>, cs: &ConstraintSystem) -> InfeasibilityCertificate {
    let scale = weights.amax();
    let weights = if scale > 0.0 { weights / scale } else { weights };
    let residual = -weights.dot(cs.b());
    InfeasibilityCertificate { weights, residual }
}

fn gram(a_w: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    (a_w * a_w.transpose())
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("working set lost linear independence".into()))
}

pub(super) fn valid_start(cs: &ConstraintSystem, s: &FeasiblePoint, tol: &Tolerances) -> bool {
    if s.x.len() != cs.d() || s.working.len() > cs.d() {
        return false;
    }
    if s.working.iter().any(|&j| j >= cs.k()) {
        return false;
    }
    let r = cs.residuals(&s.x);
    let feasible = (0..cs.k()).all(|j| {
        if cs.is_equality(j) {
            r[j].abs() <= tol.feas
        } else {
            r[j] <= tol.feas
        }
    });
    let active = s.working.iter().all(|&j| r[j].abs() <= tol.feas);
    if !feasible || !active {
        return false;
    }
    let missing: Vec<usize> =
        cs.eq_idx().into_iter().filter(|j| !s.working.contains(j)).collect();
    if s.working.is_empty() {
        return missing.iter().all(|&j| cs.row(j).norm() == 0.0);
    }
    let a_w = cs.a().select_rows(s.working.iter());
    let Ok(chol) = gram(&a_w) else {
        return false;
    };
    // Equality rows left out of the working set must lie in its span.
    missing.iter().all(|&j| {
        let row = cs.row(j);
        let resid = &row - a_w.tr_mul(&chol.solve(&(&a_w * &row)));
        resid.norm() <= 1e-10 * row.norm().max(1.0)
    })
}

/// Cholesky factor `L Lᵀ = A_W A_Wᵀ` of the working-set Gram matrix,
/// updated in `O(d |W|)` as rows enter and leave.
struct WorkingFactor {
    rows: Vec<usize>,
    dim: usize,
    l: Vec<f64>,
}

impl WorkingFactor {
    fn new(at: &DMatrix<f64>, rows: &[usize]) -> Result<Self> {
        let dim = at.nrows();
        let mut f = Self { rows: Vec::with_capacity(dim), dim, l: alloc::vec![0.0; dim * dim] };
        for &j in rows {
            f.push(at, j)?;
        }
        Ok(f)
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn push(&mut self, at: &DMatrix<f64>, j: usize) -> Result<()> {
        let m = self.len();
        if m >= self.dim {
            return Err(Error::NumericalFailure(format!("row {j} enters a full working set")));
        }
        let a = at.column(j);
        let mut y: Vec<f64> = self.rows.iter().map(|&r| at.column(r).dot(&a)).collect();
        for i in 0..m {
            let row = &self.l[i * self.dim..i * self.dim + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, y)| l * y).sum();
            y[i] = (y[i] - s) / self.l[i * self.dim + i];
        }
        let aa = a.norm_squared();
        let diag2 = aa - y.iter().map(|v| v * v).sum::<f64>();
        if !(diag2 > 1e-20 * aa) {
            return Err(Error::NumericalFailure(format!("row {j} is dependent on the working set")));
        }
        let base = m * self.dim;
        self.l[base..base + m].copy_from_slice(&y);
        self.l[base + m] = libm::sqrt(diag2);
        self.rows.push(j);
        Ok(())
    }

    fn remove(&mut self, pos: usize) -> usize {
        let m = self.len();
        let dim = self.dim;
        for i in pos..m - 1 {
            let (dst, src) = (i * dim, (i + 1) * dim);
            self.l.copy_within(src..src + i + 2, dst);
        }
        // Rows pos..m-2 now carry one superdiagonal entry; rotate it away.
        for j in pos..m - 1 {
            let a = self.l[j * dim + j];
            let b = self.l[j * dim + j + 1];
            let r = libm::hypot(a, b);
            let (c, s) = (a / r, b / r);
            for i in j..m - 1 {
                let x = self.l[i * dim + j];
                let y = self.l[i * dim + j + 1];
                self.l[i * dim + j] = c * x + s * y;
                self.l[i * dim + j + 1] = -s * x + c * y;
            }
            self.l[j * dim + j + 1] = 0.0;
        }
        self.l[(m - 1) * dim..m * dim].fill(0.0);
        self.rows.remove(pos)
    }

    /// `(A_W A_Wᵀ)⁻¹ r`.
    fn solve(&self, r: &mut [f64]) {
        let m = self.len();
        let dim = self.dim;
        for i in 0..m {
            let s: f64 = (0..i).map(|t| self.l[i * dim + t] * r[t]).sum();
            r[i] = (r[i] - s) / self.l[i * dim + i];
        }
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|t| self.l[t * dim + i] * r[t]).sum();
            r[i] = (r[i] - s) / self.l[i * dim + i];
        }
    }

    fn mul(&self, at: &DMatrix<f64>, v: &DVector<f64>) -> Vec<f64> {
        self.rows.iter().map(|&r| at.column(r).dot(v)).collect()
    }

    fn add_tr_mul(&self, at: &DMatrix<f64>, nu: &[f64], out: &mut DVector<f64>) {
        for (&r, &w) in self.rows.iter().zip(nu) {
            out.axpy(w, &at.column(r), 1.0);
        }
    }
}

/// Projection of `g` onto the null space of `A_W`, with the multipliers
/// `ν` satisfying `g + A_Wᵀν = q`.
fn project(f: &WorkingFactor, at: &DMatrix<f64>, g: &DVector<f64>) -> (DVector<f64>, Vec<f64>) {
    if f.len() == 0 {
        return (g.clone(), Vec::new());
    }
    let mut nu: Vec<f64> = f.mul(at, g).into_iter().map(|v| -v).collect();
    f.solve(&mut nu);
    let mut q = g.clone();
    f.add_tr_mul(at, &nu, &mut q);
    // One refinement pass against the squared conditioning of the Gram matrix.
    let mut dnu: Vec<f64> = f.mul(at, &q).into_iter().map(|v| -v).collect();
    f.solve(&mut dnu);
    f.add_tr_mul(at, &dnu, &mut q);
    for (a, b) in nu.iter_mut().zip(&dnu) {
        *a += b;
    }
    (q, nu)
}

pub(super) fn solve_from(
    c: &DVector<f64>,
    mu: f64,
    cs: &ConstraintSystem,
    start: FeasiblePoint,
    tol: &Tolerances,
    opts: SolverOptions,
) -> Result<Solution> {
    let k = cs.k();
    let max_iter = opts.max_iter.unwrap_or(50 * (k + cs.d()));
    let at = cs.a().transpose();
    let FeasiblePoint { mut x, working } = start;
    let mut f = WorkingFactor::new(&at, &working)?;
    let mut in_w = alloc::vec![false; k];
    for &j in &working {
        in_w[j] = true;
    }
    let row_norms: Vec<f64> = (0..k).map(|j| at.column(j).norm()).collect();
    let mut stall = 0usize;
    let mut bland = false;

    for iter in 0..max_iter {
        let g = c + &x * (2.0 * mu);
        let g_scale = 1.0 + g.amax();
        let (q, nu) = project(&f, &at, &g);

        // A full working set leaves no null space; any q is roundoff.
        if f.len() == cs.d() || q.amax() <= 1e-10 * g_scale {
            let drop_tol = 1e-10 * g_scale;
            let candidate = f
                .rows
                .iter()
                .zip(nu.iter())
                .enumerate()
                .filter(|(_, (&j, &l))| !cs.is_equality(j) && l < -drop_tol)
                .min_by(|(_, (ja, la)), (_, (jb, lb))| {
                    if bland {
                        ja.cmp(jb)
                    } else {
                        la.total_cmp(lb).then(ja.cmp(jb))
                    }
                })
                .map(|(pos, _)| pos);
            match candidate {
                Some(pos) => {
                    let j = f.remove(pos);
                    in_w[j] = false;
                    continue;
                }
                None => {
                    let mut lambda = DVector::zeros(k);
                    for (pos, &j) in f.rows.iter().enumerate() {
                        lambda[j] = nu[pos];
                    }
                    return Ok(finish(c, mu, cs, x, lambda, f.rows, iter + 1, tol));
                }
            }
        }

        let (p, alpha_max) = if mu > 0.0 { (q / (-2.0 * mu), 1.0) } else { (-q, f64::INFINITY) };
        let p_norm = p.norm();
        let ap = at.tr_mul(&p);
        let ax = at.tr_mul(&x);
        let mut alpha = alpha_max;
        let mut blocking = None;
        for j in 0..k {
            if in_w[j] || cs.is_equality(j) {
                continue;
            }
            if ap[j] <= 1e-12 * row_norms[j] * p_norm {
                continue;
            }
            let step = (cs.b()[j] - ax[j]).max(0.0) / ap[j];
            if step < alpha {
                alpha = step;
                blocking = Some(j);
            }
        }
        if alpha.is_infinite() {
            return Ok(Solution {
                status: Status::Unbounded,
                mu,
                value: f64::NEG_INFINITY,
                argmin: x,
                multipliers: DVector::zeros(k),
                active_set: Vec::new(),
                working_set: f.rows,
                iterations: iter + 1,
                certificate: Some(Certificate::Ray(p)),
            });
        }
        if alpha > 0.0 {
            x += &p * alpha;
            stall = 0;
            bland = false;
        } else {
            stall += 1;
            if stall > 2 * k {
                bland = true;
            }
        }
        if let Some(j) = blocking {
            f.push(&at, j)?;
            in_w[j] = true;
        }
    }
    Err(Error::NumericalFailure(format!("active-set iteration limit {max_iter} reached")))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    c: &DVector<f64>,
    mu: f64,
    cs: &ConstraintSystem,
    x: DVector<f64>,
    lambda: DVector<f64>,
    working: Vec<usize>,
    iterations: usize,
    tol: &Tolerances,
) -> Solution {
    let value = c.dot(&x) + mu * x.norm_squared();
    let r = cs.residuals(&x);
    let active_set = (0..cs.k()).filter(|&j| r[j].abs() <= tol.feas).collect();
    Solution {
        status: Status::Optimal,
        mu,
        value,
        argmin: x,
        multipliers: lambda,
        active_set,
        working_set: working,
        iterations,
        certificate: None,
    }
}
