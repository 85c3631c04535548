//! Dense linear and strictly convex quadratic programming.
//!
//! Every program here has the form
//!
//! ```text
//! min  cᵀθ + μ‖θ‖²   s.t.  a_jᵀθ = b_j (j ∈ E),  a_jᵀθ ≤ b_j (j ∈ I)
//! ```
//!
//! and is solved by a primal active-set method. Multipliers follow the
//! convention `c + 2μθ + Aᵀλ = 0` with `λ_j ≥ 0` on inequality rows, so the
//! dual value of a linear program is `-λᵀb`.

mod active_set;
mod basic;

use alloc::vec::Vec;
use alloc::{format, vec};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use active_set::{phase1_feasible, FeasiblePoint, InfeasibilityCertificate, Phase1};
pub use basic::{enumerate_basic_solutions, BasicSolution, DEFAULT_ENUMERATION_CAP};

/// Linear constraint system `A θ (=|≤) b` with an equality/inequality
/// partition of the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    is_eq: Vec<bool>,
}

impl ConstraintSystem {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, eq_idx: &[usize]) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if a.ncols() == 0 {
            return Err(Error::InvalidInput("parameter dimension must be positive".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("constraint data must be finite".into()));
        }
        let mut is_eq = vec![false; a.nrows()];
        for &j in eq_idx {
            if j >= a.nrows() {
                return Err(Error::InvalidInput(format!("equality index {j} out of range")));
            }
            if is_eq[j] {
                return Err(Error::InvalidInput(format!("equality index {j} repeated")));
            }
            is_eq[j] = true;
        }
        Ok(Self { a, b, is_eq })
    }

    /// A system made of inequality rows only.
    pub fn inequalities(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        Self::new(a, b, &[])
    }

    /// Builds a system from row slices.
    pub fn from_rows(rows: &[Vec<f64>], b: &[f64], eq_idx: &[usize]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("rows of unequal length".into()));
        }
        let a = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(a, DVector::from_column_slice(b), eq_idx)
    }

    pub fn k(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }

    pub fn p(&self) -> usize {
        self.is_eq.iter().filter(|e| **e).count()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn is_equality(&self, j: usize) -> bool {
        self.is_eq[j]
    }

    pub fn eq_idx(&self) -> Vec<usize> {
        (0..self.k()).filter(|&j| self.is_eq[j]).collect()
    }

    pub fn ineq_idx(&self) -> Vec<usize> {
        (0..self.k()).filter(|&j| !self.is_eq[j]).collect()
    }

    pub fn row(&self, j: usize) -> DVector<f64> {
        self.a.row(j).transpose()
    }

    /// Appends one row and returns its index.
    pub fn push_row(&mut self, row: &DVector<f64>, rhs: f64, equality: bool) -> Result<usize> {
        if row.len() != self.d() {
            return Err(Error::DimensionMismatch(format!(
                "row has length {}, expected {}",
                row.len(),
                self.d()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) || !rhs.is_finite() {
            return Err(Error::InvalidInput("constraint data must be finite".into()));
        }
        let k = self.k();
        let a = core::mem::replace(&mut self.a, DMatrix::zeros(0, 0));
        self.a = a.insert_row(k, 0.0);
        self.a.row_mut(k).copy_from(&row.transpose());
        let b = core::mem::replace(&mut self.b, DVector::zeros(0));
        self.b = b.push(rhs);
        self.is_eq.push(equality);
        Ok(k)
    }

    /// The subsystem made of the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            a: self.a.select_rows(rows.iter()),
            b: self.b.select_rows(rows.iter()),
            is_eq: rows.iter().map(|&j| self.is_eq[j]).collect(),
        }
    }

    /// Returns `(A U, b)` for a `d × d` matrix `U`.
    pub fn transform_columns(&self, u: &DMatrix<f64>) -> Self {
        Self { a: &self.a * u, b: self.b.clone(), is_eq: self.is_eq.clone() }
    }

    /// `A θ - b`.
    pub fn residuals(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.a * theta - &self.b
    }

    /// Largest constraint violation at `theta`.
    pub fn max_violation(&self, theta: &DVector<f64>) -> f64 {
        let r = self.residuals(theta);
        (0..self.k())
            .map(|j| if self.is_eq[j] { r[j].abs() } else { r[j].max(0.0) })
            .fold(0.0, f64::max)
    }
}

/// Scale-relative solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility, `1e-9 (1 + ‖b‖∞)`.
    pub feas: f64,
    /// KKT residuals, `1e-8 (1 + ‖c‖∞)`.
    pub kkt: f64,
}

impl Tolerances {
    pub fn new(c: &DVector<f64>, cs: &ConstraintSystem) -> Self {
        Self { feas: 1e-9 * (1.0 + cs.b().amax()), kkt: 1e-8 * (1.0 + c.amax()) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// Nonnegative combination of the rows proving emptiness.
    Farkas(InfeasibilityCertificate),
    /// Feasible direction of unbounded descent.
    Ray(DVector<f64>),
}

/// Result of [`solve_lp`] / [`solve_qp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: Status,
    pub mu: f64,
    /// `cᵀθ + μ‖θ‖²` at the optimum; `+∞` if infeasible, `-∞` if unbounded.
    pub value: f64,
    pub argmin: DVector<f64>,
    /// One multiplier per row of the constraint system.
    pub multipliers: DVector<f64>,
    /// Rows active within the feasibility tolerance at `argmin`.
    pub active_set: Vec<usize>,
    /// Linearly independent working set the solver terminated with.
    pub working_set: Vec<usize>,
    pub iterations: usize,
    pub certificate: Option<Certificate>,
}

pub type LpSolution = Solution;
pub type QpSolution = Solution;

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Dual value `-λᵀb` (equals `value` for an optimal LP).
    pub fn dual_value(&self, cs: &ConstraintSystem) -> f64 {
        -self.multipliers.dot(cs.b())
    }

    /// Warm start at this solution.
    pub fn warm_start(&self) -> FeasiblePoint {
        FeasiblePoint { x: self.argmin.clone(), working: self.working_set.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverOptions {
    /// Defaults to `50 (k + d)`.
    pub max_iter: Option<usize>,
}

/// `min cᵀθ` over the constraint system.
pub fn solve_lp(c: &DVector<f64>, cs: &ConstraintSystem) -> Result<LpSolution> {
    solve_qp(c, 0.0, cs)
}

/// `min cᵀθ + μ‖θ‖²` over the constraint system.
pub fn solve_qp(c: &DVector<f64>, mu: f64, cs: &ConstraintSystem) -> Result<QpSolution> {
    solve_with(c, mu, cs, None, SolverOptions::default())
}

/// As [`solve_qp`], starting from a known feasible point and working set.
/// An invalid start falls back to phase 1.
pub fn solve_qp_from(
    c: &DVector<f64>,
    mu: f64,
    cs: &ConstraintSystem,
    start: &FeasiblePoint,
) -> Result<QpSolution> {
    solve_with(c, mu, cs, Some(start), SolverOptions::default())
}

pub fn solve_with(
    c: &DVector<f64>,
    mu: f64,
    cs: &ConstraintSystem,
    start: Option<&FeasiblePoint>,
    opts: SolverOptions,
) -> Result<QpSolution> {
    if c.len() != cs.d() {
        return Err(Error::DimensionMismatch(format!(
            "objective has length {}, expected {}",
            c.len(),
            cs.d()
        )));
    }
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(Error::InvalidInput(format!("regularization must be nonnegative, got {mu}")));
    }
    let tol = Tolerances::new(c, cs);
    let start = match start.filter(|s| active_set::valid_start(cs, s, &tol)) {
        Some(s) => s.clone(),
        None => match phase1_feasible(cs)? {
            Phase1::Feasible(point) => point,
            Phase1::Infeasible(cert) => {
                return Ok(Solution {
                    status: Status::Infeasible,
                    mu,
                    value: f64::INFINITY,
                    argmin: DVector::zeros(cs.d()),
                    multipliers: DVector::zeros(cs.k()),
                    active_set: Vec::new(),
                    working_set: Vec::new(),
                    iterations: 0,
                    certificate: Some(Certificate::Farkas(cert)),
                })
            }
        },
    };
    active_set::solve_from(c, mu, cs, start, &tol, opts)
}

/// Largest KKT residuals of a candidate primal/dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖c + 2μθ + Aᵀλ‖∞`.
    pub stationarity: f64,
    pub primal: f64,
    /// Largest negative part of an inequality multiplier.
    pub dual: f64,
    /// `max_j∈I |λ_j (Aθ - b)_j|`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

pub fn kkt_residuals(
    c: &DVector<f64>,
    mu: f64,
    cs: &ConstraintSystem,
    theta: &DVector<f64>,
    lambda: &DVector<f64>,
) -> KktResiduals {
    let grad = c + theta * (2.0 * mu) + cs.a().tr_mul(lambda);
    let r = cs.residuals(theta);
    let mut out = KktResiduals {
        stationarity: grad.amax(),
        primal: 0.0,
        dual: 0.0,
        complementarity: 0.0,
    };
    for j in 0..cs.k() {
        if cs.is_equality(j) {
            out.primal = out.primal.max(r[j].abs());
        } else {
            out.primal = out.primal.max(r[j]);
            out.dual = out.dual.max(-lambda[j]);
            out.complementarity = out.complementarity.max((lambda[j] * r[j]).abs());
        }
    }
    out
}

/// `C(n, r)` saturating at `u128::MAX`.
pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}
