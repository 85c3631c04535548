//! JSON documents written by the command-line tool. Field order follows
//! declaration order; non-finite numbers become `null`.

use serde::Serialize;
use setid_core::inference::{ConfidenceSet, CsKind, Estimator, PolygonCS};
use setid_core::model::{diagnose, DiagnosticsReport, MomentSample, DEFAULT_DIAGNOSTIC_FLOOR};
use setid_core::regsf::{RegularizedEstimate, Tuning};

use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct TuningOut {
    pub mu_n: f64,
    pub kappa_n: f64,
    pub mu1: f64,
}

impl From<&Tuning> for TuningOut {
    fn from(t: &Tuning) -> Self {
        Self { mu_n: t.mu_n, kappa_n: t.kappa_n, mu1: t.mu1 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsOut {
    pub eta: f64,
    pub s_min: f64,
    pub feasible: bool,
    pub moment_bound: f64,
    pub warnings: Vec<String>,
}

impl From<&DiagnosticsReport> for DiagnosticsOut {
    fn from(r: &DiagnosticsReport) -> Self {
        Self { eta: r.eta, s_min: r.s_min, feasible: r.feasible, moment_bound: r.moment_bound, warnings: r.warnings.clone() }
    }
}

/// Sample diagnostics, or `None` plus a warning when the subset
/// enumeration would exceed `cap`.
pub fn diagnostics(sample: &MomentSample, cap: u128, warnings: &mut Vec<String>) -> Result<Option<DiagnosticsOut>> {
    match diagnose(sample, cap, DEFAULT_DIAGNOSTIC_FLOOR) {
        Ok(r) => Ok(Some((&r).into())),
        Err(setid_core::Error::CapExceeded { count, cap }) => {
            warnings.push(format!("diagnostics skipped: {count} subsets exceed the cap of {cap}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn kind_name(kind: CsKind) -> &'static str {
    match kind {
        CsKind::CbPointwise => "cb_pointwise",
        CsKind::CiTheta1 => "ci_theta1",
        CsKind::CiSetBonferroni => "ci_set",
        CsKind::CbUniform => "cb_uniform",
        CsKind::CiSetUniform => "ci_set_uniform",
    }
}

pub fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Inner => "inner",
        Estimator::Outer => "outer",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaOut {
    pub lower: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HalfspaceOut {
    pub normal: Vec<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CsOut {
    pub kind: String,
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    /// `null` for one-sided bands.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halfspaces: Option<Vec<HalfspaceOut>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_value: Option<f64>,
    pub sigma: Option<SigmaOut>,
    pub estimator: String,
    pub tuning: Option<TuningOut>,
    pub diagnostics: Option<DiagnosticsOut>,
    pub warnings: Vec<String>,
}

impl CsOut {
    pub fn interval(cs: &ConfidenceSet, diagnostics: Option<DiagnosticsOut>, mut warnings: Vec<String>) -> Self {
        warnings.splice(0..0, cs.warnings.iter().cloned());
        Self {
            kind: kind_name(cs.kind).into(),
            alpha: cs.alpha,
            lower: Some(cs.lower),
            upper: Some(cs.upper),
            halfspaces: None,
            critical_value: None,
            sigma: Some(SigmaOut { lower: cs.sigma_used, upper: cs.sigma_upper }),
            estimator: estimator_name(cs.estimator_used).into(),
            tuning: Some((&cs.tuning).into()),
            diagnostics,
            warnings,
        }
    }

    pub fn polygon(kind: &str, cs: &PolygonCS, diagnostics: Option<DiagnosticsOut>, warnings: Vec<String>) -> Self {
        Self {
            kind: kind.into(),
            alpha: cs.alpha,
            lower: None,
            upper: None,
            halfspaces: Some(
                cs.halfspaces
                    .iter()
                    .map(|(a, c)| HalfspaceOut { normal: a.iter().copied().collect(), bound: *c })
                    .collect(),
            ),
            critical_value: Some(cs.critical_value),
            sigma: None,
            estimator: "outer".into(),
            tuning: None,
            diagnostics,
            warnings,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateOut {
    pub direction: Vec<f64>,
    pub n: usize,
    pub tuning: TuningOut,
    pub mu: f64,
    pub kappa: f64,
    pub v0: f64,
    pub v_mu: f64,
    pub v_in: f64,
    pub v_out: f64,
    pub sigma_hat: f64,
    pub theta_mu: Vec<f64>,
    pub theta_star: Vec<f64>,
}

impl From<&RegularizedEstimate> for EstimateOut {
    fn from(e: &RegularizedEstimate) -> Self {
        Self {
            direction: e.direction.iter().copied().collect(),
            n: e.n,
            tuning: (&e.tuning).into(),
            mu: e.mu,
            kappa: e.kappa,
            v0: e.v0,
            v_mu: e.v_mu,
            v_in: e.v_in,
            v_out: e.v_out,
            sigma_hat: e.sigma_hat,
            theta_mu: e.theta_mu.iter().copied().collect(),
            theta_star: e.theta_star.iter().copied().collect(),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
