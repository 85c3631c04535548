//! Coverage experiments on the built-in designs.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use setid_core::designs::{design_2d, design_nd, Design};
use setid_core::inference::{cb_pointwise, cb_uniform, DEFAULT_SIGMA0};
use setid_core::model::unit;
use setid_core::regsf::TuningRule;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Parallelogram indexed by an angle in degrees.
    TwoD { omega: f64 },
    /// The cube `[-1, 1]^d`.
    NDim { d: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    CbPointwise,
    CbUniform,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::CbPointwise => "cb_pointwise",
            Method::CbUniform => "cb_uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    /// Entry noise; the design default when `None`.
    pub noise_sd: Option<f64>,
    pub n: usize,
    pub reps: usize,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub sigma0: f64,
    /// Replications running longer than this count as failures.
    pub timeout_sec: f64,
}

impl DesignSpec {
    pub fn new(kind: DesignKind, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            kind,
            noise_sd: None,
            n,
            reps,
            alpha: 0.05,
            methods: vec![Method::CbPointwise, Method::CbUniform],
            seed,
            sigma0: DEFAULT_SIGMA0,
            timeout_sec: 60.0,
        }
    }

    pub fn design(&self) -> Result<Design> {
        let design = match self.kind {
            DesignKind::TwoD { omega } => design_2d(omega)?,
            DesignKind::NDim { d } => design_nd(d)?,
        };
        Ok(match self.noise_sd {
            Some(sd) => design.with_noise_sd(sd),
            None => design,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    /// Share of completed replications with `lower ≤ v̲`.
    pub coverage: f64,
    pub mc_se: f64,
    pub avg_excess_length: f64,
    pub avg_time_sec: f64,
    pub completed: usize,
    pub failures: usize,
    /// `v̲ - lower` per replication, `None` for failures.
    pub excess: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub spec: DesignSpec,
    /// Population `min θ₁`.
    pub truth: f64,
    pub methods: Vec<MethodReport>,
}

impl CoverageReport {
    /// The report with wall-clock fields zeroed, for reproducibility checks.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for m in &mut r.methods {
            m.avg_time_sec = 0.0;
        }
        r
    }

    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }
}

struct Outcome {
    lower: Option<f64>,
    time: Duration,
}

fn run_method(spec: &DesignSpec, method: Method, sample: &setid_core::model::MomentSample, d: usize) -> Outcome {
    let a = unit(d, 0);
    let start = Instant::now();
    let cs = match method {
        Method::CbPointwise => cb_pointwise(sample, &a, spec.alpha, &TuningRule::inner()),
        Method::CbUniform => cb_uniform(sample, &a, spec.alpha, &TuningRule::outer(), spec.sigma0),
    };
    let time = start.elapsed();
    let lower = cs.ok().map(|c| c.lower).filter(|_| time.as_secs_f64() <= spec.timeout_sec);
    Outcome { lower, time }
}

/// Runs every replication. Replication `r` draws its sample from the
/// ChaCha stream `r` of the generator seeded with `spec.seed`, so reports
/// do not depend on thread scheduling.
pub fn run_coverage(spec: &DesignSpec) -> Result<CoverageReport> {
    let design = spec.design()?;
    let truth = design.truth()?.0;
    let d = design.d();
    let outcomes: Vec<Vec<Outcome>> = (0..spec.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(r as u64);
            match design.sample(spec.n, &mut rng) {
                Ok(sample) => spec.methods.iter().map(|&m| run_method(spec, m, &sample, d)).collect(),
                Err(_) => spec.methods.iter().map(|_| Outcome { lower: None, time: Duration::ZERO }).collect(),
            }
        })
        .collect();

    let methods = spec
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let excess: Vec<Option<f64>> = outcomes.iter().map(|o| o[mi].lower.map(|l| truth - l)).collect();
            let done: Vec<f64> = excess.iter().flatten().copied().collect();
            let completed = done.len();
            let r = completed.max(1) as f64;
            let covered = done.iter().filter(|&&e| e >= 0.0).count();
            let coverage = if completed == 0 { 0.0 } else { covered as f64 / r };
            let total_time: f64 = outcomes.iter().map(|o| o[mi].time.as_secs_f64()).sum();
            MethodReport {
                method,
                coverage,
                mc_se: (coverage * (1.0 - coverage) / r).sqrt(),
                avg_excess_length: done.iter().sum::<f64>() / r,
                avg_time_sec: total_time / spec.reps.max(1) as f64,
                completed,
                failures: spec.reps - completed,
                excess,
            }
        })
        .collect();
    Ok(CoverageReport { spec: spec.clone(), truth, methods })
}

pub const TABLE_HEADER: [&str; 13] = [
    "design", "point", "n", "reps", "alpha", "method", "truth", "coverage", "mc_se", "avg_excess_length",
    "avg_time_sec", "completed", "failures",
];

/// One table row per design point and method.
pub fn table_rows(report: &CoverageReport) -> Vec<Vec<String>> {
    let (design, point) = match report.spec.kind {
        DesignKind::TwoD { omega } => ("2d", format!("{omega}")),
        DesignKind::NDim { d } => ("nd", d.to_string()),
    };
    report
        .methods
        .iter()
        .map(|m| {
            vec![
                design.to_string(),
                point.clone(),
                report.spec.n.to_string(),
                report.spec.reps.to_string(),
                format!("{}", report.spec.alpha),
                m.method.name().to_string(),
                format!("{}", report.truth),
                format!("{}", m.coverage),
                format!("{}", m.mc_se),
                format!("{}", m.avg_excess_length),
                format!("{}", m.avg_time_sec),
                m.completed.to_string(),
                m.failures.to_string(),
            ]
        })
        .collect()
}

/// Writes the coverage table as CSV.
pub fn write_table<W: std::io::Write>(out: W, reports: &[CoverageReport]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    for r in reports {
        for row in table_rows(r) {
            w.write_record(&row)?;
        }
    }
    w.flush()
}
