use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use setid::formats::{read_model, read_sample, sidecar_path, write_json, write_sample};
use setid::interval_csv::{box_bounds, load_csv, Schema};
use setid::mc::{run_coverage, write_table, CoverageReport, DesignKind, DesignSpec, Method};
use setid::output::{diagnostics, to_json, CsOut, DiagnosticsOut, EstimateOut};
use setid::{Error, Result};
use setid_core::inference::{
    cb_pointwise, cb_uniform, ci_set, ci_set_uniform, ci_theta1, direction_grid_2d, joint_cs, natural_cs,
    BootstrapConfig, CriticalValue, WeightLaw, DEFAULT_SIGMA0,
};
use setid_core::interval_iv::build_moments;
use setid_core::model::{empirical_model, eta, s_min, unit, AffineMomentModel, MomentSample};
use setid_core::overid::{overid_estimate, spec_test, Strategy};
use setid_core::qp::{phase1_feasible, Phase1};
use setid_core::regsf::{estimate, support_lp, TuningRule};

const DEFAULT_CAP: u128 = 1_000_000;

#[derive(Parser)]
#[command(name = "setid", version, about = "Inference on partially identified linear functionals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coverage experiment on the parallelogram design.
    Mc2d {
        #[arg(long, value_delimiter = ',', required = true)]
        omega_grid: Vec<f64>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Coverage experiment on the d-dimensional cube design.
    Mcnd {
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Regularized support function estimates in one direction.
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Confidence band or interval for a linear functional.
    Ci {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value = "cb-uniform")]
        kind: CiKind,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_SIGMA0)]
        sigma0: f64,
        #[command(flatten)]
        tuning: TuningArgs,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
    },
    /// Polygon confidence set over a list of directions.
    JointCs {
        #[command(flatten)]
        input: InputArgs,
        /// Directions separated by `;`, coordinates by `,`.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "grid")]
        directions: Option<String>,
        /// `m` equally spaced directions on the circle.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        polygon: PolygonArgs,
    },
    /// Polygon confidence set with one face per moment inequality.
    NaturalCs {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        polygon: PolygonArgs,
    },
    /// Subsystem decomposition of an over-identified model.
    Overid {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
        #[command(flatten)]
        subsets: SubsetArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_SIGMA0)]
        sigma0: f64,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Conditioning diagnostics of a sample or model.
    Diagnose {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
    },
    /// Test that subsystem bounds are compatible.
    SpecTest {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        direction: Option<Vec<f64>>,
        #[command(flatten)]
        subsets: SubsetArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_SIGMA0)]
        sigma0: f64,
        #[command(flatten)]
        tuning: TuningArgs,
    },
    /// Convert interval-outcome data into a moment sample file.
    BuildMoments {
        #[command(flatten)]
        data: IntervalArgs,
        /// Output sample CSV; the header goes to `<out>.json`.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [McMethod::CbPointwise, McMethod::CbUniform])]
    methods: Vec<McMethod>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SIGMA0)]
    sigma0: f64,
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    /// Directory for the coverage table and run manifest.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum McMethod {
    CbPointwise,
    CbUniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum CiKind {
    CbPointwise,
    CbUniform,
    CiTheta1,
    CiSet,
    CiSetUniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Inner,
    Outer,
}

#[derive(Args)]
struct TuningArgs {
    /// Data-driven scale for μ₁. Defaults to the one matching the method.
    #[arg(long, value_enum)]
    rule: Option<Rule>,
    /// Fixed μ₁, overriding `--rule`.
    #[arg(long)]
    mu1: Option<f64>,
}

impl TuningArgs {
    fn rule(&self, default: Rule) -> TuningRule {
        match (self.mu1, self.rule.unwrap_or(default)) {
            (Some(m), _) => TuningRule::fixed(m),
            (None, Rule::Inner) => TuningRule::inner(),
            (None, Rule::Outer) => TuningRule::outer(),
        }
    }
}

#[derive(Args)]
struct PolygonArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA0)]
    sigma0: f64,
    /// Use `z_{1-α/M}` instead of the multiplier bootstrap.
    #[arg(long)]
    bonferroni: bool,
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
}

impl PolygonArgs {
    fn critical_value(&self) -> CriticalValue {
        if self.bonferroni {
            CriticalValue::Bonferroni
        } else {
            CriticalValue::Bootstrap(BootstrapConfig {
                draws: self.draws,
                weight_law: WeightLaw::StandardGaussian,
                seed: self.seed,
            })
        }
    }
}

#[derive(Args)]
struct SubsetArgs {
    /// Size of the inequality subsets; defaults to `d - p`.
    #[arg(long, conflicts_with = "subsets")]
    subset_size: Option<usize>,
    /// Explicit row subsets separated by `;`, indices by `,`.
    #[arg(long)]
    subsets: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
}

impl SubsetArgs {
    fn strategy(&self, model: &AffineMomentModel) -> Result<Strategy> {
        if let Some(s) = &self.subsets {
            let list = s
                .split(';')
                .map(|part| {
                    part.split(',')
                        .map(|v| v.trim().parse::<usize>().map_err(|_| Error::parse(None, "--subsets", format!("bad row index `{v}`"))))
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(Strategy::UserProvided(list));
        }
        Ok(match self.subset_size {
            Some(size) => Strategy::AllSubsetsOfSize(size),
            None => Strategy::default_for(model),
        })
    }
}

#[derive(Args)]
struct IntervalArgs {
    /// Interval-outcome CSV with columns y_lo, y_hi, x1..xd and z or z1..zm.
    #[arg(long)]
    interval_csv: Option<PathBuf>,
    /// Instrument values whose inequality pair becomes an equality.
    #[arg(long, value_delimiter = ',')]
    collapse: Vec<String>,
    /// Lower parameter bounds, one value or one per regressor.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    box_lo: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    box_hi: Option<Vec<f64>>,
    /// Instrument columns, when not named `z` or `z1..zm`.
    #[arg(long, value_delimiter = ',')]
    z_cols: Option<Vec<String>>,
}

impl IntervalArgs {
    fn build(&self, path: &Path, warnings: &mut Vec<String>) -> Result<MomentSample> {
        let schema = Schema { z: self.z_cols.clone(), ..Schema::default() };
        let loaded = load_csv(path, &schema)?;
        warnings.extend(loaded.warnings);
        let (bounds, warning) = box_bounds(loaded.dataset.d(), self.box_lo.as_deref(), self.box_hi.as_deref())?;
        if let Some(w) = warning {
            eprintln!("{w}");
            warnings.push(w);
        }
        Ok(build_moments(&loaded.dataset, &self.collapse, bounds)?)
    }
}

#[derive(Args)]
struct InputArgs {
    /// Moment sample CSV with its `<sample>.json` header.
    #[arg(long)]
    sample: Option<PathBuf>,
    /// Population model JSON (`estimate` and `diagnose` only).
    #[arg(long, conflicts_with_all = ["sample", "interval_csv"])]
    model: Option<PathBuf>,
    #[command(flatten)]
    data: IntervalArgs,
}

enum Input {
    Sample(MomentSample),
    Model(AffineMomentModel),
}

impl InputArgs {
    fn load(&self, warnings: &mut Vec<String>) -> Result<Input> {
        match (&self.sample, &self.model, &self.data.interval_csv) {
            (Some(p), None, None) => Ok(Input::Sample(read_sample(p)?)),
            (None, Some(p), None) => Ok(Input::Model(read_model(p)?)),
            (None, None, Some(p)) => Ok(Input::Sample(self.data.build(p, warnings)?)),
            _ => Err(Error::parse(None, "--sample", "give exactly one of --sample, --model or --interval-csv")),
        }
    }

    fn sample(&self, warnings: &mut Vec<String>) -> Result<MomentSample> {
        match self.load(warnings)? {
            Input::Sample(s) => Ok(s),
            Input::Model(_) => Err(Error::parse(None, "--model", "this command needs a sample")),
        }
    }
}

fn direction(v: &Option<Vec<f64>>, d: usize, warnings: &mut Vec<String>) -> Result<DVector<f64>> {
    let Some(v) = v else { return Ok(unit(d, 0)) };
    if v.len() != d {
        return Err(setid_core::Error::DimensionMismatch(format!("direction has {} entries, expected {d}", v.len())).into());
    }
    let a = DVector::from_column_slice(v);
    let norm = a.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::parse(None, "--direction", "direction must be a nonzero finite vector"));
    }
    if (norm - 1.0).abs() > setid_core::model::UNIT_TOL {
        warnings.push(format!("direction rescaled to unit length from norm {norm}"));
    }
    Ok(a / norm)
}

fn parse_directions(s: &str, d: usize, warnings: &mut Vec<String>) -> Result<Vec<DVector<f64>>> {
    s.split(';')
        .map(|part| {
            let v = part
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| Error::parse(None, "--directions", format!("bad number `{x}`"))))
                .collect::<Result<Vec<_>>>()?;
            direction(&Some(v), d, warnings)
        })
        .collect()
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", to_json(value)?);
    Ok(())
}

#[derive(Serialize)]
struct PopulationSupport {
    direction: Vec<f64>,
    v0: f64,
    argmin: Vec<f64>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct EstimateReport {
    estimate: EstimateOut,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ModelDiagnostics {
    eta: f64,
    s_min: f64,
    feasible: bool,
}

#[derive(Serialize)]
struct SubproblemOut {
    chosen: Vec<usize>,
    rows: Vec<usize>,
    feasible: bool,
    v_out: Option<f64>,
    sigma_hat: Option<f64>,
}

#[derive(Serialize)]
struct SpecTestOut {
    reject: bool,
    t_stat: f64,
    critical_value: f64,
    lower_subproblem: Vec<usize>,
    upper_subproblem: Vec<usize>,
}

#[derive(Serialize)]
struct OverIdOut {
    subproblems: Vec<SubproblemOut>,
    omega_hat: Vec<Vec<f64>>,
    gamma_hat: Vec<f64>,
    max_lower_bound: f64,
    combined_value: f64,
    combined_sigma: f64,
    mu_n: f64,
    alpha: f64,
    lower_confidence_bound: f64,
    spec_test: SpecTestOut,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    table: String,
    reports: Vec<CoverageReport>,
}

fn run_mc(command: &str, kinds: Vec<DesignKind>, mc: &McArgs) -> Result<()> {
    let methods: Vec<Method> = mc
        .methods
        .iter()
        .map(|m| match m {
            McMethod::CbPointwise => Method::CbPointwise,
            McMethod::CbUniform => Method::CbUniform,
        })
        .collect();
    let reports = kinds
        .into_iter()
        .map(|kind| {
            let spec = DesignSpec {
                noise_sd: mc.noise_sd,
                alpha: mc.alpha,
                methods: methods.clone(),
                sigma0: mc.sigma0,
                timeout_sec: mc.timeout,
                ..DesignSpec::new(kind, mc.n, mc.reps, mc.seed)
            };
            run_coverage(&spec)
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&mc.out_dir).map_err(|e| Error::Io { path: mc.out_dir.clone(), source: e })?;
    let table = mc.out_dir.join(format!("{command}.csv"));
    let file = std::fs::File::create(&table).map_err(|e| Error::Io { path: table.clone(), source: e })?;
    write_table(file, &reports).map_err(|e| Error::Io { path: table.clone(), source: e })?;
    write_table(std::io::stdout().lock(), &reports).map_err(|e| Error::Io { path: "<stdout>".into(), source: e })?;
    let manifest = Manifest { command, table: table.display().to_string(), reports };
    write_json(&mc.out_dir.join(format!("{command}_manifest.json")), &manifest)
}

fn run(command: Command) -> Result<()> {
    let mut warnings = Vec::new();
    match command {
        Command::Mc2d { omega_grid, mc } => {
            run_mc("mc2d", omega_grid.into_iter().map(|omega| DesignKind::TwoD { omega }).collect(), &mc)
        }
        Command::Mcnd { dims, mc } => run_mc("mcnd", dims.into_iter().map(|d| DesignKind::NDim { d }).collect(), &mc),
        Command::Estimate { input, direction: dir, tuning } => match input.load(&mut warnings)? {
            Input::Model(model) => {
                let a = direction(&dir, model.d(), &mut warnings)?;
                let lp = support_lp(&model, &a)?;
                if !lp.is_optimal() {
                    return Err(setid_core::Error::InfeasibleModel.into());
                }
                print(&PopulationSupport {
                    direction: a.iter().copied().collect(),
                    v0: lp.value,
                    argmin: lp.argmin.iter().copied().collect(),
                    warnings,
                })
            }
            Input::Sample(sample) => {
                let a = direction(&dir, sample.d(), &mut warnings)?;
                let model = empirical_model(&sample)?;
                let est = estimate(&sample, &model, &a, &tuning.rule(Rule::Outer))?;
                print(&EstimateReport { estimate: (&est).into(), warnings })
            }
        },
        Command::Ci { input, kind, direction: dir, alpha, sigma0, tuning, cap } => {
            let sample = input.sample(&mut warnings)?;
            let a = direction(&dir, sample.d(), &mut warnings)?;
            let cs = match kind {
                CiKind::CbPointwise => cb_pointwise(&sample, &a, alpha, &tuning.rule(Rule::Inner))?,
                CiKind::CiTheta1 => ci_theta1(&sample, &a, alpha, &tuning.rule(Rule::Inner))?,
                CiKind::CiSet => ci_set(&sample, &a, alpha, &tuning.rule(Rule::Inner))?,
                CiKind::CbUniform => cb_uniform(&sample, &a, alpha, &tuning.rule(Rule::Outer), sigma0)?,
                CiKind::CiSetUniform => ci_set_uniform(&sample, &a, alpha, &tuning.rule(Rule::Outer), sigma0)?,
            };
            let diag = diagnostics(&sample, cap, &mut warnings)?;
            print(&CsOut::interval(&cs, diag, warnings))
        }
        Command::JointCs { input, directions, grid, polygon } => {
            let sample = input.sample(&mut warnings)?;
            let dirs = match (&directions, grid) {
                (Some(s), _) => parse_directions(s, sample.d(), &mut warnings)?,
                (None, Some(m)) if sample.d() == 2 => direction_grid_2d(m),
                (None, Some(_)) => return Err(Error::parse(None, "--grid", "direction grids need d = 2")),
                (None, None) => (0..sample.d()).flat_map(|l| [unit(sample.d(), l), -unit(sample.d(), l)]).collect(),
            };
            let cs = joint_cs(
                &sample,
                &dirs,
                polygon.alpha,
                &polygon.tuning.rule(Rule::Outer),
                polygon.sigma0,
                &polygon.critical_value(),
            )?;
            let diag = diagnostics(&sample, polygon.cap, &mut warnings)?;
            print(&CsOut::polygon("joint_cs", &cs, diag, warnings))
        }
        Command::NaturalCs { input, polygon } => {
            let sample = input.sample(&mut warnings)?;
            let cs = natural_cs(
                &sample,
                polygon.alpha,
                &polygon.tuning.rule(Rule::Outer),
                polygon.sigma0,
                &polygon.critical_value(),
            )?;
            let diag = diagnostics(&sample, polygon.cap, &mut warnings)?;
            print(&CsOut::polygon("natural_cs", &cs, diag, warnings))
        }
        Command::Overid { input, direction: dir, subsets, alpha, sigma0, tuning } => {
            let sample = input.sample(&mut warnings)?;
            let a = direction(&dir, sample.d(), &mut warnings)?;
            let model = empirical_model(&sample)?;
            let strategy = subsets.strategy(&model)?;
            let rule = tuning.rule(Rule::Outer);
            let dec = overid_estimate(&sample, &a, &strategy, &rule, subsets.cap)?;
            let test = spec_test(&sample, &a, alpha, &strategy, &rule, sigma0, subsets.cap)?;
            let subproblems = dec
                .subproblems
                .iter()
                .map(|s| SubproblemOut {
                    chosen: s.chosen.clone(),
                    rows: s.rows.clone(),
                    feasible: s.estimate.is_some(),
                    v_out: s.estimate.as_ref().map(|e| e.v_out),
                    sigma_hat: s.estimate.as_ref().map(|e| e.sigma_hat),
                })
                .collect();
            let omega = &dec.omega_hat;
            print(&OverIdOut {
                subproblems,
                omega_hat: (0..omega.nrows()).map(|i| omega.row(i).iter().copied().collect()).collect(),
                gamma_hat: dec.gamma_hat.iter().copied().collect(),
                max_lower_bound: dec.max_lower_bound,
                combined_value: dec.combined_value,
                combined_sigma: dec.combined_sigma,
                mu_n: dec.mu_n,
                alpha,
                lower_confidence_bound: dec.lower_confidence_bound(alpha, sigma0),
                spec_test: SpecTestOut {
                    reject: test.reject,
                    t_stat: test.t_stat,
                    critical_value: test.critical_value,
                    lower_subproblem: test.lower_subproblem,
                    upper_subproblem: test.upper_subproblem,
                },
                warnings,
            })
        }
        Command::Diagnose { input, cap } => match input.load(&mut warnings)? {
            Input::Model(model) => {
                let feasible = matches!(phase1_feasible(model.cs())?, Phase1::Feasible(_));
                let eta = eta(&model, cap)?;
                let s_min = if feasible { s_min(&model, cap)? } else { 0.0 };
                print(&ModelDiagnostics { eta, s_min, feasible })
            }
            Input::Sample(sample) => {
                let diag: Option<DiagnosticsOut> = diagnostics(&sample, cap, &mut warnings)?;
                #[derive(Serialize)]
                struct Out {
                    diagnostics: Option<DiagnosticsOut>,
                    warnings: Vec<String>,
                }
                print(&Out { diagnostics: diag, warnings })
            }
        },
        Command::SpecTest { input, direction: dir, subsets, alpha, sigma0, tuning } => {
            let sample = input.sample(&mut warnings)?;
            let a = direction(&dir, sample.d(), &mut warnings)?;
            let model = empirical_model(&sample)?;
            let strategy = subsets.strategy(&model)?;
            let test = spec_test(&sample, &a, alpha, &strategy, &tuning.rule(Rule::Outer), sigma0, subsets.cap)?;
            print(&SpecTestOut {
                reject: test.reject,
                t_stat: test.t_stat,
                critical_value: test.critical_value,
                lower_subproblem: test.lower_subproblem,
                upper_subproblem: test.upper_subproblem,
            })
        }
        Command::BuildMoments { data, out } => {
            let path = data
                .interval_csv
                .clone()
                .ok_or_else(|| Error::parse(None, "--interval-csv", "missing input file"))?;
            let sample = data.build(&path, &mut warnings)?;
            write_sample(&out, &sample)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            eprintln!("wrote {} and {}", out.display(), sidecar_path(&out).display());
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_infeasible() {
        2
    } else if e.is_parse() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
