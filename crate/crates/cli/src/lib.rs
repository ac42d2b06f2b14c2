//! `cmcfol` command implementations.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver error,
//! 4 verification failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use cmcfol::conformal::{bubble, classify, BubbleParams};
use cmcfol::hyperbolic::{MetricField, MetricSpec};
use cmcfol::invariants::{balanced_coordinates, center_of_mass, hyperbolic_center, mass_charge, mass_ricci, CenterMeasure, MASS_CSV_HEADER};
use cmcfol::report::{csv_float, csv_line};
use cmcfol::solver::{
    continue_metric_report, foliate, leaf_diagnostics, newton_solve_report, sigma_grid, SolveOptions, FOLIATION_CSV_HEADER,
};
use cmcfol::sphere::{FieldPayload, ScalarField, SphereGrid};
use cmcfol::stability::{assemble, SpectrumRow, SPECTRUM_CSV_HEADER};
use cmcfol::surface::GraphSurface;
use cmcfol::verify::{provenance, run_suite, suite_ids, VerifyOptions};
use cmcfol::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "cmcfol", version, about = "CMC foliations of asymptotically hyperbolic 3-manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one CMC leaf H = -2 coth(sigma).
    Solve(SolveArgs),
    /// Solve a sequence of leaves and write the foliation summary.
    Foliate(FoliateArgs),
    /// Continue from the AdS-Schwarzschild comparison metric and report the path.
    Continue(ContinueArgs),
    /// Mass vector on a coordinate sphere.
    Mass(MassArgs),
    /// Hyperbolic center of a surface, or the center of mass of a metric.
    Center(CenterArgs),
    /// Low spectrum of the stability operator on a leaf.
    Spectrum(SpectrumArgs),
    /// Classify a solution of the constant Gauss curvature equation.
    Classify(ClassifyArgs),
    /// Run acceptance suites.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Metric: hyperbolic, ads, or a JSON metric spec file.
    #[arg(long)]
    pub metric: Option<String>,
    /// Mass parameter for --metric ads.
    #[arg(long)]
    pub m: Option<f64>,
    /// Boost the metric by this rapidity.
    #[arg(long)]
    pub rapidity: Option<f64>,
    /// Boost axis, comma separated.
    #[arg(long, value_parser = parse_vec3)]
    pub axis: Option<[f64; 3]>,
    /// Harmonic degree of the sphere grid.
    #[arg(long = "L")]
    pub degree: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_newton: Option<usize>,
    /// Run configuration file; flags given on the command line override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Start Newton from this surface instead of continuing from AdS-Schwarzschild.
    #[arg(long)]
    pub init: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FoliateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// min:max:count
    #[arg(long, value_parser = parse_range)]
    pub sigma: Option<SigmaRange>,
}

#[derive(Debug, Args)]
pub struct ContinueArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Initial continuation step count.
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VersionArg {
    Charge,
    Ricci,
    Both,
}

#[derive(Debug, Args)]
pub struct MassArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, value_enum, default_value = "charge")]
    pub version: VersionArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Reference,
    Metric,
}

#[derive(Debug, Args)]
pub struct CenterArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Surface file; without it the center of mass of --metric is reported.
    #[arg(long)]
    pub surface: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "reference")]
    pub measure: MeasureArg,
    /// Radius for the mass vector when no surface is given.
    #[arg(long, default_value_t = 8.0)]
    pub radius: f64,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Use this surface instead of solving the leaf.
    #[arg(long)]
    pub surface: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// Field file (JSON with l and coeffs).
    #[arg(long, conflicts_with = "bubble")]
    pub field: Option<PathBuf>,
    /// Classify the bubble with this lambda.
    #[arg(long)]
    pub bubble: Option<f64>,
    #[arg(long, value_parser = parse_vec2, default_value = "0,0")]
    pub y0: [f64; 2],
    #[arg(long = "L", default_value_t = 48)]
    pub degree: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite id (A1..A12) or "all"; repeatable.
    #[arg(long = "suite", default_value = "all")]
    pub suites: Vec<String>,
    #[arg(long = "L")]
    pub degree: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

fn parse_range(s: &str) -> Result<SigmaRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    match parts.as_slice() {
        [a] => Ok(SigmaRange { min: num(a)?, max: num(a)?, count: 1 }),
        [a, b, n] => Ok(SigmaRange {
            min: num(a)?,
            max: num(b)?,
            count: n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?,
        }),
        _ => Err(format!("expected min:max:count, got {s:?}")),
    }
}

fn parse_floats<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated numbers, got {s:?}"))
}

fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    parse_floats::<3>(s)
}

fn parse_vec2(s: &str) -> Result<[f64; 2], String> {
    parse_floats::<2>(s)
}

/// Everything a command needs, validated before any computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub metric: Option<MetricSpec>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub sigma: Option<SigmaRange>,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub suites: Vec<String>,
}

fn default_degree() -> usize {
    cmcfol::sphere::DEFAULT_L
}

fn default_seed() -> u64 {
    7
}

fn default_out() -> PathBuf {
    PathBuf::from("cmcfol_out")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            metric: None,
            degree: default_degree(),
            sigma: None,
            solver: SolveOptions { check_jacobian: false, ..SolveOptions::default() },
            seed: default_seed(),
            out: default_out(),
            suites: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.degree < 2 || self.degree > 256 {
            return Err(Error::Config(format!("L = {} outside [2, 256]", self.degree)));
        }
        self.solver.validate()?;
        if let Some(r) = &self.sigma {
            sigma_grid(r.min, r.max, r.count)?;
            if !(r.min > 0.0) {
                return Err(Error::Config(format!("sigma must be positive, got {}", r.min)));
            }
        }
        for s in &self.suites {
            if s != "all" && !suite_ids().iter().any(|id| id.eq_ignore_ascii_case(s)) {
                return Err(Error::Config(format!("unknown suite {s:?}")));
            }
        }
        Ok(())
    }

    pub fn build_metric(&self) -> Result<MetricField, Error> {
        self.metric
            .as_ref()
            .ok_or_else(|| Error::Config("--metric is required".into()))?
            .build()
    }

    fn sigma(&self) -> Result<f64, Error> {
        self.sigma.map(|r| r.min).ok_or_else(|| Error::Config("--sigma is required".into()))
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions { degree: self.degree, ..self.solver }
    }
}

fn metric_spec(common: &CommonArgs) -> Result<Option<MetricSpec>, Error> {
    let Some(name) = &common.metric else { return Ok(None) };
    let mut spec = match name.as_str() {
        "hyperbolic" => MetricSpec { kind: "hyperbolic".into(), ..Default::default() },
        "ads" | "ads_schwarzschild" => MetricSpec {
            kind: "ads_schwarzschild".into(),
            m: Some(common.m.ok_or_else(|| Error::Config("--metric ads requires --m".into()))?),
            ..Default::default()
        },
        path => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("reading metric spec {path}: {e}")))?;
            MetricSpec::from_json(&text)?
        }
    };
    if let Some(chi) = common.rapidity {
        spec = MetricSpec {
            kind: "boosted".into(),
            rapidity: Some(chi),
            axis: Some(common.axis.unwrap_or([1.0, 0.0, 0.0])),
            base: Some(Box::new(spec)),
            ..Default::default()
        };
    }
    Ok(Some(spec))
}

/// Merges the optional config file with command-line flags.
pub fn run_config(common: &CommonArgs, sigma: Option<SigmaRange>) -> Result<RunConfig, Error> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("reading {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(spec) = metric_spec(common)? {
        cfg.metric = Some(spec);
    }
    if let Some(l) = common.degree {
        cfg.degree = l;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(t) = common.tol {
        cfg.solver.tol_residual = t;
    }
    if let Some(n) = common.max_newton {
        cfg.solver.max_newton = n;
    }
    if sigma.is_some() {
        cfg.sigma = sigma;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

/// Writes through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn floats(v: &[f64]) -> String {
    csv_line(v.iter().map(|x| csv_float(*x)))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn read_surface(path: &Path) -> Result<GraphSurface, Error> {
    GraphSurface::from_json(&fs::read_to_string(path).map_err(|e| io_err(path, e))?)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Status {
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    pub class: Option<String>,
    pub message: Option<String>,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_SOLVER,
    }
}

/// Outcome of a command body: Ok(true) success, Ok(false) verification failure.
type Outcome = Result<bool, Error>;

fn solve(args: &SolveArgs) -> Outcome {
    let cfg = run_config(&args.common, args.sigma.map(|s| SigmaRange { min: s, max: s, count: 1 }))?;
    let metric = cfg.build_metric()?;
    let sigma = cfg.sigma()?;
    let opts = cfg.solve_options();
    let (surface, iterations, residuals) = match &args.init {
        Some(p) => {
            let rep = newton_solve_report(&metric, sigma, &read_surface(p)?, &opts)?;
            (rep.surface, rep.iterations, rep.residuals)
        }
        None => {
            let rep = continue_metric_report(&metric, sigma, opts.steps, &opts)?;
            let its = rep.corrector_iterations.iter().sum();
            (rep.surface, its, Vec::new())
        }
    };
    let diag = leaf_diagnostics(&surface, &metric)?;
    write_atomic(&cfg.out.join("surface.json"), &surface.to_json())?;
    #[derive(Serialize)]
    struct Diagnostics<'a> {
        leaf: &'a cmcfol::solver::LeafDiagnostics,
        newton_iterations: usize,
        residual_history: Vec<f64>,
        metric: Option<MetricSpec>,
    }
    let d = Diagnostics { leaf: &diag, newton_iterations: iterations, residual_history: residuals, metric: cfg.metric.clone() };
    write_atomic(&cfg.out.join("diagnostics.json"), &to_json(&d))?;
    println!("{FOLIATION_CSV_HEADER}");
    println!("{}", diag.to_csv());
    Ok(true)
}

fn foliate_cmd(args: &FoliateArgs) -> Outcome {
    let cfg = run_config(&args.common, args.sigma)?;
    let metric = cfg.build_metric()?;
    let r = cfg.sigma.ok_or_else(|| Error::Config("--sigma min:max:count is required".into()))?;
    let fol = foliate(&metric, r.min, r.max, r.count, &cfg.solve_options())?;
    for (k, (_, leaf)) in fol.leaves.iter().enumerate() {
        write_atomic(&cfg.out.join(format!("leaf_{k:03}.json")), &leaf.to_json())?;
    }
    let csv = fol.summary_csv();
    write_atomic(&cfg.out.join("summary.csv"), &csv)?;
    print!("{csv}");
    Ok(true)
}

fn continue_cmd(args: &ContinueArgs) -> Outcome {
    let cfg = run_config(&args.common, args.sigma.map(|s| SigmaRange { min: s, max: s, count: 1 }))?;
    let metric = cfg.build_metric()?;
    let opts = cfg.solve_options();
    let rep = continue_metric_report(&metric, cfg.sigma()?, args.steps.unwrap_or(opts.steps), &opts)?;
    write_atomic(&cfg.out.join("surface.json"), &rep.surface.to_json())?;
    let mut csv = String::from("tau,corrector_iterations\n");
    for (t, n) in rep.taus.iter().zip(&rep.corrector_iterations) {
        csv.push_str(&format!("{},{n}\n", csv_float(*t)));
    }
    write_atomic(&cfg.out.join("continuation.csv"), &csv)?;
    println!("m_hat,center_x,center_y,center_z,steps");
    let mut row: Vec<f64> = vec![rep.m_hat];
    row.extend(rep.center);
    println!("{},{}", floats(&row), rep.taus.len());
    Ok(true)
}

fn mass_cmd(args: &MassArgs) -> Outcome {
    let cfg = run_config(&args.common, None)?;
    let metric = cfg.build_metric()?;
    let mut rows = Vec::new();
    if matches!(args.version, VersionArg::Charge | VersionArg::Both) {
        rows.push(mass_charge(&metric, args.radius)?.to_csv());
    }
    if matches!(args.version, VersionArg::Ricci | VersionArg::Both) {
        rows.push(mass_ricci(&metric, args.radius)?.to_csv());
    }
    let csv = format!("{MASS_CSV_HEADER}\n{}\n", rows.join("\n"));
    if args.common.out.is_some() || args.common.config.is_some() {
        write_atomic(&cfg.out.join("mass.csv"), &csv)?;
    }
    print!("{csv}");
    Ok(true)
}

fn center_cmd(args: &CenterArgs) -> Outcome {
    let cfg = run_config(&args.common, None)?;
    match &args.surface {
        Some(p) => {
            let s = read_surface(p)?;
            let metric;
            let measure = match args.measure {
                MeasureArg::Reference => CenterMeasure::Reference,
                MeasureArg::Metric => {
                    metric = cfg.build_metric()?;
                    CenterMeasure::Metric(&metric)
                }
            };
            let c = hyperbolic_center(&s, measure)?;
            println!("center_x,center_y,center_z,c0,c1,c2,c3");
            let mut row = c.center_point.to_vec();
            row.extend(c.c_prime);
            println!("{}", floats(&row));
        }
        None => {
            let metric = cfg.build_metric()?;
            let m = mass_charge(&metric, args.radius)?;
            let c = center_of_mass(&m)?;
            let phi = balanced_coordinates(&metric, args.radius)?;
            println!("com_x,com_y,com_z,balanced_origin_x,balanced_origin_y,balanced_origin_z");
            let mut row = c.to_vec();
            row.extend(phi.apply([0.0; 3]));
            println!("{}", floats(&row));
        }
    }
    Ok(true)
}

fn spectrum_cmd(args: &SpectrumArgs) -> Outcome {
    let cfg = run_config(&args.common, args.sigma.map(|s| SigmaRange { min: s, max: s, count: 1 }))?;
    let metric = cfg.build_metric()?;
    let leaf = match &args.surface {
        Some(p) => read_surface(p)?,
        None => {
            let opts = cfg.solve_options();
            continue_metric_report(&metric, cfg.sigma()?, opts.steps, &opts)?.surface
        }
    };
    let row = SpectrumRow::from_operator(&assemble(&leaf, &metric)?)?;
    let csv = format!("{SPECTRUM_CSV_HEADER}\n{}\n", row.to_csv());
    if args.common.out.is_some() || args.common.config.is_some() {
        write_atomic(&cfg.out.join("spectrum.csv"), &csv)?;
    }
    print!("{csv}");
    Ok(true)
}

fn classify_cmd(args: &ClassifyArgs) -> Outcome {
    let u = match (&args.field, args.bubble) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            let payload: FieldPayload = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            ScalarField::from_payload(&payload)?
        }
        (None, Some(l)) => bubble(&BubbleParams::new(l, args.y0)?, &SphereGrid::shared(args.degree)?),
        (None, None) => return Err(Error::Config("classify needs --field or --bubble".into())),
    };
    let c = classify(&u)?;
    let json = to_json(&c);
    if let Some(out) = &args.out {
        write_atomic(&out.join("classification.json"), &json)?;
    }
    println!("{json}");
    Ok(true)
}

fn verify_cmd(args: &VerifyArgs) -> Outcome {
    let mut ids: Vec<String> = Vec::new();
    for s in &args.suites {
        if s.eq_ignore_ascii_case("all") {
            ids.extend(suite_ids().iter().map(|s| s.to_string()));
        } else if let Some(id) = suite_ids().iter().find(|id| id.eq_ignore_ascii_case(s)) {
            ids.push(id.to_string());
        } else {
            return Err(Error::Config(format!("unknown suite {s:?}; expected one of {:?} or all", suite_ids())));
        }
    }
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions { degree: args.degree.unwrap_or(defaults.degree), seed: args.seed.unwrap_or(defaults.seed) };
    println!("{}", provenance());
    let mut all = true;
    let mut summary = String::new();
    for id in &ids {
        let line = match run_suite(id, &opts) {
            Ok(r) => {
                print!("{}", r.table());
                all &= r.pass();
                r.summary_line()
            }
            Err(e) => {
                all = false;
                format!("FAIL {id} {}: {e}", e.class())
            }
        };
        println!("{line}");
        summary.push_str(&line);
        summary.push('\n');
    }
    if let Some(out) = &args.out {
        write_atomic(&out.join("verify.txt"), &format!("{}\n{summary}", provenance()))?;
    }
    Ok(all)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Solve(_) => "solve",
        Command::Foliate(_) => "foliate",
        Command::Continue(_) => "continue",
        Command::Mass(_) => "mass",
        Command::Center(_) => "center",
        Command::Spectrum(_) => "spectrum",
        Command::Classify(_) => "classify",
        Command::Verify(_) => "verify",
    }
}

fn status_dir(c: &Command) -> PathBuf {
    let out = match c {
        Command::Solve(a) => a.common.out.clone(),
        Command::Foliate(a) => a.common.out.clone(),
        Command::Continue(a) => a.common.out.clone(),
        Command::Mass(a) => a.common.out.clone(),
        Command::Center(a) => a.common.out.clone(),
        Command::Spectrum(a) => a.common.out.clone(),
        Command::Classify(a) => a.out.clone(),
        Command::Verify(a) => a.out.clone(),
    };
    out.unwrap_or_else(default_out)
}

/// Caps the global rayon pool from CMCFOL_THREADS.
pub fn init_threads() {
    if let Some(n) = std::env::var("CMCFOL_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_threads();
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a),
        Command::Foliate(a) => foliate_cmd(a),
        Command::Continue(a) => continue_cmd(a),
        Command::Mass(a) => mass_cmd(a),
        Command::Center(a) => center_cmd(a),
        Command::Spectrum(a) => spectrum_cmd(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Verify(a) => verify_cmd(a),
    };
    let (code, class, message) = match &outcome {
        Ok(true) => (0, None, None),
        Ok(false) => (EXIT_VERIFY, Some("VerificationFailure".to_string()), Some("one or more suites failed".to_string())),
        Err(e) => {
            eprintln!("error [{}]: {e}", e.class());
            (exit_code(e), Some(e.class().to_string()), Some(e.to_string()))
        }
    };
    let status = Status {
        command: command_name(&cli.command).into(),
        status: if code == 0 { "ok".into() } else { "error".into() },
        exit_code: code,
        class,
        message,
    };
    if let Err(e) = write_atomic(&status_dir(&cli.command).join("status.json"), &to_json(&status)) {
        eprintln!("warning: could not write status file: {e}");
    }
    code
}
