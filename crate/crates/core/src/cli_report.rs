//! Run configuration, dispatch to the experiment modules, and report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{
    assumption1_lhs, assumption1_probe, assumption1_rhs, attaining_state, bound_probe,
    composite_value, conjectured_bound, eq4_floor, eq4_value, k_of_lambda, observation_check,
    optimal_set_value, orthogonal_fixture, subset_sums, Assumption1Report, BoundReport,
    ProbeConfig, DEFAULT_SAMPLES,
};
use crate::error::Error;
use crate::rank2_opt::{distill_search, Direction, DistillOutcome, OptConfig, Rank2State, Verdict};
use crate::structure::{structure_artifacts, StructureReport, DEFAULT_SPARSE_CAP};
use crate::tensor_core::{hermitian_eigen, StateVector, SystemShape, DEFAULT_DENSE_CAP};
use crate::werner::{composite_pt, pt_spectrum_analytic, SpectralLine, WernerParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Subcommand)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Analytic spectrum of the partially transposed n-copy state, with a dense cross-check.
    Spectrum,
    /// Seesaw search for a rank-2 distillation witness.
    Distill,
    /// Probe the subset-sum bound S_m <= B(n, m).
    Bounds,
    /// Probe the two-copy inequality k·S1 − 2·S2 <= max{2k, 3k − 4}.
    Assumption1,
    /// Exact multiplicity and minor checks of the partially transposed tensor power.
    Structure,
    /// Evaluate every closed-form fixture identity.
    Fixtures,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Text,
}

#[derive(Clone, Debug, PartialEq, Serialize, Parser)]
#[command(name = "nptbench", version, about = "Werner-state distillability workbench")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Local dimension.
    #[arg(long, global = true, default_value_t = 3)]
    pub d: usize,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub lambda: f64,
    /// Number of copies n (N for the structure command).
    #[arg(long, global = true, default_value_t = 2)]
    pub copies: usize,
    /// Subset weight for the bounds command.
    #[arg(long, global = true, default_value_t = 1)]
    pub m: usize,
    /// Shift parameter for the assumption1 command.
    #[arg(long, global = true, default_value_t = 4.0)]
    pub k: f64,
    #[arg(long, global = true, default_value_t = 100)]
    pub restarts: usize,
    #[arg(long, global = true, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub value_tol: f64,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Random rank-2 samples drawn by the bounds and assumption1 commands.
    #[arg(long, global = true, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_DENSE_CAP)]
    pub dense_cap: usize,
    /// Worker threads for optimizer restarts (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Structure command: write the tensor power to PATH and its partial
    /// transpose to PATH.pt in coordinate format.
    #[arg(long, global = true)]
    pub dump_sparse: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for `command`, as the CLI would fill them in.
    pub fn new(command: Command) -> Self {
        let name = match command {
            Command::Spectrum => "spectrum",
            Command::Distill => "distill",
            Command::Bounds => "bounds",
            Command::Assumption1 => "assumption1",
            Command::Structure => "structure",
            Command::Fixtures => "fixtures",
        };
        RunConfig::try_parse_from(["nptbench", name]).expect("defaults parse")
    }

    fn opt_config(&self, direction: Direction) -> OptConfig {
        OptConfig {
            restarts: self.restarts,
            max_iter: self.max_iter,
            value_tol: self.value_tol,
            seed: self.seed,
            direction,
            record_trace: false,
            dense_cap: self.dense_cap,
        }
    }

    fn params(&self) -> Result<WernerParams, RunError> {
        WernerParams::new(self.d, self.lambda).map_err(RunError::from)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let usage = |msg: String| Err(RunError::Usage(msg));
        if self.d < 2 {
            return usage(format!("--d must be >= 2, got {}", self.d));
        }
        if self.copies < 1 {
            return usage("--copies must be >= 1".into());
        }
        if self.threads == Some(0) {
            return usage("--threads must be >= 1".into());
        }
        if self.dump_sparse.is_some() && self.command != Command::Structure {
            return usage("--dump-sparse only applies to the structure command".into());
        }
        match self.command {
            Command::Spectrum | Command::Distill => {
                self.params()?;
            }
            Command::Bounds => {
                if self.copies < 2 {
                    return usage("bounds needs --copies >= 2".into());
                }
                if self.m > self.copies {
                    return usage(format!("--m {} exceeds --copies {}", self.m, self.copies));
                }
            }
            Command::Assumption1 => {
                if self.copies != 2 {
                    return usage("assumption1 is a two-copy statement; use --copies 2".into());
                }
                assumption1_rhs(self.k)?;
            }
            Command::Structure | Command::Fixtures => {}
        }
        if matches!(self.command, Command::Distill | Command::Bounds | Command::Assumption1) {
            self.opt_config(Direction::Minimize).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Capacity(Error),
    #[error(transparent)]
    Compute(Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Capacity { .. } => RunError::Capacity(e),
            Error::Domain(msg) => RunError::Usage(msg),
            other => RunError::Compute(other),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) => EXIT_USAGE,
            RunError::Capacity(_) => EXIT_CAPACITY,
            RunError::Compute(_) | RunError::Io(_) => EXIT_FAILURE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub params: WernerParams,
    pub copies: usize,
    pub normalizer: f64,
    pub lines: Vec<SpectralLine>,
    pub min_eigenvalue: f64,
    pub npt: bool,
    /// Spectrum of the materialized operator, when under the dense cap.
    pub dense_min_eigenvalue: Option<f64>,
    pub dense_max_deviation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistillResult {
    pub params: WernerParams,
    #[serde(flatten)]
    pub outcome: DistillOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixtureCheck {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixturesResult {
    pub d: usize,
    pub all_pass: bool,
    pub checks: Vec<FixtureCheck>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunResult {
    Spectrum(SpectrumResult),
    Distill(DistillResult),
    Bounds(BoundReport),
    Assumption1(Assumption1Report),
    Structure(StructureReport),
    Fixtures(FixturesResult),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub config: RunConfig,
    pub timings_ms: BTreeMap<&'static str, f64>,
    pub result: RunResult,
    pub flags: Vec<&'static str>,
}

impl RunReport {
    /// Process exit status: [`EXIT_VIOLATION`] when a conjectured bound was
    /// exceeded, [`EXIT_OK`] otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.flags.contains(&"violation") {
            EXIT_VIOLATION
        } else {
            EXIT_OK
        }
    }

    /// The result payload alone, serialized as in [`emit`].
    pub fn result_json(&self) -> String {
        serde_json::to_string(&self.result).expect("serializable result")
    }
}

fn run_spectrum(config: &RunConfig) -> Result<(RunResult, Vec<&'static str>), RunError> {
    let params = config.params()?;
    let n = config.copies;
    let lines = pt_spectrum_analytic(params, n)?;
    let min = lines.iter().map(|l| l.value).fold(f64::INFINITY, f64::min);
    let shape = SystemShape::new(params.d(), n)?;
    let (dense_min, deviation) = if shape.dim() <= config.dense_cap {
        let dense = hermitian_eigen(&composite_pt(params, n, config.dense_cap)?)?;
        let analytic = crate::werner::expand_spectrum(&lines);
        let dev = analytic
            .iter()
            .zip(&dense.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (Some(dense.values[0]), Some(dev))
    } else {
        (None, None)
    };
    let npt = min < -1e-12;
    let mut flags = params.flags();
    if npt {
        flags.push("npt");
    }
    let result = SpectrumResult {
        params,
        copies: n,
        normalizer: params.normalizer(),
        lines,
        min_eigenvalue: min,
        npt,
        dense_min_eigenvalue: dense_min,
        dense_max_deviation: deviation,
    };
    Ok((RunResult::Spectrum(result), flags))
}

fn run_distill(config: &RunConfig) -> Result<(RunResult, Vec<&'static str>), RunError> {
    let params = config.params()?;
    let outcome = distill_search(params, config.copies, &config.opt_config(Direction::Minimize))?;
    let mut flags = params.flags();
    if outcome.verdict == Verdict::WitnessFound {
        flags.push("witness_found");
    }
    Ok((RunResult::Distill(DistillResult { params, outcome }), flags))
}

fn probe_config(config: &RunConfig) -> ProbeConfig {
    ProbeConfig { optimizer: config.opt_config(Direction::Maximize), samples: config.samples }
}

fn run_bounds(config: &RunConfig) -> Result<(RunResult, Vec<&'static str>), RunError> {
    let report = bound_probe(config.copies, config.m, config.d, &probe_config(config))?;
    let flags = if report.violation { vec!["violation"] } else { vec![] };
    Ok((RunResult::Bounds(report), flags))
}

fn run_assumption1(config: &RunConfig) -> Result<(RunResult, Vec<&'static str>), RunError> {
    let report = assumption1_probe(config.d, config.k, &probe_config(config))?;
    let flags = if report.violation { vec!["violation"] } else { vec![] };
    Ok((RunResult::Assumption1(report), flags))
}

fn run_structure(config: &RunConfig) -> Result<(RunResult, Vec<&'static str>), RunError> {
    let artifacts = structure_artifacts(config.d, config.copies, DEFAULT_SPARSE_CAP)?;
    if let Some(path) = &config.dump_sparse {
        artifacts.power.write_coordinate(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        let mut pt_path = path.clone().into_os_string();
        pt_path.push(".pt");
        artifacts.pt.write_coordinate(std::io::BufWriter::new(std::fs::File::create(pt_path)?))?;
    }
    let report = artifacts.report;
    let mut flags = vec![];
    if !report.multiplicity_claim_holds || !report.minors_pass {
        flags.push("structure_claim_failed");
    }
    Ok((RunResult::Structure(report), flags))
}

struct Checks(Vec<FixtureCheck>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, expected: f64, actual: f64, tolerance: f64) {
        let pass = (expected - actual).abs() <= tolerance;
        self.0.push(FixtureCheck { name: name.into(), expected, actual, tolerance, pass });
    }
}

fn run_fixtures(config: &RunConfig) -> Result<(RunResult, Vec<&'static str>), RunError> {
    let d = config.d;
    let mut checks = Checks(Vec::new());
    for n in 2..=4 {
        let sums = subset_sums(&attaining_state(d, n)?)?;
        for (m, s) in sums.iter().enumerate() {
            let b = conjectured_bound(n, m)? as f64;
            checks.push(format!("attaining_state_S{m}_n{n}"), b, *s, 1e-12);
        }
    }
    for n in 2..=5 {
        for lambda in [0.0, 0.3, 0.5, 1.0] {
            let p = WernerParams::new(d, lambda)?;
            let scaled = optimal_set_value(p, n)? * p.normalizer().powi(n as i32);
            checks.push(format!("binomial_identity_n{n}_lambda{lambda}"), 1.0 - lambda, scaled, 1e-12);
        }
    }
    for (k, want) in [(4.0, 0.0), (5.0, 0.75), (3.9, -0.0975)] {
        checks.push(format!("eq4_floor_k{k}"), want, eq4_floor(k), 1e-12);
    }
    let star2 = attaining_state(d, 2)?;
    for k in [4.0, 5.0] {
        checks.push(format!("eq4_attaining_k{k}"), eq4_floor(k), eq4_value(&star2, k)?, 1e-12);
        checks.push(format!("assumption1_attaining_k{k}"), 3.0 * k - 4.0, assumption1_lhs(&star2, k)?, 1e-12);
        checks.push(
            format!("assumption1_orthogonal_k{k}"),
            2.0 * k,
            assumption1_lhs(&orthogonal_fixture(d)?, k)?,
            1e-12,
        );
    }
    checks.push("k_of_lambda_1", 4.0, k_of_lambda(1.0)?, 0.0);
    checks.push("k_of_lambda_2/3", 5.0, k_of_lambda(2.0 / 3.0)?, 1e-12);
    let single = SystemShape::new(d, 1)?;
    let phi = Rank2State::from_state(&attaining_state(d, 1)?)?;
    let s00 = StateVector::product_basis(single, 0, 0)?;
    let s01 = StateVector::product_basis(single, 0, 1)?;
    checks.push("observation_00_phi", 3.0, observation_check(&s00, &phi)?, 1e-12);
    checks.push("observation_01_phi", 2.0, observation_check(&s01, &phi)?, 1e-12);
    for lambda in [0.5, 0.8, 1.0] {
        let p = WernerParams::new(d, lambda)?;
        let want = (1.0 - lambda) / p.normalizer().powi(2);
        checks.push(format!("composite_attaining_lambda{lambda}"), want, composite_value(&star2, p)?, 1e-12);
    }
    let p1 = WernerParams::new(d, 1.0)?;
    checks.push(
        "pt_min_eigenvalue_lambda1",
        (2.0 - d as f64) / p1.normalizer(),
        p1.pt_lower_eigenvalue(),
        1e-12,
    );
    let all_pass = checks.0.iter().all(|c| c.pass);
    let flags = if all_pass { vec![] } else { vec!["fixture_failure"] };
    Ok((RunResult::Fixtures(FixturesResult { d, all_pass, checks: checks.0 }), flags))
}

fn dispatch(config: &RunConfig) -> Result<(RunResult, Vec<&'static str>), RunError> {
    match config.command {
        Command::Spectrum => run_spectrum(config),
        Command::Distill => run_distill(config),
        Command::Bounds => run_bounds(config),
        Command::Assumption1 => run_assumption1(config),
        Command::Structure => run_structure(config),
        Command::Fixtures => run_fixtures(config),
    }
}

pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    let start = Instant::now();
    config.validate()?;
    let (result, flags) = match config.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| RunError::Usage(format!("cannot build thread pool: {e}")))?
            .install(|| dispatch(config))?,
        None => dispatch(config)?,
    };
    let mut timings_ms = BTreeMap::new();
    timings_ms.insert("total", start.elapsed().as_secs_f64() * 1e3);
    Ok(RunReport { version: VERSION, config: config.clone(), timings_ms, result, flags })
}

fn text_summary(report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "nptbench {}", report.version);
    let _ = writeln!(
        s,
        "flags: {}",
        if report.flags.is_empty() { "none".to_string() } else { report.flags.join(", ") }
    );
    let c = &report.config;
    let _ = writeln!(
        s,
        "config: {:?} d={} lambda={} copies={} m={} k={} restarts={} max_iter={} value_tol={:e} seed={} samples={}",
        c.command, c.d, c.lambda, c.copies, c.m, c.k, c.restarts, c.max_iter, c.value_tol, c.seed, c.samples
    );
    match &report.result {
        RunResult::Spectrum(r) => {
            let _ = writeln!(s, "normalizer N = {}", r.normalizer);
            for l in &r.lines {
                let _ = writeln!(s, "  eigenvalue {:+.17e}  x{}", l.value, l.multiplicity);
            }
            let _ = writeln!(s, "min eigenvalue {:+.17e} ({})", r.min_eigenvalue, if r.npt { "NPT" } else { "PPT" });
            if let (Some(m), Some(dev)) = (r.dense_min_eigenvalue, r.dense_max_deviation) {
                let _ = writeln!(s, "dense min eigenvalue {m:+.17e}, max deviation {dev:e}");
            }
        }
        RunResult::Distill(r) => {
            let o = &r.outcome;
            let _ = writeln!(s, "verdict {:?} (threshold {:e})", o.verdict, o.threshold);
            let _ = writeln!(s, "best value {:+.17e} at restart {}", o.report.best_value, o.report.best_restart);
            let conv = o.report.converged.iter().filter(|&&x| x).count();
            let _ = writeln!(s, "converged restarts {}/{}", conv, o.report.converged.len());
        }
        RunResult::Bounds(r) => {
            let _ = writeln!(s, "VIOLATION: {}", r.violation);
            let _ = writeln!(s, "bound B({}, {}) = {}", r.spec.n, r.spec.m, r.spec.conjectured);
            let _ = writeln!(s, "optimizer max {:.17} ({})", r.optimizer_max, r.optimizer_route);
            let _ = writeln!(s, "sample max {:.17} over {} samples", r.sample_max, r.samples);
            let _ = writeln!(s, "attaining state value {:.17}", r.attaining_value);
        }
        RunResult::Assumption1(r) => {
            let _ = writeln!(s, "VIOLATION: {}", r.violation);
            let _ = writeln!(s, "k = {}, rhs max{{2k, 3k-4}} = {}", r.k, r.rhs);
            let _ = writeln!(s, "optimizer max {:.17}", r.optimizer_max);
            let _ = writeln!(s, "sample max {:.17} over {} samples", r.sample_max, r.samples);
            let _ = writeln!(s, "fixtures: 3k-4 -> {}, 2k -> {}", r.attaining_value, r.orthogonal_fixture_value);
        }
        RunResult::Structure(r) => {
            let _ = writeln!(s, "d = {}, N = {}, nnz = {}, trace = {}", r.d, r.copies, r.nnz, r.trace);
            let _ = writeln!(s, "before PT multiplicities {:?} (max {}, claimed <= {})", r.histogram_before_pt.counts, r.histogram_before_pt.max, r.claimed_max_multiplicity);
            let _ = writeln!(s, "after PT multiplicities {:?}", r.histogram_after_pt.counts);
            let _ = writeln!(
                s,
                "minors: {} pairs, {} at equality, {} violations",
                r.minors.pairs,
                r.minors.equality_pairs,
                r.minors.violations.len()
            );
            let _ = writeln!(s, "{}", r.statement);
        }
        RunResult::Fixtures(r) => {
            for c in &r.checks {
                let _ = writeln!(
                    s,
                    "  [{}] {} expected {} got {}",
                    if c.pass { "pass" } else { "FAIL" },
                    c.name,
                    c.expected,
                    c.actual
                );
            }
            let _ = writeln!(s, "all pass: {}", r.all_pass);
        }
    }
    for (phase, ms) in &report.timings_ms {
        let _ = writeln!(s, "time {phase}: {ms:.3} ms");
    }
    s
}

/// Serializes the report; JSON keys appear as version, config, timings_ms,
/// result, flags.
pub fn emit(report: &RunReport, format: Format) -> Vec<u8> {
    match format {
        Format::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("serializable report");
            out.push(b'\n');
            out
        }
        Format::Text => text_summary(report).into_bytes(),
    }
}
