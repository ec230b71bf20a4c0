//! Command-line drivers: argument parsing, subcommand dispatch, and the
//! on-disk output layout.
//!
//! ```text
//! pinchflow <subcommand> [--config <file>] [--out <dir>] [--seed N]
//! ```
//!
//! Subcommands: `simulate`, `check`, `scan-reaction`, `tensor-tests`,
//! `ode-oracle`. Every subcommand reads the same configuration file (all
//! sections optional) and writes into one output directory (from `--out`,
//! then `[output] dir`, then `out`). Exit codes: 0 success, 1 certification
//! violation, 2 configuration error, 3 numerical or I/O failure.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{ConfigError, Error, Result};
use crate::flow::{self, StopReason};
use crate::reaction::{self, Convention};
use crate::report::{self, CertificationSummary, RunSummary, TimeSeries, UnitsNote};
use crate::spaceform::Ambient;
use crate::surface::{compute_shape_field, global_diagnostics};
use crate::tensor;

/// Residual tolerance `tensor-tests` certifies against.
const TENSOR_TOL: f64 = 1e-12;

/// Numerical laboratory for pinched surfaces under mean curvature flow in
/// four-dimensional space forms.
#[derive(Debug, Parser)]
#[command(name = "pinchflow", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve the configured surface and record diagnostics.
    Simulate(CommonArgs),
    /// Certify the pointwise inequalities on the initial surface.
    Check(CommonArgs),
    /// Monte Carlo scan of the reaction-term negativity bound.
    ScanReaction(ScanArgs),
    /// Randomized verification of the gradient-tensor inequalities.
    TensorTests(TensorArgs),
    /// Tabulate the exact shrinking-sphere solution.
    OdeOracle(CommonArgs),
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML configuration file (all sections optional; defaults otherwise).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`; default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed override for the sampling subcommands.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Pinching ratio override.
    #[arg(long)]
    pub k: Option<f64>,
    /// Ambient curvature override.
    #[arg(long, allow_negative_numbers = true)]
    pub kbar: Option<f64>,
    /// Sample-count override.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Comma-separated curvature-scale override.
    #[arg(long, value_delimiter = ',')]
    pub scales: Option<Vec<f64>>,
    /// Assembly convention override (`standard-ab` or `legacy-ab`).
    #[arg(long)]
    pub convention: Option<String>,
    /// Negativity-tolerance override.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TensorArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sample-count override.
    #[arg(long)]
    pub samples: Option<u64>,
    /// Refinement-iteration override.
    #[arg(long)]
    pub refine: Option<u32>,
}

impl CommonArgs {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(path) => RunConfig::load(path),
            None => Ok(RunConfig::default()),
        }
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        match &self.out {
            Some(dir) => dir.clone(),
            None => PathBuf::from(cfg.output.dir.as_deref().unwrap_or("out")),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io { path: dir.display().to_string(), source: e })
}

/// Parse-and-dispatch entry point; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Check(args) => check(&args),
        Command::ScanReaction(args) => scan_reaction(&args),
        Command::TensorTests(args) => tensor_tests(&args),
        Command::OdeOracle(args) => ode_oracle(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn simulate(args: &CommonArgs) -> Result<i32> {
    let cfg = args.load()?;
    let model = cfg.model()?;
    let params = cfg.pinching_params()?;
    let surface = cfg.build_surface()?;
    let dir = args.out_dir(&cfg);
    ensure_dir(&dir)?;

    let sigma = cfg.pinching.sigma;
    let p_list = cfg.pinching.p_list.clone();
    if cfg.output.points {
        report::write_points_csv(&dir.join("points_initial.csv"), &surface)?;
    }

    let ts_path = dir.join("timeseries.csv");
    let mut ts = TimeSeries::create(&ts_path, &p_list)?;
    let mut io_failure: Option<Error> = None;
    let mut record_index: u64 = 0;
    let points_every = cfg.output.points_every;
    let outcome = flow::run_with(surface, &params, &cfg.flow, sigma, &p_list, |s, d| {
        if io_failure.is_some() {
            return;
        }
        if let Err(e) = ts.record(d) {
            io_failure = Some(Error::Io { path: ts_path.display().to_string(), source: e });
            return;
        }
        if let Some(every) = points_every {
            if record_index % every == 0 {
                let path = dir.join(format!("points_{record_index:06}.csv"));
                if let Err(e) = report::write_points_csv(&path, s) {
                    io_failure = Some(e);
                }
            }
        }
        record_index += 1;
    })?;
    ts.into_inner().map_err(|e| Error::Io { path: ts_path.display().to_string(), source: e })?;
    if let Some(e) = io_failure {
        return Err(e);
    }
    if cfg.output.points {
        report::write_points_csv(&dir.join("points_final.csv"), &outcome.final_surface)?;
    }

    let certification = CertificationSummary::from_outcome(&outcome);
    let lost_before =
        certification.as_ref().map_or(false, |c| c.lost_before_threshold);
    let ddvv_bad = outcome.ddvv_min_overall < -cfg.check.ddvv_tol;
    let summary = RunSummary {
        config: cfg.clone(),
        seed: args.seed,
        units: UnitsNote::for_run(model, outcome.initial_h_mean),
        stop_reason: outcome.stop,
        steps: outcome.steps,
        final_time: outcome.final_time,
        records: outcome.records.len(),
        extinction: outcome.extinction,
        certification,
        failure: outcome.failure.clone(),
    };
    report::write_json(&dir.join("summary.json"), &summary)?;

    println!(
        "simulate: stop = {}, steps = {}, t = {}",
        outcome.stop,
        outcome.steps,
        report::fmt(outcome.final_time)
    );
    println!("simulate: wrote {}", dir.display());

    if outcome.stop == StopReason::NumericalFailure {
        eprintln!(
            "numerical failure: {}",
            outcome.failure.as_deref().unwrap_or("unknown")
        );
        return Ok(3);
    }
    let mut code = 0;
    if lost_before {
        eprintln!("certification violation: pinching lost before the curvature threshold");
        code = 1;
    }
    if ddvv_bad {
        eprintln!(
            "certification violation: normal-curvature slack {} below -{}",
            report::fmt(outcome.ddvv_min_overall),
            report::fmt(cfg.check.ddvv_tol)
        );
        code = 1;
    }
    Ok(code)
}

/// JSON summary of a `check` run.
#[derive(Debug, Clone, Serialize)]
struct CheckSummary {
    config: RunConfig,
    units: UnitsNote,
    membership_defect: f64,
    q_max: f64,
    q_min: f64,
    f_max: f64,
    h_min: f64,
    h_max: f64,
    ratio_max: f64,
    ddvv_min: f64,
    area: f64,
    diameter: f64,
    /// Whether the surface starts strictly inside the pinched cone.
    pinched: bool,
    passed: bool,
    violations: Vec<String>,
}

fn check(args: &CommonArgs) -> Result<i32> {
    let cfg = args.load()?;
    let model = cfg.model()?;
    let params = cfg.pinching_params()?;
    let surface = cfg.build_surface()?;
    let dir = args.out_dir(&cfg);
    ensure_dir(&dir)?;

    surface.check_membership()?;
    let field = compute_shape_field(&surface)?;
    let diag =
        global_diagnostics(&surface, &field, &params, cfg.pinching.sigma, &cfg.pinching.p_list)?;
    report::write_sites_csv(&dir.join("sites.csv"), &surface, &field, &params, cfg.pinching.sigma)?;

    let mut violations = Vec::new();
    if diag.ddvv_min < -cfg.check.ddvv_tol {
        violations.push(format!(
            "normal-curvature inequality: min slack {} below -{}",
            report::fmt(diag.ddvv_min),
            report::fmt(cfg.check.ddvv_tol)
        ));
    }
    let pinched = diag.q_max < 0.0;
    if cfg.check.require_pinched && !pinched {
        violations.push(format!(
            "surface is not pinched: max Q = {}",
            report::fmt(diag.q_max)
        ));
    }

    let summary = CheckSummary {
        config: cfg.clone(),
        units: UnitsNote::for_run(model, diag.h_mean),
        membership_defect: surface.max_membership_defect(),
        q_max: diag.q_max,
        q_min: diag.q_min,
        f_max: diag.f_max,
        h_min: diag.h_min,
        h_max: diag.h_max,
        ratio_max: diag.ratio_max,
        ddvv_min: diag.ddvv_min,
        area: diag.area,
        diameter: diag.diameter,
        pinched,
        passed: violations.is_empty(),
        violations: violations.clone(),
    };
    report::write_json(&dir.join("check.json"), &summary)?;

    println!(
        "check: q_max = {}, ddvv_min = {}, pinched = {}",
        report::fmt(diag.q_max),
        report::fmt(diag.ddvv_min),
        pinched
    );
    for v in &violations {
        eprintln!("certification violation: {v}");
    }
    Ok(if violations.is_empty() { 0 } else { 1 })
}

fn scan_reaction(args: &ScanArgs) -> Result<i32> {
    let cfg = args.common.load()?;
    let mut scan_cfg = cfg.scan_config(args.common.seed)?;
    if let Some(k) = args.k {
        scan_cfg.k = k;
    }
    if let Some(kbar) = args.kbar {
        scan_cfg.kbar = kbar;
    }
    if let Some(samples) = args.samples {
        scan_cfg.samples = samples;
    }
    if let Some(scales) = &args.scales {
        scan_cfg.scales = scales.clone();
    }
    if let Some(conv) = &args.convention {
        scan_cfg.convention = Convention::from_str(conv)
            .map_err(|e| Error::from(ConfigError::Invalid(format!("--convention: {e}"))))?;
    }
    if let Some(tol) = args.tolerance {
        scan_cfg.tolerance = tol;
    }
    let dir = args.common.out_dir(&cfg);
    ensure_dir(&dir)?;

    let report = reaction::scan_reaction(&scan_cfg)?;
    report::write_json(&dir.join("scan.json"), &report)?;

    println!(
        "scan-reaction: k = {}, kbar = {}, samples = {}, max reaction = {}",
        report::fmt(report.k),
        report::fmt(report.kbar),
        report.samples,
        report::fmt(report.max_reaction)
    );
    if report.certified() {
        println!(
            "certified: reaction stays below {} on the admissible set",
            report::fmt(report.tolerance)
        );
        Ok(0)
    } else {
        let argmax = report
            .argmax
            .as_ref()
            .and_then(|s| serde_json::to_string(s).ok())
            .unwrap_or_else(|| "unknown".to_owned());
        eprintln!(
            "violation: max reaction {} exceeds tolerance {} at {}",
            report::fmt(report.max_reaction),
            report::fmt(report.tolerance),
            argmax
        );
        Ok(1)
    }
}

fn tensor_tests(args: &TensorArgs) -> Result<i32> {
    let cfg = args.common.load()?;
    let section = cfg.tensor;
    let samples = args.samples.unwrap_or(section.samples);
    let refine = args.refine.unwrap_or(section.refine);
    let seed = args.common.seed.unwrap_or(section.seed);
    let dir = args.common.out_dir(&cfg);
    ensure_dir(&dir)?;

    let report = tensor::tensor_tests(samples, refine, seed);
    report::write_json(&dir.join("tensor.json"), &report)?;

    println!(
        "tensor-tests: min trace ratio = {}, min evolution residual = {}, min commutator residual = {}",
        report::fmt(report.min_trace_ratio),
        report::fmt(report.min_evol_residual),
        report::fmt(report.min_codazzi_residual)
    );
    if report.certified(TENSOR_TOL) {
        println!("certified: sharp constant 3/4 and nonnegative residuals");
        Ok(0)
    } else {
        eprintln!("violation: tensor inequalities not certified at tolerance {TENSOR_TOL:e}");
        Ok(1)
    }
}

/// JSON summary of an `ode-oracle` run.
#[derive(Debug, Clone, Serialize)]
struct OdeSummary {
    config: RunConfig,
    model: String,
    extinction: f64,
    samples: usize,
}

fn ode_oracle(args: &CommonArgs) -> Result<i32> {
    let cfg = args.load()?;
    let model = cfg.model()?;
    let ode = cfg.oracle_ode()?;
    let dir = args.out_dir(&cfg);
    ensure_dir(&dir)?;

    report::write_ode_csv(&dir.join("ode.csv"), &ode, cfg.oracle.samples)?;
    let summary = OdeSummary {
        config: cfg.clone(),
        model: match model {
            Ambient::R4 => "r4".to_owned(),
            Ambient::S4 { .. } => "s4".to_owned(),
            Ambient::H4 { .. } => "h4".to_owned(),
        },
        extinction: ode.extinction(),
        samples: cfg.oracle.samples,
    };
    report::write_json(&dir.join("ode.json"), &summary)?;

    println!("ode-oracle: extinction = {}", report::fmt(ode.extinction()));
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_line_grammar_parses() {
        let cli = Cli::try_parse_from([
            "pinchflow",
            "simulate",
            "--config",
            "run.toml",
            "--out",
            "results",
            "--seed",
            "7",
        ])
        .unwrap();
        match cli.command {
            Command::Simulate(args) => {
                assert_eq!(args.config.as_deref(), Some(Path::new("run.toml")));
                assert_eq!(args.out.as_deref(), Some(Path::new("results")));
                assert_eq!(args.seed, Some(7));
            }
            other => panic!("wrong subcommand: {other:?}"),
        }

        let cli = Cli::try_parse_from([
            "pinchflow",
            "scan-reaction",
            "--k",
            "0.7",
            "--kbar",
            "-1",
            "--samples",
            "1000",
            "--scales",
            "0.1,1,10",
            "--convention",
            "legacy-ab",
            "--tolerance",
            "1e-10",
        ])
        .unwrap();
        match cli.command {
            Command::ScanReaction(args) => {
                assert_eq!(args.k, Some(0.7));
                assert_eq!(args.kbar, Some(-1.0));
                assert_eq!(args.samples, Some(1000));
                assert_eq!(args.scales, Some(vec![0.1, 1.0, 10.0]));
                assert_eq!(args.convention.as_deref(), Some("legacy-ab"));
                assert_eq!(args.tolerance, Some(1e-10));
            }
            other => panic!("wrong subcommand: {other:?}"),
        }

        assert!(Cli::try_parse_from(["pinchflow", "unknown-sub"]).is_err());
        assert!(Cli::try_parse_from(["pinchflow"]).is_err());
    }

    #[test]
    fn tensor_flags_override_the_config_section() {
        let cli = Cli::try_parse_from([
            "pinchflow",
            "tensor-tests",
            "--samples",
            "500",
            "--refine",
            "3",
            "--seed",
            "9",
        ])
        .unwrap();
        match cli.command {
            Command::TensorTests(args) => {
                assert_eq!(args.samples, Some(500));
                assert_eq!(args.refine, Some(3));
                assert_eq!(args.common.seed, Some(9));
            }
            other => panic!("wrong subcommand: {other:?}"),
        }
    }
}
