//! Command-line entry point. Exit status: 0 success, 1 general failure,
//! 2 invalid scenario, 3 structural error (underdetermined or degenerate
//! problem), 4 inversion did not converge.

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use crate::forward::{design_fluxes, run_experiment, write_intensities_csv, ClassAmplitudes, FluxDesign};
use crate::fractal::{expected_length, fit_json, fit_power_law, length_scan, write_scaling_csv, FractalError, PipelineMode};
use crate::homotopy::representative_paths;
use crate::inversion::{
    aligned_error, identifiability_report, resolve_near_equivalents, solve, twin_aligned_error, write_amplitudes_csv,
    InversionError, InversionProblem,
};
use crate::oracle::{self, free_class_amplitudes};
use crate::propagator::{fig1_scan_with_length, write_fig1_csv};
use crate::scenario::{ModeName, Scenario};
use crate::seeds;

pub const EXIT_GENERAL: i32 = 1;
pub const EXIT_INVALID_SCENARIO: i32 = 2;
pub const EXIT_STRUCTURAL: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ab-homotopy", version, about = "Homotopy-resolved Aharonov-Bohm propagators and path-length scaling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// AB minus semiclassical propagator over the (h, alpha) grid → fig1.csv
    Fig1(CommonArgs),
    /// Oracle amplitudes → flux design → intensities → inversion → summary.json
    Experiment(CommonArgs),
    /// Length scan over the spacing ladder and power-law fit → scaling.csv, fit.json
    Hausdorff(CommonArgs),
    /// Parse and validate a scenario without computing anything
    Validate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory (default: the scenario's output_dir, else ./out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel stages
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Overrides the scenario's master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pipeline for `hausdorff` (default: the scenario's hausdorff.mode)
    #[arg(long, value_enum)]
    pub mode: Option<ModeName>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

fn general<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::new(EXIT_GENERAL, format!("{stage}: {e}"))
}

fn structural<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::new(EXIT_STRUCTURAL, format!("{stage}: {e}"))
}

/// Parses `args` (including the program name) and runs; returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_GENERAL } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn common(cmd: &Command) -> &CommonArgs {
    match cmd {
        Command::Fig1(a) | Command::Experiment(a) | Command::Hausdorff(a) | Command::Validate(a) => a,
    }
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let args = common(&cli.command);
    let mut scenario = Scenario::load(&args.scenario).map_err(|e| CliError::new(EXIT_INVALID_SCENARIO, format!("invalid scenario: {e}")))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Command::Validate(_) = cli.command {
        return Ok(format!("ok: {} solenoids, n_cut {}", scenario.array_size(), scenario.n_cut));
    }
    let out = args
        .out
        .clone()
        .or_else(|| scenario.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).map_err(general("creating output directory"))?;
    let work = || match &cli.command {
        Command::Fig1(_) => cmd_fig1(&scenario, &out),
        Command::Experiment(_) => cmd_experiment(&scenario, &out),
        Command::Hausdorff(_) => cmd_hausdorff(&scenario, &out, args.mode.unwrap_or(scenario.hausdorff.mode).into()),
        Command::Validate(_) => unreachable!(),
    };
    match args.jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().map_err(general("thread pool"))?;
            pool.install(work)
        }
        None => work(),
    }
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(dir.join(name), bytes).map_err(|e| CliError::new(EXIT_GENERAL, format!("writing {name}: {e}")))
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(general("serialising json"))?;
    s.push('\n');
    Ok(s.into_bytes())
}

pub fn cmd_fig1(scenario: &Scenario, out: &Path) -> Result<String, CliError> {
    let f = &scenario.fig1;
    let rows = fig1_scan_with_length(&f.h_grid, &f.alpha_grid, &scenario.propagator_params(), f.length).map_err(general("fig1 scan"))?;
    let mut buf = Vec::new();
    write_fig1_csv(&rows, &mut buf).map_err(general("fig1.csv"))?;
    write_file(out, "fig1.csv", &buf)?;
    Ok(format!("fig1: {} rows", rows.len()))
}

#[derive(Serialize)]
struct ExperimentSummary {
    seed: u64,
    n_solenoids: usize,
    n_classes: usize,
    n_sets: usize,
    design_condition: f64,
    design_attempts: u64,
    converged: bool,
    iterations: usize,
    residual_rms: f64,
    multistart_best_of: usize,
    best_start: usize,
    gauge_anchor_class: usize,
    aligned_error: f64,
    twin_aligned_error: f64,
    oracle_overflow_abs: f64,
    expected_length_oracle: Option<f64>,
    expected_length_recovered: Option<f64>,
    design_flags: Vec<String>,
}

pub fn cmd_experiment(scenario: &Scenario, out: &Path) -> Result<String, CliError> {
    let array = scenario.build_array().map_err(|e| CliError::new(EXIT_INVALID_SCENARIO, e.to_string()))?;
    let lattice = free_class_amplitudes(&array, &scenario.lattice_params(), &scenario.lattice_spec(), scenario.n_cut)
        .map_err(structural("lattice oracle"))?;
    let mut buf = Vec::new();
    oracle::write_amplitudes_csv(&lattice, &mut buf).map_err(general("amplitudes_oracle.csv"))?;
    write_file(out, "amplitudes_oracle.csv", &buf)?;
    let truth = ClassAmplitudes { classes: lattice.classes.clone(), values: lattice.amplitudes.clone() };

    let paths = representative_paths(&truth.classes, &array).map_err(structural("representative paths"))?;
    let lengths: Vec<Option<f64>> = paths.iter().map(|p| p.as_ref().map(|p| p.length())).collect();

    let d = &scenario.design;
    let report = design_fluxes(&truth.classes, d.oversampling, d.noise_level, seeds::derive(scenario.seed, "design"))
        .map_err(structural("flux design"))?;
    let mut sets = report.design.sets.clone();
    if let Some(n) = d.n_sets {
        sets.truncate(n);
    }
    let design = FluxDesign { sets, ..report.design.clone() };
    let exp = run_experiment(&design, &truth).map_err(structural("forward model"))?;
    let mut buf = Vec::new();
    write_intensities_csv(&exp, &mut buf).map_err(general("intensities.csv"))?;
    write_file(out, "intensities.csv", &buf)?;

    let ident = identifiability_report(&exp.sets, &truth.classes).map_err(structural("identifiability"))?;
    write_file(out, "identifiability.json", &to_json(&ident)?)?;

    let problem = InversionProblem::from_experiment(&exp, &truth.classes).map_err(structural("inversion"))?;
    let opts = crate::inversion::SolveOptions { seed: seeds::derive(scenario.seed, "inversion"), ..scenario.solve_options() };
    let result = solve(&problem, &opts).map_err(|e| match e {
        InversionError::Domain(_) => CliError::new(EXIT_GENERAL, format!("inversion: {e}")),
        _ => CliError::new(EXIT_STRUCTURAL, format!("inversion: {e}")),
    })?;
    let recovered = resolve_near_equivalents(&problem, &result, &lengths, &opts).map_err(general("ambiguity resolution"))?;
    let mut buf = Vec::new();
    write_amplitudes_csv(&recovered, &mut buf).map_err(general("amplitudes_recovered.csv"))?;
    write_file(out, "amplitudes_recovered.csv", &buf)?;

    let floor = scenario.hausdorff.normalization_floor;
    let zero = Complex64::new(0.0, 0.0);
    let summary = ExperimentSummary {
        seed: scenario.seed,
        n_solenoids: array.len(),
        n_classes: truth.classes.len(),
        n_sets: exp.sets.len(),
        design_condition: report.condition,
        design_attempts: report.attempts,
        converged: result.converged,
        iterations: result.iterations,
        residual_rms: result.residual_rms,
        multistart_best_of: result.multistart_best_of,
        best_start: result.best_start,
        gauge_anchor_class: truth.classes[result.gauge_anchor].index,
        aligned_error: aligned_error(&recovered.values, &truth.values).map_err(general("aligned error"))?,
        twin_aligned_error: twin_aligned_error(&recovered, &truth.values).map_err(general("aligned error"))?,
        oracle_overflow_abs: lattice.overflow.norm(),
        expected_length_oracle: expected_length(&truth.values, &lengths, lattice.overflow, floor).ok().map(|e| e.reported),
        expected_length_recovered: expected_length(&recovered.values, &lengths, zero, floor).ok().map(|e| e.reported),
        design_flags: ident.flags.iter().map(|f| format!("{f:?}")).collect(),
    };
    write_file(out, "summary.json", &to_json(&summary)?)?;
    if !result.converged {
        return Err(CliError::new(EXIT_NOT_CONVERGED, format!("inversion did not converge in {} iterations", result.iterations)));
    }
    Ok(format!("experiment: {} classes, {} sets, aligned error {:.3e}", summary.n_classes, summary.n_sets, summary.aligned_error))
}

pub fn cmd_hausdorff(scenario: &Scenario, out: &Path, mode: PipelineMode) -> Result<String, CliError> {
    let cfg = scenario.scan_config(mode);
    let series = length_scan(&cfg, &scenario.spacings(), mode).map_err(|e| {
        let code = match &e {
            FractalError::Stage { stage: "inversion", structural: false, .. } => EXIT_NOT_CONVERGED,
            FractalError::Stage { structural: true, .. } => EXIT_STRUCTURAL,
            _ => EXIT_GENERAL,
        };
        CliError::new(code, format!("{} scan: {e}", mode.name()))
    })?;
    let fitted = fit_power_law(&series).map_err(general("power-law fit"))?;
    let mut buf = Vec::new();
    write_scaling_csv(&fitted, &mut buf).map_err(general("scaling.csv"))?;
    write_file(out, "scaling.csv", &buf)?;
    let mut json = fit_json(&fitted).map_err(general("fit.json"))?;
    json.push('\n');
    write_file(out, "fit.json", json.as_bytes())?;
    let fit = fitted.fit.expect("fit present after fit_power_law");
    Ok(format!("hausdorff ({}): d_H = {:.4}, r^2 = {:.6}", mode.name(), fit.d_h, fit.r_squared))
}
