//! Command-line interface: `spectrum`, `sweep`, `collapse`, `phase-diagram`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::collapse::{self, default_w_grid, fit_collapse, mobility_edge, CollapseInput};
use crate::ensemble::{self, read_results_csv, run_sweep, SweepConfig, SweepOptions};
use crate::entanglement::Bipartition;
use crate::fock::{binomial, enumerate_basis};
use crate::model::{build_hamiltonian, sample_disorder, Boundary, LatticeParams};
use crate::par::Execution;
use crate::spectra::{self, gap_ratios, Solver, DENSE_MAX_DIM};
use crate::{Error, Result};

/// Environment variable that relocates every output into one directory.
pub const OUTPUT_DIR_ENV: &str = "STARKMBL_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "starkmbl", version, about = "Ergodic to Stark-MBL transition by exact diagonalization")]
pub struct Cli {
    /// Worker threads for realization-level parallelism (results do not depend on it).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues, gap ratios and entropies near one energy density for one realization.
    Spectrum(SpectrumArgs),
    /// Disorder-averaged observables over an (L, eps, F) grid from a JSON config.
    Sweep(SweepArgs),
    /// Finite-size-scaling collapse of <r>(F) at one energy density.
    Collapse(CollapseArgs),
    /// Collapse fits at every energy density: the mobility edge F_c(eps).
    PhaseDiagram(PhaseDiagramArgs),
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[arg(long = "L")]
    pub sites: usize,
    /// Particle number, defaults to L/2.
    #[arg(long = "N")]
    pub particles: Option<usize>,
    #[arg(long = "J", default_value_t = 1.0)]
    pub hopping: f64,
    #[arg(long = "U", default_value_t = 1.0)]
    pub interaction: f64,
    #[arg(long = "F", default_value_t = 0.0)]
    pub field: f64,
    #[arg(long = "W", default_value_t = 0.5)]
    pub disorder: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Window size; clamped to the Hilbert-space dimension.
    #[arg(long, default_value_t = spectra::DEFAULT_WINDOW)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "dense")]
    pub solver: SolverArg,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the Hamiltonian in coordinate text format to this file.
    #[arg(long)]
    pub dump_matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SolverArg {
    Dense,
    ShiftInvert,
    Auto,
}

impl From<SolverArg> for Solver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Dense => Solver::Dense,
            SolverArg::ShiftInvert => Solver::ShiftInvert,
            SolverArg::Auto => Solver::Auto,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Reuse checkpoints from an interrupted run with the same configuration.
    #[arg(long)]
    pub resume: bool,
    /// Compute at most this many new (L, F) columns, then stop.
    #[arg(long)]
    pub max_columns: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CollapseArgs {
    /// Results CSV written by `sweep`.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub eps: f64,
    /// Comma-separated window widths w.
    #[arg(long, value_delimiter = ',')]
    pub w_grid: Option<Vec<f64>>,
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PhaseDiagramArgs {
    #[arg(long)]
    pub results: PathBuf,
    /// Energy densities to fit; defaults to all present in the results.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub w_grid: Option<Vec<f64>>,
    #[arg(long, env = OUTPUT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Provenance record written next to the outputs of every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub master_seed: Option<u64>,
}

/// Outcome of a command that ran without error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    /// Sweep stopped early by `--max-columns`; rerun with `--resume`.
    Incomplete,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn run(cli: Cli) -> Result<Status> {
    let exec = Execution::with_threads(cli.threads);
    match cli.command {
        Command::Spectrum(args) => {
            print!("{}", cmd_spectrum(&args)?);
            Ok(Status::Done)
        }
        Command::Sweep(args) => cmd_sweep(&args, exec),
        Command::Collapse(args) => cmd_collapse(&args, exec).map(|_| Status::Done),
        Command::PhaseDiagram(args) => cmd_phase_diagram(&args, exec).map(|_| Status::Done),
    }
}

/// Text report for one realization; also returned for testing.
pub fn cmd_spectrum(args: &SpectrumArgs) -> Result<String> {
    let particles = args.particles.unwrap_or(args.sites / 2);
    if particles > args.sites {
        return Err(Error::Parameter(format!("N = {particles} exceeds L = {}", args.sites)));
    }
    let dim = binomial(args.sites, particles);
    if dim > DENSE_MAX_DIM as u64 || args.sites > crate::fock::MAX_SITES {
        return Err(Error::Resource(format!(
            "L = {}, N = {particles} has dimension {dim}, above the limit {DENSE_MAX_DIM}",
            args.sites
        )));
    }
    let params = LatticeParams {
        sites: args.sites,
        particles,
        hopping: args.hopping,
        interaction: args.interaction,
        field: args.field,
        disorder: args.disorder,
        boundary: Boundary::Open,
    };
    params.validate()?;
    let basis = enumerate_basis(args.sites, particles)?;
    let disorder = sample_disorder(args.disorder, args.sites, args.seed)?;
    let h = build_hamiltonian(&params, &disorder, &basis)?;
    if let Some(path) = &args.dump_matrix {
        let mut buf = Vec::new();
        h.write_coordinate(&mut buf).map_err(|e| Error::io(path, e))?;
        write_file(path, &buf)?;
    }

    let k = args.k.min(basis.dim());
    let window = spectra::windows(&h, &[args.eps], k, true, args.solver.into())?.remove(0);
    let cut = args.sites.is_multiple_of(2).then(|| Bipartition::new(&basis)).transpose()?;

    let mut out = String::new();
    let _ = writeln!(
        out,
        "# L={} N={} J={} U={} F={} W={} seed={} eps={} k={}",
        args.sites, particles, args.hopping, args.interaction, args.field, args.disorder, args.seed, args.eps, k
    );
    let _ = writeln!(
        out,
        "# E_min={} E_max={} E_target={}",
        window.e_min, window.e_max, window.target
    );
    let _ = writeln!(out, "level,energy,entropy");
    let vectors = window.eigenvectors.as_deref().unwrap_or_default();
    for (i, (e, v)) in window.eigenvalues.iter().zip(vectors).enumerate() {
        let s = match &cut {
            Some(c) => c.entropy(v)?.to_string(),
            None => String::new(),
        };
        let _ = writeln!(out, "{i},{e},{s}");
    }
    if window.len() >= 3 {
        let ratios = gap_ratios(&window.eigenvalues)?;
        let _ = writeln!(out, "# gap ratios (dropped={})", ratios.dropped);
        let _ = writeln!(out, "r");
        for r in &ratios.r_values {
            let _ = writeln!(out, "{r}");
        }
        if let Some(m) = ratios.mean() {
            let _ = writeln!(out, "# mean_r={m}");
        }
    }
    if let Some(path) = &args.out {
        write_file(path, out.as_bytes())?;
    }
    Ok(out)
}

pub fn load_sweep_config(path: &Path) -> Result<SweepConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = SweepConfig::from_json(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            context: path.display().to_string(),
            message,
        },
        other => other,
    })?;
    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        let name = config.output.file_name().map(PathBuf::from).unwrap_or_else(|| "results.csv".into());
        config.output = PathBuf::from(dir).join(name);
    } else if config.output.is_relative() {
        if let Some(base) = path.parent() {
            config.output = base.join(&config.output);
        }
    }
    Ok(config)
}

pub fn cmd_sweep(args: &SweepArgs, exec: Execution) -> Result<Status> {
    let started_at = now();
    let config = load_sweep_config(&args.config)?;
    let outcome = run_sweep(
        &config,
        SweepOptions {
            resume: args.resume,
            exec,
            max_new_columns: args.max_columns,
        },
    )?;
    if !outcome.complete {
        eprintln!(
            "sweep stopped after {} new columns; rerun with --resume to finish",
            outcome.computed_columns
        );
        return Ok(Status::Incomplete);
    }
    let manifest = RunManifest {
        command: "sweep".into(),
        config_hash: outcome.config_hash,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        finished_at: now(),
        inputs: vec![args.config.clone()],
        outputs: vec![config.output.clone(), config.metadata_path()],
        master_seed: Some(config.master_seed),
    };
    write_json(&config.manifest_path(), &manifest)?;
    Ok(Status::Done)
}

/// Hash recorded on the first line of a results CSV, if any.
fn source_hash(path: &Path) -> Option<String> {
    let text = fs::read_to_string(path).ok()?;
    text.lines()
        .next()?
        .strip_prefix("# config_sha256=")
        .map(str::to_owned)
}

#[derive(Debug, Serialize)]
struct CollapseReport<'a> {
    source_config_sha256: Option<String>,
    results: &'a Path,
    #[serde(flatten)]
    fit: &'a collapse::CollapseResult,
}

fn eps_tag(eps: f64) -> String {
    format!("{eps:.3}").trim_end_matches('0').trim_end_matches('.').to_owned()
}

/// Fit one energy density; returns the fit and the report/curve paths.
pub fn cmd_collapse(args: &CollapseArgs, exec: Execution) -> Result<(collapse::CollapseResult, Vec<PathBuf>)> {
    let started_at = now();
    let records = read_results_csv(&args.results)?;
    let input = CollapseInput::from_records(&records, args.eps)?;
    let w_grid = args.w_grid.clone().unwrap_or_else(default_w_grid);
    let fit = fit_collapse(&input, &w_grid, exec)?;
    if fit.unidentifiable {
        log::warn!("collapse at eps = {}: cost is flat, F_c is unidentifiable", args.eps);
    }
    if fit.boundary_hit {
        log::warn!("collapse at eps = {}: optimum on the search boundary", args.eps);
    }
    let hash = source_hash(&args.results);
    let tag = eps_tag(args.eps);
    let report_path = args.out_dir.join(format!("collapse_eps{tag}.json"));
    let curves_path = args.out_dir.join(format!("collapse_eps{tag}_rescaled.csv"));
    write_json(
        &report_path,
        &CollapseReport {
            source_config_sha256: hash.clone(),
            results: &args.results,
            fit: &fit,
        },
    )?;

    let mut csv = String::new();
    let _ = writeln!(csv, "# config_sha256={}", hash.as_deref().unwrap_or("unknown"));
    let _ = writeln!(csv, "# F_c={} nu={}", fit.field_c, fit.nu);
    let _ = writeln!(csv, "x,y,L");
    for (x, y, l) in collapse::rescaled_curves(&input, fit.field_c, fit.nu)? {
        let _ = writeln!(csv, "{x},{y},{l}");
    }
    write_file(&curves_path, csv.as_bytes())?;

    let manifest = RunManifest {
        command: "collapse".into(),
        config_hash: hash.unwrap_or_default(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        finished_at: now(),
        inputs: vec![args.results.clone()],
        outputs: vec![report_path.clone(), curves_path.clone()],
        master_seed: records.first().map(|r| r.master_seed),
    };
    write_json(&args.out_dir.join(format!("collapse_eps{tag}.manifest.json")), &manifest)?;
    Ok((fit, vec![report_path, curves_path]))
}

pub fn cmd_phase_diagram(args: &PhaseDiagramArgs, exec: Execution) -> Result<collapse::MobilityEdge> {
    let started_at = now();
    let records = read_results_csv(&args.results)?;
    let w_grid = args.w_grid.clone().unwrap_or_else(default_w_grid);
    let edge = mobility_edge(&records, args.eps.as_deref(), &w_grid, exec)?;
    if edge.points.is_empty() {
        return Err(Error::Parameter(
            "no energy density has at least 2 system sizes with 5 fields".into(),
        ));
    }
    let hash = source_hash(&args.results);
    let json_path = args.out_dir.join("phase_diagram.json");
    let csv_path = args.out_dir.join("phase_diagram.csv");
    write_json(&json_path, &edge)?;

    let mut csv = String::new();
    let _ = writeln!(csv, "# config_sha256={}", hash.as_deref().unwrap_or("unknown"));
    let _ = writeln!(csv, "eps,F_c,F_c_err,nu,nu_err,cost_min,boundary_hit,unidentifiable");
    for p in &edge.points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            p.eps, p.field_c, p.field_c_err, p.nu, p.nu_err, p.cost_min, p.boundary_hit, p.unidentifiable
        );
    }
    write_file(&csv_path, csv.as_bytes())?;

    let manifest = RunManifest {
        command: "phase-diagram".into(),
        config_hash: hash.unwrap_or_default(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        finished_at: now(),
        inputs: vec![args.results.clone()],
        outputs: vec![json_path, csv_path],
        master_seed: records.first().map(|r| r.master_seed),
    };
    write_json(&args.out_dir.join("phase_diagram.manifest.json"), &manifest)?;
    Ok(edge)
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) | Error::Parse { .. } | Error::NotFound { .. } => 2,
        Error::Resource(_) => 3,
        Error::Io { .. } => 4,
        Error::Solver(_) | Error::Realization { .. } => 5,
    }
}

pub use ensemble::EnsembleRecord;
