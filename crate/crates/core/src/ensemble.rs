//! Disorder averages over an `(L, ε, F)` grid.
//!
//! Realization `i` at size `L` uses the disorder seed
//! `derive_seed(master_seed, L, i)`, shared by every field and energy density,
//! so one diagonalization serves all `ε` of a column and the `F` dependence
//! is measured on common disorder. Results are reduced in realization order
//! and therefore do not depend on the number of workers.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entanglement::{entropy_stats, Bipartition};
use crate::fock::{binomial, enumerate_basis};
use crate::model::{build_hamiltonian, derive_seed, sample_disorder, LatticeParams};
use crate::par::{self, Execution};
use crate::spectra::{self, gap_ratios, Solver, DEFAULT_WINDOW};
use crate::{Error, Result};

/// Energy-density range accepted in sweep configurations.
pub const EPS_RANGE: (f64, f64) = (0.15, 0.85);

/// Realizations per size when the configuration does not say otherwise.
pub fn default_samples(sites: usize) -> usize {
    match sites {
        0..=10 => 400,
        11..=12 => 200,
        13..=14 => 100,
        15..=16 => 50,
        _ => 20,
    }
}

fn default_eps() -> Vec<f64> {
    spectra::default_eps_grid()
}
fn default_disorder() -> f64 {
    0.5
}
fn unit() -> f64 {
    1.0
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Chain lengths `L`, each even; the filling is `N = L/2`.
    pub sizes: Vec<usize>,
    /// Field strengths `F`.
    pub fields: Vec<f64>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    /// Disorder strength `W`.
    #[serde(default = "default_disorder")]
    pub disorder: f64,
    /// `J`
    #[serde(default = "unit")]
    pub hopping: f64,
    /// `U`
    #[serde(default = "unit")]
    pub interaction: f64,
    /// Realizations per size; sizes missing here use [`default_samples`].
    #[serde(default)]
    pub samples: BTreeMap<usize, usize>,
    pub master_seed: u64,
    #[serde(default = "default_window")]
    pub k_window: usize,
    #[serde(default)]
    pub solver: Solver,
    /// Results CSV; the metadata sidecar and checkpoints are placed next to it.
    pub output: PathBuf,
}

fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(f64::total_cmp);
    v.dedup();
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "sweep config".into(),
            message: e.to_string(),
        })
    }

    pub fn samples_for(&self, sites: usize) -> usize {
        self.samples
            .get(&sites)
            .copied()
            .unwrap_or_else(|| default_samples(sites))
    }

    /// Grids sorted ascending without duplicates.
    pub fn canonical(&self) -> SweepConfig {
        let mut c = self.clone();
        c.sizes.sort_unstable();
        c.sizes.dedup();
        sort_dedup(&mut c.fields);
        sort_dedup(&mut c.eps);
        c
    }

    pub fn validate(&self) -> Result<()> {
        let field_err = |field: &str, msg: String| Error::param(format!("config field `{field}`: {msg}"));
        if self.sizes.is_empty() {
            return Err(field_err("sizes", "must not be empty".into()));
        }
        if self.fields.is_empty() {
            return Err(field_err("fields", "must not be empty".into()));
        }
        if self.eps.is_empty() {
            return Err(field_err("eps", "must not be empty".into()));
        }
        for &l in &self.sizes {
            if !l.is_multiple_of(2) || !(4..=crate::fock::MAX_SITES).contains(&l) {
                return Err(field_err(
                    "sizes",
                    format!("L = {l} must be even and between 4 and {}", crate::fock::MAX_SITES),
                ));
            }
            if (binomial(l, l / 2) as usize) < self.k_window {
                return Err(field_err(
                    "k_window",
                    format!("{} exceeds the dimension at L = {l}", self.k_window),
                ));
            }
        }
        if let Some(f) = self.fields.iter().find(|f| !(**f >= 0.0 && f.is_finite())) {
            return Err(field_err("fields", format!("F = {f} must be finite and >= 0")));
        }
        if let Some(e) = self
            .eps
            .iter()
            .find(|e| !(**e >= EPS_RANGE.0 - 1e-9 && **e <= EPS_RANGE.1 + 1e-9))
        {
            return Err(field_err(
                "eps",
                format!("{e} outside [{}, {}]", EPS_RANGE.0, EPS_RANGE.1),
            ));
        }
        if !(self.disorder >= 0.0 && self.disorder.is_finite()) {
            return Err(field_err("disorder", format!("W = {} must be >= 0", self.disorder)));
        }
        if !self.hopping.is_finite() || !self.interaction.is_finite() {
            return Err(field_err("hopping", "J and U must be finite".into()));
        }
        if self.k_window < 3 {
            return Err(field_err("k_window", format!("{} < 3", self.k_window)));
        }
        if let Some((l, _)) = self.samples.iter().find(|(_, &n)| n == 0) {
            return Err(field_err("samples", format!("L = {l} needs at least one realization")));
        }
        Ok(())
    }

    /// SHA-256 of the canonical configuration as JSON, without the output
    /// path: moving the results does not change what was computed.
    pub fn hash(&self) -> String {
        let mut canonical = self.canonical();
        canonical.output = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn params(&self, sites: usize, field: f64) -> LatticeParams {
        LatticeParams {
            hopping: self.hopping,
            interaction: self.interaction,
            ..LatticeParams::half_filled(sites, field, self.disorder)
        }
    }

    pub fn metadata_path(&self) -> PathBuf {
        sibling(&self.output, "meta.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        sibling(&self.output, "manifest.json")
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        sibling(&self.output, "ckpt")
    }
}

/// `dir/results.csv` → `dir/results.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    #[serde(rename = "L")]
    pub sites: usize,
    pub eps: f64,
    #[serde(rename = "F")]
    pub field: f64,
    pub mean_r: f64,
    pub stderr_r: f64,
    #[serde(rename = "mean_S")]
    pub mean_s: f64,
    #[serde(rename = "var_S")]
    pub var_s: f64,
    pub n_realizations: usize,
    pub n_eigenpairs: usize,
    pub dropped_ratios: usize,
    pub master_seed: u64,
}

/// A record together with the per-realization means it was reduced from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub record: EnsembleRecord,
    pub realization_mean_r: Vec<f64>,
    pub realization_mean_s: Vec<f64>,
}

struct WindowObservables {
    ratios: Vec<f64>,
    dropped: usize,
    entropies: Vec<f64>,
}

fn realization(
    params: &LatticeParams,
    cut: &Bipartition,
    basis: &crate::fock::FockBasis,
    eps: &[f64],
    k: usize,
    solver: Solver,
    seed: u64,
) -> Result<Vec<WindowObservables>> {
    let disorder = sample_disorder(params.disorder, params.sites, seed)?;
    let h = build_hamiltonian(params, &disorder, basis)?;
    let windows = spectra::windows(&h, eps, k, true, solver)?;
    windows
        .into_iter()
        .map(|w| {
            let ratios = gap_ratios(&w.eigenvalues)?;
            let entropies = w
                .eigenvectors
                .as_deref()
                .unwrap_or_default()
                .iter()
                .map(|v| cut.entropy(v))
                .collect::<Result<Vec<f64>>>()?;
            Ok(WindowObservables {
                ratios: ratios.r_values,
                dropped: ratios.dropped,
                entropies,
            })
        })
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// All energy densities of one `(L, F)` column, `n_samples` realizations.
#[allow(clippy::too_many_arguments)]
pub fn run_column(
    params: &LatticeParams,
    eps: &[f64],
    n_samples: usize,
    master_seed: u64,
    k: usize,
    solver: Solver,
    exec: Execution,
) -> Result<Vec<PointSummary>> {
    params.validate()?;
    if n_samples == 0 {
        return Err(Error::param("at least one realization is required"));
    }
    let basis = enumerate_basis(params.sites, params.particles)?;
    let cut = Bipartition::new(&basis)?;
    let per_realization = par::map_indexed(n_samples, exec, |i| {
        let seed = derive_seed(&[master_seed, params.sites as u64, i as u64]);
        realization(params, &cut, &basis, eps, k, solver, seed).map_err(|e| Error::Realization {
            index: i,
            source: Box::new(e),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    eps.iter()
        .enumerate()
        .map(|(j, &e)| {
            let windows: Vec<&WindowObservables> = per_realization.iter().map(|r| &r[j]).collect();
            let all_r: Vec<f64> = windows.iter().flat_map(|w| w.ratios.iter().copied()).collect();
            let all_s: Vec<f64> = windows.iter().flat_map(|w| w.entropies.iter().copied()).collect();
            let realization_mean_r: Vec<f64> = windows
                .iter()
                .filter(|w| !w.ratios.is_empty())
                .map(|w| mean(&w.ratios))
                .collect();
            let realization_mean_s: Vec<f64> = windows.iter().map(|w| mean(&w.entropies)).collect();
            if all_r.is_empty() {
                return Err(Error::param(format!(
                    "every gap ratio at L = {}, eps = {e}, F = {} was degenerate",
                    params.sites, params.field
                )));
            }
            let stats = entropy_stats(&all_s)?;
            let record = EnsembleRecord {
                sites: params.sites,
                eps: e,
                field: params.field,
                mean_r: mean(&all_r),
                stderr_r: standard_error(&realization_mean_r),
                mean_s: stats.mean,
                var_s: stats.variance,
                n_realizations: n_samples,
                n_eigenpairs: n_samples * k,
                dropped_ratios: windows.iter().map(|w| w.dropped).sum(),
                master_seed,
            };
            if !(0.35..=0.55).contains(&record.mean_r) {
                log::warn!(
                    "mean r = {:.4} at L = {}, eps = {e}, F = {} is outside the physical range",
                    record.mean_r,
                    params.sites,
                    params.field
                );
            }
            Ok(PointSummary {
                record,
                realization_mean_r,
                realization_mean_s,
            })
        })
        .collect()
}

/// Disorder average at a single `(L, ε, F)` point.
pub fn run_point(
    params: &LatticeParams,
    eps: f64,
    n_samples: usize,
    master_seed: u64,
    k: usize,
    solver: Solver,
    exec: Execution,
) -> Result<EnsembleRecord> {
    let mut col = run_column(params, &[eps], n_samples, master_seed, k, solver, exec)?;
    Ok(col.remove(0).record)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    /// Reuse checkpoints written by an earlier run with the same config hash.
    pub resume: bool,
    pub exec: Execution,
    /// Stop after computing this many new `(L, F)` columns.
    pub max_new_columns: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Sorted by `(L, eps, F)`. Partial when `complete` is false.
    pub records: Vec<EnsembleRecord>,
    pub complete: bool,
    pub config_hash: String,
    pub computed_columns: usize,
    pub resumed_columns: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ColumnCheckpoint {
    config_hash: String,
    sites: usize,
    field: f64,
    points: Vec<PointSummary>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SweepMetadata {
    config_hash: String,
    tool_version: String,
    config: SweepConfig,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = sibling(path, "tmp");
    let tmp = tmp.with_file_name(format!(
        ".{}",
        tmp.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn prepare_output(config: &SweepConfig) -> Result<()> {
    if let Some(parent) = config.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let dir = config.checkpoint_dir();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    fs::OpenOptions::new()
        .write(true)
        .create(true)
        .truncate(false)
        .open(&config.output)
        .map_err(|e| Error::io(&config.output, e))?;
    Ok(())
}

fn checkpoint_path(config: &SweepConfig, sites: usize, field: f64) -> PathBuf {
    config
        .checkpoint_dir()
        .join(format!("L{sites}_F{:016x}.json", field.to_bits()))
}

fn load_checkpoint(path: &Path, hash: &str, eps: &[f64]) -> Option<Vec<PointSummary>> {
    let text = fs::read_to_string(path).ok()?;
    let ck: ColumnCheckpoint = serde_json::from_str(&text).ok()?;
    let eps_match = ck.points.len() == eps.len()
        && ck.points.iter().zip(eps).all(|(p, e)| p.record.eps == *e);
    (ck.config_hash == hash && eps_match).then_some(ck.points)
}

pub fn run_sweep(config: &SweepConfig, options: SweepOptions) -> Result<SweepOutcome> {
    let config = config.canonical();
    config.validate()?;
    let hash = config.hash();
    prepare_output(&config)?;

    let meta = SweepMetadata {
        config_hash: hash.clone(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
    };
    let meta_json = serde_json::to_vec_pretty(&meta).expect("metadata serializes");
    write_atomic(&config.metadata_path(), &meta_json)?;

    let mut records = Vec::new();
    let mut computed = 0usize;
    let mut resumed = 0usize;
    let mut complete = true;
    'outer: for &l in &config.sizes {
        for &f in &config.fields {
            let path = checkpoint_path(&config, l, f);
            let cached = options
                .resume
                .then(|| load_checkpoint(&path, &hash, &config.eps))
                .flatten();
            let points = match cached {
                Some(points) => {
                    resumed += 1;
                    points
                }
                None => {
                    if options.max_new_columns.is_some_and(|m| computed >= m) {
                        complete = false;
                        break 'outer;
                    }
                    log::info!("computing L = {l}, F = {f} ({} realizations)", config.samples_for(l));
                    let points = run_column(
                        &config.params(l, f),
                        &config.eps,
                        config.samples_for(l),
                        config.master_seed,
                        config.k_window,
                        config.solver,
                        options.exec,
                    )?;
                    let ck = ColumnCheckpoint {
                        config_hash: hash.clone(),
                        sites: l,
                        field: f,
                        points,
                    };
                    let bytes = serde_json::to_vec(&ck).expect("checkpoint serializes");
                    write_atomic(&path, &bytes)?;
                    computed += 1;
                    ck.points
                }
            };
            records.extend(points.into_iter().map(|p| p.record));
        }
    }
    records.sort_by(|a, b| {
        a.sites
            .cmp(&b.sites)
            .then(a.eps.total_cmp(&b.eps))
            .then(a.field.total_cmp(&b.field))
    });
    if complete {
        write_atomic(&config.output, &results_csv(&records, &hash)?)?;
    }
    Ok(SweepOutcome {
        records,
        complete,
        config_hash: hash,
        computed_columns: computed,
        resumed_columns: resumed,
    })
}

/// CSV bytes: a `# config_sha256=...` line, the header, one row per record.
pub fn results_csv(records: &[EnsembleRecord], config_hash: &str) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    writeln!(buf, "# config_sha256={config_hash}").expect("write to Vec");
    let mut w = csv::Writer::from_writer(&mut buf);
    for r in records {
        w.serialize(r).map_err(|e| Error::Parse {
            context: "results csv".into(),
            message: e.to_string(),
        })?;
    }
    w.flush().expect("flush to Vec");
    drop(w);
    Ok(buf)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<EnsembleRecord>> {
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_slice());
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| Error::Parse {
                context: path.display().to_string(),
                message: e.to_string(),
            })
        })
        .collect()
}
