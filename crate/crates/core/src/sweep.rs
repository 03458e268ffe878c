//! Config-driven experiment sweeps: for each (seed, n) cell, draw fresh
//! consumer sets from the base pool, play the strategy, compute the lower
//! bound, fit the platform, and measure the true test-time success.
//!
//! Cells run independently in parallel and are internally deterministic, so
//! identical configs and seeds give byte-identical output files. Wall-clock
//! timings never enter the output (they go to standard error in the CLI);
//! everything written is a pure function of the config.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    erasing_bound, fmt_f64, naive_unplanting_bound, planting_bound_fl, planting_bound_fo,
    unplanting_bound, BoundParams, BoundReport,
};
use crate::car;
use crate::error::{Error, Result};
use crate::platform::{
    assemble_training, evaluate_success, fit_argmax_classifier, FallbackPolicy, SuccessMetric,
    TiePolicy,
};
use crate::strategies::{
    apply_erasure, apply_feature_label, apply_feature_only, apply_unplanting,
    estimate_erasure_labels, estimate_unplant_labels, EscapeSelector, Transformation,
};
use crate::tabular::{read_csv_path, Dataset, LabelId, Role, Universe};

/// Which strategy variant a sweep exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepObjective {
    PlantFl,
    PlantFo,
    UnplantNaive,
    UnplantAdaptive,
    Erase,
}

impl SweepObjective {
    pub fn needs_target(self) -> bool {
        !matches!(self, SweepObjective::Erase)
    }

    fn metric(self) -> SuccessMetric {
        match self {
            SweepObjective::PlantFl | SweepObjective::PlantFo => SuccessMetric::Planting,
            SweepObjective::UnplantNaive | SweepObjective::UnplantAdaptive => {
                SuccessMetric::Unplanting
            }
            SweepObjective::Erase => SuccessMetric::Erasing,
        }
    }
}

impl std::str::FromStr for SweepObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plant-fl" => Ok(Self::PlantFl),
            "plant-fo" => Ok(Self::PlantFo),
            "unplant-naive" => Ok(Self::UnplantNaive),
            "unplant-adaptive" => Ok(Self::UnplantAdaptive),
            "erase" => Ok(Self::Erase),
            other => Err(Error::InvalidParams(format!("unknown objective {other:?}"))),
        }
    }
}

/// Where the base pool comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    /// Generate the vehicle dataset in-process.
    Generate {
        rows: u64,
        seed: u64,
        #[serde(default)]
        config_path: Option<PathBuf>,
    },
    /// Load a CSV dataset; the schema defaults to the vehicle one.
    Csv {
        path: PathBuf,
        #[serde(default)]
        schema_path: Option<PathBuf>,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Generate { rows: 3_000_000, seed: 0, config_path: None }
    }
}

/// Output format for sweep results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidParams(format!("unknown format {other:?}"))),
        }
    }
}

fn default_n() -> u64 {
    1_000_000
}

fn default_n_test() -> u64 {
    100_000
}

fn default_delta() -> f64 {
    0.05
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Everything a sweep needs. Loadable from JSON; unspecified fields take
/// the headline experiment defaults (N = 1,000,000, N_test = 100,000,
/// δ = 0.05, ε = 0).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub objective: SweepObjective,
    #[serde(default = "default_n")]
    pub n_consumers: u64,
    #[serde(default = "default_n_test")]
    pub n_test: u64,
    pub n_grid: Vec<u64>,
    /// Fixed estimation-split size (adaptive unplanting).
    #[serde(default)]
    pub n_e: Option<u64>,
    /// Alternative: n_e as a fraction of n, with an optional floor.
    #[serde(default)]
    pub n_e_fraction: Option<f64>,
    #[serde(default)]
    pub n_e_floor: Option<u64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub epsilon: f64,
    /// A1 margin (erasing).
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Target label name; required unless erasing.
    #[serde(default)]
    pub y_star: Option<String>,
    #[serde(default)]
    pub dataset: DatasetSource,
    /// `{"fix": {feature: category, ...}}`; defaults to the vehicle profile.
    #[serde(default)]
    pub transformation: Option<serde_json::Value>,
    /// Constant escape vector as {feature: category, ...}; defaults to
    /// flipping one fixed feature.
    #[serde(default)]
    pub escape: Option<serde_json::Value>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn n_e_for(&self, n: u64) -> Option<u64> {
        if let Some(ne) = self.n_e {
            return Some(ne);
        }
        self.n_e_fraction.map(|f| {
            let ne = (n as f64 * f).floor() as u64;
            ne.max(self.n_e_floor.unwrap_or(1)).max(1)
        })
    }
}

/// One completed sweep cell.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub seed: u64,
    pub n: u64,
    pub n_e: Option<u64>,
    pub bound: f64,
    pub bound_clamped: f64,
    pub success: f64,
    pub cracked: usize,
    /// Measured, never serialized: timings would break rerun determinism.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// A cell that could not run, with the violated precondition.
#[derive(Debug, Clone)]
pub struct SkippedCell {
    pub seed: u64,
    pub n: u64,
    pub reason: String,
}

/// Completed rows sorted by (seed, n), plus skipped cells.
#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub skipped: Vec<SkippedCell>,
}

fn resolve_label(universe: &Universe, cfg: &ExperimentConfig) -> Result<Option<LabelId>> {
    if !cfg.objective.needs_target() {
        return Ok(None);
    }
    let name = cfg.y_star.as_deref().ok_or_else(|| {
        Error::InvalidParams("this objective needs a target label (y_star)".into())
    })?;
    Ok(Some(universe.label_id(name)?))
}

fn vector_from_json(value: &serde_json::Value, universe: &Universe) -> Result<Vec<u16>> {
    let map = value
        .as_object()
        .ok_or_else(|| Error::InvalidParams("expected {feature: category, ...}".into()))?;
    let mut x = vec![None; universe.num_features()];
    for (name, cat) in map {
        let idx = universe
            .feature_index(name)
            .ok_or_else(|| Error::UnknownCategory(name.clone()))?;
        let cat = cat
            .as_str()
            .and_then(|c| universe.feature(idx).category_id(c))
            .ok_or_else(|| Error::UnknownCategory(format!("{name}={cat}")))?;
        x[idx] = Some(cat);
    }
    x.into_iter()
        .enumerate()
        .map(|(i, c)| {
            c.ok_or_else(|| {
                Error::InvalidParams(format!(
                    "escape vector misses feature {:?}",
                    universe.feature(i).name
                ))
            })
        })
        .collect()
}

/// Load or generate the base pool and resolve the transformation and escape
/// selector against its universe.
pub fn resolve_inputs(
    cfg: &ExperimentConfig,
) -> Result<(Dataset, Transformation, EscapeSelector)> {
    let base = match &cfg.dataset {
        DatasetSource::Generate { rows, seed, config_path } => {
            let gen_cfg = match config_path {
                Some(p) => car::GeneratorConfig::from_json(&std::fs::read_to_string(p)?)?,
                None => car::GeneratorConfig::default(),
            };
            car::generate_base_dataset(*rows, *seed, &gen_cfg)?
        }
        DatasetSource::Csv { path, schema_path } => {
            let universe = match schema_path {
                Some(p) => {
                    std::sync::Arc::new(serde_json::from_str::<Universe>(
                        &std::fs::read_to_string(p)?,
                    )?)
                }
                None => car::car_universe(),
            };
            read_csv_path(path, &universe, Role::Base)?
        }
    };
    let g = match &cfg.transformation {
        Some(v) => Transformation::from_json(v, base.universe())?,
        None => car::signal_transformation(base.universe()),
    };
    let escape = match &cfg.escape {
        Some(v) => EscapeSelector::Constant(vector_from_json(v, base.universe())?),
        None => EscapeSelector::FlipFixed,
    };
    Ok((base, g, escape))
}

/// Resolve the config and run the full sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    let (base, g, escape) = resolve_inputs(cfg)?;
    run_cells(cfg, &base, &g, &escape)
}

/// Run every (seed, n) cell of the sweep against an already-resolved base
/// pool. Cells run in parallel; the outcome is sorted by (seed, n).
pub fn run_cells(
    cfg: &ExperimentConfig,
    base: &Dataset,
    g: &Transformation,
    escape: &EscapeSelector,
) -> Result<SweepOutcome> {
    let want = (cfg.n_consumers + cfg.n_test) as usize;
    if want > base.len() {
        return Err(Error::InvalidParams(format!(
            "base pool has {} rows, need N + N_test = {want}",
            base.len()
        )));
    }
    if cfg.n_grid.is_empty() {
        return Err(Error::InvalidParams("empty n grid".into()));
    }
    let y_star = resolve_label(base.universe(), cfg)?;

    let cells: Vec<(u64, u64)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| cfg.n_grid.iter().map(move |&n| (s, n)))
        .collect();
    let results: Vec<std::result::Result<SweepRow, SkippedCell>> = cells
        .par_iter()
        .map(|&(seed, n)| {
            run_cell(cfg, base, g, escape, y_star, seed, n)
                .map_err(|e| SkippedCell { seed, n, reason: e.to_string() })
        })
        .collect();

    let mut outcome = SweepOutcome::default();
    for r in results {
        match r {
            Ok(row) => outcome.rows.push(row),
            Err(skip) => outcome.skipped.push(skip),
        }
    }
    outcome.rows.sort_by_key(|r| (r.seed, r.n));
    outcome.skipped.sort_by_key(|s| (s.seed, s.n));
    Ok(outcome)
}

fn run_cell(
    cfg: &ExperimentConfig,
    base: &Dataset,
    g: &Transformation,
    escape: &EscapeSelector,
    y_star: Option<LabelId>,
    seed: u64,
    n: u64,
) -> Result<SweepRow> {
    let start = Instant::now();
    if n == 0 || n >= cfg.n_consumers {
        return Err(Error::InvalidParams(format!(
            "need 0 < n < N, got n={n} N={}",
            cfg.n_consumers
        )));
    }
    let cell_seed = crate::mix_seed(seed, n);
    let rest_n = (cfg.n_consumers - n) as usize;
    let mut parts =
        base.draw_disjoint(&[n as usize, rest_n, cfg.n_test as usize], cell_seed)?;
    let mut d_test = parts.pop().unwrap();
    let mut d_rest = parts.pop().unwrap();
    let mut d_coll = parts.pop().unwrap();
    d_coll.set_role(Role::Collective);
    d_rest.set_role(Role::NonCollective);
    d_test.set_role(Role::Test);

    let n_e = match cfg.objective {
        SweepObjective::UnplantAdaptive => {
            let ne = cfg
                .n_e_for(n)
                .ok_or_else(|| Error::InvalidParams("adaptive unplanting needs n_e".into()))?;
            if ne >= n {
                return Err(Error::InvalidParams(format!("n_e={ne} not below n={n}")));
            }
            Some(ne)
        }
        _ => None,
    };
    let params = BoundParams {
        n_consumers: cfg.n_consumers,
        n_test: cfg.n_test,
        n_collective: n,
        n_estimation: n_e,
        delta: cfg.delta,
        epsilon: cfg.epsilon,
        eta: cfg.eta,
    };

    let (report, d_modified): (BoundReport, Dataset) = match cfg.objective {
        SweepObjective::PlantFl => {
            let y = y_star.unwrap();
            let report = planting_bound_fl(&d_coll, g, y, &params)?;
            (report, apply_feature_label(&d_coll, g, y)?)
        }
        SweepObjective::PlantFo => {
            let y = y_star.unwrap();
            let report = planting_bound_fo(&d_coll, g, y, escape, &params)?;
            (report, apply_feature_only(&d_coll, g, y, escape)?)
        }
        SweepObjective::UnplantNaive => {
            let y = y_star.unwrap();
            let (best, report) = naive_unplanting_bound(&d_coll, g, y, &params)?;
            (report, apply_feature_label(&d_coll, g, best)?)
        }
        SweepObjective::UnplantAdaptive => {
            let y = y_star.unwrap();
            let split_seed = crate::mix_seed(cell_seed, 1);
            let (d_est, d_restcoll) = d_coll.split(n_e.unwrap() as usize, split_seed)?;
            let report = unplanting_bound(&d_est, &d_restcoll, g, y, &params)?;
            let table = estimate_unplant_labels(&d_est, g, y)?;
            (report, apply_unplanting(&d_coll, g, &table)?)
        }
        SweepObjective::Erase => {
            let report = erasing_bound(&d_coll, g, &params)?;
            let table = estimate_erasure_labels(&d_coll, g)?;
            (report, apply_erasure(&d_coll, g, &table)?)
        }
    };

    let mix = assemble_training(&d_modified, &d_rest)?;
    let clf = fit_argmax_classifier(&mix, TiePolicy::default(), FallbackPolicy::default());
    let success = evaluate_success(&clf, &d_test, g, cfg.objective.metric(), y_star)?;

    Ok(SweepRow {
        seed,
        n,
        n_e,
        bound: report.bound,
        bound_clamped: report.bound_clamped,
        success,
        cracked: report.cracked_count(),
        wall_time: start.elapsed(),
    })
}

pub const SWEEP_CSV_HEADER: &str = "seed,n,n_e,bound,bound_clamped,success,cracked";

/// Write sweep rows as CSV (17-significant-digit floats) or JSON.
pub fn emit_results<W: Write>(rows: &[SweepRow], mut writer: W, format: OutputFormat) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyTable);
    }
    match format {
        OutputFormat::Csv => {
            writeln!(writer, "{SWEEP_CSV_HEADER}")?;
            for r in rows {
                let ne = r.n_e.map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    writer,
                    "{},{},{},{},{},{},{}",
                    r.seed,
                    r.n,
                    ne,
                    fmt_f64(r.bound),
                    fmt_f64(r.bound_clamped),
                    fmt_f64(r.success),
                    r.cracked
                )?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut writer, rows)?;
            writeln!(writer)?;
        }
    }
    Ok(())
}

pub fn emit_results_path(rows: &[SweepRow], path: &Path, format: OutputFormat) -> Result<()> {
    let file = std::fs::File::create(path)?;
    emit_results(rows, std::io::BufWriter::new(file), format)
}

/// Thread cap from the COLLUSION_THREADS environment variable, if set.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var("COLLUSION_THREADS").ok()?.parse().ok()
}
