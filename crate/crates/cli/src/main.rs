//! Command-line driver: dataset generation and description, single bound
//! reports, experiment sweeps, and the infinite-data-regime comparison.
//!
//! Results go to the output file (or stdout), progress and timing to
//! standard error. COLLUSION_THREADS caps worker parallelism.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use collusion_core::bounds::{
    erasing_bound, fmt_f64, idr_curve, naive_unplanting_bound, planting_bound_fl,
    planting_bound_fo, prior_bound_planting, unplanting_bound, BoundParams, BoundReport,
    IdrObjective, PopulationDistribution,
};
use collusion_core::car;
use collusion_core::strategies::{EscapeSelector, Transformation};
use collusion_core::sweep::{
    emit_results_path, run_sweep, thread_cap_from_env, ExperimentConfig, SweepObjective,
};
use collusion_core::tabular::{
    empirical_joint, read_csv_path, write_csv_path, Role, Universe,
};

#[derive(Parser)]
#[command(
    name = "collusion",
    version,
    about = "Strategies, success lower bounds, and platform simulation for \
             coordinated data submission"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic vehicle dataset as CSV.
    Generate(GenerateArgs),
    /// Print cardinalities and signal-set label tallies of a dataset.
    Describe(DescribeArgs),
    /// Run a (seed x n) experiment sweep and write one row per run.
    Sweep(SweepArgs),
    /// Compute a single bound report from a collective CSV dataset.
    Bounds(BoundsArgs),
    /// Infinite-data-regime curves and the earlier planting bound.
    CompareIdr(CompareIdrArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of rows to draw.
    #[arg(long, default_value_t = 3_000_000)]
    rows: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator config JSON; defaults are built in.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DescribeArgs {
    /// Dataset CSV to describe.
    #[arg(long)]
    data: PathBuf,
    /// Schema JSON; defaults to the vehicle schema.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Transformation JSON ({"fix": {...}}); defaults to the vehicle profile.
    #[arg(long)]
    transform: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment config JSON. Fields present in the file override flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<SweepObjective>,
    /// Total consumers N.
    #[arg(long = "N")]
    n_consumers: Option<u64>,
    /// Test set size.
    #[arg(long = "Ntest")]
    n_test: Option<u64>,
    /// Comma-separated collective sizes, e.g. 1000,5000,20000.
    #[arg(long = "n-grid", value_delimiter = ',')]
    n_grid: Option<Vec<u64>>,
    /// Fixed estimation-split size.
    #[arg(long)]
    ne: Option<u64>,
    /// Estimation split as a fraction of n.
    #[arg(long)]
    ne_fraction: Option<f64>,
    #[arg(long)]
    ne_floor: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// A1 margin (erasing).
    #[arg(long)]
    eta: Option<f64>,
    /// Comma-separated seeds, or an inclusive-exclusive range like 0..40.
    #[arg(long)]
    seeds: Option<String>,
    /// Target label name.
    #[arg(long)]
    ystar: Option<String>,
    /// Base dataset CSV; omitted means generate in-process.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Rows to generate when no --data is given.
    #[arg(long)]
    generate_rows: Option<u64>,
    #[arg(long)]
    generate_seed: Option<u64>,
    /// Generator config JSON for in-process generation.
    #[arg(long)]
    generator_config: Option<PathBuf>,
    /// Transformation JSON file.
    #[arg(long)]
    transform: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Collective dataset CSV (its row count is n).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    objective: SweepObjective,
    #[arg(long = "N")]
    n_consumers: u64,
    #[arg(long = "Ntest")]
    n_test: u64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Estimation-split size (adaptive unplanting).
    #[arg(long)]
    ne: Option<u64>,
    /// Split seed for the estimation draw.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// A1 margin (erasing).
    #[arg(long)]
    eta: Option<f64>,
    /// Target label name.
    #[arg(long)]
    ystar: Option<String>,
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Report JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareIdrArgs {
    /// Population dataset CSV (treated as the exact population).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Target label name for the planting and unplanting columns.
    #[arg(long)]
    ystar: String,
    /// Number of evenly spaced alpha values in (0, 1).
    #[arg(long, default_value_t = 99)]
    alpha_points: usize,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_universe(schema: &Option<PathBuf>) -> Result<Arc<Universe>> {
    Ok(match schema {
        Some(p) => Arc::new(
            serde_json::from_str(&std::fs::read_to_string(p).context("reading schema")?)
                .context("parsing schema")?,
        ),
        None => car::car_universe(),
    })
}

fn load_transformation(
    transform: &Option<PathBuf>,
    universe: &Universe,
) -> Result<Transformation> {
    Ok(match transform {
        Some(p) => {
            let value: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(p).context("reading transform")?)?;
            Transformation::from_json(&value, universe)?
        }
        None => car::signal_transformation(universe),
    })
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse()?;
        let b: u64 = b.trim().parse()?;
        if a >= b {
            bail!("empty seed range {text}");
        }
        return Ok((a..b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().map_err(Into::into))
        .collect()
}

fn main() -> Result<()> {
    if let Some(threads) = thread_cap_from_env() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("building thread pool")?;
    }
    match Cli::parse().command {
        Command::Generate(args) => generate(args),
        Command::Describe(args) => describe(args),
        Command::Sweep(args) => sweep(args),
        Command::Bounds(args) => bounds(args),
        Command::CompareIdr(args) => compare_idr(args),
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let config = match &args.config {
        Some(p) => car::GeneratorConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => car::GeneratorConfig::default(),
    };
    let start = Instant::now();
    let dataset = car::generate_base_dataset(args.rows, args.seed, &config)?;
    eprintln!("generated {} rows in {:.1}s", dataset.len(), start.elapsed().as_secs_f64());
    write_csv_path(&args.out, &dataset)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn describe(args: DescribeArgs) -> Result<()> {
    let universe = load_universe(&args.schema)?;
    let dataset = read_csv_path(&args.data, &universe, Role::Base)?;
    let g = load_transformation(&args.transform, &universe)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();

    writeln!(out, "rows: {}", dataset.len())?;
    writeln!(out, "features: {}", universe.num_features())?;
    writeln!(out, "labels: {} ({})", universe.num_labels(), universe.labels().join(", "))?;
    writeln!(out, "feature space size: {}", universe.feature_cardinality())?;
    writeln!(out, "signal set size: {}", g.signal_cardinality(&universe))?;

    let tally = car::signal_label_tally(&dataset, &g);
    let signal_rows: u64 = tally.values().map(|c| c.iter().sum::<u64>()).sum();
    writeln!(
        out,
        "signal rows: {signal_rows} ({:.2}% of data)",
        100.0 * signal_rows as f64 / dataset.len() as f64
    )?;
    writeln!(out, "label tallies per signal element:")?;
    let free: Vec<usize> = (0..universe.num_features())
        .filter(|&i| g.fixed_features().all(|(fi, _)| fi != i))
        .collect();
    for (x, counts) in &tally {
        let key: Vec<&str> = free
            .iter()
            .map(|&i| universe.feature(i).categories[x[i] as usize].as_str())
            .collect();
        let cells: Vec<String> = universe
            .labels()
            .iter()
            .zip(counts)
            .map(|(l, c)| format!("{l}={c}"))
            .collect();
        writeln!(out, "  {}: {}", key.join("/"), cells.join(" "))?;
    }
    Ok(())
}

/// Flags become a JSON object, then fields present in the config file
/// replace them; the merged object is the effective config.
fn merged_config(args: &SweepArgs) -> Result<ExperimentConfig> {
    let mut base = serde_json::Map::new();
    let mut put = |k: &str, v: serde_json::Value| {
        base.insert(k.to_string(), v);
    };
    if let Some(o) = args.objective {
        put("objective", serde_json::to_value(o)?);
    }
    if let Some(n) = args.n_consumers {
        put("n_consumers", n.into());
    }
    if let Some(n) = args.n_test {
        put("n_test", n.into());
    }
    if let Some(g) = &args.n_grid {
        put("n_grid", serde_json::to_value(g)?);
    }
    if let Some(v) = args.ne {
        put("n_e", v.into());
    }
    if let Some(v) = args.ne_fraction {
        put("n_e_fraction", v.into());
    }
    if let Some(v) = args.ne_floor {
        put("n_e_floor", v.into());
    }
    if let Some(v) = args.delta {
        put("delta", v.into());
    }
    if let Some(v) = args.epsilon {
        put("epsilon", v.into());
    }
    if let Some(v) = args.eta {
        put("eta", v.into());
    }
    if let Some(s) = &args.seeds {
        put("seeds", serde_json::to_value(parse_seeds(s)?)?);
    }
    if let Some(y) = &args.ystar {
        put("y_star", y.clone().into());
    }
    if let Some(path) = &args.data {
        let mut src = serde_json::Map::new();
        src.insert("kind".into(), "csv".into());
        src.insert("path".into(), path.display().to_string().into());
        if let Some(s) = &args.schema {
            src.insert("schema_path".into(), s.display().to_string().into());
        }
        put("dataset", serde_json::Value::Object(src));
    } else if args.generate_rows.is_some() || args.generate_seed.is_some() {
        let mut src = serde_json::Map::new();
        src.insert("kind".into(), "generate".into());
        src.insert("rows".into(), args.generate_rows.unwrap_or(3_000_000).into());
        src.insert("seed".into(), args.generate_seed.unwrap_or(0).into());
        if let Some(c) = &args.generator_config {
            src.insert("config_path".into(), c.display().to_string().into());
        }
        put("dataset", serde_json::Value::Object(src));
    }
    if let Some(t) = &args.transform {
        let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(t)?)?;
        put("transformation", value);
    }
    if let Some(o) = &args.out {
        put("out", o.display().to_string().into());
    }
    if let Some(f) = &args.format {
        put("format", f.clone().into());
    }

    let mut merged = serde_json::Value::Object(base);
    if let Some(path) = &args.config {
        let file: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path).context("reading config")?)?;
        let file = file
            .as_object()
            .context("config must be a JSON object")?
            .clone();
        let obj = merged.as_object_mut().unwrap();
        for (k, v) in file {
            obj.insert(k, v);
        }
    }
    Ok(serde_json::from_value(merged)?)
}

fn sweep(args: SweepArgs) -> Result<()> {
    let cfg = merged_config(&args)?;
    let start = Instant::now();
    eprintln!(
        "sweep: objective {:?}, N={}, Ntest={}, {} n values x {} seeds",
        cfg.objective,
        cfg.n_consumers,
        cfg.n_test,
        cfg.n_grid.len(),
        cfg.seeds.len()
    );
    let outcome = run_sweep(&cfg)?;
    for skip in &outcome.skipped {
        eprintln!("skipped seed {} n {}: {}", skip.seed, skip.n, skip.reason);
    }
    let cell_time: f64 = outcome.rows.iter().map(|r| r.wall_time.as_secs_f64()).sum();
    eprintln!(
        "{} rows ({} skipped) in {:.1}s wall, {:.1}s cell time",
        outcome.rows.len(),
        outcome.skipped.len(),
        start.elapsed().as_secs_f64(),
        cell_time
    );
    let out = cfg
        .out
        .clone()
        .context("no output path: pass --out or set it in the config")?;
    emit_results_path(&outcome.rows, &out, cfg.format)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let universe = load_universe(&args.schema)?;
    let dataset = read_csv_path(&args.data, &universe, Role::Collective)?;
    let g = load_transformation(&args.transform, &universe)?;
    let n = dataset.len() as u64;
    let params = BoundParams {
        n_consumers: args.n_consumers,
        n_test: args.n_test,
        n_collective: n,
        n_estimation: args.ne,
        delta: args.delta,
        epsilon: args.epsilon,
        eta: args.eta,
    };
    let ystar = || -> Result<u16> {
        let name = args.ystar.as_deref().context("this objective needs --ystar")?;
        Ok(universe.label_id(name)?)
    };
    let report: BoundReport = match args.objective {
        SweepObjective::PlantFl => planting_bound_fl(&dataset, &g, ystar()?, &params)?,
        SweepObjective::PlantFo => {
            planting_bound_fo(&dataset, &g, ystar()?, &EscapeSelector::FlipFixed, &params)?
        }
        SweepObjective::UnplantNaive => {
            let (label, report) = naive_unplanting_bound(&dataset, &g, ystar()?, &params)?;
            eprintln!("chosen planting target: {}", universe.label_name(label));
            report
        }
        SweepObjective::UnplantAdaptive => {
            let ne = args.ne.context("adaptive unplanting needs --ne")? as usize;
            let (est, rest) = dataset.split(ne, args.seed)?;
            unplanting_bound(&est, &rest, &g, ystar()?, &params)?
        }
        SweepObjective::Erase => erasing_bound(&dataset, &g, &params)?,
    };
    eprintln!(
        "n={n}: bound {} (clamped {}), {} of {} features cracked",
        report.bound,
        report.bound_clamped,
        report.cracked_count(),
        report.per_feature.len()
    );
    let json = report.to_json()?;
    match &args.out {
        Some(p) => {
            std::fs::write(p, json)?;
            eprintln!("wrote {}", p.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn compare_idr(args: CompareIdrArgs) -> Result<()> {
    let universe = load_universe(&args.schema)?;
    let dataset = read_csv_path(&args.data, &universe, Role::Base)?;
    let g = load_transformation(&args.transform, &universe)?;
    let y_star = universe.label_id(&args.ystar)?;
    let dist = PopulationDistribution::from_counts(&empirical_joint(&dataset)?);
    if args.alpha_points == 0 {
        bail!("need at least one alpha point");
    }
    let alphas: Vec<f64> =
        (1..=args.alpha_points).map(|i| i as f64 / (args.alpha_points + 1) as f64).collect();

    let objectives = [
        IdrObjective::PlantFeatureLabel { y_star },
        IdrObjective::PlantFeatureOnly { y_star },
        IdrObjective::Unplant { y_star },
        IdrObjective::Erase,
    ];
    let mut curves = Vec::new();
    for obj in objectives {
        let reports = idr_curve(&dist, &g, obj, args.epsilon, &alphas)?;
        for w in &reports[0].warnings {
            eprintln!("warning: {w}");
        }
        curves.push(reports);
    }

    let mut text = String::from("alpha,plant_fl,plant_fo,unplant,erase,prior_plant\n");
    for (i, &alpha) in alphas.iter().enumerate() {
        let prior = prior_bound_planting(&dist, &g, y_star, alpha)?;
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt_f64(alpha),
            fmt_f64(curves[0][i].bound),
            fmt_f64(curves[1][i].bound),
            fmt_f64(curves[2][i].bound),
            fmt_f64(curves[3][i].bound),
            fmt_f64(prior)
        ));
    }
    match &args.out {
        Some(p) => {
            std::fs::write(p, text)?;
            eprintln!("wrote {}", p.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
