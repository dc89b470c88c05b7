use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use stableweb::compactness::{calibrate, default_t_grid};
use stableweb::experiments::{
    avoidance_exponent_with, birth_modulus_with, density_scan_with, insulation_probe_with,
    interval_coalescence_with, tightness_scan_with, AvoidanceConfig, BirthConfig, DensityConfig,
    ExperimentReport, InsulationConfig, IntervalConfig, TightnessConfig,
};
use stableweb::walkers::{renormalize_with, simulate_with, Births, Kernel, MergeStats, Prune};
use stableweb::{web_dist, web_dist_h, Collection, Error, Threshold};

#[derive(Parser)]
#[command(name = "stableweb", version, about = "Coalescing stable walks, web metrics and tightness checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one coalescing walk system and optionally renormalise it.
    Simulate(SimulateArgs),
    /// Web distance between two collections.
    Dist(DistArgs),
    /// Calibrate a compactness budget on a directory of collections.
    CheckBudget(BudgetArgs),
    /// Run a Monte Carlo experiment.
    Experiment(ExperimentArgs),
}

#[derive(clap::Args)]
struct SimulateArgs {
    #[arg(long)]
    alpha: f64,
    /// half width of the core window in sites
    #[arg(long = "L")]
    l: usize,
    /// number of steps
    #[arg(long = "T")]
    t: usize,
    /// renormalisation scale; must divide T
    #[arg(long = "N")]
    n: Option<usize>,
    /// kernel truncation radius; 1 for alpha = 2
    #[arg(long)]
    radius: Option<usize>,
    /// sites beyond the core on each side; defaults to max(radius, L)
    #[arg(long)]
    buffer: Option<usize>,
    /// renormalised time origin: walk time m maps to m/N - shift
    #[arg(long, default_value_t = 0.0)]
    shift: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = BirthsArg::All)]
    births: BirthsArg,
    /// keep only paths that matter for projections up to this t
    #[arg(long)]
    prune_up_to: Option<f64>,
    /// include the renormalised collection in the output (needs --N)
    #[arg(long)]
    collection: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BirthsArg {
    All,
    TimeZero,
}

#[derive(clap::Args)]
struct DistArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    tmax: f64,
    #[arg(long, default_value_t = 64)]
    cells: usize,
    #[arg(long, default_value_t = 1e-3)]
    resolution: f64,
    /// projection threshold h(t)
    #[arg(long, value_enum, default_value_t = ThresholdArg::Dyadic)]
    threshold: ThresholdArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ThresholdArg {
    Dyadic,
    Reciprocal,
}

#[derive(clap::Args)]
struct BudgetArgs {
    /// directory of collection JSON files
    #[arg(long)]
    collections: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    /// comma separated t values
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3)]
    n_max: usize,
    #[arg(long)]
    out: PathBuf,
    /// where to write the t,condition,fail_rate table; stdout if absent
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: ExperimentName,
    /// JSON config; missing fields take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    #[value(name = "density_scan", aliases = ["density-scan", "density"])]
    DensityScan,
    #[value(name = "interval_coalescence", aliases = ["interval-coalescence", "interval"])]
    IntervalCoalescence,
    #[value(name = "insulation_probe", aliases = ["insulation-probe", "insulation"])]
    InsulationProbe,
    #[value(name = "avoidance_exponent", aliases = ["avoidance-exponent", "avoidance"])]
    AvoidanceExponent,
    #[value(name = "birth_modulus", aliases = ["birth-modulus", "birth"])]
    BirthModulus,
    #[value(name = "tightness_scan", aliases = ["tightness-scan", "tightness"])]
    TightnessScan,
}

const EXIT_EXPERIMENT: u8 = 2;
const EXIT_ARGUMENT: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Argument(_) | Error::Lookup(_) | Error::Json(_) => EXIT_ARGUMENT,
        _ => EXIT_EXPERIMENT,
    }
}

fn read_input(path: &FsPath) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Argument(format!("cannot read {}: {e}", path.display())))
}

fn read_json<T: DeserializeOwned>(path: &FsPath) -> Result<T, Error> {
    serde_json::from_str(&read_input(path)?)
        .map_err(|e| Error::Argument(format!("{}: {e}", path.display())))
}

fn config_or_default<T: DeserializeOwned + Default>(path: Option<&PathBuf>) -> Result<T, Error> {
    path.map_or_else(|| Ok(T::default()), |p| read_json(p))
}

fn write_json(path: &FsPath, value: &impl Serialize) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct SimulateConfig {
    alpha: f64,
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "T")]
    t: usize,
    #[serde(rename = "N")]
    n: Option<usize>,
    radius: usize,
    buffer: usize,
    shift: f64,
    seed: u64,
    births: Births,
    prune_up_to: Option<f64>,
}

#[derive(Serialize)]
struct SimulateOutput {
    config: SimulateConfig,
    stats: MergeStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    collection: Option<Collection>,
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Error> {
    let radius = a.radius.unwrap_or(if a.alpha == 2.0 { 1 } else { a.l.max(1) });
    let buffer = a.buffer.unwrap_or(radius.max(a.l));
    let births = match a.births {
        BirthsArg::All => Births::AllTimes,
        BirthsArg::TimeZero => Births::TimeZero,
    };
    if a.collection && a.n.is_none() {
        return Err(Error::Argument("--collection needs --N".into()));
    }
    let kernel = Kernel::new(a.alpha, radius)?;
    let ws = simulate_with(&kernel, a.l, a.t, buffer, a.seed, births)?;
    let stats = ws.stats();
    let collection = match a.n {
        Some(n) => {
            let prune = a.prune_up_to.map(Prune::up_to).unwrap_or_default();
            let g = renormalize_with(&ws, n, a.shift, prune)?;
            a.collection.then_some(g)
        }
        None => None,
    };
    let out = SimulateOutput {
        config: SimulateConfig {
            alpha: a.alpha,
            l: a.l,
            t: a.t,
            n: a.n,
            radius,
            buffer,
            shift: a.shift,
            seed: a.seed,
            births,
            prune_up_to: a.prune_up_to,
        },
        stats,
        collection,
    };
    if let Some(p) = &a.out {
        write_json(p, &out)?;
    }
    println!("clusters,merges,frozen,alive_at_end");
    println!("{},{},{},{}", stats.clusters, stats.merges, stats.frozen, stats.alive_at_end);
    Ok(())
}

fn cmd_dist(a: &DistArgs) -> Result<(), Error> {
    let g1: Collection = read_json(&a.a)?;
    let g2: Collection = read_json(&a.b)?;
    let d = match a.threshold {
        ThresholdArg::Dyadic => web_dist(&g1, &g2, a.tmax, a.cells, a.resolution)?,
        ThresholdArg::Reciprocal => web_dist_h(&g1, &g2, &Threshold::Reciprocal, a.tmax, a.cells, a.resolution)?,
    };
    println!("value,tail_bound,quad_cells");
    println!("{},{},{}", d.value, d.tail_bound, d.quad_cells);
    Ok(())
}

fn cmd_check_budget(a: &BudgetArgs) -> Result<(), Error> {
    let mut files: Vec<PathBuf> = fs::read_dir(&a.collections)
        .map_err(|e| Error::Argument(format!("cannot list {}: {e}", a.collections.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Argument(format!("no .json collections in {}", a.collections.display())));
    }
    let samples: Vec<Collection> = files.iter().map(|p| read_json(p)).collect::<Result<_, _>>()?;
    let grid = a.t_grid.clone().unwrap_or_else(default_t_grid);
    let (budget, report) = calibrate(&samples, a.eps, &grid, a.n_max)?;
    write_json(&a.out, &budget)?;
    match &a.report {
        Some(p) => fs::write(p, report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<(), Error> {
    let cfg = a.config.as_ref();
    let rep: ExperimentReport = match a.name {
        ExperimentName::DensityScan => density_scan_with(&config_or_default::<DensityConfig>(cfg)?)?,
        ExperimentName::IntervalCoalescence => interval_coalescence_with(&config_or_default::<IntervalConfig>(cfg)?)?,
        ExperimentName::InsulationProbe => insulation_probe_with(&config_or_default::<InsulationConfig>(cfg)?)?,
        ExperimentName::AvoidanceExponent => avoidance_exponent_with(&config_or_default::<AvoidanceConfig>(cfg)?)?,
        ExperimentName::BirthModulus => birth_modulus_with(&config_or_default::<BirthConfig>(cfg)?)?,
        ExperimentName::TightnessScan => tightness_scan_with(&config_or_default::<TightnessConfig>(cfg)?)?,
    };
    rep.write_dir(&a.out)?;
    print!("{}", rep.to_csv());
    Ok(())
}

fn set_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("STABLEWEB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Argument(format!("STABLEWEB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Argument(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ARGUMENT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = set_threads().and_then(|()| match &cli.cmd {
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Dist(a) => cmd_dist(a),
        Cmd::CheckBudget(a) => cmd_check_budget(a),
        Cmd::Experiment(a) => cmd_experiment(a),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stableweb: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
