//! `racegame`: solve bimatrix games, run seeded races and batches, compute
//! viability kernels and export primitive libraries.
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use racegame::game::{read_matrices_csv, GameKind};
use racegame::kernel::{GridKernel, KernelRegion};
use racegame::motion::PrimitiveLibrary;
use racegame::sim::{self, CarSetup, Concept, RaceConfig};
use racegame::solver::solve_report;
use serde::Serialize;

use config::{CarAssets, PrunerKind, RunConfig};

/// Version of every JSON document this tool writes.
const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<racegame::Error> for CliError {
    fn from(e: racegame::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

#[derive(Parser)]
#[command(name = "racegame", version, about = "Two-car racing games on motion primitives")]
struct Cli {
    /// Worker threads for races and kernel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a bimatrix game given as `i,j,a,b[,status]` CSV.
    Solve {
        matrices: PathBuf,
        /// JSON report destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one seeded race and write its step log as CSV.
    Race {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Step log destination; stdout when absent.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Run one race per seed and write aggregate metrics as JSON.
    Batch {
        #[command(flatten)]
        run: RunArgs,
        /// First seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        races: u64,
        /// Metrics JSON destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-race CSV destination.
        #[arg(long)]
        summaries: Option<PathBuf>,
        /// Wall-clock timing JSON destination; kept apart from the metrics.
        #[arg(long)]
        timing: Option<PathBuf>,
    },
    /// Compute the viability kernel of one car on the configured track.
    Kernel {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 3.5)]
        max_speed_mps: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a primitive library as CSV.
    Primitives {
        #[arg(long, default_value_t = 3.5)]
        max_speed_mps: f64,
        /// Library CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags shared by `race` and `batch`; each overrides the config file.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    game: Option<GameKind>,
    #[arg(long)]
    concept: Option<Concept>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    duration_steps: Option<usize>,
    #[arg(long)]
    halfwidth_m: Option<f64>,
    #[arg(long)]
    soft: bool,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    w: Option<f64>,
    /// Replace both cars' pruners.
    #[arg(long, value_parser = parse_pruner)]
    pruner: Option<PrunerKind>,
}

fn parse_pruner(s: &str) -> Result<PrunerKind, String> {
    match s {
        "kernel" => Ok(PrunerKind::Kernel),
        "nstep" => Ok(PrunerKind::Nstep),
        "none" => Ok(PrunerKind::None),
        other => Err(format!("unknown pruner `{other}` (kernel, nstep, none)")),
    }
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(kind) = self.game {
            cfg.game.kind = kind;
        }
        if let Some(c) = self.concept {
            cfg.game.concept = c;
        }
        if let Some(h) = self.horizon {
            cfg.race.horizon = h;
        }
        if let Some(d) = self.duration_steps {
            cfg.race.duration_steps = d;
        }
        if let Some(hw) = self.halfwidth_m {
            cfg.track.halfwidth_m = hw;
        }
        cfg.game.soft |= self.soft;
        if let Some(s) = self.sigma {
            cfg.game.sigma = s;
        }
        if self.w.is_some() {
            cfg.game.w = self.w;
        }
        if let Some(p) = self.pruner {
            for car in &mut cfg.cars {
                car.pruner = p;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Solve { matrices, out } => solve(&matrices, out.as_deref()),
        Command::Race { run, seed, log } => race(&run.resolve()?, seed, log.as_deref()),
        Command::Batch {
            run,
            seed,
            races,
            out,
            summaries,
            timing,
        } => batch(&run.resolve()?, seed, races, out.as_deref(), summaries.as_deref(), timing.as_deref()),
        Command::Kernel {
            config,
            max_speed_mps,
            out,
        } => kernel(config.as_deref(), max_speed_mps, &out),
        Command::Primitives { max_speed_mps, out } => primitives(max_speed_mps, out.as_deref()),
    }
}

/// Opens `path`, or stdout when absent.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn write_json<T: Serialize>(body: &T, path: Option<&Path>) -> Result<(), CliError> {
    let mut w = sink(path)?;
    let doc = Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    };
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(w).and_then(|()| w.flush()).map_err(|e| CliError::Runtime(e.to_string()))
}

fn solve(matrices: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let file = File::open(matrices).map_err(|e| CliError::Validation(format!("{}: {e}", matrices.display())))?;
    let m = read_matrices_csv(file).map_err(|e| e.with_path(matrices))?;
    let report = solve_report(&m.a, &m.b, m.status.as_ref());
    write_json(&report, out)
}

/// Builds both cars and hands a ready race configuration to `f`.
fn with_race_config<R>(cfg: &RunConfig, f: impl FnOnce(&RaceConfig<'_>) -> Result<R, CliError>) -> Result<R, CliError> {
    let track = cfg.build_track()?;
    let assets = [
        CarAssets::build(&cfg.cars[0], &track, &cfg.kernel)?,
        CarAssets::build(&cfg.cars[1], &track, &cfg.kernel)?,
    ];
    let pruners = [assets[0].pruner(&track), assets[1].pruner(&track)];
    let setup = |k: usize| CarSetup {
        library: &assets[k].library,
        pruner: pruners[k].as_deref(),
    };
    let mut rc = RaceConfig::new(&track, [setup(0), setup(1)]);
    let r = &cfg.race;
    rc.horizon = r.horizon;
    rc.params = cfg.game.params();
    rc.concept = cfg.game.concept;
    rc.soft = cfg.game.soft;
    rc.duration_steps = r.duration_steps;
    rc.gap_m = (r.gap_min_m, r.gap_max_m);
    rc.initial_speed_mps = r.initial_speed_mps;
    rc.heading_bins = assets.iter().find_map(|a| a.kernel.as_ref().map(GridKernel::headings));
    rc.collision_threshold_m = r.collision_threshold_m;
    rc.hold_steps = r.hold_steps;
    rc.perturbation_m = r.perturbation_m;
    rc.substeps = r.substeps;
    rc.validate()?;
    f(&rc)
}

fn race(cfg: &RunConfig, seed: u64, log: Option<&Path>) -> Result<(), CliError> {
    with_race_config(cfg, |base| {
        let config = RaceConfig { seed, ..base.clone() };
        let race_log = sim::run_race(&config)?;
        let mut w = sink(log)?;
        race_log.write_csv(&mut w)?;
        w.flush().map_err(|e| CliError::Runtime(e.to_string()))
    })
}

#[derive(Serialize)]
struct BatchReport<'a> {
    config: &'a RunConfig,
    first_seed: u64,
    races: u64,
    metrics: &'a sim::RaceMetrics,
}

fn batch(
    cfg: &RunConfig,
    first_seed: u64,
    races: u64,
    out: Option<&Path>,
    summaries: Option<&Path>,
    timing: Option<&Path>,
) -> Result<(), CliError> {
    if races == 0 {
        return Err(CliError::Validation("--races must be positive".into()));
    }
    let seeds: Vec<u64> = (first_seed..).take(races as usize).collect();
    let result = with_race_config(cfg, |base| Ok(sim::batch(base, &seeds)?))?;
    write_json(
        &BatchReport {
            config: cfg,
            first_seed,
            races,
            metrics: &result.metrics,
        },
        out,
    )?;
    if let Some(path) = summaries {
        let file = File::create(path).map_err(|e| io_err(path, e))?;
        sim::write_summaries_csv(&result.races, file)?;
    }
    if let Some(path) = timing {
        write_json(&TimingReport::new(&result.timing), Some(path))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TimingReport {
    steps: u64,
    mean_generation_s: f64,
    max_generation_s: f64,
    mean_collision_s: f64,
    max_collision_s: f64,
    box_checks: u64,
    box_checks_per_step: f64,
}

impl TimingReport {
    fn new(t: &sim::TimingStats) -> Self {
        TimingReport {
            steps: t.steps,
            mean_generation_s: t.mean_generation_s(),
            max_generation_s: t.generation_max_s,
            mean_collision_s: t.mean_collision_s(),
            max_collision_s: t.collision_max_s,
            box_checks: t.box_checks,
            box_checks_per_step: t.box_checks as f64 / t.steps.max(1) as f64,
        }
    }
}

#[derive(Serialize)]
struct KernelSummary {
    file: PathBuf,
    max_speed_mps: f64,
    cells: [usize; 2],
    headings: usize,
    modes: usize,
    states: usize,
    members: usize,
    iterations: usize,
    converged: bool,
}

fn kernel(config: Option<&Path>, max_speed_mps: f64, out: &Path) -> Result<(), CliError> {
    let cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.validate()?;
    if !(max_speed_mps >= 0.5) {
        return Err(CliError::Validation("--max-speed-mps must be at least 0.5".into()));
    }
    let track = cfg.build_track()?;
    let library = PrimitiveLibrary::desk(max_speed_mps);
    let spec = cfg.kernel.spec();
    let k = GridKernel::compute(KernelRegion::from_track(&track, &spec), &library, &spec)?;
    let file = File::create(out).map_err(|e| io_err(out, e))?;
    let mut w = BufWriter::new(file);
    k.save(&mut w)?;
    w.flush().map_err(|e| io_err(out, e))?;
    write_json(
        &KernelSummary {
            file: out.to_path_buf(),
            max_speed_mps,
            cells: [k.region().nx, k.region().ny],
            headings: k.headings(),
            modes: k.modes(),
            states: k.state_count(),
            members: k.member_count(),
            iterations: k.iterations(),
            converged: k.converged(),
        },
        None,
    )
}

fn primitives(max_speed_mps: f64, out: Option<&Path>) -> Result<(), CliError> {
    if !(max_speed_mps >= 0.5) {
        return Err(CliError::Validation("--max-speed-mps must be at least 0.5".into()));
    }
    let mut w = sink(out)?;
    PrimitiveLibrary::desk(max_speed_mps).write_csv(&mut w)?;
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))
}
