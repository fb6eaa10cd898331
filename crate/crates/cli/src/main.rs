//! `pcstream` command-line front end.
//!
//! Exit codes: 0 success, 1 input or validation error, 2 infeasible budget.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pcstream::oracle::{gap_report, ExactSolver, DEFAULT_ORACLE_CAP};
use pcstream::report::{write_session_allocations_csv, AllocationReport, SessionSummary};
use pcstream::{
    allocate, load_manifest, prioritize, run_session, serialize_manifest, Bps, GeneratorParams,
    Infeasible, InstanceGenerator, PrioritizationConfig, PriorityWeights, Scene, SessionTrace,
    Vec3,
};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pcstream",
    version,
    about = "View-aware rate allocation for point-cloud streaming"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest and report every problem found.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Allocate one budget for one camera pose.
    Allocate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "budget-bps")]
        budget_bps: Bps,
        #[command(flatten)]
        view: ViewArgs,
        #[command(flatten)]
        prio: PrioArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write `allocation.<format>` here instead of stdout.
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
    /// Replay a bandwidth/camera trace against a manifest.
    Simulate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        prio: PrioArgs,
        /// Write report.json, intervals.csv and allocations.csv here;
        /// otherwise print the report to stdout.
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
    /// Compare the heuristic with the exact optimum on random instances.
    Gap {
        #[command(flatten)]
        generator: GeneratorArgs,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        cap: usize,
        #[arg(long, default_value = "1,0.6,0.3")]
        weights: PriorityWeights,
        /// Write gap.csv here instead of stdout.
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
    },
    /// Generate a synthetic manifest and trace.
    Gen {
        #[command(flatten)]
        generator: GeneratorArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        intervals: usize,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct ViewArgs {
    /// Camera position "x,y,z".
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0")]
    cam: Vec3,
    /// Camera forward direction "x,y,z"; normalized.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,1")]
    fwd: Vec3,
    #[arg(long = "fov-half-deg", default_value_t = 45.0)]
    fov_half_deg: f64,
}

#[derive(Args)]
struct PrioArgs {
    /// Distance separating C1 from C2, in scene units. Required for
    /// `allocate`; for `simulate` it fills empty trace cells.
    #[arg(long)]
    near: Option<f64>,
    /// Class coefficients "c1,c2,c3".
    #[arg(long, default_value = "1,0.6,0.3")]
    weights: PriorityWeights,
}

impl PrioArgs {
    fn config(&self) -> PrioritizationConfig {
        PrioritizationConfig {
            weights: self.weights,
            near_distance_threshold: self.near,
        }
    }
}

#[derive(Args)]
struct GeneratorArgs {
    #[arg(long = "n-min", default_value_t = 2)]
    n_min: usize,
    #[arg(long = "n-max", default_value_t = 6)]
    n_max: usize,
    /// Smallest minimum-level index L (ladders have L+1 levels).
    #[arg(long = "l-min", default_value_t = 1)]
    l_min: usize,
    #[arg(long = "l-max", default_value_t = 3)]
    l_max: usize,
    #[arg(long = "bitrate-min", default_value_t = 100_000)]
    bitrate_min: Bps,
    #[arg(long = "bitrate-max", default_value_t = 20_000_000)]
    bitrate_max: Bps,
    #[arg(long, default_value_t = 50.0)]
    extent: f64,
    #[arg(long = "max-radius", default_value_t = 5.0)]
    max_radius: f64,
    #[arg(long = "infeasible-prob", default_value_t = 0.0)]
    infeasible_prob: f64,
}

impl From<&GeneratorArgs> for GeneratorParams {
    fn from(a: &GeneratorArgs) -> Self {
        GeneratorParams {
            models: a.n_min..=a.n_max,
            levels: a.l_min..=a.l_max,
            bitrate: a.bitrate_min..=a.bitrate_max,
            extent: a.extent,
            max_radius: a.max_radius,
            infeasible_probability: a.infeasible_prob,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    let parts = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| format!("{s:?}: {e}"))?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected \"x,y,z\", got {s:?}")),
    }
}

enum Failure {
    Input(anyhow::Error),
    Infeasible(Infeasible),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn read_scene(path: &Path) -> anyhow::Result<Scene> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    load_manifest(&bytes).with_context(|| format!("loading {}", path.display()))
}

fn emit(out_dir: Option<&Path>, name: &str, body: &[u8]) -> anyhow::Result<()> {
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
        }
        None => io::stdout().write_all(body).context("writing stdout"),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { manifest } => {
            let scene = read_scene(&manifest)?;
            println!(
                "ok: {} models, {} levels each",
                scene.len(),
                scene.ladder_level_count()
            );
        }
        Command::Allocate {
            manifest,
            budget_bps,
            view,
            prio,
            format,
            out_dir,
        } => {
            let scene = read_scene(&manifest)?;
            let config = prio.config();
            if config.near_distance_threshold.is_none() {
                return Err(anyhow!("--near is required").into());
            }
            let view = config
                .view(view.cam, view.fwd, view.fov_half_deg.to_radians())
                .context("invalid view")?;
            let alloc = allocate(&prioritize(&scene, &view, &config), budget_bps)
                .map_err(Failure::Infeasible)?;
            let report = AllocationReport::from(&alloc);
            match format {
                Format::Json => emit(
                    out_dir.as_deref(),
                    "allocation.json",
                    report.to_json().as_bytes(),
                )?,
                Format::Csv => {
                    let mut buf = Vec::new();
                    report.write_csv(&mut buf).context("formatting csv")?;
                    emit(out_dir.as_deref(), "allocation.csv", &buf)?;
                }
            }
        }
        Command::Simulate {
            manifest,
            trace,
            prio,
            out_dir,
        } => {
            let scene = read_scene(&manifest)?;
            let file =
                fs::File::open(&trace).with_context(|| format!("opening {}", trace.display()))?;
            let trace = SessionTrace::from_csv(file, prio.near)
                .with_context(|| format!("loading {}", trace.display()))?;
            let report = run_session(&scene, &trace, &prio.config());
            let summary = SessionSummary::from(&report);
            emit(
                out_dir.as_deref(),
                "report.json",
                summary.to_json().as_bytes(),
            )?;
            if let Some(dir) = out_dir.as_deref() {
                let mut buf = Vec::new();
                summary
                    .write_intervals_csv(&mut buf)
                    .context("formatting csv")?;
                emit(Some(dir), "intervals.csv", &buf)?;
                let mut buf = Vec::new();
                write_session_allocations_csv(&report, &mut buf).context("formatting csv")?;
                emit(Some(dir), "allocations.csv", &buf)?;
            }
            if report.infeasible_intervals > 0 {
                eprintln!(
                    "note: {} of {} intervals had a budget below W_min",
                    report.infeasible_intervals,
                    report.intervals.len()
                );
            }
        }
        Command::Gap {
            generator,
            trials,
            seed,
            cap,
            weights,
            out_dir,
        } => {
            let config = PrioritizationConfig {
                weights,
                near_distance_threshold: None,
            };
            let report = gap_report(
                (&generator).into(),
                &config,
                trials,
                seed,
                &ExactSolver::new(cap),
            )
            .context("gap study")?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf).context("formatting csv")?;
            emit(out_dir.as_deref(), "gap.csv", &buf)?;
            if let (Some(abs), Some(rel)) = (report.abs_gap, report.rel_gap) {
                eprintln!(
                    "{} trials ({} infeasible skipped), {} exact; abs gap mean {:.3} max {:.3}; rel gap mean {:.5} max {:.5}",
                    report.rows.len(),
                    report.infeasible_trials,
                    report.exact_hits,
                    abs.mean,
                    abs.max,
                    rel.mean,
                    rel.max
                );
            }
        }
        Command::Gen {
            generator,
            seed,
            intervals,
            out_dir,
        } => {
            if intervals == 0 {
                return Err(anyhow!("--intervals must be at least 1").into());
            }
            let g = InstanceGenerator::new((&generator).into(), seed)
                .context("generator parameters")?;
            let inst = g.instance(0);
            let trace = g.trace(&inst.scene, intervals);
            emit(
                Some(&out_dir),
                "manifest.json",
                serialize_manifest(&inst.scene).as_bytes(),
            )?;
            let mut buf = Vec::new();
            trace.write_csv(&mut buf).context("formatting csv")?;
            emit(Some(&out_dir), "trace.csv", &buf)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are input errors; clap's own exit code 2 is reserved for
    // infeasible budgets here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(e)) => {
            eprintln!("infeasible: {e}");
            ExitCode::from(2)
        }
    }
}
