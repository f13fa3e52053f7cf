//! HALO command-line pipeline: characterize, quantize, schedule, simulate,
//! sweep, report.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use halo_core::dvfs::{
    build_schedule, level_for_class, DvfsSchedule, DvfsTable, LevelMode,
    DEFAULT_TRANSITION_TIME_S,
};
use halo_core::netlist::{build_mac_netlist, GateDelays};
use halo_core::pipeline::{
    emit_report, run_pipeline, Goal, GoalConfig, TensorContainer,
};
use halo_core::profile::{
    characterize, load_profile, save_profile, CalibrationSpec, SamplingSpec, WeightProfile,
};
use halo_core::quantize::{load_model, quantize_model, save_model, QuantizeConfig};
use halo_core::sim::{simulate, ArrayConfig};
use halo_core::HaloError;

#[derive(Parser)]
#[command(name = "halo", about = "Hardware-aware post-training quantization pipeline")]
struct Cli {
    /// Goal configuration JSON (see GoalConfig); subcommand flags override.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for random sampling paths.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// MAC timing/energy profile JSON.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Characterize the MAC netlist into a per-weight timing/energy profile.
    Characterize(CharacterizeArgs),
    /// Quantize a tensor container into per-layer models.
    Quantize(QuantizeArgs),
    /// Build a DVFS schedule for a quantized model.
    Schedule(ScheduleArgs),
    /// Simulate a quantized model under a schedule.
    Simulate(SimulateArgs),
    /// Run the full goal-driven pipeline with a Pareto sweep.
    Sweep(SweepArgs),
    /// Summarize an emitted report directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct CharacterizeArgs {
    /// Sweep all 65,536 (a_prev, a_next) transitions per weight.
    #[arg(long, conflicts_with = "samples")]
    exhaustive: bool,
    /// Random transition sample count per weight.
    #[arg(long)]
    samples: Option<usize>,
    /// Skip affine delay calibration, keep raw gate-unit delays.
    #[arg(long)]
    raw: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QuantizeArgs {
    /// Tensor container directory (halo-tensors-v1).
    #[arg(long)]
    tensors: PathBuf,
    /// HIGH-class sensitivity retention threshold.
    #[arg(long)]
    retention: Option<f64>,
    /// Square tile edge length.
    #[arg(long)]
    tile: Option<usize>,
    /// Output directory; one model subdirectory per layer.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Quantized model directory.
    #[arg(long)]
    model: PathBuf,
    /// DVFS table: builtin name (tpu, gpu) or JSON file path.
    #[arg(long, default_value = "tpu")]
    target: String,
    #[arg(long, value_enum, default_value_t = ModeArg::MaxFreq)]
    mode: ModeArg,
    /// DVFS transition latency in seconds.
    #[arg(long, default_value_t = DEFAULT_TRANSITION_TIME_S)]
    transition_s: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    MaxFreq,
    MinEnergy,
}

impl From<ModeArg> for LevelMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::MaxFreq => LevelMode::MaxFreq,
            ModeArg::MinEnergy => LevelMode::MinEnergy,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Schedule JSON produced by `halo schedule`.
    #[arg(long)]
    schedule: PathBuf,
    /// Array configuration JSON; defaults to a 128x128 array.
    #[arg(long)]
    array: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    tensors: PathBuf,
    #[arg(long, value_enum, default_value_t = GoalArg::Bal)]
    goal: GoalArg,
    #[arg(long)]
    array: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GoalArg {
    PerfOpt,
    AccOpt,
    Bal,
}

impl From<GoalArg> for Goal {
    fn from(g: GoalArg) -> Self {
        match g {
            GoalArg::PerfOpt => Goal::PerfOpt,
            GoalArg::AccOpt => Goal::AccOpt,
            GoalArg::Bal => Goal::Bal,
        }
    }
}

#[derive(Args)]
struct ReportArgs {
    /// Directory previously written by `halo sweep` or `halo simulate`.
    #[arg(long)]
    run: PathBuf,
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HaloError> {
    let text = std::fs::read_to_string(path).map_err(|e| HaloError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HaloError::json(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), HaloError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text).map_err(|e| HaloError::io(path, e))
}

fn require_profile(cli: &Cli) -> Result<WeightProfile, HaloError> {
    let path = cli.profile.as_ref().ok_or_else(|| {
        HaloError::InvalidArgument("--profile <json> is required for this command".into())
    })?;
    load_profile(path)
}

fn goal_config(cli: &Cli) -> Result<GoalConfig, HaloError> {
    match &cli.config {
        Some(path) => load_json(path),
        None => Ok(GoalConfig::default()),
    }
}

fn array_config(path: &Option<PathBuf>) -> Result<ArrayConfig, HaloError> {
    match path {
        Some(p) => load_json(p),
        None => Ok(ArrayConfig::default()),
    }
}

fn dvfs_table(target: &str) -> Result<DvfsTable, HaloError> {
    if target == "tpu" || target == "gpu" {
        DvfsTable::builtin(target)
    } else {
        DvfsTable::load(Path::new(target))
    }
}

fn run(cli: &Cli) -> Result<(), HaloError> {
    match &cli.command {
        Command::Characterize(args) => {
            let sampling = if args.exhaustive {
                SamplingSpec::Exhaustive
            } else {
                let n = args.samples.unwrap_or(1024);
                SamplingSpec::Random { n, seed: cli.seed }
            };
            let netlist = build_mac_netlist(GateDelays::default());
            let mut profile = characterize(&netlist, sampling)?;
            if !args.raw {
                profile = profile.calibrated(CalibrationSpec::default());
            }
            save_profile(&profile, &args.out)?;
            println!(
                "characterized 256 weight values; worst delay {} ps; profile {}",
                profile.global_worst_delay_ps(),
                args.out.display()
            );
        }
        Command::Quantize(args) => {
            let profile = require_profile(cli)?;
            let goal = goal_config(cli)?;
            let container = TensorContainer::load(&args.tensors)?;
            container.validate()?;
            let tile = args.tile.unwrap_or(goal.tile_rows);
            let config = QuantizeConfig {
                tile_rows: tile,
                tile_cols: tile,
                retention: args.retention.unwrap_or(goal.retention_acc),
                ..QuantizeConfig::default()
            };
            for layer in &container.layers {
                let model = quantize_model(&layer.weights, &layer.gradients, &config, &profile)?;
                let dir = args.out.join(&layer.name);
                save_model(&model, &dir)?;
                println!(
                    "{}: {} tiles, overlay nnz {}, k = {:.4}",
                    layer.name,
                    model.tiles.len(),
                    model.overlay.nnz(),
                    model.k_fraction
                );
            }
        }
        Command::Schedule(args) => {
            let profile = require_profile(cli)?;
            let model = load_model(&args.model)?;
            let table = dvfs_table(&args.target)?;
            let levels = model
                .classes
                .iter()
                .map(|c| level_for_class(&table, c, &profile, args.mode.into()))
                .collect::<Result<Vec<_>, _>>()?;
            let schedule = build_schedule(&model.tile_class_ids(), &levels, args.transition_s)?;
            write_json(&args.out, &schedule)?;
            println!(
                "{} groups, {} transitions, overhead {:.3e} s",
                schedule.groups.len(),
                schedule.transition_count,
                schedule.transition_overhead_s
            );
        }
        Command::Simulate(args) => {
            let profile = require_profile(cli)?;
            let model = load_model(&args.model)?;
            let schedule: DvfsSchedule = load_json(&args.schedule)?;
            let array = array_config(&args.array)?;
            let report = simulate(&model, &schedule, &array, &profile)?;
            write_json(&args.out, &report)?;
            println!(
                "exec {:.6e} s, energy {:.6e} ({} transitions)",
                report.exec_time_s, report.energy.total, report.transitions
            );
        }
        Command::Sweep(args) => {
            let profile = require_profile(cli)?;
            let mut goal = goal_config(cli)?;
            goal.goal = args.goal.into();
            let array = array_config(&args.array)?;
            let container = TensorContainer::load(&args.tensors)?;
            let output = run_pipeline(&container, &goal, &profile, &array)?;
            emit_report(&output, &args.out)?;
            if output.knee_warning {
                eprintln!("warning: too few Pareto points for knee analysis; picked best loss");
            }
            println!(
                "goal {:?}: retention {:.4}, perf x{:.3}, proxy loss {:.6e}, b_eff {:.3}",
                output.goal,
                output.metrics.retention,
                output.metrics.normalized_perf,
                output.metrics.proxy_loss,
                output.metrics.b_eff
            );
        }
        Command::Report(args) => {
            let path = args.run.join("report.json");
            let doc: serde_json::Value = load_json(&path)?;
            let metrics = &doc["metrics"];
            println!("goal: {}", doc["goal"]);
            println!("retention: {}", metrics["retention"]);
            println!("exec_time_s: {}", metrics["exec_time_s"]);
            println!("normalized_perf: {}", metrics["normalized_perf"]);
            println!("energy_total: {}", metrics["energy_total"]);
            println!("proxy_loss: {}", metrics["proxy_loss"]);
            println!("b_eff: {}", metrics["b_eff"]);
            if let Some(layers) = doc["layers"].as_array() {
                for l in layers {
                    println!(
                        "  {}: {}x{} loss {} b_eff {}",
                        l["name"], l["rows"], l["cols"], l["proxy_loss"], l["b_eff"]
                    );
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
