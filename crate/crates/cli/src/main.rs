//! Command-line front end: run scenarios, check configurations and
//! synthesize gain schedules.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use multirotor::control_local::GainSchedule;
use multirotor::simkit::run_scenario;
use multirotor::{Config, Error};

#[derive(Parser)]
#[command(name = "multirotor", version, about = "Three-rotor wind turbine simulation and control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a named scenario and write trace.csv, metrics.txt and plot.gp.
    Run(RunArgs),
    /// Check every parameter block and print the normalized configuration.
    Validate(ConfigArg),
    /// Build the vertex models, design the gains and write the gain file.
    Synthesize(SynthArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// Configuration file; the shipped 3 x 5 MW set when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// One of fig7, uniform, power-step.
    #[arg(long, short, default_value = "fig7")]
    scenario: String,
    /// Turbulence seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Turbulence intensity (fraction of the mean wind).
    #[arg(long)]
    turbulence: Option<f64>,
    /// Keep the load-mitigation controller switched off.
    #[arg(long)]
    no_mitigation: bool,
    /// Feed the true wind to the local controllers instead of the estimate.
    #[arg(long)]
    no_observer: bool,
    /// Gain schedule file to use instead of in-process synthesis.
    #[arg(long)]
    gains: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, env = "MULTIROTOR_OUT", default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Gain schedule file to write.
    #[arg(long, short, default_value = "gains.toml")]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Blowup { .. }
        | Error::NoEquilibrium(_)
        | Error::LowWind { .. }
        | Error::Participation { .. }
        | Error::EmptyWindow => 2,
        Error::Synthesis { .. } | Error::Decomposition(_) | Error::DegenerateSector(_) => 3,
        _ => 1,
    }
}

fn load_config(arg: &ConfigArg) -> multirotor::Result<Config> {
    match &arg.config {
        Some(path) => Config::load(path),
        None => Ok(Config::default_5mw()),
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn cmd_run(args: &RunArgs) -> multirotor::Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.sim.seed = seed;
    }
    if let Some(ti) = args.turbulence {
        cfg.sim.turbulence_intensity = ti;
    }
    cfg.validate()?;
    let gains = args.gains.as_deref().map(GainSchedule::load).transpose()?;
    let design = cfg.local_design_with(gains)?;
    let mut sim = cfg.scenario(&args.scenario)?;
    sim.mitigation &= !args.no_mitigation;
    sim.observer = !args.no_observer;

    let trace = run_scenario(&sim, &design)?;

    std::fs::create_dir_all(&args.out).map_err(io_error(&args.out))?;
    let trace_path = args.out.join("trace.csv");
    trace.save_csv(&trace_path)?;
    let metrics = report::metrics(&args.scenario, &cfg, &sim, &trace)?;
    let metrics_path = args.out.join("metrics.txt");
    std::fs::write(&metrics_path, &metrics).map_err(io_error(&metrics_path))?;
    let plot_path = args.out.join("plot.gp");
    std::fs::write(&plot_path, report::plot_script(&sim, cfg.operation.p_rated)).map_err(io_error(&plot_path))?;

    print!("{metrics}");
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_validate(arg: &ConfigArg) -> multirotor::Result<()> {
    let cfg = load_config(arg)?;
    cfg.validate()?;
    print!("{}", cfg.to_toml());
    Ok(())
}

fn cmd_synthesize(args: &SynthArgs) -> multirotor::Result<()> {
    let cfg = load_config(&args.config)?;
    cfg.validate()?;
    let (schedule, dec) = cfg.synthesize()?;
    schedule.validate(&dec.vertices)?;
    schedule.save(&args.out)?;
    for (g, eig) in schedule.vertex.iter().zip(schedule.closed_loop_eigenvalues(&dec.vertices)) {
        let list: Vec<String> = eig.iter().map(|l| format!("{:.6}{:+.6}i", l.re, l.im)).collect();
        println!("vertex {}: {}", g.index, list.join(", "));
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate(arg) => cmd_validate(arg),
        Command::Synthesize(args) => cmd_synthesize(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
