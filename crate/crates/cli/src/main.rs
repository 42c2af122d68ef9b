use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use madelung_lab::config::{Format, ScenarioKind};
use madelung_lab::{compare, output, runner, RunError, RunReport, RunResult, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "madelung-lab",
    version,
    about = "Entropy diagnostics of quantum and diffusive spreading"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML scenario file.
    config: PathBuf,
    /// Overrides `output.directory`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Writes only this data format.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Recorded in the report. Nothing in the runs is random yet.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `diagnostics.enable_von_neumann`.
    #[arg(long, value_enum)]
    vn: Option<Switch>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and check its identities.
    Run(RunArgs),
    /// Evolve the same density quantum mechanically and diffusively.
    Compare(RunArgs),
    /// List the built-in scenarios.
    ListScenarios,
    /// Print the full default configuration of a scenario.
    PrintDefaultConfig { scenario: ScenarioKind },
}

fn load(args: &RunArgs) -> RunResult<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(dir) = &args.output_dir {
        cfg.output.directory = dir.clone();
    }
    if let Some(format) = args.format {
        cfg.output.formats = vec![format];
    }
    if let Some(vn) = args.vn {
        cfg.diagnostics.enable_von_neumann = matches!(vn, Switch::On);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(args: &RunArgs, simulate: fn(&ScenarioConfig) -> RunResult<RunReport>) -> RunResult<RunReport> {
    let cfg = load(args)?;
    let mut report = simulate(&cfg)?;
    report.provenance.seed = args.seed;
    let written = output::emit_timeseries(&report, &cfg.output.directory, &cfg.output.formats)?;
    for path in &written {
        log::info!("wrote {}", path.display());
    }
    Ok(report)
}

fn finish(result: RunResult<RunReport>) -> ExitCode {
    match result {
        Ok(report) => {
            for check in &report.identities {
                println!("{check}");
            }
            for (name, value) in &report.metrics {
                println!("metric scenario={} name={name} value={value:.9e}", report.scenario);
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(err) => fail(err),
    }
}

fn fail(err: RunError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => finish(execute(&args, runner::simulate)),
        Command::Compare(args) => finish(execute(&args, compare::simulate_comparison)),
        Command::ListScenarios => {
            for kind in ScenarioKind::ALL {
                println!("{:<20} {}", kind.name(), kind.description());
            }
            ExitCode::SUCCESS
        }
        Command::PrintDefaultConfig { scenario } => {
            print!("{}", ScenarioConfig::default_for(scenario).to_toml());
            ExitCode::SUCCESS
        }
    }
}
