//! Command-line interface: run scenarios, recompute metrics from stored
//! logs, validate mobility traces, and print the competence similarity table.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stealth_core::harness::{
    build_scenario, parse_config_file, recompute_from_dir, run_experiment, Overrides,
    ScenarioError, SkillAssignment, TraceSource,
};
use stealth_core::simkit::MobilityTrace;
use stealth_core::taxonomy::SkillTaxonomy;

#[derive(Parser)]
#[command(
    name = "stealth",
    version,
    about = "Trust-scored health-data dissemination simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write report artifacts.
    Run(RunArgs),
    /// Recompute the report of a stored experiment from its logs.
    Metrics(MetricsArgs),
    /// Parse and validate a mobility trace file.
    ValidateTrace { file: PathBuf },
    /// Print the competence similarity table.
    Taxonomy {
        /// Taxonomy config file (`child<TAB>parent` lines); built-in default
        /// when omitted.
        #[arg(long)]
        file: Option<PathBuf>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
    Jsonl,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SkillAssignmentArg {
    Counts,
    Weights,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario name: senack, seack or meack.
    #[arg(long)]
    scenario: Option<String>,
    /// Mobility trace CSV file.
    #[arg(long, conflicts_with = "synthetic")]
    trace: Option<PathBuf>,
    /// Generate seeded random-waypoint mobility (the default source).
    #[arg(long)]
    synthetic: bool,
    /// Optional key=value config file; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<u32>,
    #[arg(long)]
    nodes: Option<u32>,
    /// Simulation length in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Critical-event instant in seconds.
    #[arg(long)]
    emergency_time: Option<f64>,
    /// Transmission radius in meters.
    #[arg(long)]
    radius: Option<f64>,
    /// Announcement interval in seconds.
    #[arg(long)]
    announce_interval: Option<f64>,
    /// Acknowledgement timeout in milliseconds.
    #[arg(long)]
    ack_timeout: Option<f64>,
    /// Concurrent repetition workers.
    #[arg(long)]
    workers: Option<u32>,
    #[arg(long, value_enum)]
    skill_assignment: Option<SkillAssignmentArg>,
    /// Output directory for report.csv, report.jsonl, manifest.txt and logs/.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format printed to stdout.
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
}

#[derive(Args)]
struct MetricsArgs {
    /// Directory holding manifest.txt and logs/ of a previous run.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders help/version on stdout with success; everything
            // else is a usage error
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match run_command(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn run_command(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => run_scenario(args),
        Command::Metrics(args) => {
            let output = recompute_from_dir(&args.dir).map_err(|e| CliError::Runtime(e.to_string()))?;
            print_report(&output, args.format);
            Ok(())
        }
        Command::ValidateTrace { file } => {
            let trace = MobilityTrace::load(&file).map_err(|e| CliError::Runtime(e.to_string()))?;
            println!(
                "ok: {} nodes, {} snapshots every {:.3} s, span {:.1} s, area {:.0} m x {:.0} m{}",
                trace.n_nodes(),
                trace.snapshot_count(),
                trace.snapshot_interval().as_secs_f64(),
                trace.end_time().as_secs_f64(),
                trace.area().0,
                trace.area().1,
                if trace.is_dense() { "" } else { " (sparse)" }
            );
            Ok(())
        }
        Command::Taxonomy { file } => {
            let tax = match file {
                Some(path) => {
                    SkillTaxonomy::load(&path).map_err(|e| CliError::Runtime(e.to_string()))?
                }
                None => SkillTaxonomy::healthcare_default(),
            };
            println!("{:<16} {:>5} {:>10}", "skill", "depth", "similarity");
            for label in tax.labels() {
                let depth = tax.depth_to_root(label).expect("label exists");
                let sim = tax.similarity_to_reference(label).expect("label exists");
                println!("{label:<16} {depth:>5} {:>10.3}", sim.value());
            }
            Ok(())
        }
    }
}

fn run_scenario(args: RunArgs) -> Result<(), CliError> {
    let file_config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            parse_config_file(&text).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => Default::default(),
    };

    let scenario = args
        .scenario
        .or(file_config.scenario)
        .ok_or_else(|| CliError::Usage("--scenario is required (or set it in --config)".into()))?;

    let overrides = Overrides {
        n_nodes: args.nodes.or(file_config.overrides.n_nodes),
        duration_s: args.duration.or(file_config.overrides.duration_s),
        emergency_time_s: args
            .emergency_time
            .or(file_config.overrides.emergency_time_s),
        announce_interval_s: args
            .announce_interval
            .or(file_config.overrides.announce_interval_s),
        ack_timeout_ms: args.ack_timeout.or(file_config.overrides.ack_timeout_ms),
        radius_m: args.radius.or(file_config.overrides.radius_m),
        repetitions: args.reps.or(file_config.overrides.repetitions),
        seed: args.seed.or(file_config.overrides.seed),
        skill_assignment: args
            .skill_assignment
            .map(|s| match s {
                SkillAssignmentArg::Counts => SkillAssignment::Counts,
                SkillAssignmentArg::Weights => SkillAssignment::Weights,
            })
            .or(file_config.overrides.skill_assignment),
        workers: args.workers.or(file_config.overrides.workers),
    };
    let config = build_scenario(&scenario, &overrides)?;

    let source = match (&args.trace, args.synthetic) {
        (Some(path), false) => TraceSource::File(path.clone()),
        (None, _) => file_config.trace.unwrap_or(TraceSource::Synthetic),
        (Some(_), true) => {
            return Err(CliError::Usage("--trace conflicts with --synthetic".into()))
        }
    };

    let output = run_experiment(&config, &source, args.out.as_deref())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    print_report(&output, args.format);
    if !output.invalid_reps.is_empty() {
        eprintln!("warning: invalid repetitions excluded: {:?}", output.invalid_reps);
    }
    Ok(())
}

fn print_report(output: &stealth_core::harness::ExperimentOutput, format: ReportFormat) {
    match format {
        ReportFormat::Text => print!("{}", output.text),
        ReportFormat::Csv => print!("{}", output.csv),
        ReportFormat::Jsonl => print!("{}", output.jsonl),
    }
}
