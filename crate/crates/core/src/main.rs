use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use recurrence_lab::harness::{emit_report, load_results, run, Experiment, ExperimentConfig, HarnessError};

#[derive(Parser)]
#[command(name = "reclab", version, about = "Shrinking-target recurrence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Count hits of a shrinking target along random orbits.
    Simulate(RunArgs),
    /// Decide the zero-one law from the target-mass series.
    Classify(RunArgs),
    /// Estimate the entropy of the invariant measure.
    Entropy(RunArgs),
    /// Dimension bounds for the set of points hitting the targets.
    Bounds(RunArgs),
    /// Build a finite Cantor stage and its Frostman exponent.
    Cantor(RunArgs),
    /// Grid-regularity ratios for cylinder or rectangle grids.
    Gridprobe(RunArgs),
    /// Rewrite the reports of an earlier run from its results.json.
    Report {
        /// Path to results.json.
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of json,csv,table,plot.
        #[arg(long, value_delimiter = ',')]
        format: Option<Vec<String>>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; defaults are used for missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    trials: Option<u64>,
    /// One or more horizons, e.g. `--horizon 1000,10000`.
    #[arg(long, value_delimiter = ',')]
    horizon: Option<Vec<u64>>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    print_config: bool,
}

fn load_config(experiment: Experiment, a: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut c = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
            let c = ExperimentConfig::from_json(&text)
                .map_err(|e| HarnessError::Validation(vec![format!("{}: {e}", path.display())]))?;
            if c.experiment != experiment {
                return Err(HarnessError::Validation(vec![format!(
                    "config is for {:?} but the subcommand is {}",
                    c.experiment.name(),
                    experiment.name()
                )]));
            }
            c
        }
        None => ExperimentConfig::default_for(experiment),
    };
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(o) = &a.out {
        c.output.dir = o.display().to_string();
    }
    if let Some(p) = a.precision {
        c.precision_bits = p;
    }
    if let Some(t) = a.trials {
        c.trials = t;
    }
    if let Some(h) = &a.horizon {
        c.horizons = h.clone();
    }
    if let Some(w) = a.workers {
        c.workers = w;
    }
    if let Some(f) = &a.format {
        c.output.formats = f.clone();
    }
    Ok(c)
}

/// Writes to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<(), HarnessError> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    let (experiment, args) = match cli.command {
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::Classify(a) => (Experiment::Classify, a),
        Command::Entropy(a) => (Experiment::Entropy, a),
        Command::Bounds(a) => (Experiment::Bounds, a),
        Command::Cantor(a) => (Experiment::Cantor, a),
        Command::Gridprobe(a) => (Experiment::Gridprobe, a),
        Command::Report { input, out, format } => {
            let rs = load_results(&input)?;
            let dir = out.unwrap_or_else(|| input.parent().map(PathBuf::from).unwrap_or_default());
            let formats = format.unwrap_or_else(|| rs.config.output.formats.clone());
            for f in emit_report(&rs, &formats, &dir)? {
                emit(&format!("{}\n", f.display()))?;
            }
            return Ok(());
        }
    };
    let config = load_config(experiment, &args)?;
    if args.print_config {
        return emit(&format!("{}\n", config.to_json()));
    }
    let rs = run(&config)?;
    let files = emit_report(&rs, &config.output.formats, config.output.dir.as_ref())?;
    match files.iter().find(|f| f.ends_with("table.txt")) {
        Some(t) => emit(&std::fs::read_to_string(t)?),
        None => emit(&format!("{}\n", serde_json::to_string_pretty(&rs.summary).unwrap())),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
