use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use marketabm::harness::{self, presets, Execution, ExperimentConfig, HarnessError};
use marketabm::stylized_facts::{SfConfig, SfReport};
use marketabm::ReturnKind;

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORTED: u8 = 3;

#[derive(Parser)]
#[command(name = "marketabm", version, about = "Simulate agent-based markets and measure stylized facts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run sweep points one after another.
        #[arg(long)]
        serial: bool,
    },
    /// Run a built-in experiment.
    Preset {
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        serial: bool,
        /// Print the preset's TOML instead of running it.
        #[arg(long)]
        show: bool,
    },
    /// Stylized facts of a price series read from CSV, printed as JSON.
    Analyze {
        prices: PathBuf,
        /// Price column; defaults to `price` or the only column.
        #[arg(long)]
        column: Option<String>,
        /// Column whose positive entries mark active ticks.
        #[arg(long)]
        active_column: Option<String>,
        #[arg(long, value_enum, default_value_t = Returns::Log)]
        return_kind: Returns,
    },
    /// List the built-in experiments.
    ListPresets,
}

#[derive(Clone, Copy, ValueEnum)]
enum Returns {
    Log,
    Difference,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn execute(mut config: ExperimentConfig, out: Option<PathBuf>, serial: bool) -> ExitCode {
    if let Some(out) = out {
        config.output_dir = out;
    }
    let exec = if serial { Execution::Serial } else { Execution::Parallel };
    let outcome = match harness::run_experiment(&config, exec) {
        Ok(o) => o,
        Err(e @ HarnessError::Config(_)) => return fail(EXIT_CONFIG, e),
        Err(e) => return fail(1, e),
    };
    let _ = io::stdout().write_all(outcome.summary.as_bytes());
    eprintln!("wrote {}", config.output_dir.display());
    for r in outcome.runs.iter().filter(|r| !r.completed()) {
        let a = r.abort.as_ref().expect("aborted run has a cause");
        eprintln!("{}: aborted at tick {}: {}", r.descriptor.label, a.tick, a.error);
    }
    if outcome.any_aborted() {
        ExitCode::from(EXIT_ABORTED)
    } else {
        ExitCode::SUCCESS
    }
}

fn analyze(path: &Path, column: Option<&str>, active: Option<&str>, kind: Returns) -> ExitCode {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(1, format_args!("{}: {e}", path.display())),
    };
    let prices = match harness::parse_prices(&text, column) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_CONFIG, format_args!("{}: {e}", path.display())),
    };
    let mask = match active {
        None => None,
        Some(name) => {
            let table = harness::parse_table(&text).expect("already parsed");
            match table.column(name) {
                Some(c) => Some(c.iter().map(|&v| v > 0.0).collect::<Vec<_>>()),
                None => return fail(EXIT_CONFIG, format_args!("{}: no column `{name}`", path.display())),
            }
        }
    };
    let config = SfConfig {
        return_kind: match kind {
            Returns::Log => ReturnKind::Log,
            Returns::Difference => ReturnKind::Difference,
        },
        active_only: mask.is_some(),
        ..SfConfig::default()
    };
    let report = SfReport::analyze(&prices, mask.as_deref(), &config);
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let _ = writeln!(io::stdout(), "{json}");
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, serial } => {
            let text = match fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => return fail(EXIT_CONFIG, format_args!("{}: {e}", config.display())),
            };
            match harness::load_config(&text) {
                Ok(c) => execute(c, out, serial),
                Err(e) => fail(EXIT_CONFIG, format_args!("{}: {e}", config.display())),
            }
        }
        Command::Preset {
            name,
            seed,
            out,
            serial,
            show,
        } => {
            let Some(p) = presets::find(&name) else {
                return fail(EXIT_CONFIG, format_args!("unknown preset `{name}`; see list-presets"));
            };
            if show {
                let _ = io::stdout().write_all(p.source.as_bytes());
                return ExitCode::SUCCESS;
            }
            let mut config = p.config().expect("built-in presets are valid");
            if let Some(s) = seed {
                config.seed = s;
            }
            execute(config, out, serial)
        }
        Command::Analyze {
            prices,
            column,
            active_column,
            return_kind,
        } => analyze(&prices, column.as_deref(), active_column.as_deref(), return_kind),
        Command::ListPresets => {
            for p in presets::PRESETS {
                let _ = writeln!(io::stdout(), "{:<24}{}", p.name, p.description);
            }
            ExitCode::SUCCESS
        }
    }
}
