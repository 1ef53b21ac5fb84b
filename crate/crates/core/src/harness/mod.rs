//! Experiment configs, sweeps and their files on disk.

pub mod config;
pub mod csv;
pub mod presets;
pub mod run;

pub use config::{load_config, ConfigError, ExperimentConfig, ModelKind, ModelParams, RunDescriptor, Sweep, SweepValue};
pub use csv::{parse_prices, parse_table, trace_to_csv, CsvError, CsvTable};
pub use presets::{Preset, PRESETS};
pub use run::{run_experiment, simulate, sweep, Execution, ExperimentOutcome, HarnessError, RunOutcome};
