//! Configuration, experiment orchestration and CSV output.

mod config;
mod experiment;
mod output;

pub use config::{parse_config, BetaSweep, ConfigBuilder, Mode, RunConfig, CONFIG_KEYS};
pub use experiment::{
    run_ensemble, run_experiment, sweep_beta, write_outputs, EnsembleRun, ExperimentSummary, SweepCell, SweepSummary,
    MAX_ABORT_FRACTION, OUTPUT_FILES,
};
pub use output::{read_csv, write_csv, write_spectrum};
