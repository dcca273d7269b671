//! Experiment layer: configuration files, synthetic data with seeded noise,
//! error metrics, and the drivers behind the CLI subcommands.

mod config;
mod experiment;
mod noise;

pub use config::{ExperimentConfig, SourcePreset, TimeSignalPreset};
pub use experiment::{
    generate_data, gradient_check, relative_l2_error, run_experiment, run_forward,
    run_gradcheck, run_reconstruction, run_table, table_rows, GradCheckTrial, Metrics, RunOutput,
    TableRow,
};
pub use noise::{add_noise, NoiseScaling, SplitMix64};
