//! Experiments, baselines, figure data and the command line.

pub mod cli;
mod config;
mod experiment;
mod maps;
mod output;

pub use config::{Config, ExperimentSpec};
pub use experiment::{
    baseline_cellular, mean_and_std_error, run_experiment, run_on_scenario, sweep_subchannels, sweep_values,
    Evaluation, FrameCounts, Metrics, SweepPoint, SweepTable,
};
pub use maps::{mode_map, success_heatmap, GridSpec, HeatmapGrid};
pub use output::{cycles_csv, sweep_csv, utility_csv, write_atomic, FileEntry, Manifest, OutputSet, CSV_SCHEMA_VERSION};
