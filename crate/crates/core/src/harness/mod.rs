//! Experiment orchestration: configuration, Monte-Carlo sweeps and reports.

pub mod config;
pub mod report;
pub mod sweep;

pub use config::{trial_seed, ChannelConfig, ExperimentConfig, KernelSpec, SchemeConfig, CONFIG_VERSION};
pub use report::{
    emit_csv, emit_svg, nmse, parse_csv, read_csv, render_svg, summarize, write_csv, ResultRecord, Series,
    SummaryPoint, CSV_HEADER,
};
pub use sweep::{
    build_kernel, run_sweep, run_sweep_detailed, train_covariance_kernel, training_channels, PlanEntry,
    SweepOutput, TrialSeeds,
};
