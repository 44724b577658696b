//! Experiment configuration, runs, sweeps and CSV output.

mod config;
mod experiment;
mod sweep;

pub use config::{
    build_objective, load_config, ExperimentConfig, MnistSplit, Objective, ObjectiveKind,
    CONFIG_KEYS, MNIST_PIXELS,
};
pub use experiment::{
    estimate_for_config, format_float, format_trace_row, parse_trace_csv, read_trace_csv,
    rounds_to_threshold, run_experiment, simulate, stationarity_floor, trace_csv,
    write_atomic, write_trace_csv, ExperimentOutcome, TRACE_HEADER,
};
pub use sweep::{
    load_sweep, run_sweep, CellResult, SweepAxis, SweepSpec, SweepSummary, SweepValue, SUMMARY_HEADER,
    THREADS_ENV,
};
