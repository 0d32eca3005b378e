//! Experiment configuration, Monte Carlo sweeps and the command-line front end.

pub mod cli;
pub mod config;
pub mod sweep;

pub use config::{parse_snr_list, Config, ExperimentConfig};
pub use sweep::{reference_lines, run_sweep, sweep_selectors, SweepPoint, SweepResult, SWEEP_CSV_HEADER};
