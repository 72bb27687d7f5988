//! Experiment runner: configuration, sweeps, figure presets and validation.

pub mod config;
pub mod error;
pub mod presets;
pub mod sweep;
pub mod validate;

pub use config::{load_config, Axis, Engine, ExperimentConfig, Sweep};
pub use error::CliError;
pub use presets::{plan, Preset, PresetPlan};
pub use sweep::{render_csv, run_series, run_sweep, Metric, Row, Series, SweepResult};
pub use validate::{run_validation, ValidationReport};
