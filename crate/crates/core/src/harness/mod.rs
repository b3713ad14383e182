//! Experiment driver: configuration, paired multi-scheme runs, sweeps, CSV
//! and SVG output.

pub mod config;
pub mod csv;
pub mod experiment;
pub mod plot;
pub mod sweep;

pub use config::{emit_config, parse_config, ExperimentConfig};
pub use experiment::{run_experiment, simulate, MetricRecord};
pub use plot::{render_plots, PlotSpec};
pub use sweep::{sweep, SweepOutput};
