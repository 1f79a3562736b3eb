//! Operator surface: configuration files, presets, CSV and plot output, acceptance suites.

pub mod config;
pub mod output;
pub mod presets;
pub mod verify;

pub use config::{load_config, parse_config};
pub use output::{emit_plots, emit_series, read_series, PlotFormat};
pub use presets::Preset;
pub use verify::{verify, verify_preset, VerifyReport};
