//! Parameter sweeps: configuration, evaluation, tabular output and the
//! command-line front end.

pub mod cli;
pub mod config;
pub mod presets;
pub mod run;
pub mod table;

pub use config::{parse_config, ConfigError, Format, Quantity, SweepSpec, Variable};
pub use presets::{figure_presets, preset, Preset, PRESETS};
pub use run::run_sweep;
pub use table::{read_table, write_table, Column, ResultTable, Row};
