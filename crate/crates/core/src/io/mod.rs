//! Files, configuration, synthetic data and the command-line pipelines.

pub mod check;
pub mod config;
pub mod data;
pub mod output;
pub mod run;
pub mod synth;

pub use config::{Backend, RunConfig};
pub use data::{load_csv, read_csv, ColumnMapping};
pub use run::{run_fit, run_report, run_synth, Overrides, RunOutcome};
pub use synth::{synth_generate, SynthSpec, Truth};
