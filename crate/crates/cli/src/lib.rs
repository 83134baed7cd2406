//! Batch experiment runner for shiftkit: JSON-configured experiments over
//! CSV datasets with deterministic CSV/JSON reports.

pub mod config;
pub mod error;
pub mod lemma;
pub mod pipeline;
pub mod preview;
pub mod registry;
pub mod report;
pub mod run;

pub use config::ExperimentConfig;
pub use error::CliError;
pub use lemma::{lemma_check, lemma_check_data};
pub use run::{evaluate, run_experiment};
