//! Batch driver for srmkit: TOML experiment configs in, text reports and
//! columnar figure data out.

pub mod check;
pub mod config;
pub mod error;
pub mod extract;
pub mod figure;
pub mod report;
pub mod session;

pub use check::{run_check, write_check, CheckRun};
pub use config::{ExperimentConfig, Loaded};
pub use error::CliError;
pub use extract::{run_extract, write_extract, ExtractRun};
pub use session::{run_session, write_session, SessionRun};
