//! File formats, logs and the command-line front end for `omniwrench-core`.

pub mod cli;
pub mod csv_log;
pub mod error;
pub mod model_file;
pub mod polytope_file;
pub mod scenario_file;

pub use error::IoError;
pub use omniwrench_core as core;
