//! File formats, parallel execution, and the `dpboot` command line on top of
//! [`dpboot_core`].

pub mod cli;
pub mod error;
pub mod io;
pub mod parallel;
pub mod report;

pub use error::{CliError, Result};
pub use parallel::RayonRunner;
