//! Configuration, file formats and parallel drivers for `nvloc-core`, and
//! the `nvloc` command-line tool built on them.

pub mod config;
pub mod error;
pub mod hash;
pub mod io;
pub mod run;

pub use config::{Resolved, RunConfig};
pub use error::{CliError, Result};
pub use run::{Options, Run, Verb};
