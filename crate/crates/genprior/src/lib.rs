//! File formats, run configs, CSV traces, parallel sweeps and the
//! command-line driver for [`genprior_core`].

pub mod cli;
pub mod config;
pub mod driver;
pub mod error;
pub mod format;
pub mod sweep;
pub mod trace_csv;

pub use config::{Algo, RunConfig};
pub use driver::{Setup, StdClock};
pub use error::AppError;
