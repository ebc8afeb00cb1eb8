//! File formats, model persistence, the benchmark runner and the `rase`
//! command line, built on `rase-core`.

pub mod bench;
pub mod cli;
pub mod csv_io;
pub mod error;
pub mod model_io;

pub use error::CliError;
