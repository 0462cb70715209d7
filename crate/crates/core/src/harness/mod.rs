//! Command-line support: tensor files, configuration, benchmarks, inversion
//! and self-check suites.

pub mod bench;
pub mod check;
pub mod config;
pub mod image_io;
pub mod invert;
pub mod simulate;
pub mod tensor_file;

pub use config::RunConfig;
