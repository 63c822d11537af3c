//! File formats, dataset generation, evaluation and plotting around
//! `skill-core`. The `skill` binary exposes all of it on the command line.

pub mod config;
pub mod dataset;
pub mod eval;
pub mod formats;
pub mod svg;

pub use config::RunConfig;
