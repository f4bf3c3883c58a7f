//! Data generation, experiments, streaming and benchmarks on top of
//! `confseq-core`.

pub mod config;
pub mod experiments;
pub mod generate;
pub mod selftest;
pub mod table;
pub mod track;

pub use config::{parse_methods, Dist, ExperimentConfig};
pub use table::{Cell, Format, TableWriter};
