//! Command line driver, evaluation metrics, noise generation, set
//! desugaring, a brute-force MAP oracle and synthetic scenarios for
//! `psl-core`.

pub mod cli;
pub mod desugar;
pub mod metrics;
pub mod noise;
pub mod oracle;
pub mod scenarios;
