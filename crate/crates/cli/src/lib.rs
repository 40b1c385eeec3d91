//! Experiment driver: generates operators, runs the Laplace-based
//! constructions against direct inversion and writes JSON/CSV reports.

pub mod commands;
pub mod config;
pub mod report;
