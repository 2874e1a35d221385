//! Experiment runner for the `eqspeed` binary.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
