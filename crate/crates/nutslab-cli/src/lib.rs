//! Command-line front end for the nutslab experiments.

pub mod commands;
pub mod config;
pub mod output;
