//! HTTP service and command-line front end for the UI simulator.

pub mod api;
pub mod cli;
pub mod config;
pub mod views;

pub use config::ServiceConfig;
