//! Command line front end and HTTP resolve service.

pub mod commands;
pub mod config;
pub mod engine;
pub mod payload;
pub mod service;

pub use commands::run;
pub use config::EngineConfig;
pub use engine::{check_request, refresh_all, CheckOutcome, CheckRequest, Failure};
