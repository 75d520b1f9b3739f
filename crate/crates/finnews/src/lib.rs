//! Storage, HTTP API and command line for the financial news engine.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod corpus;
pub mod engine;
pub mod server;

pub use engine::{Engine, EngineConfig, EngineError, IngestReport};
