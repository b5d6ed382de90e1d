//! Front ends: configuration, CLI, HTTP service and report rendering.

pub mod cli;
pub mod config;
pub mod report;
pub mod server;

pub use config::{EngineConfig, ProviderKind};
pub use report::{crosstab, CrosstabReport};
