//! Files, configuration, run directories and reports around `dai-core`.

pub mod checkpoint;
pub mod config;
pub mod container;
pub mod demo;
pub mod diag;
pub mod error;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod run;
pub mod trajectory;

pub use error::{LabError, Result};
