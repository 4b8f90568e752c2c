//! Experiment harness for the `dqlos` binary: suite configuration, batch
//! execution and CSV output.

pub mod config;
pub mod output;
pub mod stats;
pub mod suite;

pub use config::{parse_config, ConfigError, SuiteConfig};
pub use suite::{run_single, run_suite, SuiteReport};
