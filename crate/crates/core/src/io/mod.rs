//! Files, configuration, embedded fixtures and the command implementations
//! behind the `cascade-iv` binary.

pub mod cli;
pub mod config;
pub mod csv;
pub mod fixtures;

pub use self::csv::{load_dataset_csv, parse_dataset_csv, write_dataset_csv};
pub use config::RunConfig;
pub use fixtures::{fixture_checks, fixture_report, FixtureReport, PublishedFixtures};
