//! Simulation study driver: replicate loop, performance measures, result
//! files and study configuration.

pub mod config;
pub mod io;
pub mod performance;
pub mod runner;

pub use config::StudyConfig;
pub use io::{read_performance, read_records, summarize_run, write_performance, write_records, PerformanceRow};
pub use performance::{compute_performance, PerfFlags, PerfSummary};
pub use runner::{run_replicate, run_scenario, ObservedCellAudit, ReplicateRecord, ScenarioRun};
