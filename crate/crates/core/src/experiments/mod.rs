//! Monte-Carlo study of the estimators on the simulation design: scenario
//! runner, aggregate metrics and report files.

pub mod metrics;
pub mod report;
pub mod study;

pub use metrics::*;
pub use report::{emit_report, load_study, read_tables, write_tables, ReportFiles, TABLES};
pub use study::{compute_metrics, run_study, FullFit, RepRecord, Scenario, SlimFit, StudyConfig, StudyOmega, StudyResult, HIST_BINS, HIST_RANGE};
