//! Experiment driver: configuration, scenario dispatch and reports.

pub mod config;
pub mod report;
pub mod run;

pub use config::{
    load_config, ConfigDraft, ConfigError, OutputFormat, ParamValue, ScenarioConfig, ScenarioKind,
    SweepSpec,
};
pub use report::{emit_report, Metric, ScenarioReport, SweepTable};
pub use run::{run_scenario, RunError};
