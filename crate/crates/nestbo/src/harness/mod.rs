//! Seeded experiment orchestration: configs, the method registry, replicate
//! execution, traces, aggregation, preset sweeps and the verify suite.

pub mod config;
pub mod experiment;
pub mod methods;
pub mod steperror;
pub mod sweeps;
pub mod trace;
pub mod verify;

pub use config::{ExperimentConfig, Method};
pub use experiment::{aggregate, run_experiment, run_traces, AggregateReport};
pub use methods::run_replicate;
pub use trace::RunTrace;
