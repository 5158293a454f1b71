//! Experiment engine: metrics, rate fitting, the regularity probe, instance
//! files and multi-seed comparisons.

pub mod experiment;
pub mod io;
pub mod metrics;
pub mod probe;
pub mod rates;

pub use experiment::{run_experiment, AlgorithmSpec, ExperimentConfig, ExperimentSummary, InstanceSource};
pub use metrics::{compute_metrics, MetricEvaluator, MetricRecord};
pub use probe::{probe_regularity, probe_regularity_in, ProbeResult};
pub use rates::{fit_power_law, fit_rate, RateFit};
