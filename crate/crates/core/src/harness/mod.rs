//! Seeded learning batteries, learning-efficiency metrics, statistics and result files.

pub mod config;
pub mod curves;
pub mod metrics;
pub mod report;
pub mod runner;
pub mod stats;

pub use config::{
    AgentConfig, AgentKind, Method, MethodPlan, Prepared, RunConfig, SeriesSpec, ShapingConfig,
};
pub use curves::{CurvePayload, CurveSet};
pub use metrics::{asymptotic_performance, smooth, time_to_threshold, TimeToThreshold};
pub use report::{
    compare_methods, read_results, write_results, Comparison, MethodMetrics, MetricSettings, MetricsReport,
};
pub use runner::{run_battery, run_battery_with, run_episode, run_learning, EpisodeStats, RunResult};

impl RunConfig {
    pub fn metric_settings(&self) -> MetricSettings {
        MetricSettings {
            thresholds: if self.thresholds.is_empty() {
                MetricSettings::default().thresholds
            } else {
                self.thresholds.clone()
            },
            smoothing_window: self.smoothing_window,
            asymptotic_tail: self.asymptotic_tail,
        }
    }
}
