//! Synthetic roadside pools with hidden ground truth, a simulated detector
//! that improves with labeled exposure, and a strategy comparison harness.

pub mod detector;
pub mod experiment;
pub mod generate;

pub use crate::selector::global_class_entropy;
pub use detector::{MockDetector, MockDetectorState};
pub use experiment::{
    run_experiment, run_strategies, ExperimentConfig, ExperimentReport, ReportRow, StrategyRun,
    StrategySummary,
};
pub use generate::{generate_pool, PoolGenConfig, SceneLatent, SyntheticPool, SyntheticWorld};
