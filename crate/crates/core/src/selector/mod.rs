//! Hierarchical round selection, reference strategies and round/budget
//! accounting.

pub mod active;
pub mod baselines;
pub mod budget;
pub mod config;
pub mod round;

pub use active::{
    global_class_entropy, mean_depth_entropy, run_active_learning, ActiveLearningRun, Detector,
    FrozenDetector, RoundMetrics, RoundRecord,
};
pub use baselines::{descriptor_embedding, furthest_first, select_baseline};
pub use budget::{BudgetLedger, RoundCharge};
pub use config::{SelectorConfig, Stage, StageOrder, Strategy};
pub use round::{pool_profiles, select_round, RoundResult, StageOutput};
