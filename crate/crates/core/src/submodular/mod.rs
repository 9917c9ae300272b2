//! Concave-over-modular set functions and their greedy maximization.

mod greedy;
mod objective;
mod oracle;

pub use greedy::{greedy_select, naive_greedy_select, CostBudget, GreedyOutcome};
pub use objective::{CoverageObjective, GainAccumulator, ObjectiveDump, Transform, OBJECTIVE_FORMAT};
pub use oracle::{
    brute_force_optimum, check_diminishing_returns, random_objective, PropertyViolation,
    ViolationKind, BRUTE_FORCE_CAP, VALUE_TOL,
};
