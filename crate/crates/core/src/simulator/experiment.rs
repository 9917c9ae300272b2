use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_pool, PoolGenConfig};
use crate::error::{Error, Result};
use crate::scene::PoolState;
use crate::selector::{run_active_learning, BudgetLedger, Detector, RoundRecord, SelectorConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pool: PoolGenConfig,
    pub strategies: Vec<SelectorConfig>,
    pub rounds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            pool: PoolGenConfig::default(),
            strategies: vec![SelectorConfig::default()],
            rounds: 8,
        }
    }
}

/// One metric record per strategy and round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub strategy: String,
    pub round: usize,
    pub images: usize,
    pub objects_round: u64,
    pub objects_consumed: u64,
    pub budget_remaining: u64,
    pub class_entropy: Option<f64>,
    pub mean_selected_h: Option<f64>,
    pub per_class_annotated: Vec<u64>,
    pub exhausted: bool,
}

#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub label: String,
    pub config: SelectorConfig,
    pub history: Vec<RoundRecord>,
    pub ledger: BudgetLedger,
    pub halted_early: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub rounds_run: usize,
    pub images_labeled: usize,
    pub objects_consumed: u64,
    pub total_object_budget: u64,
    pub final_class_entropy: Option<f64>,
    pub halted_early: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub class_names: Vec<String>,
    pub runs: Vec<StrategyRun>,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        self.runs
            .iter()
            .flat_map(|run| {
                run.history.iter().map(move |rec| ReportRow {
                    strategy: run.label.clone(),
                    round: rec.result.round,
                    images: rec.metrics.images_labeled,
                    objects_round: rec.metrics.objects_this_round,
                    objects_consumed: rec.metrics.objects_consumed,
                    budget_remaining: rec.metrics.budget_remaining,
                    class_entropy: rec.metrics.class_entropy,
                    mean_selected_h: rec.metrics.mean_selected_h,
                    per_class_annotated: rec.metrics.per_class_annotated.clone(),
                    exhausted: rec.result.exhausted,
                })
            })
            .collect()
    }

    pub fn summaries(&self) -> Vec<StrategySummary> {
        self.runs
            .iter()
            .map(|run| StrategySummary {
                strategy: run.label.clone(),
                rounds_run: run.history.len(),
                images_labeled: run.history.iter().map(|r| r.metrics.images_labeled).sum(),
                objects_consumed: run.ledger.objects_consumed,
                total_object_budget: run.ledger.total_object_budget,
                final_class_entropy: run.history.last().and_then(|r| r.metrics.class_entropy),
                halted_early: run.halted_early,
            })
            .collect()
    }

    pub fn run(&self, label: &str) -> Option<&StrategyRun> {
        self.runs.iter().find(|r| r.label == label)
    }
}

/// Runs every strategy from the same starting pool, each with a fresh
/// detector from `make_detector`. Runs are independent and execute in
/// parallel; output order follows `strategies`.
pub fn run_strategies<D, F>(
    pool: &PoolState,
    strategies: &[SelectorConfig],
    rounds: usize,
    make_detector: F,
) -> Result<ExperimentReport>
where
    D: Detector,
    F: Fn() -> D + Sync,
{
    if strategies.is_empty() {
        return Err(Error::Config("no strategies given".into()));
    }
    let runs = strategies
        .par_iter()
        .map(|config| {
            let mut detector = make_detector();
            let run = run_active_learning(pool, config, rounds, &mut detector)?;
            Ok(StrategyRun {
                label: config.label(),
                config: config.clone(),
                history: run.history,
                ledger: run.ledger,
                halted_early: run.halted_early,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        class_names: pool.class_names.clone(),
        runs,
    })
}

/// Generates the configured pool and compares strategies on it with the
/// simulated detector.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let generated = generate_pool(&cfg.pool)?;
    run_strategies(&generated.pool, &cfg.strategies, cfg.rounds, || generated.detector())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selector::{StageOrder, Strategy};

    fn cfg(strategies: Vec<SelectorConfig>) -> ExperimentConfig {
        ExperimentConfig {
            pool: PoolGenConfig {
                n_scenes: 150,
                objects_per_scene: [1, 10],
                init_labeled: 10,
                seed: 5,
                ..Default::default()
            },
            strategies,
            rounds: 8,
        }
    }

    fn strat(strategy: Strategy) -> SelectorConfig {
        SelectorConfig {
            strategy,
            k_per_round: 5,
            total_object_budget: 10_000,
            ..Default::default()
        }
    }

    #[test]
    fn report_shape_and_conservation() {
        let report = run_experiment(&cfg(vec![strat(Strategy::Lh3d), strat(Strategy::Entropy)])).unwrap();
        let rows = report.rows();
        assert_eq!(rows.len(), 16);
        for run in &report.runs {
            let total: u64 = run.history.iter().map(|r| r.metrics.objects_this_round).sum();
            assert_eq!(total, run.ledger.objects_consumed);
        }
        let again = run_experiment(&cfg(vec![strat(Strategy::Lh3d), strat(Strategy::Entropy)])).unwrap();
        assert_eq!(again.rows(), rows);
    }

    #[test]
    fn without_semantic_balance_runs() {
        let no_sb = SelectorConfig {
            stage_order: StageOrder::new(vec![crate::selector::Stage::Dc, crate::selector::Stage::Gv]).unwrap(),
            ..strat(Strategy::Lh3d)
        };
        let report = run_experiment(&cfg(vec![strat(Strategy::Lh3d), no_sb])).unwrap();
        assert_eq!(report.runs[1].label, "lh3d[dc,gv]");
        assert_eq!(report.runs[1].history.len(), 8);
    }
}
