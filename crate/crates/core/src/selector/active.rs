use serde::{Deserialize, Serialize};

use super::budget::BudgetLedger;
use super::config::SelectorConfig;
use super::round::{select_round, RoundResult};
use crate::error::{Error, Result};
use crate::scene::{PoolState, SceneRecord};

/// Stand-in for the detector that is retrained between rounds.
pub trait Detector {
    /// Absorbs the newly annotated scenes. Returns refreshed records for the
    /// whole pool, in pool order, or `None` when predictions are unchanged.
    fn observe(&mut self, pool: &PoolState, newly_labeled: &[u64]) -> Result<Option<Vec<SceneRecord>>>;
}

/// Detector whose predictions never change.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrozenDetector;

impl Detector for FrozenDetector {
    fn observe(&mut self, _: &PoolState, _: &[u64]) -> Result<Option<Vec<SceneRecord>>> {
        Ok(None)
    }
}

/// Normalized Shannon entropy of the pooled true class counts of `scenes`.
pub fn global_class_entropy(scenes: &[&SceneRecord], num_classes: usize) -> Result<f64> {
    if num_classes == 0 {
        return Err(Error::InvalidInput("no classes".into()));
    }
    let mut counts = vec![0.0; num_classes];
    for rec in scenes {
        for (c, n) in counts.iter_mut().zip(rec.true_class_counts(num_classes)) {
            *c += n;
        }
    }
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return Err(Error::NoAnnotatedObjects);
    }
    if num_classes == 1 {
        return Ok(0.0);
    }
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * p.ln()
        })
        .sum();
    Ok(h / (num_classes as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub images_labeled: usize,
    pub objects_this_round: u64,
    pub objects_consumed: u64,
    pub budget_remaining: u64,
    /// Class entropy over every scene selected so far; `None` until an
    /// object has been annotated.
    pub class_entropy: Option<f64>,
    /// Mean depth entropy of this round's selections, as predicted when
    /// they were chosen.
    pub mean_selected_h: Option<f64>,
    /// Cumulative annotated objects per class, selected scenes only.
    pub per_class_annotated: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub result: RoundResult,
    pub metrics: RoundMetrics,
}

#[derive(Debug, Clone)]
pub struct ActiveLearningRun {
    pub history: Vec<RoundRecord>,
    pub ledger: BudgetLedger,
    pub final_pool: PoolState,
    /// Stopped before the requested number of rounds.
    pub halted_early: bool,
}

fn mean_h(pool: &PoolState, ids: &[u64]) -> Result<Option<f64>> {
    if ids.is_empty() {
        return Ok(None);
    }
    mean_depth_entropy(pool, ids).map(Some)
}

/// Runs up to `rounds` rounds of select, annotate, charge and retrain. The
/// initial labeled set is free; only selected scenes are charged.
pub fn run_active_learning(
    pool: &PoolState,
    config: &SelectorConfig,
    rounds: usize,
    detector: &mut dyn Detector,
) -> Result<ActiveLearningRun> {
    if rounds == 0 {
        return Err(Error::Config("need at least one round".into()));
    }
    config.validate()?;
    let num_classes = pool.num_classes();
    let mut state = pool.clone();
    let mut ledger = BudgetLedger::new(config.total_object_budget);
    let mut history = Vec::new();
    let mut selected_so_far: Vec<u64> = Vec::new();
    let mut per_class = vec![0u64; num_classes];
    let mut halted_early = false;

    for round in 1..=rounds {
        if state.unlabeled.is_empty() {
            halted_early = true;
            break;
        }
        let result = select_round(&state, config, &ledger, round)?;
        let mean_selected_h = mean_h(&state, &result.selected)?;
        if result.exhausted {
            history.push(RoundRecord {
                metrics: RoundMetrics {
                    images_labeled: 0,
                    objects_this_round: 0,
                    objects_consumed: ledger.objects_consumed,
                    budget_remaining: ledger.remaining(),
                    class_entropy: class_entropy(&state, &selected_so_far)?,
                    mean_selected_h,
                    per_class_annotated: per_class.clone(),
                },
                result,
            });
            halted_early = true;
            break;
        }
        ledger.charge(round, result.selected.len(), result.budget_delta)?;
        for id in &result.selected {
            let rec = state.record(*id).expect("selected from pool");
            for (acc, n) in per_class.iter_mut().zip(rec.true_class_counts(num_classes)) {
                *acc += n as u64;
            }
        }
        selected_so_far.extend(&result.selected);
        state = state.with_labeled(&result.selected)?;
        if let Some(records) = detector.observe(&state, &result.selected)? {
            state = state.with_records(records)?;
        }
        history.push(RoundRecord {
            metrics: RoundMetrics {
                images_labeled: result.selected.len(),
                objects_this_round: result.budget_delta,
                objects_consumed: ledger.objects_consumed,
                budget_remaining: ledger.remaining(),
                class_entropy: class_entropy(&state, &selected_so_far)?,
                mean_selected_h,
                per_class_annotated: per_class.clone(),
            },
            result,
        });
        let affordable = state
            .unlabeled
            .iter()
            .any(|id| ledger.can_afford(state.record(*id).expect("in pool").true_object_count as u64));
        if round < rounds && !affordable {
            halted_early = true;
            break;
        }
    }
    Ok(ActiveLearningRun {
        history,
        ledger,
        final_pool: state,
        halted_early,
    })
}

fn class_entropy(pool: &PoolState, ids: &[u64]) -> Result<Option<f64>> {
    let recs: Vec<&SceneRecord> = ids.iter().filter_map(|id| pool.record(*id)).collect();
    match global_class_entropy(&recs, pool.num_classes()) {
        Ok(h) => Ok(Some(h)),
        Err(Error::NoAnnotatedObjects) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Mean normalized depth entropy over `ids`.
pub fn mean_depth_entropy(pool: &PoolState, ids: &[u64]) -> Result<f64> {
    let mut sum = 0.0;
    for id in ids {
        let rec = pool
            .record(*id)
            .ok_or_else(|| Error::InvalidInput(format!("scene {id} not in pool")))?;
        sum += rec.depth_profile()?.0;
    }
    Ok(sum / ids.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::tests::simple_record;
    use crate::selector::config::Strategy;
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeSet;

    fn counted(id: u64, objects: usize, class: usize) -> SceneRecord {
        let mut rec = simple_record(id, vec![vec![0.7, 0.2, 0.1]], vec![0.0; 3]);
        rec.predicted_counts[class] = objects as f64;
        rec.true_object_count = objects;
        rec.true_boxes = (0..objects)
            .map(|j| crate::scene::BoxBev {
                class_id: class,
                center_x: j as f64,
                center_y: id as f64,
                center_z: 0.0,
                size_x: 1.0,
                size_y: 1.0,
                size_z: 1.0 + 0.1 * j as f64,
                yaw: 0.0,
                confidence: None,
            })
            .collect();
        rec
    }

    fn classes() -> Vec<String> {
        vec!["a".into(), "b".into(), "c".into()]
    }

    #[test]
    fn entropy_bounds() {
        let one = counted(0, 5, 1);
        assert_eq!(global_class_entropy(&[&one], 3).unwrap(), 0.0);
        let recs = [counted(0, 4, 0), counted(1, 4, 1), counted(2, 4, 2)];
        let refs: Vec<_> = recs.iter().collect();
        assert_abs_diff_eq!(global_class_entropy(&refs, 3).unwrap(), 1.0, epsilon = 1e-12);
        let empty = counted(0, 0, 0);
        assert!(matches!(global_class_entropy(&[&empty], 3), Err(Error::NoAnnotatedObjects)));
    }

    #[test]
    fn zero_object_pool_consumes_nothing() {
        let recs: Vec<_> = (0..20).map(|i| counted(i, 0, 0)).collect();
        let pool = PoolState::new(recs, BTreeSet::new(), classes()).unwrap();
        let config = SelectorConfig {
            k_per_round: 5,
            strategy: Strategy::Random,
            total_object_budget: 10,
            ..Default::default()
        };
        let run = run_active_learning(&pool, &config, 1, &mut FrozenDetector).unwrap();
        assert_eq!(run.ledger.objects_consumed, 0);
        assert_eq!(run.history[0].result.selected.len(), 5);
    }

    #[test]
    fn tiny_budget_exhausts_immediately() {
        let recs: Vec<_> = (0..10).map(|i| counted(i, 3 + i as usize, 0)).collect();
        let pool = PoolState::new(recs, BTreeSet::new(), classes()).unwrap();
        let config = SelectorConfig {
            k_per_round: 2,
            total_object_budget: 2,
            ..Default::default()
        };
        let run = run_active_learning(&pool, &config, 4, &mut FrozenDetector).unwrap();
        assert_eq!(run.history.len(), 1);
        assert!(run.history[0].result.exhausted);
        assert!(run.halted_early);
        assert_eq!(run.ledger, BudgetLedger::new(2));
    }

    #[test]
    fn rounds_are_disjoint_and_within_budget() {
        let recs: Vec<_> = (0..40).map(|i| counted(i, 1 + (i % 5) as usize, (i % 3) as usize)).collect();
        let pool = PoolState::new(recs, BTreeSet::from([0, 1, 2]), classes()).unwrap();
        for strategy in [Strategy::Lh3d, Strategy::Random, Strategy::Entropy, Strategy::Coreset] {
            let config = SelectorConfig {
                strategy,
                k_per_round: 4,
                total_object_budget: 30,
                ..Default::default()
            };
            let run = run_active_learning(&pool, &config, 10, &mut FrozenDetector).unwrap();
            let mut seen = BTreeSet::new();
            for rec in &run.history {
                assert!(rec.metrics.objects_consumed <= 30);
                for id in &rec.result.selected {
                    assert!(seen.insert(*id), "{strategy}: {id} selected twice");
                }
            }
            let total: u64 = run.history.iter().map(|r| r.metrics.objects_this_round).sum();
            assert_eq!(total, run.ledger.objects_consumed);
            assert_eq!(run.final_pool.labeled.len() + run.final_pool.unlabeled.len(), 40);
            assert!(run.final_pool.labeled.is_disjoint(&run.final_pool.unlabeled));
        }
    }
}
