use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baselines::baseline_order;
use super::budget::BudgetLedger;
use super::config::{SelectorConfig, Stage, Strategy};
use crate::error::{Error, Result};
use crate::objectives::{build_phi_a, build_phi_b, build_phi_c, fit_class_gaussians, geometric_novelty};
use crate::scene::{LearnabilityProfile, PoolState, ProfileParams, SceneRecord};
use crate::submodular::{greedy_select, CostBudget, CoverageObjective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutput {
    pub stage: Stage,
    pub quota: usize,
    /// Scene ids in selection order.
    pub selected: Vec<u64>,
    /// Objective value of the selection.
    pub objective_value: f64,
    /// Objective value of the empty selection.
    pub empty_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub round: usize,
    pub strategy: String,
    pub stage_outputs: Vec<StageOutput>,
    /// Final scene ids in selection order.
    pub selected: Vec<u64>,
    /// Objects charged for `selected`.
    pub budget_delta: u64,
    /// Candidates passed over because their object count no longer fit.
    pub skipped_for_budget: Vec<u64>,
    /// Nothing in the unlabeled pool fit the remaining budget.
    pub exhausted: bool,
}

impl RoundResult {
    fn exhausted(round: usize, strategy: String) -> Self {
        Self {
            round,
            strategy,
            stage_outputs: Vec::new(),
            selected: Vec::new(),
            budget_delta: 0,
            skipped_for_budget: Vec::new(),
            exhausted: true,
        }
    }
}

/// Profiles for every pool position. With `annotated_labeled`, labeled
/// scenes take their class distribution from the revealed annotation.
pub fn pool_profiles(
    pool: &PoolState,
    params: &ProfileParams,
    annotated_labeled: bool,
) -> Result<Vec<Option<LearnabilityProfile>>> {
    let num_classes = pool.num_classes();
    pool.records
        .par_iter()
        .map(|rec| {
            let profile = if annotated_labeled && pool.labeled.contains(&rec.scene_id) {
                LearnabilityProfile::from_annotation(rec, num_classes, params)
            } else {
                LearnabilityProfile::from_prediction(rec, params)
            };
            profile
                .map(Some)
                .map_err(|e| Error::InvalidInput(format!("scene {}: {e}", rec.scene_id)))
        })
        .collect()
}

fn object_cost(rec: &SceneRecord) -> u64 {
    rec.true_object_count as u64
}

struct StageContext<'a> {
    pool: &'a PoolState,
    config: &'a SelectorConfig,
    profiles: &'a [Option<LearnabilityProfile>],
}

impl StageContext<'_> {
    fn profile(&self, pos: usize) -> &LearnabilityProfile {
        self.profiles[pos].as_ref().expect("profiled")
    }

    fn objective(&self, stage: Stage, survivors: &[usize]) -> Result<CoverageObjective> {
        let eps = self.config.epsilon;
        match stage {
            Stage::Dc => {
                let refs: Vec<_> = survivors.iter().map(|&p| self.profile(p)).collect();
                build_phi_a(&refs, eps)
            }
            Stage::Sb => {
                let cands: Vec<_> = survivors.iter().map(|&p| self.profile(p)).collect();
                let labeled: Vec<_> = self
                    .pool
                    .labeled_positions()
                    .into_iter()
                    .map(|p| self.profile(p))
                    .collect();
                build_phi_b(&cands, &labeled, eps)
            }
            Stage::Gv => {
                let num_classes = self.pool.num_classes();
                let labeled_boxes = self
                    .pool
                    .labeled_positions()
                    .into_iter()
                    .flat_map(|p| self.pool.records[p].true_boxes.iter());
                let models = match fit_class_gaussians(
                    labeled_boxes,
                    num_classes,
                    self.config.lambda_reg,
                    self.config.min_count,
                ) {
                    Ok(m) => Some(m),
                    Err(Error::NoBoxes) => {
                        log::warn!("no labeled boxes; fitting geometry on candidate predictions");
                        let predicted = survivors
                            .iter()
                            .flat_map(|&p| self.pool.records[p].predicted_boxes.iter());
                        match fit_class_gaussians(
                            predicted,
                            num_classes,
                            self.config.lambda_reg,
                            self.config.min_count,
                        ) {
                            Ok(m) => Some(m),
                            Err(Error::NoBoxes) => None,
                            Err(e) => return Err(e),
                        }
                    }
                    Err(e) => return Err(e),
                };
                let weights = match models {
                    Some(models) => {
                        let recs: Vec<&SceneRecord> =
                            survivors.iter().map(|&p| &self.pool.records[p]).collect();
                        let table =
                            geometric_novelty(&recs, &models, self.config.cutoff_z, self.config.shape)?;
                        return build_phi_c(&table, None, eps);
                    }
                    None => vec![vec![0.0; num_classes]; survivors.len()],
                };
                CoverageObjective::new(weights, vec![0.0; num_classes], eps, crate::submodular::Transform::LogEpsilon)
            }
        }
    }
}

/// Runs one round of the configured strategy against the remaining budget
/// in `ledger`. Selections are deterministic given pool, config and round.
pub fn select_round(
    pool: &PoolState,
    config: &SelectorConfig,
    ledger: &BudgetLedger,
    round: usize,
) -> Result<RoundResult> {
    config.validate()?;
    let unlabeled = pool.unlabeled_positions();
    if unlabeled.is_empty() {
        return Err(Error::EmptyUnlabeled);
    }
    let label = config.label();
    let remaining = ledger.remaining();
    if !unlabeled
        .iter()
        .any(|&p| object_cost(&pool.records[p]) <= remaining)
    {
        return Ok(RoundResult::exhausted(round, label));
    }
    let k = config.k_per_round.min(unlabeled.len());
    if k < config.k_per_round {
        log::warn!(
            "k={} exceeds the {} unlabeled scenes; clamping to {k}",
            config.k_per_round,
            unlabeled.len()
        );
    }

    let params = config.profile_params();
    let ids = |positions: &[usize]| -> Vec<u64> {
        positions.iter().map(|&p| pool.records[p].scene_id).collect()
    };

    if config.strategy != Strategy::Lh3d {
        let profiles = pool_profiles(pool, &params, false)?;
        let order = baseline_order(pool, &profiles, config.strategy, round_seed(config.seed, round))?;
        let mut spent = 0u64;
        let mut picked = Vec::new();
        let mut skipped = Vec::new();
        for p in order {
            if picked.len() == k {
                break;
            }
            let cost = object_cost(&pool.records[p]);
            if cost <= remaining - spent {
                spent += cost;
                picked.push(p);
            } else {
                skipped.push(p);
            }
        }
        skipped.sort_unstable();
        return Ok(RoundResult {
            round,
            strategy: label,
            stage_outputs: Vec::new(),
            selected: ids(&picked),
            budget_delta: spent,
            skipped_for_budget: ids(&skipped),
            exhausted: false,
        });
    }

    let profiles = pool_profiles(pool, &params, true)?;
    let ctx = StageContext {
        pool,
        config,
        profiles: &profiles,
    };
    let stages = config.stage_order.stages();
    let mut survivors = unlabeled;
    let mut outputs = Vec::with_capacity(stages.len());
    let mut final_pick = Vec::new();
    let mut skipped = Vec::new();
    let mut spent = 0;
    for (pos, &stage) in stages.iter().enumerate() {
        let is_final = pos + 1 == stages.len();
        let quota = config.stage_quota(pos, stages.len(), k).min(survivors.len());
        let obj = ctx.objective(stage, &survivors)?;
        let local: Vec<usize> = (0..survivors.len()).collect();
        let costs: Vec<u64> = survivors
            .iter()
            .map(|&p| object_cost(&pool.records[p]))
            .collect();
        let budget = is_final.then_some(CostBudget {
            costs: &costs,
            cap: remaining,
        });
        let out = greedy_select(&obj, &local, quota, budget)?;
        let picked: Vec<usize> = out.selected.iter().map(|&i| survivors[i]).collect();
        outputs.push(StageOutput {
            stage,
            quota,
            selected: ids(&picked),
            objective_value: out.value,
            empty_value: obj.empty_value(),
        });
        if is_final {
            spent = out.cost;
            skipped = out.skipped_for_budget.iter().map(|&i| survivors[i]).collect();
            final_pick = picked;
        } else {
            survivors = picked;
            survivors.sort_unstable();
        }
    }
    Ok(RoundResult {
        round,
        strategy: label,
        stage_outputs: outputs,
        selected: ids(&final_pick),
        budget_delta: spent,
        skipped_for_budget: ids(&skipped),
        exhausted: false,
    })
}

/// Per-round seed for the random baseline.
fn round_seed(seed: u64, round: usize) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
