use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundCharge {
    pub round: usize,
    pub images: usize,
    pub objects: u64,
}

/// Tracks annotated objects against the cumulative object budget.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetLedger {
    pub total_object_budget: u64,
    pub objects_consumed: u64,
    pub rounds_completed: usize,
    pub per_round_log: Vec<RoundCharge>,
}

impl BudgetLedger {
    pub fn new(total_object_budget: u64) -> Self {
        Self {
            total_object_budget,
            objects_consumed: 0,
            rounds_completed: 0,
            per_round_log: Vec::new(),
        }
    }

    pub fn remaining(&self) -> u64 {
        self.total_object_budget - self.objects_consumed
    }

    pub fn can_afford(&self, objects: u64) -> bool {
        objects <= self.remaining()
    }

    pub fn charge(&mut self, round: usize, images: usize, objects: u64) -> Result<()> {
        if !self.can_afford(objects) {
            return Err(Error::InvalidInput(format!(
                "charging {objects} objects exceeds remaining budget {}",
                self.remaining()
            )));
        }
        self.objects_consumed += objects;
        self.rounds_completed += 1;
        self.per_round_log.push(RoundCharge {
            round,
            images,
            objects,
        });
        Ok(())
    }

    /// The budget as a fraction of a pool's total object count.
    pub fn fraction_of_pool(&self, pool_objects: u64) -> f64 {
        self.total_object_budget as f64 / pool_objects as f64
    }
}
