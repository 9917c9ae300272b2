use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::ProfileParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    /// Depth confidence.
    Dc,
    /// Semantic balance.
    Sb,
    /// Geometric variation.
    Gv,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Dc => "dc",
            Stage::Sb => "sb",
            Stage::Gv => "gv",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dc" => Ok(Stage::Dc),
            "sb" => Ok(Stage::Sb),
            "gv" => Ok(Stage::Gv),
            other => Err(Error::Config(format!("unknown stage {other:?} (expected dc, sb or gv)"))),
        }
    }
}

/// Ordered, duplicate-free list of stages. The full pipeline is
/// `dc,sb,gv`; shorter lists express ablations such as dropping `sb`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Stage>", into = "Vec<Stage>")]
pub struct StageOrder(Vec<Stage>);

impl StageOrder {
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Config("stage order is empty".into()));
        }
        for (i, s) in stages.iter().enumerate() {
            if stages[..i].contains(s) {
                return Err(Error::Config(format!("stage {s} listed twice")));
            }
        }
        Ok(Self(stages))
    }

    pub fn stages(&self) -> &[Stage] {
        &self.0
    }

    /// The six orderings of the full pipeline.
    pub fn permutations() -> Vec<StageOrder> {
        use Stage::*;
        [
            [Dc, Sb, Gv],
            [Dc, Gv, Sb],
            [Sb, Dc, Gv],
            [Sb, Gv, Dc],
            [Gv, Dc, Sb],
            [Gv, Sb, Dc],
        ]
        .into_iter()
        .map(|p| StageOrder(p.to_vec()))
        .collect()
    }
}

impl Default for StageOrder {
    fn default() -> Self {
        StageOrder(vec![Stage::Dc, Stage::Sb, Stage::Gv])
    }
}

impl TryFrom<Vec<Stage>> for StageOrder {
    type Error = Error;
    fn try_from(v: Vec<Stage>) -> Result<Self> {
        StageOrder::new(v)
    }
}

impl From<StageOrder> for Vec<Stage> {
    fn from(o: StageOrder) -> Self {
        o.0
    }
}

impl FromStr for StageOrder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StageOrder::new(s.split(',').map(str::parse).collect::<Result<Vec<_>>>()?)
    }
}

impl fmt::Display for StageOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(|s| s.as_str()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Lh3d,
    Random,
    Entropy,
    Coreset,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Lh3d => "lh3d",
            Strategy::Random => "random",
            Strategy::Entropy => "entropy",
            Strategy::Coreset => "coreset",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lh3d" => Ok(Strategy::Lh3d),
            "random" => Ok(Strategy::Random),
            "entropy" => Ok(Strategy::Entropy),
            "coreset" => Ok(Strategy::Coreset),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorConfig {
    pub strategy: Strategy,
    /// Images annotated per round.
    pub k_per_round: usize,
    /// First intermediate stage keeps `ceil(rho_a * rho_b * k)`.
    pub rho_a: f64,
    /// Second intermediate stage keeps `ceil(rho_b * k)`.
    pub rho_b: f64,
    pub stage_order: StageOrder,
    pub tau: f64,
    pub gamma: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub lambda_reg: f64,
    pub min_count: usize,
    pub cutoff_z: f64,
    pub shape: f64,
    /// Cap on cumulative annotated objects across all rounds.
    pub total_object_budget: u64,
    /// Seed for the random baseline.
    pub seed: u64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Lh3d,
            k_per_round: 100,
            rho_a: 4.0,
            rho_b: 2.0,
            stage_order: StageOrder::default(),
            tau: 5.0,
            gamma: 1.0,
            beta: 1.0,
            epsilon: 1e-6,
            lambda_reg: 1e-3,
            min_count: 2,
            cutoff_z: 3.0,
            shape: 1.0,
            total_object_budget: 32_000,
            seed: 0,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("beta", self.beta),
            ("epsilon", self.epsilon),
            ("lambda_reg", self.lambda_reg),
            ("cutoff_z", self.cutoff_z),
            ("shape", self.shape),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be non-negative, got {}", self.gamma)));
        }
        if self.k_per_round == 0 {
            return Err(Error::Config("k_per_round must be at least 1".into()));
        }
        if !(self.rho_b >= 1.0 && self.rho_a >= self.rho_b && self.rho_a.is_finite()) {
            return Err(Error::Config(format!(
                "need rho_a >= rho_b >= 1, got rho_a={} rho_b={}",
                self.rho_a, self.rho_b
            )));
        }
        Ok(())
    }

    pub fn profile_params(&self) -> ProfileParams {
        ProfileParams {
            tau: self.tau,
            gamma: self.gamma,
            beta: self.beta,
        }
    }

    /// Short display name, including the stage order when it is not the
    /// default pipeline.
    pub fn label(&self) -> String {
        match self.strategy {
            Strategy::Lh3d if self.stage_order != StageOrder::default() => {
                format!("lh3d[{}]", self.stage_order)
            }
            s => s.to_string(),
        }
    }

    /// Output size of the stage at `position` in a pipeline of `len`
    /// stages, before clamping to the surviving candidates.
    pub fn stage_quota(&self, position: usize, len: usize, k: usize) -> usize {
        let k_f = k as f64;
        if position + 1 == len {
            k
        } else if position == 0 {
            (self.rho_a * self.rho_b * k_f).ceil() as usize
        } else {
            (self.rho_b * k_f).ceil() as usize
        }
    }
}
