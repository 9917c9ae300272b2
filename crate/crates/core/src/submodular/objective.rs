use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concave map applied per coverage domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `ln(eps + z)`
    LogEpsilon,
    /// `sqrt(eps + z)`
    SquareRoot,
    /// `(eps + z)^2`. Convex, so it breaks submodularity; only exists as a
    /// negative control for the property checks.
    #[doc(hidden)]
    BrokenSquare,
}

impl Transform {
    #[inline]
    pub fn apply(self, eps: f64, z: f64) -> f64 {
        match self {
            Transform::LogEpsilon => (eps + z).ln(),
            Transform::SquareRoot => (eps + z).sqrt(),
            Transform::BrokenSquare => (eps + z) * (eps + z),
        }
    }

    /// `phi(z + w) - phi(z)`, evaluated without cancellation where possible.
    #[inline]
    pub fn increment(self, eps: f64, z: f64, w: f64) -> f64 {
        match self {
            Transform::LogEpsilon => (w / (eps + z)).ln_1p(),
            _ => self.apply(eps, z + w) - self.apply(eps, z),
        }
    }
}

/// `F(S) = sum_w phi(b_w + sum_{i in S} w_{i,w})` over `n` items and
/// `omega` coverage domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageObjective {
    n: usize,
    omega: usize,
    /// Row-major `n x omega`.
    weights: Vec<f64>,
    base_mass: Vec<f64>,
    epsilon: f64,
    transform: Transform,
}

impl CoverageObjective {
    pub fn new(
        weights: Vec<Vec<f64>>,
        base_mass: Vec<f64>,
        epsilon: f64,
        transform: Transform,
    ) -> Result<Self> {
        let omega = base_mass.len();
        if omega == 0 {
            return Err(Error::InvalidInput("objective needs at least one domain".into()));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        if base_mass.iter().any(|&b| !(b >= 0.0) || !b.is_finite()) {
            return Err(Error::InvalidInput("base mass must be non-negative".into()));
        }
        let n = weights.len();
        let mut flat = Vec::with_capacity(n * omega);
        for (i, row) in weights.into_iter().enumerate() {
            if row.len() != omega {
                return Err(Error::DimensionMismatch {
                    expected: omega,
                    got: row.len(),
                });
            }
            if row.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
                return Err(Error::InvalidInput(format!("item {i} has a negative weight")));
            }
            flat.extend(row);
        }
        Ok(Self {
            n,
            omega,
            weights: flat,
            base_mass,
            epsilon,
            transform,
        })
    }

    pub fn num_items(&self) -> usize {
        self.n
    }

    pub fn num_domains(&self) -> usize {
        self.omega
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn transform(&self) -> Transform {
        self.transform
    }

    pub fn base_mass(&self) -> &[f64] {
        &self.base_mass
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.omega..(i + 1) * self.omega]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.n,
            })
        } else {
            Ok(())
        }
    }

    fn value_of_mass(&self, mass: &[f64]) -> f64 {
        mass.iter()
            .map(|&z| self.transform.apply(self.epsilon, z))
            .sum()
    }

    pub fn evaluate(&self, set: &[usize]) -> Result<f64> {
        let mut seen = vec![false; self.n];
        let mut mass = self.base_mass.clone();
        for &i in set {
            self.check_index(i)?;
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::DuplicateItem(i));
            }
            for (m, w) in mass.iter_mut().zip(self.row(i)) {
                *m += w;
            }
        }
        Ok(self.value_of_mass(&mass))
    }

    pub fn empty_value(&self) -> f64 {
        self.value_of_mass(&self.base_mass)
    }

    pub fn accumulator(&self) -> GainAccumulator {
        GainAccumulator {
            current_mass: self.base_mass.clone(),
            current_value: self.empty_value(),
            selected: Vec::new(),
            member: vec![false; self.n],
        }
    }

    /// `F(S + i) - F(S)` from the accumulator's running mass.
    pub fn marginal_gain(&self, acc: &GainAccumulator, i: usize) -> Result<f64> {
        self.check_index(i)?;
        if acc.member[i] {
            return Err(Error::AlreadySelected(i));
        }
        Ok(self.gain_unchecked(&acc.current_mass, i))
    }

    #[inline]
    pub(crate) fn gain_unchecked(&self, mass: &[f64], i: usize) -> f64 {
        self.row(i)
            .iter()
            .zip(mass)
            .filter(|(&w, _)| w > 0.0)
            .map(|(&w, &z)| self.transform.increment(self.epsilon, z, w))
            .sum()
    }

    /// Structured dump for golden files and debugging.
    pub fn dump(&self) -> ObjectiveDump {
        ObjectiveDump {
            format: OBJECTIVE_FORMAT.to_string(),
            transform: self.transform,
            epsilon: self.epsilon,
            base_mass: self.base_mass.clone(),
            weights: (0..self.n).map(|i| self.row(i).to_vec()).collect(),
        }
    }
}

pub const OBJECTIVE_FORMAT: &str = "lh3d-objective/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveDump {
    pub format: String,
    pub transform: Transform,
    pub epsilon: f64,
    pub base_mass: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl ObjectiveDump {
    pub fn into_objective(self) -> Result<CoverageObjective> {
        if self.format != OBJECTIVE_FORMAT {
            return Err(Error::InvalidInput(format!(
                "unexpected objective format tag {:?}",
                self.format
            )));
        }
        CoverageObjective::new(self.weights, self.base_mass, self.epsilon, self.transform)
    }
}

/// Incremental evaluation state for a growing selection.
#[derive(Debug, Clone, PartialEq)]
pub struct GainAccumulator {
    pub current_mass: Vec<f64>,
    pub current_value: f64,
    pub selected: Vec<usize>,
    member: Vec<bool>,
}

impl GainAccumulator {
    pub fn contains(&self, i: usize) -> bool {
        self.member.get(i).copied().unwrap_or(false)
    }

    /// Adds `i`, returning its marginal gain.
    pub fn add(&mut self, obj: &CoverageObjective, i: usize) -> Result<f64> {
        let gain = obj.marginal_gain(self, i)?;
        for (m, w) in self.current_mass.iter_mut().zip(obj.row(i)) {
            *m += w;
        }
        self.current_value = obj.value_of_mass(&self.current_mass);
        self.member[i] = true;
        self.selected.push(i);
        Ok(gain)
    }
}
