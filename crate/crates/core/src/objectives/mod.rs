//! The three stage objectives as concave-over-modular instances.
//!
//! * depth confidence: domains are depth bins, weights `r_i * m_i[d]`;
//! * semantic balance: domains are classes, weights `alpha_i * p_i[c]`, with
//!   the labeled set's exposure as base mass so that `F(S) - F(∅)` is the
//!   gain of merging `S` into the labeled set;
//! * geometric variation: domains are classes, weights are novelty scores.

pub mod geometry;

pub use geometry::{
    fit_class_gaussians, gaussian_nll, geometric_novelty, novelty_bump, ClassModel,
    GaussianModel, GeometryDump, GeometryModels, NoveltyTable, RobustScale,
};

use crate::error::{Error, Result};
use crate::scene::LearnabilityProfile;
use crate::submodular::{CoverageObjective, Transform};

pub fn build_phi_a(profiles: &[&LearnabilityProfile], epsilon: f64) -> Result<CoverageObjective> {
    let bins = profiles
        .first()
        .map(|p| p.m.len())
        .ok_or(Error::EmptyCandidates)?;
    let weights = profiles
        .iter()
        .map(|p| {
            if p.m.len() != bins {
                return Err(Error::DimensionMismatch {
                    expected: bins,
                    got: p.m.len(),
                });
            }
            if !(p.r > 0.0 && p.r <= 1.0) {
                return Err(Error::InvalidInput(format!("reliability {} outside (0,1]", p.r)));
            }
            Ok(p.m.iter().map(|m| p.r * m).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    CoverageObjective::new(weights, vec![0.0; bins], epsilon, Transform::LogEpsilon)
}

fn class_exposure(p: &LearnabilityProfile, classes: usize) -> Result<Vec<f64>> {
    if p.p.len() != classes {
        return Err(Error::DimensionMismatch {
            expected: classes,
            got: p.p.len(),
        });
    }
    Ok(p.p.iter().map(|pc| p.alpha * pc).collect())
}

/// Semantic balance objective over `candidates`, with the labeled set's
/// class exposure folded into the base mass.
pub fn build_phi_b(
    candidates: &[&LearnabilityProfile],
    labeled: &[&LearnabilityProfile],
    epsilon: f64,
) -> Result<CoverageObjective> {
    let classes = candidates
        .first()
        .or(labeled.first())
        .map(|p| p.p.len())
        .ok_or(Error::EmptyCandidates)?;
    let weights = candidates
        .iter()
        .map(|p| class_exposure(p, classes))
        .collect::<Result<Vec<_>>>()?;
    let mut base = vec![0.0; classes];
    for p in labeled {
        for (b, w) in base.iter_mut().zip(class_exposure(p, classes)?) {
            *b += w;
        }
    }
    CoverageObjective::new(weights, base, epsilon, Transform::LogEpsilon)
}

/// Geometric variation objective. `labeled_mass` defaults to zeros.
pub fn build_phi_c(
    novelty: &NoveltyTable,
    labeled_mass: Option<&[f64]>,
    epsilon: f64,
) -> Result<CoverageObjective> {
    let classes = novelty.num_classes();
    if novelty.scores.iter().flatten().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidInput("novelty scores must be non-negative".into()));
    }
    let base = match labeled_mass {
        Some(m) if m.len() != classes => {
            return Err(Error::DimensionMismatch {
                expected: classes,
                got: m.len(),
            })
        }
        Some(m) => m.to_vec(),
        None => vec![0.0; classes],
    };
    CoverageObjective::new(novelty.scores.clone(), base, epsilon, Transform::LogEpsilon)
}
