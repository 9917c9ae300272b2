//! Pool and scene descriptor types, plus the per-scene learnability
//! quantities derived from a detector's predictions.
//!
//! A scene carries per-location depth distributions over `D` bins (or a
//! pre-computed summary of them), predicted per-class object counts, and
//! predicted BEV boxes. Ground truth (`true_*`) rides along in the same
//! record but is only read once the scene is annotated.
//!
//! All entropies use the natural log; normalized entropies divide by
//! `ln D` (depth) or `ln |C|` (classes).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance for depth distributions.
pub const SIMPLEX_TOL: f64 = 1e-6;

/// A 3D box in the ground frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBev {
    pub class_id: usize,
    pub center_x: f64,
    pub center_y: f64,
    pub center_z: f64,
    pub size_x: f64,
    pub size_y: f64,
    pub size_z: f64,
    #[serde(default)]
    pub yaw: f64,
    /// Detector confidence. Accepted in pool files, unused by scoring.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl BoxBev {
    /// Geometry feature used by the geometric-variation Gaussians: BEV center and height.
    pub fn geometry_feature(&self) -> [f64; 3] {
        [self.center_x, self.center_y, self.size_z]
    }

    /// Planar distance from the camera origin.
    pub fn ground_range(&self) -> f64 {
        self.center_x.hypot(self.center_y)
    }
}

/// Pre-summarized depth information for pools that do not ship full maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSummary {
    pub entropy: f64,
    pub histogram: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: u64,
    /// `L x D` row-stochastic matrix. Takes precedence over `depth_summary`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_dists: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_summary: Option<DepthSummary>,
    pub predicted_counts: Vec<f64>,
    #[serde(default)]
    pub predicted_boxes: Vec<BoxBev>,
    #[serde(default)]
    pub true_object_count: usize,
    #[serde(default)]
    pub true_boxes: Vec<BoxBev>,
}

impl SceneRecord {
    /// Normalized depth entropy and argmax histogram, from the full maps
    /// when present and from the summary otherwise.
    pub fn depth_profile(&self) -> Result<(f64, Vec<f64>)> {
        match (&self.depth_dists, &self.depth_summary) {
            (Some(rows), _) => Ok((compute_depth_entropy(rows)?, depth_histogram(rows)?)),
            (None, Some(summary)) => {
                if !(0.0..=1.0).contains(&summary.entropy) {
                    return Err(Error::InvalidInput(format!(
                        "scene {}: summary entropy {} outside [0,1]",
                        self.scene_id, summary.entropy
                    )));
                }
                if summary.histogram.len() < 2 {
                    return Err(Error::TooFewDepthBins(summary.histogram.len()));
                }
                check_simplex(&summary.histogram, SIMPLEX_TOL)
                    .map_err(|sum| Error::NotSimplex { row: 0, sum })?;
                Ok((summary.entropy, summary.histogram.clone()))
            }
            (None, None) => Err(Error::InvalidInput(format!(
                "scene {} has no depth information",
                self.scene_id
            ))),
        }
    }

    pub fn depth_bins(&self) -> Option<usize> {
        match (&self.depth_dists, &self.depth_summary) {
            (Some(rows), _) => rows.first().map(Vec::len),
            (None, Some(s)) => Some(s.histogram.len()),
            _ => None,
        }
    }

    /// Per-class counts of the ground-truth boxes.
    pub fn true_class_counts(&self, num_classes: usize) -> Vec<f64> {
        let mut counts = vec![0.0; num_classes];
        for b in &self.true_boxes {
            if b.class_id < num_classes {
                counts[b.class_id] += 1.0;
            }
        }
        counts
    }
}

/// Derived learnability quantities of one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnabilityProfile {
    /// Normalized depth entropy in `[0, 1]`.
    pub h: f64,
    /// Reliability weight `exp(-tau * h)`.
    pub r: f64,
    /// Argmax depth histogram.
    pub m: Vec<f64>,
    /// Smoothed class distribution.
    pub p: Vec<f64>,
    /// Class diversity entropy.
    pub delta: f64,
    /// Diversity weight `1 + gamma * delta`.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileParams {
    pub tau: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            tau: 5.0,
            gamma: 1.0,
            beta: 1.0,
        }
    }
}

impl LearnabilityProfile {
    /// Profile from the detector's predictions.
    pub fn from_prediction(record: &SceneRecord, params: &ProfileParams) -> Result<Self> {
        Self::from_parts(record, &record.predicted_counts, params)
    }

    /// Profile whose class distribution comes from the revealed annotation.
    pub fn from_annotation(
        record: &SceneRecord,
        num_classes: usize,
        params: &ProfileParams,
    ) -> Result<Self> {
        Self::from_parts(record, &record.true_class_counts(num_classes), params)
    }

    fn from_parts(record: &SceneRecord, counts: &[f64], params: &ProfileParams) -> Result<Self> {
        let (h, m) = record.depth_profile()?;
        let r = reliability_weight(h, params.tau)?;
        let p = class_distribution(counts, params.beta)?;
        let (delta, alpha) = diversity_weight(&p, params.gamma);
        Ok(Self {
            h,
            r,
            m,
            p,
            delta,
            alpha,
        })
    }
}

/// Labeled/unlabeled partition over an immutable set of records.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    pub records: Vec<SceneRecord>,
    pub labeled: BTreeSet<u64>,
    pub unlabeled: BTreeSet<u64>,
    pub class_names: Vec<String>,
    positions: BTreeMap<u64, usize>,
}

impl PoolState {
    /// Builds a pool where every scene not in `labeled` is unlabeled.
    /// Duplicate ids are kept (the first occurrence wins lookups) so that
    /// `validate_pool` can report them.
    pub fn new(
        records: Vec<SceneRecord>,
        labeled: BTreeSet<u64>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let mut positions = BTreeMap::new();
        for (pos, r) in records.iter().enumerate() {
            positions.entry(r.scene_id).or_insert(pos);
        }
        if let Some(missing) = labeled.iter().find(|id| !positions.contains_key(id)) {
            return Err(Error::InvalidInput(format!(
                "labeled scene {missing} not present in pool"
            )));
        }
        let unlabeled = positions
            .keys()
            .filter(|id| !labeled.contains(id))
            .copied()
            .collect();
        Ok(Self {
            records,
            labeled,
            unlabeled,
            class_names,
            positions,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn position(&self, scene_id: u64) -> Option<usize> {
        self.positions.get(&scene_id).copied()
    }

    pub fn record(&self, scene_id: u64) -> Option<&SceneRecord> {
        self.position(scene_id).map(|p| &self.records[p])
    }

    /// Pool positions of unlabeled scenes, ascending.
    pub fn unlabeled_positions(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.unlabeled.iter().map(|id| self.positions[id]).collect();
        v.sort_unstable();
        v
    }

    pub fn labeled_positions(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.labeled.iter().map(|id| self.positions[id]).collect();
        v.sort_unstable();
        v
    }

    /// New state with `ids` moved from unlabeled to labeled.
    pub fn with_labeled(&self, ids: &[u64]) -> Result<Self> {
        let mut next = self.clone();
        for id in ids {
            if !next.unlabeled.remove(id) {
                return Err(Error::InvalidInput(format!(
                    "scene {id} is not in the unlabeled set"
                )));
            }
            next.labeled.insert(*id);
        }
        Ok(next)
    }

    /// New state with the same membership and replaced records. Ids must
    /// match position by position.
    pub fn with_records(&self, records: Vec<SceneRecord>) -> Result<Self> {
        if records.len() != self.records.len()
            || records
                .iter()
                .zip(&self.records)
                .any(|(a, b)| a.scene_id != b.scene_id)
        {
            return Err(Error::InvalidInput(
                "replacement records do not match pool ids".into(),
            ));
        }
        Ok(Self {
            records,
            ..self.clone()
        })
    }

    pub fn total_true_objects(&self) -> u64 {
        self.records.iter().map(|r| r.true_object_count as u64).sum()
    }
}

fn check_simplex(row: &[f64], tol: f64) -> std::result::Result<(), f64> {
    let sum: f64 = row.iter().sum();
    if row.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > tol {
        Err(sum)
    } else {
        Ok(())
    }
}

fn validate_depth_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidInput("depth map has no locations".into()))?;
    let bins = first.len();
    if bins < 2 {
        return Err(Error::TooFewDepthBins(bins));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != bins {
            return Err(Error::DimensionMismatch {
                expected: bins,
                got: row.len(),
            });
        }
        check_simplex(row, SIMPLEX_TOL).map_err(|sum| Error::NotSimplex { row: i, sum })?;
    }
    Ok(bins)
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Mean per-location Shannon entropy divided by `ln D`.
pub fn compute_depth_entropy(depth_dists: &[Vec<f64>]) -> Result<f64> {
    let bins = validate_depth_rows(depth_dists)?;
    let mean = depth_dists.iter().map(|row| entropy(row)).sum::<f64>() / depth_dists.len() as f64;
    Ok((mean / (bins as f64).ln()).clamp(0.0, 1.0))
}

pub fn reliability_weight(h: f64, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&h) {
        return Err(Error::InvalidInput(format!("entropy {h} outside [0,1]")));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidInput(format!("tau must be positive, got {tau}")));
    }
    Ok((-tau * h).exp())
}

/// Fraction of locations whose most likely bin is `d`. Ties go to the
/// lowest bin.
pub fn depth_histogram(depth_dists: &[Vec<f64>]) -> Result<Vec<f64>> {
    let bins = validate_depth_rows(depth_dists)?;
    let mut hist = vec![0.0; bins];
    for row in depth_dists {
        let mut best = 0;
        for (d, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = d;
            }
        }
        hist[best] += 1.0;
    }
    let n = depth_dists.len() as f64;
    hist.iter_mut().for_each(|v| *v /= n);
    Ok(hist)
}

pub fn class_distribution(counts: &[f64], beta: f64) -> Result<Vec<f64>> {
    if counts.is_empty() {
        return Err(Error::InvalidInput("class count vector is empty".into()));
    }
    if let Some(c) = counts.iter().find(|&&c| c < 0.0 || !c.is_finite()) {
        return Err(Error::InvalidInput(format!("negative class count {c}")));
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    let total: f64 = counts.iter().map(|c| c + beta).sum();
    Ok(counts.iter().map(|c| (c + beta) / total).collect())
}

/// Returns `(delta, alpha)`: the class entropy and `1 + gamma * delta`.
pub fn diversity_weight(p: &[f64], gamma: f64) -> (f64, f64) {
    let delta = entropy(p);
    (delta, 1.0 + gamma * delta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingDepth { scene_id: u64 },
    NoLocations { scene_id: u64 },
    TooFewBins { scene_id: u64, bins: usize },
    RaggedDepthRow { scene_id: u64, row: usize, len: usize, expected: usize },
    DepthRowNotSimplex { scene_id: u64, row: usize, sum: f64 },
    SummaryOutOfRange { scene_id: u64, entropy: f64 },
    SummaryNotSimplex { scene_id: u64, sum: f64 },
    DepthBinsMismatch { scene_id: u64, bins: usize, expected: usize },
    ClassCountLength { scene_id: u64, len: usize, expected: usize },
    NegativeCount { scene_id: u64, class_id: usize, value: f64 },
    NonPositiveSize { scene_id: u64, box_index: usize, truth: bool },
    ClassOutOfRange { scene_id: u64, box_index: usize, class_id: usize, truth: bool },
    ObjectCountMismatch { scene_id: u64, count: usize, boxes: usize },
    DuplicateId { scene_id: u64, positions: Vec<usize> },
}

/// Collects every record-level problem in the pool. Never fails.
pub fn validate_pool(pool: &PoolState) -> Vec<Violation> {
    let num_classes = pool.num_classes();
    let mut out = Vec::new();
    let mut pool_bins: Option<usize> = None;
    let mut seen: BTreeMap<u64, Vec<usize>> = BTreeMap::new();

    for (pos, rec) in pool.records.iter().enumerate() {
        let id = rec.scene_id;
        seen.entry(id).or_default().push(pos);

        let bins = match (&rec.depth_dists, &rec.depth_summary) {
            (Some(rows), _) => {
                if rows.is_empty() {
                    out.push(Violation::NoLocations { scene_id: id });
                    None
                } else {
                    let expected = rows[0].len();
                    for (row_idx, row) in rows.iter().enumerate() {
                        if row.len() != expected {
                            out.push(Violation::RaggedDepthRow {
                                scene_id: id,
                                row: row_idx,
                                len: row.len(),
                                expected,
                            });
                        } else if let Err(sum) = check_simplex(row, SIMPLEX_TOL) {
                            out.push(Violation::DepthRowNotSimplex {
                                scene_id: id,
                                row: row_idx,
                                sum,
                            });
                        }
                    }
                    Some(expected)
                }
            }
            (None, Some(s)) => {
                if !(0.0..=1.0).contains(&s.entropy) {
                    out.push(Violation::SummaryOutOfRange {
                        scene_id: id,
                        entropy: s.entropy,
                    });
                }
                if let Err(sum) = check_simplex(&s.histogram, SIMPLEX_TOL) {
                    out.push(Violation::SummaryNotSimplex { scene_id: id, sum });
                }
                Some(s.histogram.len())
            }
            (None, None) => {
                out.push(Violation::MissingDepth { scene_id: id });
                None
            }
        };
        if let Some(bins) = bins {
            if bins < 2 {
                out.push(Violation::TooFewBins { scene_id: id, bins });
            }
            match pool_bins {
                None => pool_bins = Some(bins),
                Some(expected) if expected != bins => out.push(Violation::DepthBinsMismatch {
                    scene_id: id,
                    bins,
                    expected,
                }),
                _ => {}
            }
        }

        if rec.predicted_counts.len() != num_classes {
            out.push(Violation::ClassCountLength {
                scene_id: id,
                len: rec.predicted_counts.len(),
                expected: num_classes,
            });
        }
        for (c, &v) in rec.predicted_counts.iter().enumerate() {
            if v < 0.0 || !v.is_finite() {
                out.push(Violation::NegativeCount {
                    scene_id: id,
                    class_id: c,
                    value: v,
                });
            }
        }

        let boxes = rec
            .predicted_boxes
            .iter()
            .enumerate()
            .map(|b| (b, false))
            .chain(rec.true_boxes.iter().enumerate().map(|b| (b, true)));
        for ((box_index, b), truth) in boxes {
            if !(b.size_x > 0.0 && b.size_y > 0.0 && b.size_z > 0.0) {
                out.push(Violation::NonPositiveSize {
                    scene_id: id,
                    box_index,
                    truth,
                });
            }
            if b.class_id >= num_classes {
                out.push(Violation::ClassOutOfRange {
                    scene_id: id,
                    box_index,
                    class_id: b.class_id,
                    truth,
                });
            }
        }
        if rec.true_object_count != rec.true_boxes.len() {
            out.push(Violation::ObjectCountMismatch {
                scene_id: id,
                count: rec.true_object_count,
                boxes: rec.true_boxes.len(),
            });
        }
    }

    for (scene_id, positions) in seen {
        if positions.len() > 1 {
            out.push(Violation::DuplicateId {
                scene_id,
                positions,
            });
        }
    }
    out
}
