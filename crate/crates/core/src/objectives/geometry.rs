//! Gaussian layout models over `(center_x, center_y, height)` and the
//! per-class geometric novelty table derived from them.

use nalgebra::{Cholesky, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{BoxBev, SceneRecord};

pub const FEATURE_DIM: usize = 3;

/// Scale factor turning a median absolute deviation into a normal-consistent
/// standard deviation estimate.
const MAD_SCALE: f64 = 1.4826;
/// Same for the mean absolute deviation, used when the MAD collapses to 0.
const MEAN_AD_SCALE: f64 = 1.253_314_137_315_500_3;
const SCALE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GaussianModel {
    mean: Vector3<f64>,
    covariance: Matrix3<f64>,
    chol: Cholesky<f64, nalgebra::U3>,
    log_det: f64,
}

impl PartialEq for GaussianModel {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.covariance == other.covariance
    }
}

impl GaussianModel {
    pub fn new(mean: [f64; 3], covariance: [[f64; 3]; 3]) -> Result<Self> {
        let covariance = Matrix3::from_fn(|r, c| covariance[r][c]);
        let asym = (covariance - covariance.transpose()).abs().max();
        if !(asym <= 1e-9) {
            return Err(Error::InvalidInput(format!(
                "covariance not symmetric (max asymmetry {asym})"
            )));
        }
        let chol = Cholesky::new(covariance).ok_or(Error::SingularCovariance)?;
        let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::SingularCovariance);
        }
        Ok(Self {
            mean: Vector3::from(mean),
            covariance,
            chol,
            log_det,
        })
    }

    pub fn standard() -> Self {
        Self::new([0.0; 3], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
            .expect("identity is positive definite")
    }

    pub fn mean(&self) -> [f64; 3] {
        self.mean.into()
    }

    pub fn covariance(&self) -> [[f64; 3]; 3] {
        let c = &self.covariance;
        std::array::from_fn(|r| std::array::from_fn(|col| c[(r, col)]))
    }

    /// Negative log density at `point`.
    pub fn nll(&self, point: &[f64]) -> Result<f64> {
        if point.len() != FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_DIM,
                got: point.len(),
            });
        }
        let diff = Vector3::from_column_slice(point) - self.mean;
        let maha = diff.dot(&self.chol.solve(&diff));
        let d = FEATURE_DIM as f64;
        Ok(0.5 * d * (2.0 * std::f64::consts::PI).ln() + 0.5 * self.log_det + 0.5 * maha)
    }

    fn fit(features: &[[f64; 3]], lambda_reg: f64) -> Result<Self> {
        let n = features.len();
        if n == 0 {
            return Err(Error::NoBoxes);
        }
        let mut mean = Vector3::zeros();
        for f in features {
            mean += Vector3::from(*f);
        }
        mean /= n as f64;
        let mut cov = Matrix3::zeros();
        if n > 1 {
            for f in features {
                let d = Vector3::from(*f) - mean;
                cov += d * d.transpose();
            }
            cov /= (n - 1) as f64;
        }
        cov += Matrix3::identity() * lambda_reg;
        // exact symmetry for the Cholesky factor
        cov = (cov + cov.transpose()) * 0.5;
        let cov_rows = std::array::from_fn(|r| std::array::from_fn(|c| cov[(r, c)]));
        Self::new(mean.into(), cov_rows)
    }
}

/// `(d/2) ln 2π + ½ ln|Σ| + ½ (x-μ)ᵀ Σ⁻¹ (x-μ)`.
pub fn gaussian_nll(model: &GaussianModel, point: &[f64]) -> Result<f64> {
    model.nll(point)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub model: GaussianModel,
    /// Whether this class had too few boxes and uses the global model.
    pub inherited_global: bool,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryModels {
    pub global: GaussianModel,
    pub per_class: Vec<ClassModel>,
}

/// Fits the global model on every box and one model per class with at
/// least `min_count` boxes; sparser classes reuse the global model.
pub fn fit_class_gaussians<'a>(
    boxes: impl IntoIterator<Item = &'a BoxBev>,
    num_classes: usize,
    lambda_reg: f64,
    min_count: usize,
) -> Result<GeometryModels> {
    if !(lambda_reg > 0.0) {
        return Err(Error::InvalidInput(format!(
            "covariance regularizer must be positive, got {lambda_reg}"
        )));
    }
    let mut by_class: Vec<Vec<[f64; 3]>> = vec![Vec::new(); num_classes];
    let mut all = Vec::new();
    for b in boxes {
        if b.class_id >= num_classes {
            return Err(Error::InvalidInput(format!(
                "box class {} out of range for {num_classes} classes",
                b.class_id
            )));
        }
        let f = b.geometry_feature();
        by_class[b.class_id].push(f);
        all.push(f);
    }
    let global = GaussianModel::fit(&all, lambda_reg)?;
    let per_class = by_class
        .iter()
        .map(|feats| {
            if feats.len() >= min_count.max(1) {
                Ok(ClassModel {
                    model: GaussianModel::fit(feats, lambda_reg)?,
                    inherited_global: false,
                    sample_count: feats.len(),
                })
            } else {
                Ok(ClassModel {
                    model: global.clone(),
                    inherited_global: true,
                    sample_count: feats.len(),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GeometryModels { global, per_class })
}

pub const GEOMETRY_FORMAT: &str = "lh3d-geometry/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianDump {
    pub mean: [f64; 3],
    pub covariance: [[f64; 3]; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModelDump {
    pub class_id: usize,
    pub inherited_global: bool,
    pub sample_count: usize,
    #[serde(flatten)]
    pub gaussian: GaussianDump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryDump {
    pub format: String,
    pub global: GaussianDump,
    pub classes: Vec<ClassModelDump>,
}

impl GeometryModels {
    pub fn dump(&self) -> GeometryDump {
        let g = |m: &GaussianModel| GaussianDump {
            mean: m.mean(),
            covariance: m.covariance(),
        };
        GeometryDump {
            format: GEOMETRY_FORMAT.into(),
            global: g(&self.global),
            classes: self
                .per_class
                .iter()
                .enumerate()
                .map(|(class_id, c)| ClassModelDump {
                    class_id,
                    inherited_global: c.inherited_global,
                    sample_count: c.sample_count,
                    gaussian: g(&c.model),
                })
                .collect(),
        }
    }
}

/// Median and normal-consistent robust scale of one class's NLLs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustScale {
    pub location: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoveltyTable {
    /// `candidates x classes`, all finite and non-negative.
    pub scores: Vec<Vec<f64>>,
    /// Set where the standardized NLL exceeded the cutoff; those scores are 0.
    pub outlier: Vec<Vec<bool>>,
    /// Raw-NLL threshold per class, `None` when no candidate has that class.
    pub cutoff_nll: Vec<Option<f64>>,
    pub reference_nll: Vec<Option<RobustScale>>,
}

impl NoveltyTable {
    pub fn num_classes(&self) -> usize {
        self.cutoff_nll.len()
    }
}

/// Unimodal bump: 0 at `u = 0`, peak 1 at `u = shape`.
pub fn novelty_bump(u: f64, shape: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        u * (1.0 - u / shape).exp() / shape
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn robust_scale(values: &[f64]) -> RobustScale {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let location = median(&sorted);
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - location).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mut scale = MAD_SCALE * median(&dev);
    if scale <= SCALE_FLOOR {
        scale = MEAN_AD_SCALE * dev.iter().sum::<f64>() / dev.len() as f64;
    }
    RobustScale { location, scale }
}

/// Scores how far each candidate's per-class layout sits from the fitted
/// patterns, rewarding moderate deviation and zeroing outliers.
pub fn geometric_novelty(
    candidates: &[&SceneRecord],
    models: &GeometryModels,
    cutoff_z: f64,
    shape: f64,
) -> Result<NoveltyTable> {
    if !(cutoff_z > 0.0) || !(shape > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cutoff_z and shape must be positive (got {cutoff_z}, {shape})"
        )));
    }
    let num_classes = models.per_class.len();
    let n = candidates.len();
    let mut raw: Vec<Vec<Option<f64>>> = vec![vec![None; num_classes]; n];
    for (i, rec) in candidates.iter().enumerate() {
        let mut sums = vec![(0.0, 0usize); num_classes];
        for b in &rec.predicted_boxes {
            if b.class_id >= num_classes {
                return Err(Error::InvalidInput(format!(
                    "scene {}: box class {} out of range",
                    rec.scene_id, b.class_id
                )));
            }
            let nll = models.per_class[b.class_id]
                .model
                .nll(&b.geometry_feature())?;
            sums[b.class_id].0 += nll;
            sums[b.class_id].1 += 1;
        }
        for (c, (s, cnt)) in sums.into_iter().enumerate() {
            if cnt > 0 {
                raw[i][c] = Some(s / cnt as f64);
            }
        }
    }

    if n > 0 && candidates.iter().all(|r| r.predicted_boxes.is_empty()) {
        log::warn!("no candidate has predicted boxes; geometric novelty is all zero");
    }

    let mut scores = vec![vec![0.0; num_classes]; n];
    let mut outlier = vec![vec![false; num_classes]; n];
    let mut cutoff_nll = vec![None; num_classes];
    let mut reference_nll = vec![None; num_classes];
    for c in 0..num_classes {
        let present: Vec<f64> = raw.iter().filter_map(|row| row[c]).collect();
        if present.is_empty() {
            continue;
        }
        let rs = robust_scale(&present);
        reference_nll[c] = Some(rs);
        cutoff_nll[c] = Some(rs.location + cutoff_z * rs.scale);
        for i in 0..n {
            let Some(v) = raw[i][c] else { continue };
            let z = if rs.scale > SCALE_FLOOR {
                (v - rs.location) / rs.scale
            } else {
                0.0
            };
            if z > cutoff_z {
                outlier[i][c] = true;
                continue;
            }
            let u = (z + cutoff_z).max(0.0);
            scores[i][c] = novelty_bump(u, shape);
        }
    }
    Ok(NoveltyTable {
        scores,
        outlier,
        cutoff_nll,
        reference_nll,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(class_id: usize, x: f64, y: f64, h: f64) -> BoxBev {
        BoxBev {
            class_id,
            center_x: x,
            center_y: y,
            center_z: 0.0,
            size_x: 1.0,
            size_y: 1.0,
            size_z: h,
            yaw: 0.0,
            confidence: None,
        }
    }

    fn scene(id: u64, boxes: Vec<BoxBev>) -> SceneRecord {
        SceneRecord {
            scene_id: id,
            depth_dists: None,
            depth_summary: None,
            predicted_counts: vec![],
            predicted_boxes: boxes,
            true_object_count: 0,
            true_boxes: vec![],
        }
    }

    #[test]
    fn nll_closed_forms() {
        let std = GaussianModel::standard();
        let at_mean = 1.5 * (2.0 * std::f64::consts::PI).ln();
        assert_abs_diff_eq!(gaussian_nll(&std, &[0.0; 3]).unwrap(), at_mean, epsilon = 1e-12);
        assert_abs_diff_eq!(
            gaussian_nll(&std, &[1.0, -1.0, 0.0]).unwrap(),
            at_mean + 1.0,
            epsilon = 1e-12
        );
        let diag = GaussianModel::new(
            [0.0; 3],
            [[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        )
        .unwrap();
        assert_abs_diff_eq!(
            gaussian_nll(&diag, &[2.0, 0.0, 0.0]).unwrap(),
            at_mean + 0.5 * 4f64.ln() + 0.5,
            epsilon = 1e-12
        );
        assert!(gaussian_nll(&std, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn singular_and_asymmetric_rejected() {
        assert!(matches!(
            GaussianModel::new([0.0; 3], [[0.0; 3]; 3]),
            Err(Error::SingularCovariance)
        ));
        assert!(GaussianModel::new([0.0; 3], [[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
            .is_err());
    }

    #[test]
    fn nll_minimized_at_mean() {
        let model = GaussianModel::new(
            [1.0, -2.0, 1.5],
            [[2.0, 0.3, 0.1], [0.3, 1.0, 0.0], [0.1, 0.0, 0.5]],
        )
        .unwrap();
        let at_mean = model.nll(&model.mean()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let m = model.mean();
            let p: Vec<f64> = m.iter().map(|v| v + rng.random_range(-1.0..1.0)).collect();
            assert!(model.nll(&p).unwrap() >= at_mean);
        }
    }

    #[test]
    fn fit_degenerate_point_cloud() {
        let boxes = vec![bx(0, 2.0, 3.0, 1.5); 4];
        let lambda = 1e-3;
        let fit = fit_class_gaussians(&boxes, 1, lambda, 2).unwrap();
        let cov = fit.per_class[0].model.covariance();
        for (r, row) in cov.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert_eq!(*v, if r == c { lambda } else { 0.0 });
            }
        }
    }

    #[test]
    fn fit_cross_layout() {
        let h0 = 1.6;
        let lambda = 1e-3;
        let boxes = vec![bx(0, 1.0, 0.0, h0), bx(0, -1.0, 0.0, h0), bx(0, 0.0, 1.0, h0), bx(0, 0.0, -1.0, h0)];
        let fit = fit_class_gaussians(&boxes, 1, lambda, 2).unwrap();
        let m = &fit.per_class[0].model;
        let mean = m.mean();
        assert_abs_diff_eq!(mean[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mean[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mean[2], h0, epsilon = 1e-15);
        let cov = m.covariance();
        let expected = [[2.0 / 3.0 + lambda, 0.0, 0.0], [0.0, 2.0 / 3.0 + lambda, 0.0], [0.0, 0.0, lambda]];
        for r in 0..3 {
            for c in 0..3 {
                assert_abs_diff_eq!(cov[r][c], expected[r][c], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sparse_class_inherits_global() {
        let boxes = vec![bx(0, 0.0, 0.0, 1.0), bx(0, 1.0, 1.0, 1.2), bx(1, 5.0, 5.0, 1.7)];
        let fit = fit_class_gaussians(&boxes, 3, 1e-3, 2).unwrap();
        assert!(!fit.per_class[0].inherited_global);
        assert!(fit.per_class[1].inherited_global);
        assert!(fit.per_class[2].inherited_global);
        assert_eq!(fit.per_class[1].model, fit.global);
        assert!(matches!(
            fit_class_gaussians(std::iter::empty(), 3, 1e-3, 2),
            Err(Error::NoBoxes)
        ));
    }

    #[test]
    fn single_box_falls_back_to_regularizer() {
        let fit = fit_class_gaussians(&[bx(0, 3.0, 4.0, 1.0)], 1, 0.5, 1).unwrap();
        assert_eq!(fit.global.covariance()[0][0], 0.5);
        assert_eq!(fit.global.mean(), [3.0, 4.0, 1.0]);
    }

    #[test]
    fn bump_values() {
        assert_eq!(novelty_bump(0.0, 1.0), 0.0);
        assert_abs_diff_eq!(novelty_bump(1.0, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(novelty_bump(2.0, 1.0), 0.735_758_882_342_884_7, epsilon = 1e-12);
    }

    fn shared_model() -> GeometryModels {
        let global = GaussianModel::standard();
        GeometryModels {
            global: global.clone(),
            per_class: vec![ClassModel {
                model: global,
                inherited_global: false,
                sample_count: 10,
            }],
        }
    }

    #[test]
    fn at_mean_candidate_has_low_novelty() {
        let models = shared_model();
        let mut scenes = vec![scene(0, vec![bx(0, 0.0, 0.0, 0.0)])];
        for i in 1..10 {
            // tightly clustered deviations around radius 3
            let r = 3.0 + 0.01 * i as f64;
            scenes.push(scene(i, vec![bx(0, r, 0.0, 0.0)]));
        }
        let refs: Vec<&SceneRecord> = scenes.iter().collect();
        let table = geometric_novelty(&refs, &models, 3.0, 1.0).unwrap();
        assert!(table.scores[0][0] < 1e-6);
        assert!(!table.outlier[0][0]);
    }

    #[test]
    fn far_candidate_is_discarded() {
        let models = shared_model();
        let mut scenes: Vec<SceneRecord> = (0..9)
            .map(|i| scene(i, vec![bx(0, 0.1 * i as f64, 0.0, 0.0)]))
            .collect();
        scenes.push(scene(9, vec![bx(0, 40.0, 0.0, 0.0)]));
        let refs: Vec<&SceneRecord> = scenes.iter().collect();
        let table = geometric_novelty(&refs, &models, 3.0, 1.0).unwrap();
        assert!(table.outlier[9][0]);
        assert_eq!(table.scores[9][0], 0.0);
        assert!(table.scores.iter().flatten().all(|s| s.is_finite() && *s >= 0.0));
    }

    #[test]
    fn novelty_ignores_candidate_order() {
        let models = shared_model();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let scenes: Vec<SceneRecord> = (0..12)
            .map(|i| {
                let boxes = (0..rng.random_range(0..3))
                    .map(|_| bx(0, rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.0))
                    .collect();
                scene(i, boxes)
            })
            .collect();
        let fwd: Vec<&SceneRecord> = scenes.iter().collect();
        let rev: Vec<&SceneRecord> = scenes.iter().rev().collect();
        let a = geometric_novelty(&fwd, &models, 3.0, 1.0).unwrap();
        let b = geometric_novelty(&rev, &models, 3.0, 1.0).unwrap();
        for i in 0..12 {
            assert_eq!(a.scores[i], b.scores[11 - i]);
        }
    }

    #[test]
    fn no_boxes_gives_zero_table() {
        let models = shared_model();
        let scenes = [scene(0, vec![]), scene(1, vec![])];
        let refs: Vec<&SceneRecord> = scenes.iter().collect();
        let t = geometric_novelty(&refs, &models, 3.0, 1.0).unwrap();
        assert_eq!(t.scores, vec![vec![0.0]; 2]);
        assert_eq!(t.cutoff_nll, vec![None]);
    }
}
