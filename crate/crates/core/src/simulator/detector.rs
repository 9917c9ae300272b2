use serde::{Deserialize, Serialize};

use super::generate::SyntheticWorld;
use crate::error::{Error, Result};
use crate::scene::{BoxBev, PoolState, SceneRecord};
use crate::selector::Detector;

/// Exposure counters of a simulated detector. Confidence per depth bin is
/// `n / (n + n0)` over labeled objects seen in that bin; count noise per
/// class shrinks as `sigma0 * n0 / (n0 + n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockDetectorState {
    pub n0: f64,
    pub sigma0: f64,
    pub bin_exposure: Vec<f64>,
    pub class_exposure: Vec<f64>,
}

impl MockDetectorState {
    pub fn new(depth_bins: usize, num_classes: usize, n0: f64, sigma0: f64) -> Self {
        Self {
            n0,
            sigma0,
            bin_exposure: vec![0.0; depth_bins],
            class_exposure: vec![0.0; num_classes],
        }
    }

    pub fn confidence(&self) -> Vec<f64> {
        self.bin_exposure.iter().map(|&n| n / (n + self.n0)).collect()
    }

    pub fn noise_scale(&self) -> Vec<f64> {
        self.class_exposure
            .iter()
            .map(|&n| self.sigma0 * self.n0 / (self.n0 + n))
            .collect()
    }

    pub(crate) fn absorb(&mut self, world: &SyntheticWorld, boxes: &[BoxBev]) {
        for b in boxes {
            self.bin_exposure[world.depth_bin(b)] += 1.0;
            self.class_exposure[b.class_id] += 1.0;
        }
    }

    /// Detector output for scene `index` under the current exposure.
    pub fn render(&self, world: &SyntheticWorld, index: usize) -> SceneRecord {
        let latent = &world.scenes[index];
        let confidence = self.confidence();
        let depth_dists = latent
            .true_bins
            .iter()
            .zip(&latent.base_weight)
            .zip(&latent.background)
            .map(|((&t, &w0), v)| {
                let w = w0 + (latent.cap_weight - w0).max(0.0) * confidence[t];
                let mut row: Vec<f64> = v.iter().map(|x| (1.0 - w) * x).collect();
                row[t] += w;
                row
            })
            .collect();
        let num_classes = self.class_exposure.len();
        let mut true_counts = vec![0.0; num_classes];
        for b in &latent.true_boxes {
            true_counts[b.class_id] += 1.0;
        }
        let predicted_counts = true_counts
            .iter()
            .zip(self.noise_scale())
            .zip(&latent.count_noise)
            .map(|((n, s), z)| (n + s * z).max(0.0))
            .collect();
        let predicted_boxes = latent
            .true_boxes
            .iter()
            .zip(&latent.box_jitter)
            .map(|(b, j)| BoxBev {
                center_x: b.center_x + j[0],
                center_y: b.center_y + j[1],
                size_z: (b.size_z + j[2]).max(0.1),
                ..b.clone()
            })
            .collect();
        SceneRecord {
            scene_id: index as u64,
            depth_dists: Some(depth_dists),
            depth_summary: None,
            predicted_counts,
            predicted_boxes,
            true_object_count: latent.true_boxes.len(),
            true_boxes: latent.true_boxes.clone(),
        }
    }
}

/// Simulated detector bound to the ground truth of a generated pool.
pub struct MockDetector<'w> {
    world: &'w SyntheticWorld,
    pub state: MockDetectorState,
}

impl<'w> MockDetector<'w> {
    pub fn new(world: &'w SyntheticWorld, state: MockDetectorState) -> Self {
        Self { world, state }
    }
}

impl Detector for MockDetector<'_> {
    fn observe(&mut self, pool: &PoolState, newly_labeled: &[u64]) -> Result<Option<Vec<SceneRecord>>> {
        if newly_labeled.is_empty() {
            return Ok(None);
        }
        let n = self.world.scenes.len();
        for &id in newly_labeled {
            let latent = self
                .world
                .scenes
                .get(id as usize)
                .ok_or(Error::IndexOutOfRange { index: id as usize, len: n })?;
            self.state.absorb(self.world, &latent.true_boxes);
        }
        let records = pool
            .records
            .iter()
            .map(|r| {
                if pool.unlabeled.contains(&r.scene_id) {
                    self.state.render(self.world, r.scene_id as usize)
                } else {
                    r.clone()
                }
            })
            .collect();
        Ok(Some(records))
    }
}
