use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Normal};
use serde::{Deserialize, Serialize};

use super::detector::{MockDetector, MockDetectorState};
use crate::error::{Error, Result};
use crate::scene::{BoxBev, PoolState};

/// Synthetic pool parameters. All randomness derives from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolGenConfig {
    pub n_scenes: usize,
    pub class_names: Vec<String>,
    /// Expected share of each class across the pool.
    pub class_mixture: Vec<f64>,
    /// Per-scene compositions are Dirichlet around the mixture with this
    /// total concentration.
    pub mixture_concentration: f64,
    /// Inclusive range of objects per scene.
    pub objects_per_scene: [usize; 2],
    pub depth_bins: usize,
    pub locations_per_scene: usize,
    /// Share of scenes whose depth rows are near-uniform.
    pub ambiguity_fraction: f64,
    pub layout_components: usize,
    /// Farthest ground range covered by the depth bins, in meters.
    pub max_range: f64,
    /// Scenes labeled before the first round.
    pub init_labeled: usize,
    /// Exposure at which detector confidence reaches one half.
    pub n0: f64,
    /// Count-noise scale of an untrained detector.
    pub sigma0: f64,
    pub seed: u64,
}

impl Default for PoolGenConfig {
    fn default() -> Self {
        Self {
            n_scenes: 1000,
            class_names: vec!["Car".into(), "Pedestrian".into(), "Cyclist".into()],
            class_mixture: vec![0.8, 0.1, 0.1],
            mixture_concentration: 2.0,
            objects_per_scene: [2, 40],
            depth_bins: 10,
            locations_per_scene: 32,
            ambiguity_fraction: 0.3,
            layout_components: 2,
            max_range: 100.0,
            init_labeled: 0,
            n0: 50.0,
            sigma0: 2.0,
            seed: 0,
        }
    }
}

impl PoolGenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_scenes == 0 {
            return bad("n_scenes must be at least 1".into());
        }
        if self.class_mixture.is_empty() {
            return bad("class_mixture is empty".into());
        }
        if self.class_mixture.len() != self.class_names.len() {
            return bad(format!(
                "class_mixture has {} entries for {} classes",
                self.class_mixture.len(),
                self.class_names.len()
            ));
        }
        let sum: f64 = self.class_mixture.iter().sum();
        if self.class_mixture.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-6 {
            return bad(format!("class_mixture must be a simplex vector (sums to {sum})"));
        }
        if !(0.0..=1.0).contains(&self.ambiguity_fraction) {
            return bad(format!("ambiguity_fraction {} outside [0,1]", self.ambiguity_fraction));
        }
        if self.objects_per_scene[0] > self.objects_per_scene[1] {
            return bad("objects_per_scene range is reversed".into());
        }
        if self.depth_bins < 2 {
            return bad("depth_bins must be at least 2".into());
        }
        if self.locations_per_scene == 0 || self.layout_components == 0 {
            return bad("locations_per_scene and layout_components must be positive".into());
        }
        if self.init_labeled > self.n_scenes {
            return bad(format!(
                "init_labeled {} exceeds n_scenes {}",
                self.init_labeled, self.n_scenes
            ));
        }
        for (name, v) in [
            ("mixture_concentration", self.mixture_concentration),
            ("max_range", self.max_range),
            ("n0", self.n0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return bad(format!("sigma0 must be non-negative, got {}", self.sigma0));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }
}

/// Hidden per-scene quantities used to render detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLatent {
    pub ambiguous: bool,
    pub true_boxes: Vec<BoxBev>,
    /// True depth bin of each location.
    pub true_bins: Vec<usize>,
    /// Peak weight of each location under an untrained detector.
    pub base_weight: Vec<f64>,
    /// Peak weight reached under a fully confident detector.
    pub cap_weight: f64,
    /// Near-uniform background of each row, peaked at the true bin.
    pub background: Vec<Vec<f64>>,
    /// Standard normal draw per class for the count noise.
    pub count_noise: Vec<f64>,
    /// Fixed localization error per true box: x, y and height.
    pub box_jitter: Vec<[f64; 3]>,
}

/// Ground truth for a generated pool.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticWorld {
    pub config: PoolGenConfig,
    pub scenes: Vec<SceneLatent>,
}

impl SyntheticWorld {
    pub fn depth_bin(&self, b: &BoxBev) -> usize {
        depth_bin(b, self.config.max_range, self.config.depth_bins)
    }
}

pub struct SyntheticPool {
    pub pool: PoolState,
    pub world: SyntheticWorld,
    /// Detector state after training on the initial labeled set.
    pub detector: MockDetectorState,
}

impl SyntheticPool {
    pub fn detector(&self) -> MockDetector<'_> {
        MockDetector::new(&self.world, self.detector.clone())
    }
}

const LEARNABLE_PEAK: (f64, f64) = (0.86, 0.95);
const AMBIGUOUS_PEAK: (f64, f64) = (0.0, 0.05);
const LEARNABLE_CAP: f64 = 0.98;
const AMBIGUOUS_CAP: f64 = 0.25;
const BACKGROUND_JITTER: f64 = 0.1;

// footprint (length, width) and height per class slot
const CLASS_SHAPES: [(f64, f64, f64); 3] = [(4.2, 1.8, 1.55), (0.6, 0.6, 1.72), (1.8, 0.6, 1.62)];

fn depth_bin(b: &BoxBev, max_range: f64, bins: usize) -> usize {
    let t = (b.ground_range() / max_range * bins as f64).floor();
    (t.max(0.0) as usize).min(bins - 1)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy)]
struct LayoutComponent {
    mean: [f64; 3],
    std: [f64; 3],
}

fn layout_components(cfg: &PoolGenConfig) -> Vec<Vec<LayoutComponent>> {
    let mut rng = stream_rng(cfg.seed, u64::MAX);
    (0..cfg.num_classes())
        .map(|c| {
            let height = CLASS_SHAPES[c % 3].2;
            (0..cfg.layout_components)
                .map(|_| LayoutComponent {
                    mean: [
                        rng.random_range(-0.25..0.25) * cfg.max_range,
                        rng.random_range(0.08..0.9) * cfg.max_range,
                        height * rng.random_range(0.95..1.05),
                    ],
                    std: [0.03 * cfg.max_range, 0.06 * cfg.max_range, 0.05 * height],
                })
                .collect()
        })
        .collect()
}

fn scene_composition(rng: &mut ChaCha8Rng, cfg: &PoolGenConfig) -> Vec<f64> {
    let draws: Vec<f64> = cfg
        .class_mixture
        .iter()
        .map(|&m| {
            if m == 0.0 {
                0.0
            } else {
                Gamma::new(cfg.mixture_concentration * m, 1.0)
                    .expect("positive shape")
                    .sample(rng)
            }
        })
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.into_iter().map(|d| d / total).collect()
    } else {
        cfg.class_mixture.clone()
    }
}

fn sample_box(rng: &mut ChaCha8Rng, class_id: usize, comp: &LayoutComponent, max_range: f64) -> BoxBev {
    let (len, width, _) = CLASS_SHAPES[class_id % 3];
    let n = |rng: &mut ChaCha8Rng, m: f64, s: f64| Normal::new(m, s).expect("finite std").sample(rng);
    let center_x = n(rng, comp.mean[0], comp.std[0]);
    let center_y = n(rng, comp.mean[1], comp.std[1]).clamp(1.0, 0.999 * max_range);
    let size_z = n(rng, comp.mean[2], comp.std[2]).max(0.3);
    BoxBev {
        class_id,
        center_x,
        center_y,
        center_z: 0.5 * size_z,
        size_x: (len * n(rng, 1.0, 0.05)).max(0.1),
        size_y: (width * n(rng, 1.0, 0.05)).max(0.1),
        size_z,
        yaw: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        confidence: None,
    }
}

fn background_row(rng: &mut ChaCha8Rng, bins: usize, peak: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..bins)
        .map(|_| 1.0 + rng.random_range(-BACKGROUND_JITTER..BACKGROUND_JITTER))
        .collect();
    let top = (0..bins).fold(0, |b, d| if v[d] > v[b] { d } else { b });
    v.swap(top, peak);
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn generate_scene(
    cfg: &PoolGenConfig,
    components: &[Vec<LayoutComponent>],
    index: usize,
    ambiguous: bool,
) -> SceneLatent {
    let mut rng = stream_rng(cfg.seed, index as u64);
    let composition = scene_composition(&mut rng, cfg);
    let classes = WeightedIndex::new(&composition).expect("composition has mass");
    // one layout cluster per class per scene
    let chosen: Vec<usize> = (0..cfg.num_classes())
        .map(|_| rng.random_range(0..cfg.layout_components))
        .collect();
    let n_obj = rng.random_range(cfg.objects_per_scene[0]..=cfg.objects_per_scene[1]);
    let true_boxes: Vec<BoxBev> = (0..n_obj)
        .map(|_| {
            let c = classes.sample(&mut rng);
            sample_box(&mut rng, c, &components[c][chosen[c]], cfg.max_range)
        })
        .collect();

    let d = cfg.depth_bins;
    let (lo, hi) = if ambiguous { AMBIGUOUS_PEAK } else { LEARNABLE_PEAK };
    let mut true_bins = Vec::with_capacity(cfg.locations_per_scene);
    let mut base_weight = Vec::with_capacity(cfg.locations_per_scene);
    let mut background = Vec::with_capacity(cfg.locations_per_scene);
    for u in 0..cfg.locations_per_scene {
        let t = match true_boxes.get(u) {
            Some(b) => depth_bin(b, cfg.max_range, d),
            None => rng.random_range(0..d),
        };
        true_bins.push(t);
        base_weight.push(rng.random_range(lo..=hi));
        background.push(background_row(&mut rng, d, t));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let count_noise = (0..cfg.num_classes()).map(|_| std_normal.sample(&mut rng)).collect();
    let box_jitter = true_boxes
        .iter()
        .map(|_| {
            [
                0.5 * std_normal.sample(&mut rng),
                1.0 * std_normal.sample(&mut rng),
                0.05 * std_normal.sample(&mut rng),
            ]
        })
        .collect();
    SceneLatent {
        ambiguous,
        true_boxes,
        true_bins,
        base_weight,
        cap_weight: if ambiguous { AMBIGUOUS_CAP } else { LEARNABLE_CAP },
        background,
        count_noise,
        box_jitter,
    }
}

/// Generates a pool with hidden ground truth and the detector trained on
/// its initial labeled set.
pub fn generate_pool(cfg: &PoolGenConfig) -> Result<SyntheticPool> {
    cfg.validate()?;
    let n = cfg.n_scenes;
    let mut membership = stream_rng(cfg.seed, u64::MAX - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut membership);
    let n_ambiguous = (cfg.ambiguity_fraction * n as f64).round() as usize;
    let ambiguous: BTreeSet<usize> = order[..n_ambiguous].iter().copied().collect();
    order.shuffle(&mut membership);
    let labeled: BTreeSet<u64> = order[..cfg.init_labeled].iter().map(|&i| i as u64).collect();

    let components = layout_components(cfg);
    let scenes = (0..n)
        .map(|i| generate_scene(cfg, &components, i, ambiguous.contains(&i)))
        .collect();
    let world = SyntheticWorld {
        config: cfg.clone(),
        scenes,
    };
    let mut state = MockDetectorState::new(cfg.depth_bins, cfg.num_classes(), cfg.n0, cfg.sigma0);
    for id in &labeled {
        state.absorb(&world, &world.scenes[*id as usize].true_boxes);
    }
    let records = (0..n).map(|i| state.render(&world, i)).collect();
    let pool = PoolState::new(records, labeled, cfg.class_names.clone())?;
    Ok(SyntheticPool {
        pool,
        world,
        detector: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::validate_pool;

    fn small(seed: u64, ambiguity: f64) -> PoolGenConfig {
        PoolGenConfig {
            n_scenes: 60,
            objects_per_scene: [0, 12],
            ambiguity_fraction: ambiguity,
            init_labeled: 10,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn generated_pool_validates() {
        let g = generate_pool(&small(1, 0.3)).unwrap();
        assert!(validate_pool(&g.pool).is_empty(), "{:?}", validate_pool(&g.pool));
        assert_eq!(g.pool.records.len(), 60);
        assert_eq!(g.pool.labeled.len(), 10);
        assert_eq!(g.world.scenes.iter().filter(|s| s.ambiguous).count(), 18);
    }

    #[test]
    fn entropy_bounds_follow_ambiguity() {
        for seed in 0..5 {
            for cfg in [small(seed, 0.0), PoolGenConfig { depth_bins: 3, ..small(seed, 0.0) }] {
                let g = generate_pool(&cfg).unwrap();
                for r in &g.pool.records {
                    let h = crate::scene::compute_depth_entropy(r.depth_dists.as_ref().unwrap()).unwrap();
                    assert!(h < 0.5, "learnable scene {} has h={h}", r.scene_id);
                }
            }
            let g = generate_pool(&small(seed, 1.0)).unwrap();
            for r in &g.pool.records {
                let h = crate::scene::compute_depth_entropy(r.depth_dists.as_ref().unwrap()).unwrap();
                assert!(h > 0.9, "ambiguous scene {} has h={h}", r.scene_id);
            }
        }
    }

    #[test]
    fn seeds_control_output() {
        let a = generate_pool(&small(3, 0.3)).unwrap().pool;
        let b = generate_pool(&small(3, 0.3)).unwrap().pool;
        assert_eq!(a, b);
        for s in 0..10 {
            let x = generate_pool(&small(100 + 2 * s, 0.3)).unwrap().pool;
            let y = generate_pool(&small(101 + 2 * s, 0.3)).unwrap().pool;
            assert_ne!(x.records, y.records);
        }
    }

    #[test]
    fn long_tail_is_visible() {
        let cfg = PoolGenConfig {
            n_scenes: 400,
            ..Default::default()
        };
        let g = generate_pool(&cfg).unwrap();
        let mut counts = [0usize; 3];
        for s in &g.world.scenes {
            for b in &s.true_boxes {
                counts[b.class_id] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        let car = counts[0] as f64 / total as f64;
        assert!((0.7..0.9).contains(&car), "car share {car}");
    }

    #[test]
    fn degenerate_configs_rejected() {
        assert!(generate_pool(&PoolGenConfig { n_scenes: 0, ..Default::default() }).is_err());
        let empty = PoolGenConfig {
            class_mixture: vec![],
            class_names: vec![],
            ..Default::default()
        };
        assert!(generate_pool(&empty).is_err());
        let off = PoolGenConfig {
            class_mixture: vec![0.5, 0.2, 0.2],
            ..Default::default()
        };
        assert!(generate_pool(&off).is_err());
    }
}
