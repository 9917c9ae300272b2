//! Seeded property suites shared by the `check` command and the tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::objectives::{gaussian_nll, GaussianModel};
use crate::scene::compute_depth_entropy;
use crate::submodular::{
    brute_force_optimum, check_diminishing_returns, greedy_select, naive_greedy_select, random_objective,
    Transform, VALUE_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub checks: usize,
    pub failures: usize,
    /// First failure, if any.
    pub detail: Option<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: 0,
            failures: 0,
            detail: None,
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.detail.is_none() {
                self.detail = Some(detail());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    /// Sampled triples for the submodularity suite; also scales the others.
    pub trials: usize,
    pub seed: u64,
    /// Replaces the transform in the submodularity suite. Negative control.
    pub transform_override: Option<Transform>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            seed: 0,
            transform_override: None,
        }
    }
}

const EPSILONS: [f64; 4] = [1e-6, 1e-3, 0.1, 1.0];

fn random_transform(rng: &mut ChaCha8Rng) -> Transform {
    if rng.random_bool(0.5) {
        Transform::LogEpsilon
    } else {
        Transform::SquareRoot
    }
}

/// `objectives` random instances with `triples` sampled `(A ⊆ B, x)` each.
pub fn submodularity_suite(
    objectives: usize,
    triples: usize,
    seed: u64,
    transform_override: Option<Transform>,
) -> SuiteResult {
    let mut out = SuiteResult::new("submodularity");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..objectives {
        let n = rng.random_range(2..=30);
        let omega = rng.random_range(1..=8);
        let eps = EPSILONS[rng.random_range(0..EPSILONS.len())];
        // alternate so both transforms are always covered
        let transform = transform_override.unwrap_or(if t % 2 == 0 {
            Transform::LogEpsilon
        } else {
            Transform::SquareRoot
        });
        let obj = random_objective(&mut rng, n, omega, eps, transform);
        let violations = check_diminishing_returns(&obj, triples, rng.random());
        out.checks += triples;
        out.failures += violations.len();
        if let (None, Some(v)) = (&out.detail, violations.first()) {
            out.detail = Some(format!(
                "{:?} on instance {t}: A={:?} B={:?} x={} ({} vs {})",
                v.kind, v.a, v.b, v.x, v.lhs, v.rhs
            ));
        }
    }
    out
}

/// Greedy value against the brute-force optimum, both normalized by the
/// empty-set value. Returns the suite and the worst observed ratio.
pub fn greedy_ratio_suite(instances: usize, seed: u64) -> (SuiteResult, f64) {
    let mut out = SuiteResult::new("greedy-ratio");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 - (-1.0f64).exp() - 1e-9;
    let mut worst = f64::INFINITY;
    for t in 0..instances {
        let n = rng.random_range(1..=12);
        let omega = rng.random_range(1..=6);
        let k = rng.random_range(1..=4);
        let eps = EPSILONS[rng.random_range(0..EPSILONS.len())];
        let transform = random_transform(&mut rng);
        let obj = random_objective(&mut rng, n, omega, eps, transform);
        let cands: Vec<usize> = (0..n).collect();
        let empty = obj.empty_value();
        let greedy = greedy_select(&obj, &cands, k, None).expect("valid instance").value - empty;
        let (_, best) = brute_force_optimum(&obj, &cands, k).expect("within cap");
        let best = best - empty;
        let ratio = if best <= VALUE_TOL { 1.0 } else { greedy / best };
        worst = worst.min(ratio);
        out.record(greedy >= bound * best - VALUE_TOL, || {
            format!("instance {t}: greedy {greedy} vs optimum {best} (n={n}, k={k})")
        });
    }
    (out, worst)
}

/// Lazy and naive greedy must agree on the ordered selection.
pub fn lazy_equivalence_suite(instances: usize, seed: u64) -> SuiteResult {
    let mut out = SuiteResult::new("lazy-greedy");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..instances {
        let n = rng.random_range(1..=200);
        let omega = rng.random_range(1..=8);
        let k = rng.random_range(1..=20);
        let eps = EPSILONS[rng.random_range(0..EPSILONS.len())];
        let transform = random_transform(&mut rng);
        let obj = random_objective(&mut rng, n, omega, eps, transform);
        let cands: Vec<usize> = (0..n).collect();
        let lazy = greedy_select(&obj, &cands, k, None).expect("valid instance");
        let naive = naive_greedy_select(&obj, &cands, k, None).expect("valid instance");
        out.record(lazy.selected == naive.selected, || {
            format!("instance {t}: lazy {:?} vs naive {:?}", lazy.selected, naive.selected)
        });
    }
    out
}

/// Entropy of random stochastic matrices stays in `[0, 1]`, with the
/// uniform and one-hot extremes hitting the bounds.
pub fn entropy_bounds_suite(trials: usize, seed: u64) -> SuiteResult {
    let mut out = SuiteResult::new("entropy-bounds");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in 0..trials {
        let l = rng.random_range(1..=8);
        let d = rng.random_range(2..=12);
        let rows: Vec<Vec<f64>> = (0..l)
            .map(|_| {
                let raw: Vec<f64> = (0..d)
                    .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
                    .collect();
                let s: f64 = raw.iter().sum();
                if s == 0.0 {
                    let mut r = vec![0.0; d];
                    r[0] = 1.0;
                    r
                } else {
                    raw.into_iter().map(|v| v / s).collect()
                }
            })
            .collect();
        let h = compute_depth_entropy(&rows).expect("valid rows");
        out.record((0.0..=1.0 + 1e-12).contains(&h), || format!("trial {t}: h={h}"));
        let uniform = compute_depth_entropy(&vec![vec![1.0 / d as f64; d]; l]).expect("valid");
        out.record((uniform - 1.0).abs() <= 1e-12, || format!("uniform D={d}: h={uniform}"));
        let mut one_hot = vec![0.0; d];
        one_hot[rng.random_range(0..d)] = 1.0;
        let zero = compute_depth_entropy(&vec![one_hot; l]).expect("valid");
        out.record(zero.abs() <= 1e-12, || format!("one-hot D={d}: h={zero}"));
    }
    out
}

/// Gaussian NLL closed forms for the standard and a scaled model.
pub fn nll_suite() -> SuiteResult {
    let mut out = SuiteResult::new("nll-closed-form");
    let half_log_2pi3 = 1.5 * (2.0 * std::f64::consts::PI).ln();
    let std_model = GaussianModel::standard();
    let at_mean = gaussian_nll(&std_model, &[0.0, 0.0, 0.0]).expect("3-d point");
    out.record((at_mean - half_log_2pi3).abs() <= 1e-9, || format!("standard at mean: {at_mean}"));
    let unit = gaussian_nll(&std_model, &[1.0, 0.0, 0.0]).expect("3-d point");
    out.record((unit - half_log_2pi3 - 0.5).abs() <= 1e-9, || format!("standard at e1: {unit}"));
    let scaled = GaussianModel::new([1.0, 2.0, 3.0], [[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        .expect("positive definite");
    let v = gaussian_nll(&scaled, &[3.0, 2.0, 3.0]).expect("3-d point");
    let expected = half_log_2pi3 + 0.5 * 4f64.ln() + 0.5;
    out.record((v - expected).abs() <= 1e-9, || format!("diag(4,1,1): {v} vs {expected}"));
    out
}

/// Every suite at the sizes implied by `cfg.trials`.
pub fn run_all(cfg: &CheckConfig) -> Vec<SuiteResult> {
    let per_objective = 100;
    let objectives = cfg.trials.div_ceil(per_objective).max(1);
    let scaled = |base: usize| (cfg.trials / 50).clamp(base / 10, base).max(1);
    vec![
        submodularity_suite(objectives, per_objective.min(cfg.trials.max(1)), cfg.seed, cfg.transform_override),
        greedy_ratio_suite(scaled(200), cfg.seed.wrapping_add(1)).0,
        lazy_equivalence_suite(scaled(100), cfg.seed.wrapping_add(2)),
        entropy_bounds_suite(scaled(1000), cfg.seed.wrapping_add(3)),
        nll_suite(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_suites_pass() {
        for s in run_all(&CheckConfig {
            trials: 2_000,
            ..Default::default()
        }) {
            assert!(s.passed(), "{}: {:?}", s.name, s.detail);
        }
    }

    #[test]
    fn broken_transform_is_caught() {
        let res = run_all(&CheckConfig {
            trials: 2_000,
            seed: 1,
            transform_override: Some(Transform::BrokenSquare),
        });
        assert!(!res[0].passed());
        assert!(res[1..].iter().all(SuiteResult::passed));
    }
}
