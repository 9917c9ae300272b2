//! Exhaustive and randomized oracles over a [`CoverageObjective`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::objective::CoverageObjective;
use crate::error::{Error, Result};

pub const BRUTE_FORCE_CAP: usize = 20;

/// Absolute tolerance for objective-value comparisons.
pub const VALUE_TOL: f64 = 1e-9;

/// Exact maximizer over all subsets of `candidates` with at most `k`
/// items. Among equal values the lexicographically first subset (by
/// sorted index list) wins.
pub fn brute_force_optimum(
    obj: &CoverageObjective,
    candidates: &[usize],
    k: usize,
) -> Result<(Vec<usize>, f64)> {
    if candidates.len() > BRUTE_FORCE_CAP {
        return Err(Error::TooManyCandidates {
            got: candidates.len(),
            cap: BRUTE_FORCE_CAP,
        });
    }
    let mut items = candidates.to_vec();
    items.sort_unstable();
    items.dedup();
    if let Some(&i) = items.last() {
        if i >= obj.num_items() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: obj.num_items(),
            });
        }
    }

    struct Search<'a> {
        obj: &'a CoverageObjective,
        items: &'a [usize],
        k: usize,
        current: Vec<usize>,
        best: Vec<usize>,
        best_value: f64,
    }

    impl Search<'_> {
        // Pre-order DFS visits subsets in lexicographic order.
        fn visit(&mut self, start: usize) -> Result<()> {
            let value = self.obj.evaluate(&self.current)?;
            if value > self.best_value {
                self.best_value = value;
                self.best = self.current.clone();
            }
            if self.current.len() == self.k {
                return Ok(());
            }
            for pos in start..self.items.len() {
                self.current.push(self.items[pos]);
                self.visit(pos + 1)?;
                self.current.pop();
            }
            Ok(())
        }
    }

    let mut search = Search {
        obj,
        items: &items,
        k,
        current: Vec::new(),
        best: Vec::new(),
        best_value: f64::NEG_INFINITY,
    };
    search.visit(0)?;
    Ok((search.best, search.best_value))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Monotonicity,
    DiminishingReturns,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyViolation {
    pub kind: ViolationKind,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub x: usize,
    /// `F(A)` or `gain(x | A)`.
    pub lhs: f64,
    /// `F(B)` or `gain(x | B)`.
    pub rhs: f64,
}

/// Samples `trials` triples `A ⊆ B`, `x ∉ B` and records every failure of
/// `F(A) <= F(B)` or `gain(x|A) >= gain(x|B)` beyond [`VALUE_TOL`].
pub fn check_diminishing_returns(
    obj: &CoverageObjective,
    trials: usize,
    seed: u64,
) -> Vec<PropertyViolation> {
    let n = obj.num_items();
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..trials {
        order.shuffle(&mut rng);
        let x = order[0];
        let rest = &order[1..];
        let b_len = rng.random_range(0..=rest.len());
        let a_len = rng.random_range(0..=b_len);
        let mut b = rest[..b_len].to_vec();
        let mut a = b[..a_len].to_vec();
        a.sort_unstable();
        b.sort_unstable();

        let fa = obj.evaluate(&a).expect("indices in range");
        let fb = obj.evaluate(&b).expect("indices in range");
        if fa > fb + VALUE_TOL {
            out.push(PropertyViolation {
                kind: ViolationKind::Monotonicity,
                a: a.clone(),
                b: b.clone(),
                x,
                lhs: fa,
                rhs: fb,
            });
        }
        let with_x = |s: &[usize]| {
            let mut v = s.to_vec();
            v.push(x);
            obj.evaluate(&v).expect("indices in range")
        };
        let gain_a = with_x(&a) - fa;
        let gain_b = with_x(&b) - fb;
        if gain_a < gain_b - VALUE_TOL {
            out.push(PropertyViolation {
                kind: ViolationKind::DiminishingReturns,
                a,
                b,
                x,
                lhs: gain_a,
                rhs: gain_b,
            });
        }
    }
    out
}

/// Random objective for property suites: `n` items, `omega` domains,
/// weights in `[0, 2)` with roughly a third zeroed, base mass in `[0, 1)`.
pub fn random_objective(
    rng: &mut impl Rng,
    n: usize,
    omega: usize,
    epsilon: f64,
    transform: super::Transform,
) -> CoverageObjective {
    let weights = (0..n)
        .map(|_| {
            (0..omega)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        0.0
                    } else {
                        rng.random_range(0.0..2.0)
                    }
                })
                .collect()
        })
        .collect();
    let base = (0..omega)
        .map(|_| if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..1.0) })
        .collect();
    CoverageObjective::new(weights, base, epsilon, transform).expect("valid random objective")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submodular::greedy::greedy_select;
    use crate::submodular::objective::tests::three_item;
    use crate::submodular::Transform;
    use approx::assert_abs_diff_eq;

    #[test]
    fn three_item_optimum_and_ratio() {
        let obj = three_item(Transform::LogEpsilon);
        let (best, value) = brute_force_optimum(&obj, &[0, 1, 2], 2).unwrap();
        assert_eq!(best, vec![0, 1]);
        let empty = obj.evaluate(&[]).unwrap();
        assert_abs_diff_eq!(value - empty, 2.0 * 101f64.ln(), epsilon = 1e-9);
        let greedy = greedy_select(&obj, &[0, 1, 2], 2, None).unwrap();
        let ratio = (greedy.value - empty) / (value - empty);
        assert_abs_diff_eq!(ratio, 0.995_887_127_499_031_5, epsilon = 1e-9);
        assert!(ratio >= 1.0 - (-1f64).exp());
    }

    #[test]
    fn brute_force_edge_cases() {
        let obj = three_item(Transform::SquareRoot);
        assert_eq!(brute_force_optimum(&obj, &[0, 1, 2], 5).unwrap().0, vec![0, 1, 2]);
        assert_eq!(brute_force_optimum(&obj, &[1], 1).unwrap().0, vec![1]);
        let many: Vec<usize> = (0..21).collect();
        assert!(matches!(
            brute_force_optimum(&obj, &many, 2),
            Err(Error::TooManyCandidates { got: 21, .. })
        ));
    }

    #[test]
    fn concave_transforms_have_no_violations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for transform in [Transform::LogEpsilon, Transform::SquareRoot] {
            let obj = random_objective(&mut rng, 15, 4, 1e-6, transform);
            assert!(check_diminishing_returns(&obj, 1000, 9).is_empty());
        }
    }

    #[test]
    fn broken_square_is_caught() {
        let obj = three_item(Transform::BrokenSquare);
        // gain(a | {}) = 1.01^2 - 0.01^2 < gain(a | {c}) = 1.61^2 - 0.61^2
        let g_empty = obj.evaluate(&[0]).unwrap() - obj.evaluate(&[]).unwrap();
        let g_c = obj.evaluate(&[2, 0]).unwrap() - obj.evaluate(&[2]).unwrap();
        assert!(g_empty < g_c);
        let v = check_diminishing_returns(&obj, 200, 1);
        assert!(v.iter().any(|v| v.kind == ViolationKind::DiminishingReturns));
    }

    #[test]
    fn degenerate_single_item() {
        let obj = CoverageObjective::new(vec![vec![0.4]], vec![0.0], 1e-6, Transform::LogEpsilon)
            .unwrap();
        assert!(check_diminishing_returns(&obj, 50, 0).is_empty());
    }
}
