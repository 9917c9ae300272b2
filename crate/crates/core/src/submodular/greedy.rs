//! Greedy maximization under a cardinality bound and an optional additive
//! cost cap.
//!
//! `greedy_select` is lazy: stale gains sit in a max-heap as upper bounds
//! and are only refreshed when they reach the top. `naive_greedy_select`
//! rescans every candidate each step and is kept as the reference the lazy
//! path must match exactly, ties included.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::objective::CoverageObjective;
use crate::error::{Error, Result};

/// A stale bound within this much of a fresh gain is refreshed before the
/// fresh entry is accepted.
const STALE_TOL: f64 = 1e-12;

/// Per-item costs and a cap on their cumulative sum.
#[derive(Debug, Clone, Copy)]
pub struct CostBudget<'a> {
    pub costs: &'a [u64],
    pub cap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyOutcome {
    /// Items in selection order.
    pub selected: Vec<usize>,
    /// Marginal gain of each pick at the time it was made.
    pub gains: Vec<f64>,
    pub value: f64,
    pub cost: u64,
    /// Unselected candidates that no longer fit the remaining cost cap when
    /// the run stopped, ascending.
    pub skipped_for_budget: Vec<usize>,
}

fn check_inputs(
    obj: &CoverageObjective,
    candidates: &[usize],
    k: usize,
    budget: Option<CostBudget<'_>>,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::ZeroK);
    }
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateItem(w[0]));
    }
    if let Some(&last) = sorted.last() {
        if last >= obj.num_items() {
            return Err(Error::IndexOutOfRange {
                index: last,
                len: obj.num_items(),
            });
        }
    }
    if let Some(b) = budget {
        if b.costs.len() != obj.num_items() {
            return Err(Error::DimensionMismatch {
                expected: obj.num_items(),
                got: b.costs.len(),
            });
        }
    }
    Ok(sorted)
}

fn finish(
    obj: &CoverageObjective,
    selected: Vec<usize>,
    gains: Vec<f64>,
    spent: u64,
    checked_remaining: Option<u64>,
    candidates: &[usize],
    budget: Option<CostBudget<'_>>,
) -> Result<GreedyOutcome> {
    let value = obj.evaluate(&selected)?;
    let skipped_for_budget = match (budget, checked_remaining) {
        (Some(b), Some(rem)) => candidates
            .iter()
            .copied()
            .filter(|i| !selected.contains(i) && b.costs[*i] > rem)
            .collect(),
        _ => Vec::new(),
    };
    Ok(GreedyOutcome {
        selected,
        gains,
        value,
        cost: spent,
        skipped_for_budget,
    })
}

/// Heap entry ordered by gain, then by lower index.
#[derive(Debug)]
struct Entry {
    gain: f64,
    item: usize,
    stamp: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.item.cmp(&self.item))
    }
}

pub fn greedy_select(
    obj: &CoverageObjective,
    candidates: &[usize],
    k: usize,
    budget: Option<CostBudget<'_>>,
) -> Result<GreedyOutcome> {
    let candidates = check_inputs(obj, candidates, k, budget)?;
    let mut acc = obj.accumulator();
    let mut heap: BinaryHeap<Entry> = candidates
        .iter()
        .map(|&item| Entry {
            gain: obj.gain_unchecked(&acc.current_mass, item),
            item,
            stamp: 0,
        })
        .collect();

    let fits = |item: usize, spent: u64| match budget {
        Some(b) => spent.checked_add(b.costs[item]).is_some_and(|t| t <= b.cap),
        None => true,
    };

    let mut gains = Vec::new();
    let mut spent = 0u64;
    let mut checked_remaining = None;
    while acc.selected.len() < k {
        let step = acc.selected.len();
        checked_remaining = budget.map(|b| b.cap - spent);
        let pick = loop {
            let Some(top) = heap.pop() else { break None };
            if !fits(top.item, spent) {
                // Cumulative cost only grows, so this item never fits again.
                continue;
            }
            if top.stamp != step {
                heap.push(Entry {
                    gain: obj.gain_unchecked(&acc.current_mass, top.item),
                    item: top.item,
                    stamp: step,
                });
                continue;
            }
            // Fresh at the top. Refresh every stale bound close enough to
            // compete so ties resolve exactly as a full rescan would.
            let threshold = top.gain - STALE_TOL * top.gain.abs().max(1.0);
            let mut aside = Vec::new();
            let mut refreshed = false;
            while heap.peek().is_some_and(|next| next.gain >= threshold) {
                let mut next = heap.pop().expect("peeked");
                if !fits(next.item, spent) {
                    continue;
                }
                if next.stamp != step {
                    next.gain = obj.gain_unchecked(&acc.current_mass, next.item);
                    next.stamp = step;
                    refreshed = true;
                }
                aside.push(next);
            }
            heap.extend(aside);
            if refreshed {
                heap.push(top);
                continue;
            }
            break Some(top);
        };
        let Some(entry) = pick else { break };
        acc.add(obj, entry.item)?;
        gains.push(entry.gain);
        if let Some(b) = budget {
            spent += b.costs[entry.item];
        }
    }
    finish(obj, acc.selected, gains, spent, checked_remaining, &candidates, budget)
}

/// Full-rescan greedy. Same contract as [`greedy_select`].
pub fn naive_greedy_select(
    obj: &CoverageObjective,
    candidates: &[usize],
    k: usize,
    budget: Option<CostBudget<'_>>,
) -> Result<GreedyOutcome> {
    let candidates = check_inputs(obj, candidates, k, budget)?;
    let mut acc = obj.accumulator();
    let mut gains = Vec::new();
    let mut spent = 0u64;
    let mut checked_remaining = None;
    while acc.selected.len() < k {
        checked_remaining = budget.map(|b| b.cap - spent);
        let mut best: Option<(usize, f64)> = None;
        for &i in &candidates {
            if acc.contains(i) {
                continue;
            }
            if let Some(b) = budget {
                if b.costs[i] > b.cap - spent {
                    continue;
                }
            }
            let g = obj.marginal_gain(&acc, i)?;
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((i, g));
            }
        }
        let Some((i, g)) = best else { break };
        acc.add(obj, i)?;
        gains.push(g);
        if let Some(b) = budget {
            spent += b.costs[i];
        }
    }
    finish(obj, acc.selected, gains, spent, checked_remaining, &candidates, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submodular::objective::tests::three_item;
    use crate::submodular::Transform;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn three_item_trace() {
        let obj = three_item(Transform::LogEpsilon);
        let out = greedy_select(&obj, &[0, 1, 2], 2, None).unwrap();
        assert_eq!(out.selected, vec![2, 0]);
        assert_abs_diff_eq!(out.gains[0], 2.0 * 61f64.ln(), epsilon = 1e-9);
        assert_abs_diff_eq!(out.gains[1], (1.61f64 / 0.61).ln(), epsilon = 1e-9);
        assert_eq!(naive_greedy_select(&obj, &[0, 1, 2], 2, None).unwrap(), out);
    }

    #[test]
    fn identical_rows_pick_lowest_indices() {
        let obj = CoverageObjective::new(vec![vec![0.3, 0.7]; 5], vec![0.0; 2], 1e-6, Transform::LogEpsilon)
            .unwrap();
        let out = greedy_select(&obj, &[4, 2, 3, 1], 2, None).unwrap();
        assert_eq!(out.selected, vec![1, 2]);
    }

    #[test]
    fn cost_cap_stops_early() {
        let obj = three_item(Transform::LogEpsilon);
        let costs = [3, 3, 3];
        let budget = Some(CostBudget { costs: &costs, cap: 5 });
        let out = greedy_select(&obj, &[0, 1, 2], 3, budget).unwrap();
        assert_eq!(out.selected.len(), 1);
        assert_eq!(out.cost, 3);
        assert_eq!(out.skipped_for_budget, vec![0, 1]);
    }

    #[test]
    fn infeasible_items_are_skipped_not_terminal() {
        let obj = three_item(Transform::LogEpsilon);
        // c would win but is too expensive once a is in
        let costs = [2, 1, 9];
        let budget = Some(CostBudget { costs: &costs, cap: 3 });
        let out = greedy_select(&obj, &[0, 1, 2], 3, budget).unwrap();
        assert_eq!(out.selected, vec![0, 1]);
        assert_eq!(out.skipped_for_budget, vec![2]);
        assert_eq!(naive_greedy_select(&obj, &[0, 1, 2], 3, budget).unwrap(), out);
    }

    #[test]
    fn input_errors() {
        let obj = three_item(Transform::LogEpsilon);
        assert!(matches!(greedy_select(&obj, &[], 1, None), Err(Error::EmptyCandidates)));
        assert!(matches!(greedy_select(&obj, &[0], 0, None), Err(Error::ZeroK)));
        assert!(greedy_select(&obj, &[0, 7], 1, None).is_err());
    }

    #[test]
    fn lazy_matches_naive_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for t in 0..300 {
            let n = rng.random_range(1..60);
            let omega = rng.random_range(1..6);
            // coarse weights produce many exact ties
            let weights = (0..n)
                .map(|_| (0..omega).map(|_| rng.random_range(0..3) as f64 * 0.5).collect())
                .collect();
            let base = (0..omega).map(|_| rng.random_range(0..2) as f64).collect();
            let transform = if t % 2 == 0 { Transform::LogEpsilon } else { Transform::SquareRoot };
            let obj = CoverageObjective::new(weights, base, 1e-3, transform).unwrap();
            let cands: Vec<usize> = (0..n).collect();
            let k = rng.random_range(1..=n.min(12));
            let costs: Vec<u64> = (0..n).map(|_| rng.random_range(0..6)).collect();
            let cap = rng.random_range(0..20);
            let budget = (t % 3 == 0).then_some(CostBudget { costs: &costs, cap });
            let lazy = greedy_select(&obj, &cands, k, budget).unwrap();
            let naive = naive_greedy_select(&obj, &cands, k, budget).unwrap();
            assert_eq!(lazy.selected, naive.selected, "instance {t}");
            assert_eq!(lazy.skipped_for_budget, naive.skipped_for_budget);
        }
    }
}
