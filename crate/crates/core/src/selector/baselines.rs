//! RANDOM, ENTROPY and CORESET reference strategies over scene descriptors.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::Strategy;
use crate::error::{Error, Result};
use crate::scene::{LearnabilityProfile, PoolState};

/// Descriptor used by CORESET: depth histogram, class distribution and
/// depth entropy, concatenated.
pub fn descriptor_embedding(profile: &LearnabilityProfile) -> Vec<f64> {
    let mut v = Vec::with_capacity(profile.m.len() + profile.p.len() + 1);
    v.extend_from_slice(&profile.m);
    v.extend_from_slice(&profile.p);
    v.push(profile.h);
    v
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Furthest-first traversal over `candidates`, starting from `centers`.
/// With no centers the lowest-index candidate seeds the traversal. Returns
/// candidate indices in pick order, `limit` of them at most.
pub fn furthest_first(candidates: &[Vec<f64>], centers: &[Vec<f64>], limit: usize) -> Vec<usize> {
    let n = candidates.len();
    let limit = limit.min(n);
    let mut picked = vec![false; n];
    let mut order = Vec::with_capacity(limit);
    let mut min_dist = vec![f64::INFINITY; n];
    for c in centers {
        for (d, x) in min_dist.iter_mut().zip(candidates) {
            *d = d.min(squared_distance(x, c));
        }
    }
    while order.len() < limit {
        let next = if order.is_empty() && centers.is_empty() {
            0
        } else {
            let mut best = None;
            for i in 0..n {
                if !picked[i] && best.is_none_or(|b: usize| min_dist[i] > min_dist[b]) {
                    best = Some(i);
                }
            }
            best.expect("limit bounded by candidate count")
        };
        picked[next] = true;
        order.push(next);
        let center = &candidates[next];
        for (d, x) in min_dist.iter_mut().zip(candidates) {
            *d = d.min(squared_distance(x, center));
        }
    }
    order
}

/// Full priority order of the unlabeled pool positions for a baseline.
pub(crate) fn baseline_order(
    pool: &PoolState,
    profiles: &[Option<LearnabilityProfile>],
    strategy: Strategy,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut positions = pool.unlabeled_positions();
    match strategy {
        Strategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            positions.shuffle(&mut rng);
            Ok(positions)
        }
        Strategy::Entropy => {
            // stable sort keeps ascending position among equal entropies
            positions.sort_by(|&a, &b| {
                let ha = profiles[a].as_ref().expect("profiled").h;
                let hb = profiles[b].as_ref().expect("profiled").h;
                hb.total_cmp(&ha)
            });
            Ok(positions)
        }
        Strategy::Coreset => {
            let cands: Vec<Vec<f64>> = positions
                .iter()
                .map(|&p| descriptor_embedding(profiles[p].as_ref().expect("profiled")))
                .collect();
            let centers: Vec<Vec<f64>> = pool
                .labeled_positions()
                .iter()
                .map(|&p| descriptor_embedding(profiles[p].as_ref().expect("profiled")))
                .collect();
            let order = furthest_first(&cands, &centers, cands.len());
            Ok(order.into_iter().map(|i| positions[i]).collect())
        }
        Strategy::Lh3d => Err(Error::Config("lh3d is not a baseline strategy".into())),
    }
}

/// First `k` unlabeled scene ids under a baseline strategy.
pub fn select_baseline(
    pool: &PoolState,
    strategy: Strategy,
    k: usize,
    seed: u64,
    params: &crate::scene::ProfileParams,
) -> Result<Vec<u64>> {
    let available = pool.unlabeled.len();
    if k > available {
        return Err(Error::NotEnoughCandidates {
            requested: k,
            available,
        });
    }
    let profiles = super::round::pool_profiles(pool, params, false)?;
    let order = baseline_order(pool, &profiles, strategy, seed)?;
    Ok(order
        .into_iter()
        .take(k)
        .map(|p| pool.records[p].scene_id)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::tests::simple_record;
    use crate::scene::{PoolState, ProfileParams};
    use std::collections::BTreeSet;

    fn pool_with_entropies(hs: &[f64], labeled: &[u64]) -> PoolState {
        // two-bin rows with entropy controlled by the split
        let records = hs
            .iter()
            .enumerate()
            .map(|(i, &target)| {
                let mut lo = 0.0;
                let mut hi = 0.5;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let ent = -(mid * f64::ln(mid) + (1.0 - mid) * f64::ln(1.0 - mid)) / 2f64.ln();
                    if ent < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let q = 0.5 * (lo + hi);
                simple_record(i as u64, vec![vec![q, 1.0 - q]], vec![1.0, 0.0])
            })
            .collect();
        PoolState::new(records, labeled.iter().copied().collect::<BTreeSet<_>>(), vec!["a".into(), "b".into()])
            .unwrap()
    }

    #[test]
    fn entropy_picks_highest() {
        let pool = pool_with_entropies(&[0.1, 0.9, 0.5], &[]);
        let got = select_baseline(&pool, Strategy::Entropy, 2, 0, &ProfileParams::default()).unwrap();
        assert_eq!(got, vec![1, 2]);
    }

    #[test]
    fn random_is_seeded() {
        let pool = pool_with_entropies(&[0.2; 20], &[]);
        let p = ProfileParams::default();
        let a = select_baseline(&pool, Strategy::Random, 5, 42, &p).unwrap();
        let b = select_baseline(&pool, Strategy::Random, 5, 42, &p).unwrap();
        assert_eq!(a, b);
        let unique: BTreeSet<_> = a.iter().collect();
        assert_eq!(unique.len(), 5);
        assert!(select_baseline(&pool, Strategy::Random, 21, 42, &p).is_err());
    }

    #[test]
    fn coreset_duplicate_of_labeled_goes_last() {
        // scene 0 labeled; scene 3 is its exact copy
        let pool = pool_with_entropies(&[0.3, 0.9, 0.6, 0.3, 0.1], &[0]);
        let got = select_baseline(&pool, Strategy::Coreset, 4, 0, &ProfileParams::default()).unwrap();
        assert_eq!(got.len(), 4);
        assert_eq!(*got.last().unwrap(), 3);
    }

    #[test]
    fn furthest_first_seeds_lowest_index_without_centers() {
        let pts = vec![vec![0.0], vec![10.0], vec![1.0], vec![4.0]];
        assert_eq!(furthest_first(&pts, &[], 4), vec![0, 1, 3, 2]);
    }
}
