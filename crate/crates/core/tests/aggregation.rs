mod common;

use beliefagg::aggregation::{
    convex_weights, enumerate_grid, grid_size, nearest_representative, FeatureBelief, GridIndex,
    PsiMode,
};
use common::{dense_aggregate, random_scheme};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn binomial(n: u64, k: u64) -> u64 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn feature_belief(raw: &[f64]) -> FeatureBelief {
    let total: f64 = raw.iter().sum();
    FeatureBelief::from_dense(&raw.iter().map(|x| x / total).collect::<Vec<_>>()).unwrap()
}

fn simplex_strategy() -> impl Strategy<Value = Vec<f64>> {
    (1usize..=6)
        .prop_flat_map(|k| proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], k))
        .prop_filter("positive mass", |v| v.iter().sum::<f64>() > 1e-3)
}

#[test]
fn grid_counts_match_stars_and_bars() {
    for k in 1..=5usize {
        for rho in 1..=7u32 {
            let expected = binomial(rho as u64 + k as u64 - 1, k as u64 - 1);
            assert_eq!(grid_size(rho, k).unwrap(), expected);
            let grid = enumerate_grid(rho, k).unwrap();
            assert_eq!(grid.len() as u64, expected);
            let mut sorted = grid.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), grid.len());
            assert!(grid
                .iter()
                .all(|g| g.to_dense(k).iter().sum::<u32>() == rho));
        }
    }
}

#[test]
fn grid_points_map_to_themselves() {
    for k in 1..=4usize {
        for rho in [1u32, 3, 10] {
            for g in enumerate_grid(rho, k).unwrap() {
                let q = g.feature_belief(k);
                assert_eq!(nearest_representative(&q, rho), g);
                assert_eq!(PsiMode::Convex.weights(&q, rho), vec![(g.clone(), 1.0)]);
                assert_eq!(PsiMode::Hard.weights(&q, rho), vec![(g.clone(), 1.0)]);
            }
        }
    }
}

proptest! {
    #[test]
    fn nearest_is_within_one_step(raw in simplex_strategy(), rho in 1u32..=30) {
        let q = feature_belief(&raw);
        let g = nearest_representative(&q, rho);
        let dense = g.to_dense(raw.len());
        prop_assert_eq!(dense.iter().sum::<u32>(), rho);
        for (x, &d) in dense.iter().enumerate() {
            prop_assert!((d as f64 / rho as f64 - q.get(x)).abs() < 1.0 / rho as f64 + 1e-12);
        }
    }

    #[test]
    fn convex_weights_reproduce_the_belief(raw in simplex_strategy(), rho in 1u32..=30) {
        let k = raw.len();
        let q = feature_belief(&raw);
        let w = convex_weights(&q, rho);
        prop_assert!(!w.is_empty() && w.len() <= k);
        prop_assert!(w.iter().all(|e| e.1 > 0.0));
        prop_assert!((w.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
        let mut bary = vec![0.0; k];
        for (g, p) in &w {
            for (x, d) in g.to_dense(k).into_iter().enumerate() {
                bary[x] += p * d as f64 / rho as f64;
            }
            prop_assert!(q.max_norm_distance(g) < 2.0 / rho as f64 + 1e-12);
        }
        for x in 0..k {
            prop_assert!((bary[x] - q.get(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn disaggregation_is_a_right_inverse(seed in any::<u64>(), n in 2usize..=12, k in 1usize..=6, rho in 1u32..=4) {
        prop_assume!(k <= n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scheme = random_scheme(&mut rng, n, k);
        let grid = enumerate_grid(rho, k).unwrap();
        let mut images = Vec::new();
        for g in &grid {
            let b = scheme.disaggregate(g).unwrap();
            let q = dense_aggregate(&scheme, &b.to_dense());
            for (x, d) in g.to_dense(k).into_iter().enumerate() {
                prop_assert!((q[x] - d as f64 / rho as f64).abs() < 1e-12);
            }
            images.push(b.to_dense());
        }
        for a in 0..images.len() {
            for b in a + 1..images.len() {
                prop_assert!(common::sup_distance(&images[a], &images[b]) > 1e-12);
            }
        }
    }

    #[test]
    fn aggregation_preserves_mass(seed in any::<u64>(), n in 2usize..=12, k in 1usize..=6) {
        prop_assume!(k <= n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scheme = random_scheme(&mut rng, n, k);
        let b = common::random_simplex(&mut rng, n);
        let q = scheme.aggregate(&common::belief(&b)).unwrap();
        prop_assert!((q.to_dense().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let reference = dense_aggregate(&scheme, &b);
        prop_assert!(common::sup_distance(&q.to_dense(), &reference) < 1e-12);
    }
}

#[test]
fn grid_index_rejects_wrong_totals() {
    assert!(GridIndex::new(3, &[1, 1]).is_err());
    assert!(GridIndex::new(3, &[1, 2]).is_ok());
}
