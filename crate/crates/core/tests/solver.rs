mod common;

use std::collections::{BTreeSet, HashMap};

use beliefagg::aggregation::{enumerate_grid, FeatureScheme, GridIndex, PsiMode};
use beliefagg::policy::CostApprox;
use beliefagg::pomdp::{Belief, TabularPomdp};
use beliefagg::problems::{
    build_treasure, treasure_feature_scheme, TreasureFeatures, TreasureSpec,
};
use beliefagg::solver::{
    apply_h, solve, AggregateMdp, AggregateProblem, AggregateValue, BiasFunction, Expansion, Mode,
    SolverConfig,
};
use common::{
    dense_aggregate, dense_cost, dense_disaggregate, dense_update, independent_closure,
    random_model, random_scheme,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest-remainder rounding of `rho * q`, ties to the lowest index.
fn round_to_grid(q: &[f64], rho: u32) -> Vec<u32> {
    let scaled: Vec<f64> = q.iter().map(|x| x * rho as f64).collect();
    let mut out: Vec<u32> = scaled.iter().map(|s| (s + 1e-10).floor() as u32).collect();
    let mut left = rho as i64 - out.iter().map(|&d| d as i64).sum::<i64>();
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = scaled[a] - out[a] as f64;
        let fb = scaled[b] - out[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for x in order {
        if left <= 0 {
            break;
        }
        out[x] += 1;
        left -= 1;
    }
    out
}

/// Value iteration on the hard-aggregated problem written out densely.
fn dense_hard_solution(
    model: &TabularPomdp,
    scheme: &FeatureScheme,
    rho: u32,
) -> HashMap<Vec<u32>, f64> {
    let k = scheme.num_features();
    let grid: Vec<Vec<u32>> = enumerate_grid(rho, k)
        .unwrap()
        .iter()
        .map(|g| g.to_dense(k))
        .collect();
    let index: HashMap<Vec<u32>, usize> = grid
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, g)| (g, i))
        .collect();
    let alpha = model.discount();
    let rows: Vec<Vec<(f64, Vec<(usize, f64)>)>> = grid
        .iter()
        .map(|g| {
            let b = dense_disaggregate(scheme, g, rho);
            (0..model.num_controls())
                .map(|u| {
                    let succ = (0..model.num_observations())
                        .filter_map(|z| dense_update(model, &b, u, z))
                        .map(|(p, next)| {
                            (
                                index[&round_to_grid(&dense_aggregate(scheme, &next), rho)],
                                p,
                            )
                        })
                        .collect();
                    (dense_cost(model, &b, u), succ)
                })
                .collect()
        })
        .collect();
    let mut r = vec![0.0; grid.len()];
    loop {
        let next: Vec<f64> = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(c, succ)| c + alpha * succ.iter().map(|&(s, p)| p * r[s]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let delta = common::sup_distance(&next, &r);
        r = next;
        if delta < 1e-12 {
            break;
        }
    }
    grid.into_iter().zip(r).collect()
}

fn treasure2() -> (TabularPomdp, FeatureScheme) {
    let spec = TreasureSpec::reference(2).unwrap();
    let model = build_treasure(&spec).unwrap();
    let scheme = treasure_feature_scheme(&spec, TreasureFeatures::MaxValue).unwrap();
    (model, scheme)
}

#[test]
fn hard_solution_matches_dense_value_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let n = rng.random_range(2..=7);
        let k = rng.random_range(1..=n.min(4));
        let model = random_model(&mut rng, n, 2, 2, 0.9);
        let scheme = random_scheme(&mut rng, n, k);
        let rho = rng.random_range(1..=4);
        let expected = dense_hard_solution(&model, &scheme, rho);
        let config = SolverConfig {
            tolerance: 1e-12,
            ..SolverConfig::default()
        };
        let sol = solve(&model, &scheme, rho, PsiMode::Hard, Mode::Sync, &config).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.len(), expected.len());
        for (g, v) in sol.iter() {
            let e = expected[&g.to_dense(k)];
            assert!((v - e).abs() < 1e-9, "trial {trial}: {v} vs {e}");
        }
    }
}

#[test]
fn sync_and_async_agree_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let n = rng.random_range(3..=8);
        let model = random_model(&mut rng, n, 3, 2, 0.95);
        let scheme = random_scheme(&mut rng, n, 3);
        for psi in [PsiMode::Hard, PsiMode::Convex] {
            let config = SolverConfig {
                tolerance: 1e-11,
                ..SolverConfig::default()
            };
            let a = solve(&model, &scheme, 3, psi, Mode::Sync, &config).unwrap();
            let b = solve(&model, &scheme, 3, psi, Mode::Async, &config).unwrap();
            assert!(a.max_difference(&b) < 1e-8);
            assert!(a.bellman_residual < 1e-9);
            assert!(b.bellman_residual < 1e-9);
        }
    }
}

#[test]
fn lazy_tables_cover_exactly_the_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let n = rng.random_range(3..=8);
        let model = random_model(&mut rng, n, 2, 3, 0.9);
        let scheme = random_scheme(&mut rng, n, 3);
        for psi in [PsiMode::Hard, PsiMode::Convex] {
            let seed = GridIndex::unit(6, rng.random_range(0..3));
            let expected = independent_closure(&model, &scheme, 6, psi, &seed);
            let eager = solve(
                &model,
                &scheme,
                6,
                psi,
                Mode::Sync,
                &SolverConfig::default(),
            )
            .unwrap();
            for mode in [Mode::Sync, Mode::Async] {
                let sol = solve(
                    &model,
                    &scheme,
                    6,
                    psi,
                    mode,
                    &SolverConfig::lazy(vec![seed.clone()]),
                )
                .unwrap();
                let got: BTreeSet<GridIndex> = sol.members().iter().cloned().collect();
                assert_eq!(got, expected);
                // a closed subset carries the same values as the full table
                for (g, v) in sol.iter() {
                    assert!((v - eager.get(g).unwrap()).abs() < 1e-7);
                }
            }
        }
    }
}

#[test]
fn direct_operator_matches_precomputed_rows() {
    let (model, scheme) = treasure2();
    for psi in [PsiMode::Hard, PsiMode::Convex] {
        let problem = AggregateProblem::new(&model, &scheme, 5, psi).unwrap();
        let mdp = AggregateMdp::eager(&problem, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r: Vec<f64> = (0..mdp.len())
            .map(|_| rng.random_range(-10.0..10.0))
            .collect();
        let value =
            AggregateValue::new(3, 5, psi, Mode::Sync, mdp.members().to_vec(), r.clone()).unwrap();
        let direct = apply_h(&value, &problem).unwrap();
        let rows = mdp.apply(&r);
        assert_eq!(direct.len(), mdp.len());
        for (g, v) in direct.iter() {
            assert!((v - rows[mdp.id_of(g).unwrap()]).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn operator_is_monotone_and_contracting(seed in any::<u64>(), convex in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=8);
        let alpha = rng.random_range(0.5..0.99);
        let model = random_model(&mut rng, n, 2, 2, alpha);
        let k = rng.random_range(1..=n.min(4));
        let scheme = random_scheme(&mut rng, n, k);
        let psi = if convex { PsiMode::Convex } else { PsiMode::Hard };
        let problem = AggregateProblem::new(&model, &scheme, 3, psi).unwrap();
        let mdp = AggregateMdp::eager(&problem, None).unwrap();
        let r: Vec<f64> = (0..mdp.len()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let up: Vec<f64> = r.iter().map(|x| x + rng.random_range(0.0..3.0)).collect();
        let (hr, hup) = (mdp.apply(&r), mdp.apply(&up));
        for (a, b) in hr.iter().zip(&hup) {
            prop_assert!(a <= b);
        }
        let other: Vec<f64> = (0..mdp.len()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let ho = mdp.apply(&other);
        let lhs = common::sup_distance(&hr, &ho);
        let rhs = alpha * common::sup_distance(&r, &other);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12, "{} > {}", lhs, rhs);
    }
}

#[test]
fn constant_bias_leaves_the_approximation_unchanged() {
    let (model, scheme) = treasure2();
    let c = 3.5;
    let tight = SolverConfig {
        tolerance: 1e-11,
        ..SolverConfig::default()
    };
    let plain = solve(&model, &scheme, 4, PsiMode::Convex, Mode::Sync, &tight).unwrap();
    let config = SolverConfig {
        bias: Some(BiasFunction::constant(c)),
        ..tight
    };
    let biased = solve(&model, &scheme, 4, PsiMode::Convex, Mode::Sync, &config).unwrap();
    assert_eq!(biased.bias_tag.as_deref(), Some("constant 3.5"));
    for (g, v) in plain.iter() {
        assert!((biased.get(g).unwrap() + c - v).abs() < 1e-8);
    }
    let a = CostApprox::new(scheme.clone(), plain, None).unwrap();
    let b = CostApprox::new(scheme, biased, config.bias.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let w = common::random_simplex(&mut rng, 5);
        let belief = Belief::from_dense(&w).unwrap();
        assert!((a.approx_cost(&belief) - b.approx_cost(&belief)).abs() < 1e-8);
    }
}

#[test]
fn solutions_round_trip_through_json() {
    let (model, scheme) = treasure2();
    let sol = solve(
        &model,
        &scheme,
        3,
        PsiMode::Hard,
        Mode::Async,
        &SolverConfig::default(),
    )
    .unwrap();
    let back = AggregateValue::from_json_str(&sol.to_json_string().unwrap()).unwrap();
    assert_eq!(back.len(), sol.len());
    assert_eq!(back.mode(), Mode::Async);
    assert_eq!(back.max_difference(&sol), 0.0);
}

#[test]
fn table_limit_is_enforced() {
    let (model, scheme) = treasure2();
    let config = SolverConfig {
        table_limit: Some(10),
        ..SolverConfig::default()
    };
    assert!(solve(&model, &scheme, 10, PsiMode::Hard, Mode::Sync, &config).is_err());
    let lazy = SolverConfig {
        expansion: Expansion::Lazy,
        seeds: vec![GridIndex::unit(10, 1)],
        table_limit: Some(1_000),
        ..SolverConfig::default()
    };
    assert!(solve(&model, &scheme, 10, PsiMode::Hard, Mode::Async, &lazy).is_ok());
}

#[test]
fn non_convergence_is_reported() {
    let (model, scheme) = treasure2();
    let config = SolverConfig {
        max_sweeps: 3,
        ..SolverConfig::default()
    };
    let sol = solve(&model, &scheme, 5, PsiMode::Hard, Mode::Sync, &config).unwrap();
    assert!(!sol.converged);
    assert_eq!(sol.iterations, 3);
}
