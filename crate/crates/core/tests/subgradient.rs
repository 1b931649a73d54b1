mod common;

use proptest::prelude::*;
use rmdp_core::eval::DEFAULT_ACTIVE_TOL;
use rmdp_core::rng::{random_policy, seeded};
use rmdp_core::subgrad::{
    gap_for_vertices, greedy_regret, policy_gradient, prox_point, stationarity_gap, subdifferential, ProxConfig,
};
use rmdp_core::zoo::{self, RandomSpec, RandomStructure};
use rmdp_core::{Policy, SaTable, UncertaintySet};

fn regret_oracle(p: &Policy, g: &SaTable) -> f64 {
    (0..p.num_states())
        .map(|s| {
            let row = g.row(s);
            let inner: f64 = p.row(s).iter().zip(row).map(|(a, b)| a * b).sum();
            inner - row.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gap_is_nonnegative_and_below_each_vertex_regret(seed in 0u64..10_000, k in 1usize..4) {
        let inst = zoo::random_instance(seed, &RandomSpec::new(3, 3, k, RandomStructure::Finite)).unwrap();
        let p = random_policy(&mut seeded(seed + 1), 3, 3);
        let UncertaintySet::Finite(models) = &inst.uncertainty else { unreachable!() };
        let vertices: Vec<SaTable> = models.iter().map(|m| policy_gradient(m, &p, &inst).unwrap()).collect();
        let g = gap_for_vertices(&p, &vertices).unwrap();
        prop_assert!(g.gap >= 0.0);
        prop_assert!((g.alpha.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(g.alpha.iter().all(|&a| a >= -1e-12));
        for v in &vertices {
            prop_assert!(g.gap <= regret_oracle(&p, v) + 1e-9);
        }
    }

    #[test]
    fn greedy_regret_matches_its_definition(seed in 0u64..10_000) {
        let mut rng = seeded(seed);
        let p = random_policy(&mut rng, 4, 3);
        let g = random_policy(&mut rng, 4, 3).into_table();
        prop_assert!((greedy_regret(&p, &g) - regret_oracle(&p, &g)).abs() <= 1e-12);
    }

    #[test]
    fn single_model_gap_is_the_regret_of_the_gradient(seed in 0u64..10_000) {
        let inst = zoo::random_instance(seed, &RandomSpec::new(3, 2, 1, RandomStructure::Finite)).unwrap();
        let p = random_policy(&mut seeded(seed + 2), 3, 2);
        let sub = subdifferential(&inst, &p, DEFAULT_ACTIVE_TOL).unwrap();
        let g = stationarity_gap(&inst, &p, DEFAULT_ACTIVE_TOL).unwrap();
        prop_assert!((g.gap - regret_oracle(&p, &sub.vertices[0])).abs() <= 1e-9);
    }
}

#[test]
fn gap_vanishes_at_the_trapping_policy() {
    let inst = zoo::build_counterexample(&Default::default()).unwrap();
    let g = stationarity_gap(&inst, &zoo::pi_tilde2(), DEFAULT_ACTIVE_TOL).unwrap();
    assert!(g.gap.abs() < 1e-9);
    assert_eq!(g.alpha.len(), 2);
}

#[test]
fn moreau_gradient_norm_equals_scaled_prox_distance() {
    for seed in 0..5 {
        let inst = zoo::random_instance(seed, &RandomSpec::new(2, 2, 2, RandomStructure::Finite)).unwrap();
        let p = random_policy(&mut seeded(seed + 10), 2, 2);
        let r = prox_point(&inst, &p, &ProxConfig::default()).unwrap();
        let dist = p.l2_distance(&r.prox_policy);
        assert!((r.moreau_grad_norm - dist / r.nu).abs() <= 1e-10);
        assert!(r.prox_policy.simplex_violation() < 1e-12);
    }
}
