mod common;

use common::{nested, pol, rows};
use proptest::prelude::*;
use rmdp_core::eval::{
    evaluate_fixed, kl_evaluate, kl_worst_case, robust_eval_r_rect, robust_eval_sa_rect, robust_evaluate, worst_case_set,
    DEFAULT_ACTIVE_TOL, DEFAULT_FLATTEN_CAP, DEFAULT_TOL,
};
use rmdp_core::rng::{random_policy, seeded};
use rmdp_core::zoo::{self, RandomSpec, RandomStructure};
use rmdp_core::{robust_cost, KlRegSet, Policy, RmdpInstance, UncertaintySet};

fn finite(seed: u64, n: usize, m: usize, k: usize) -> RmdpInstance {
    zoo::random_instance(seed, &RandomSpec::new(n, m, k, RandomStructure::Finite)).unwrap()
}

fn policy(seed: u64, n: usize, m: usize) -> Policy {
    random_policy(&mut seeded(seed), n, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fixed_evaluation_matches_reference_solver(seed in 0u64..10_000, n in 1usize..6, m in 1usize..4) {
        let inst = finite(seed, n, m, 1);
        let p = policy(seed + 1, n, m);
        let UncertaintySet::Finite(models) = &inst.uncertainty else { unreachable!() };
        let b = evaluate_fixed(&models[0], &p, &inst).unwrap();
        let v = common::values(&rows(&models[0].cost), &nested(&models[0].kernel), &pol(&p), inst.gamma);
        let d = common::state_occupancy(&nested(&models[0].kernel), &pol(&p), &inst.mu, inst.gamma);
        for s in 0..n {
            prop_assert!((b.values[s] - v[s]).abs() <= 1e-9);
            prop_assert!((b.state_occupancy[s] - d[s]).abs() <= 1e-12);
        }
        prop_assert!((b.total_cost - common::total(&inst.mu, &v)).abs() <= 1e-9);
        prop_assert!((b.state_occupancy.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn performance_difference_identity(seed in 0u64..10_000, n in 1usize..5, m in 1usize..4) {
        let inst = finite(seed, n, m, 1);
        let UncertaintySet::Finite(models) = &inst.uncertainty else { unreachable!() };
        let (p, q) = (policy(seed + 1, n, m), policy(seed + 2, n, m));
        let bp = evaluate_fixed(&models[0], &p, &inst).unwrap();
        let bq = evaluate_fixed(&models[0], &q, &inst).unwrap();
        let rhs: f64 = (0..n)
            .flat_map(|s| (0..m).map(move |a| (s, a)))
            .map(|(s, a)| bq.occupancy.get(s, a) * bp.advantage.get(s, a))
            .sum::<f64>()
            / (1.0 - inst.gamma);
        prop_assert!((bp.total_cost - bq.total_cost - rhs).abs() <= 1e-9);
    }

    #[test]
    fn robust_cost_is_the_largest_model_cost(seed in 0u64..10_000, k in 1usize..5) {
        let inst = finite(seed, 3, 2, k);
        let p = policy(seed + 7, 3, 2);
        let UncertaintySet::Finite(models) = &inst.uncertainty else { unreachable!() };
        let costs: Vec<f64> = models.iter().map(|md| evaluate_fixed(md, &p, &inst).unwrap().total_cost).collect();
        let j = robust_cost(&inst, &p).unwrap();
        let max = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((j - max).abs() <= 1e-12);
        let r = robust_evaluate(&inst, &p).unwrap();
        for &i in &r.active {
            prop_assert!(max - costs[i] <= DEFAULT_ACTIVE_TOL * (1.0 + max.abs()));
        }
    }

    #[test]
    fn lipschitz_in_policy(seed in 0u64..10_000, m in 2usize..4) {
        let inst = finite(seed, 3, m, 3);
        let (p, q) = (policy(seed + 3, 3, m), policy(seed + 4, 3, m));
        let lhs = (robust_cost(&inst, &p).unwrap() - robust_cost(&inst, &q).unwrap()).abs();
        let lip = (m as f64).sqrt() / (1.0 - inst.gamma).powi(2);
        prop_assert!(lhs <= lip * p.l2_distance(&q) + 1e-12);
    }

    #[test]
    fn sa_rect_matches_flattened_maximum(seed in 0u64..10_000) {
        let inst = zoo::random_instance(seed, &RandomSpec::new(2, 2, 2, RandomStructure::SaRect)).unwrap();
        let UncertaintySet::SaRectFinite(set) = &inst.uncertainty else { unreachable!() };
        let p = policy(seed + 5, 2, 2);
        let rect = robust_eval_sa_rect(set, &set.costs[0], &p, &inst, DEFAULT_TOL).unwrap();
        let radices: Vec<usize> = set.choices.iter().map(Vec::len).collect();
        let cost = rows(&set.costs[0]);
        let mut best = vec![f64::NEG_INFINITY; 2];
        for sel in common::product(&radices) {
            let v = common::values(&cost, &nested(&set.kernel_for(&sel)), &pol(&p), inst.gamma);
            for (b, x) in best.iter_mut().zip(v) {
                *b = b.max(x);
            }
        }
        for (a, b) in rect.values.iter().zip(&best) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let w = worst_case_set(&inst, &p, DEFAULT_ACTIVE_TOL, DEFAULT_FLATTEN_CAP).unwrap();
        prop_assert!((w.robust_cost - common::total(&inst.mu, &best)).abs() <= 1e-9);
    }

    #[test]
    fn r_rect_matches_flattened_maximum(seed in 0u64..10_000, factors in 1usize..4) {
        let inst = zoo::random_instance(seed, &RandomSpec::new(3, 2, 2, RandomStructure::RRect { factors })).unwrap();
        let UncertaintySet::RRect(set) = &inst.uncertainty else { unreachable!() };
        let p = policy(seed + 6, 3, 2);
        let rect = robust_eval_r_rect(set, &p, &inst, DEFAULT_TOL).unwrap();
        let radices: Vec<usize> = set.factor_choices.iter().map(Vec::len).collect();
        let best = common::product(&radices)
            .iter()
            .map(|sel| {
                let v = common::values(&rows(&set.cost), &nested(&set.kernel_for(sel)), &pol(&p), inst.gamma);
                common::total(&inst.mu, &v)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((common::total(&inst.mu, &rect.values) - best).abs() <= 1e-9);
    }

    #[test]
    fn kl_soft_value_is_log_sum_exp(seed in 0u64..10_000, n in 2usize..6, tau in 0.01f64..10.0) {
        let mut rng = seeded(seed);
        let nominal = rmdp_core::rng::dirichlet_ones(&mut rng, n);
        let v: Vec<f64> = (0..n).map(|_| rmdp_core::rng::uniform(&mut rng, -5.0, 5.0)).collect();
        let (p, soft) = kl_worst_case(&nominal, &v, tau).unwrap();
        let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = vmax + tau * nominal.iter().zip(&v).map(|(q, x)| q * ((x - vmax) / tau).exp()).sum::<f64>().ln();
        prop_assert!((soft - lse).abs() <= 1e-10 * (1.0 + lse.abs()));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        // The tilted kernel attains the regularized maximum.
        let kl: f64 = p.iter().zip(&nominal).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
        let attained: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() - tau * kl;
        prop_assert!((attained - soft).abs() <= 1e-9 * (1.0 + soft.abs()));
    }

    #[test]
    fn kl_robust_cost_decreases_in_tau(seed in 0u64..10_000) {
        let base = zoo::random_kl_instance(seed, 3, 2, 1.0, 0.9).unwrap();
        let p = policy(seed + 9, 3, 2);
        let UncertaintySet::KlReg(set) = &base.uncertainty else { unreachable!() };
        let with_tau = |tau: f64| {
            let inst = RmdpInstance::new(3, 2, base.mu.clone(), base.gamma, UncertaintySet::KlReg(KlRegSet { tau, ..set.clone() })).unwrap();
            robust_cost(&inst, &p).unwrap()
        };
        let nominal = {
            let md = rmdp_core::Model::new(set.cost.clone(), set.nominal.clone());
            evaluate_fixed(&md, &p, &base).unwrap().total_cost
        };
        let (a, b, c) = (with_tau(0.1), with_tau(1.0), with_tau(10.0));
        prop_assert!(a >= b - 1e-9 && b >= c - 1e-9 && c >= nominal - 1e-9);
    }
}

#[test]
fn kl_worst_case_beats_a_simplex_grid() {
    let nominal = [0.2, 0.5, 0.3];
    let v = [1.0, -0.5, 2.0];
    let tau = 0.7;
    let (_, soft) = kl_worst_case(&nominal, &v, tau).unwrap();
    let mut best = f64::NEG_INFINITY;
    let steps = 400;
    for i in 0..=steps {
        for j in 0..=steps - i {
            let p = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
            let kl: f64 = p.iter().zip(&nominal).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum();
            best = best.max(p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() - tau * kl);
        }
    }
    assert!(soft >= best - 1e-12);
    assert!(soft - best < 1e-3);
}

#[test]
fn kl_evaluation_is_a_fixed_point_of_the_soft_bellman_operator() {
    let inst = zoo::random_kl_instance(5, 4, 3, 0.5, 0.9).unwrap();
    let UncertaintySet::KlReg(set) = &inst.uncertainty else { unreachable!() };
    let p = policy(17, 4, 3);
    let eval = kl_evaluate(set, &p, &inst, DEFAULT_TOL).unwrap();
    for s in 0..4 {
        let mut rhs = 0.0;
        for a in 0..3 {
            let (_, soft) = kl_worst_case(set.nominal.row(s, a), &eval.values, set.tau).unwrap();
            rhs += p.prob(s, a) * (set.cost.get(s, a) + inst.gamma * soft);
        }
        assert!((rhs - eval.values[s]).abs() < 1e-9, "state {s}: {rhs} vs {}", eval.values[s]);
    }
}
