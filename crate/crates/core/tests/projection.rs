use proptest::collection::vec;
use proptest::prelude::*;
use rmdp_core::psd::{project_policy, project_simplex};
use rmdp_core::SaTable;

/// Projection by bisection on the threshold `t` in `x_i = max(v_i - t, 0)`.
fn reference_projection(v: &[f64]) -> Vec<f64> {
    let mass = |t: f64| v.iter().map(|x| (x - t).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (v.iter().copied().fold(f64::INFINITY, f64::min) - 1.0, v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    v.iter().map(|x| (x - 0.5 * (lo + hi)).max(0.0)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

proptest! {
    #[test]
    fn lands_in_the_simplex(v in vec(-10.0f64..10.0, 1..12)) {
        let p = project_simplex(&v).unwrap();
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn matches_bisection(v in vec(-10.0f64..10.0, 1..12)) {
        let p = project_simplex(&v).unwrap();
        prop_assert!(dist(&p, &reference_projection(&v)) <= 1e-9);
    }

    #[test]
    fn is_idempotent(v in vec(-10.0f64..10.0, 1..12)) {
        let p = project_simplex(&v).unwrap();
        let q = project_simplex(&p).unwrap();
        prop_assert!(dist(&p, &q) <= 1e-14);
    }

    #[test]
    fn is_nonexpansive(pair in (1usize..10).prop_flat_map(|n| (vec(-5.0f64..5.0, n), vec(-5.0f64..5.0, n)))) {
        let (u, v) = pair;
        let (pu, pv) = (project_simplex(&u).unwrap(), project_simplex(&v).unwrap());
        prop_assert!(dist(&pu, &pv) <= dist(&u, &v) + 1e-12);
    }

    #[test]
    fn policy_projection_is_rowwise(v in vec(-3.0f64..3.0, 6)) {
        let t = SaTable::from_flat(2, 3, v.clone()).unwrap();
        let p = project_policy(&t).unwrap();
        for s in 0..2 {
            let row = project_simplex(&v[3 * s..3 * s + 3]).unwrap();
            prop_assert_eq!(p.row(s), row.as_slice());
        }
    }
}

#[test]
fn rejects_empty_and_non_finite_input() {
    assert!(project_simplex(&[]).is_err());
    assert!(project_simplex(&[f64::NAN, 1.0]).is_err());
}
