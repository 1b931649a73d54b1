use proptest::prelude::*;
use rmdp_core::lp::{LinearProgram, LpError, Relation};

/// Minimum of `c x` over `{x >= 0, A x <= b}` in two variables by checking
/// every intersection of two constraint lines.
fn vertex_minimum(c: [f64; 2], rows: &[([f64; 2], f64)]) -> Option<f64> {
    let mut lines: Vec<([f64; 2], f64)> = rows.to_vec();
    lines.push(([-1.0, 0.0], 0.0));
    lines.push(([0.0, -1.0], 0.0));
    let feasible = |x: [f64; 2]| lines.iter().all(|(a, b)| a[0] * x[0] + a[1] * x[1] <= b + 1e-9);
    let mut best: Option<f64> = None;
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let ([a, b], e) = lines[i];
            let ([c2, d], f) = lines[j];
            let det = a * d - b * c2;
            if det.abs() < 1e-12 {
                continue;
            }
            let x = [(e * d - b * f) / det, (a * f - e * c2) / det];
            if feasible(x) {
                let v = c[0] * x[0] + c[1] * x[1];
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn simplex_matches_vertex_enumeration(
        c in proptest::array::uniform2(-3.0f64..3.0),
        rows in proptest::collection::vec((proptest::array::uniform2(-2.0f64..2.0), 0.1f64..4.0), 1..5),
    ) {
        // A box keeps the feasible region bounded; b > 0 keeps the origin feasible.
        let mut all = rows.clone();
        all.push(([1.0, 0.0], 5.0));
        all.push(([0.0, 1.0], 5.0));
        let mut lp = LinearProgram::minimize(c.to_vec());
        for (a, b) in &all {
            lp.add_constraint(a.to_vec(), Relation::Le, *b).unwrap();
        }
        let sol = lp.solve().unwrap();
        let expected = vertex_minimum(c, &all).unwrap();
        prop_assert!((sol.objective - expected).abs() <= 1e-7 * (1.0 + expected.abs()));
        for (a, b) in &all {
            prop_assert!(a[0] * sol.x[0] + a[1] * sol.x[1] <= b + 1e-8);
        }
    }
}

#[test]
fn equality_with_infeasible_bound() {
    let mut lp = LinearProgram::minimize(vec![1.0, 1.0]);
    lp.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0).unwrap();
    lp.add_constraint(vec![1.0, 0.0], Relation::Ge, 2.0).unwrap();
    assert_eq!(lp.solve().unwrap_err(), LpError::Infeasible);
}
