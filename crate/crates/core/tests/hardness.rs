mod common;

use proptest::prelude::*;
use rmdp_core::hardness::{
    assignment_policy, build_reduction, certify, dpll_sat, parse_dimacs, CnfError, CnfFormula, ReductionVariant,
    DEFAULT_DPLL_CAP,
};
use rmdp_core::robust_cost;

fn clause() -> impl Strategy<Value = [i32; 3]> {
    // Three distinct variables out of 1..=6 with random signs.
    (proptest::sample::subsequence((1..=6).collect::<Vec<i32>>(), 3), proptest::array::uniform3(any::<bool>()))
        .prop_map(|(vars, signs)| [0, 1, 2].map(|i| if signs[i] { vars[i] } else { -vars[i] }))
}

fn formula() -> impl Strategy<Value = CnfFormula> {
    proptest::collection::vec(clause(), 1..40).prop_map(|c| CnfFormula::new(6, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dpll_agrees_with_truth_table(f in formula()) {
        let verdict = dpll_sat(&f, DEFAULT_DPLL_CAP).unwrap();
        prop_assert_eq!(verdict.is_some(), common::brute_force_sat(f.num_vars(), f.clauses()));
        if let Some(assignment) = verdict {
            prop_assert!(f.evaluate(&assignment));
        }
    }

    #[test]
    fn dimacs_roundtrip(f in formula()) {
        prop_assert_eq!(parse_dimacs(&f.to_dimacs()).unwrap(), f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn satisfying_assignments_cost_nothing(f in proptest::collection::vec(clause(), 1..8).prop_map(|c| CnfFormula::new(6, c).unwrap())) {
        if let Some(assignment) = dpll_sat(&f, DEFAULT_DPLL_CAP).unwrap() {
            for variant in [ReductionVariant::FiniteP, ReductionVariant::SaRect] {
                let art = build_reduction(&f, variant, 0.9).unwrap();
                let p = assignment_policy(&art, &assignment).unwrap();
                prop_assert!(robust_cost(&art.instance, &p).unwrap().abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn unsatisfiable_cube_stays_above_threshold() {
    let mut clauses = Vec::new();
    for bits in 0..8 {
        let lit = |v: i32| if bits >> (v - 1) & 1 == 1 { v } else { -v };
        clauses.push([lit(1), lit(2), lit(3)]);
    }
    let f = CnfFormula::new(3, clauses).unwrap();
    for variant in [ReductionVariant::FiniteP, ReductionVariant::SaRect] {
        let cert = certify(&f, variant, 0.9, 200, 1).unwrap();
        assert!(!cert.satisfiable);
        assert!(cert.consistent);
        assert!(cert.min_deterministic >= cert.threshold - 1e-9);
        assert!(cert.min_random >= cert.threshold - 1e-9);
    }
}

#[test]
fn parser_reports_line_numbers() {
    let err = parse_dimacs("p cnf 2 1\n1 x 0\n").unwrap_err();
    assert!(matches!(err, CnfError::Syntax { line: 2, .. }));
    let err = parse_dimacs("p cnf 2 1\n1 3 2 0\n").unwrap_err();
    assert!(matches!(err, CnfError::VariableOutOfRange { line: 2, var: 3, .. }));
}
