use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::hardness::cnf::{dpll_sat, CnfFormula, DEFAULT_DPLL_CAP};
use crate::rng::seeded;

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub formula: CnfFormula,
    pub satisfiable: bool,
}

fn random_clause<R: Rng>(rng: &mut R, num_vars: usize) -> [i32; 3] {
    let mut vars: Vec<i32> = (1..=num_vars as i32).collect();
    vars.shuffle(rng);
    let mut c = [0; 3];
    for (slot, &v) in c.iter_mut().zip(&vars) {
        *slot = if rng.gen::<bool>() { v } else { -v };
    }
    c
}

/// Seeded 3-SAT corpus with `num_sat` satisfiable and `num_unsat`
/// unsatisfiable formulas, each with at most `max_vars` variables (at least
/// 3) and `max_clauses` clauses (at least 8), labeled by DPLL.
///
/// Satisfiable formulas are uniform random 3-SAT. Unsatisfiable ones
/// alternate between dense random formulas that happen to be unsatisfiable
/// and formulas containing all eight sign patterns over three variables,
/// padded with random clauses and shuffled.
pub fn generate_corpus(seed: u64, num_sat: usize, num_unsat: usize, max_vars: usize, max_clauses: usize) -> Vec<CorpusEntry> {
    assert!(max_vars >= 3 && max_clauses >= 8, "corpus needs at least 3 variables and 8 clauses");
    let mut rng = seeded(seed);
    let mut sat = Vec::new();
    let mut unsat = Vec::new();
    let mut planted = false;
    while sat.len() < num_sat || unsat.len() < num_unsat {
        let want_unsat = unsat.len() < num_unsat && (sat.len() >= num_sat || rng.gen::<bool>());
        let n = rng.gen_range(3..=max_vars);
        let clauses: Vec<[i32; 3]> = if want_unsat && planted {
            let mut vars: Vec<i32> = (1..=n as i32).collect();
            vars.shuffle(&mut rng);
            let (a, b, c) = (vars[0], vars[1], vars[2]);
            let mut cs: Vec<[i32; 3]> = (0..8)
                .map(|bits| {
                    let s = |i: i32, v: i32| if bits >> i & 1 == 1 { -v } else { v };
                    [s(0, a), s(1, b), s(2, c)]
                })
                .collect();
            let m = rng.gen_range(8..=max_clauses);
            while cs.len() < m {
                cs.push(random_clause(&mut rng, n));
            }
            cs.shuffle(&mut rng);
            cs
        } else {
            let m = if want_unsat {
                max_clauses
            } else {
                rng.gen_range(1..=max_clauses)
            };
            let n = if want_unsat { n.min(4) } else { n };
            (0..m).map(|_| random_clause(&mut rng, n)).collect()
        };
        if want_unsat {
            planted = !planted;
        }
        let num_vars = clauses
            .iter()
            .flat_map(|c| c.iter().map(|l| l.unsigned_abs() as usize))
            .max()
            .unwrap_or(1)
            .max(n.min(3));
        let formula = CnfFormula::new(num_vars, clauses).expect("literals are in range");
        let is_sat = dpll_sat(&formula, DEFAULT_DPLL_CAP).expect("under cap").is_some();
        let entry = CorpusEntry {
            formula,
            satisfiable: is_sat,
        };
        if is_sat && sat.len() < num_sat {
            sat.push(entry);
        } else if !is_sat && unsat.len() < num_unsat {
            unsat.push(entry);
        }
    }
    sat.into_iter().chain(unsat).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_deterministic_and_balanced() {
        let a = generate_corpus(5, 4, 4, 8, 15);
        assert_eq!(a, generate_corpus(5, 4, 4, 8, 15));
        assert_eq!(a.iter().filter(|e| e.satisfiable).count(), 4);
        assert_eq!(a.iter().filter(|e| !e.satisfiable).count(), 4);
        for e in &a {
            assert!(e.formula.num_vars() <= 8 && e.formula.num_clauses() <= 15);
            assert!(e.formula.first_complementary_clause().is_none());
        }
    }
}
