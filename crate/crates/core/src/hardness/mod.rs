//! 3-SAT formulas, a DPLL oracle and the two reductions from 3-SAT to
//! robust MDPs.

mod cnf;
mod corpus;
mod reduction;

pub use cnf::{dpll_sat, parse_dimacs, CnfError, CnfFormula, DEFAULT_DPLL_CAP};
pub use corpus::{generate_corpus, CorpusEntry};
pub use reduction::{
    assignment_policy, build_reduction, build_reduction_finite_p, build_reduction_sa_rect, certify,
    gap_threshold, greedy_clause_completion, rcmdp_feasibility_instance, Certificate, ReductionArtifact,
    ReductionVariant, StateIndex, A_F, A_T,
};
