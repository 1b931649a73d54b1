use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::{evaluate_fixed, robust_cost};
use crate::hardness::cnf::{dpll_sat, CnfError, CnfFormula, DEFAULT_DPLL_CAP};
use crate::model::{Model, Policy, RmdpInstance, SaRectSet, UncertaintySet};
use crate::rng::{random_policy, seeded};
use crate::table::{Kernel, SaTable};

/// Action read as "assign true" at variable states.
pub const A_T: usize = 0;
/// Action read as "assign false" at variable states (`a2` and `a3` both mean false).
pub const A_F: usize = 1;
const NUM_ACTIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionVariant {
    /// Finite transition set, single cost.
    FiniteP,
    /// sa-rectangular transition set, finite cost set.
    SaRect,
}

impl ReductionVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ReductionVariant::FiniteP => "finite-p",
            ReductionVariant::SaRect => "sa-rect",
        }
    }
}

/// `0.5 gamma^3 / (1 - gamma)` for the finite-P variant, `0.5 gamma^2 / (1 - gamma)` for sa-rect.
pub fn gap_threshold(variant: ReductionVariant, gamma: f64) -> f64 {
    let power = match variant {
        ReductionVariant::FiniteP => 3.0,
        ReductionVariant::SaRect => 2.0,
    };
    0.5 * libm::pow(gamma, power) / (1.0 - gamma)
}

/// Layout of the semantic states: `s_ini`, clause states, variable states,
/// then (finite-P only) the absorbing `s_0` and `s_+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateIndex {
    pub num_clauses: usize,
    pub num_vars: usize,
    pub has_absorbing: bool,
}

impl StateIndex {
    pub fn ini(&self) -> usize {
        0
    }

    /// State of clause `m` (0-based).
    pub fn clause(&self, m: usize) -> usize {
        1 + m
    }

    /// State of variable `n` (0-based, i.e. `x_{n+1}`).
    pub fn var(&self, n: usize) -> usize {
        1 + self.num_clauses + n
    }

    pub fn zero(&self) -> Option<usize> {
        self.has_absorbing.then(|| 1 + self.num_clauses + self.num_vars)
    }

    pub fn plus_one(&self) -> Option<usize> {
        self.has_absorbing.then(|| 2 + self.num_clauses + self.num_vars)
    }

    pub fn num_states(&self) -> usize {
        1 + self.num_clauses + self.num_vars + if self.has_absorbing { 2 } else { 0 }
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = vec![String::from("s_ini")];
        out.extend((1..=self.num_clauses).map(|m| format!("s_C{m}")));
        out.extend((1..=self.num_vars).map(|n| format!("s_x{n}")));
        if self.has_absorbing {
            out.push("s_0".into());
            out.push("s_+1".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionArtifact {
    pub formula: CnfFormula,
    pub instance: RmdpInstance,
    pub state_index: StateIndex,
    pub variant: ReductionVariant,
    pub gap_threshold: f64,
    /// The per-clause models `(c_m, P_m)`, clause `m` at position `m`. For
    /// the sa-rect variant this is the equivalent finite set.
    pub clause_models: Vec<Model>,
}

fn action_labels() -> Vec<String> {
    vec!["a1".into(), "a2".into(), "a3".into()]
}

fn check_formula(formula: &CnfFormula, gamma: f64) -> Result<()> {
    if let Some(clause) = formula.first_complementary_clause() {
        return Err(CnfError::Complementary { clause: clause + 1 }.into());
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidDiscount(gamma));
    }
    Ok(())
}

/// Sign of variable `n` (0-based) in `clause`, or `None` if absent.
fn sign_in(clause: &[i32; 3], n: usize) -> Option<bool> {
    clause
        .iter()
        .find(|l| l.unsigned_abs() as usize == n + 1)
        .map(|&l| l > 0)
}

/// Finite transition set with a single cost: one deterministic kernel per clause.
pub fn build_reduction_finite_p(formula: &CnfFormula, gamma: f64) -> Result<ReductionArtifact> {
    check_formula(formula, gamma)?;
    let idx = StateIndex {
        num_clauses: formula.num_clauses(),
        num_vars: formula.num_vars(),
        has_absorbing: true,
    };
    let n_states = idx.num_states();
    let (zero, plus) = (idx.zero().unwrap(), idx.plus_one().unwrap());
    let cost = SaTable::from_fn(n_states, NUM_ACTIONS, |s, _| if s == plus { 1.0 } else { 0.0 });
    let models: Vec<Model> = formula
        .clauses()
        .iter()
        .enumerate()
        .map(|(m, clause)| {
            let kernel = Kernel::deterministic(n_states, NUM_ACTIONS, |s, a| {
                if s == idx.ini() {
                    idx.clause(m)
                } else if s >= idx.clause(0) && s < idx.var(0) {
                    let lits = &formula.clauses()[s - idx.clause(0)];
                    idx.var(lits[a].unsigned_abs() as usize - 1)
                } else if s >= idx.var(0) && s < zero {
                    // Oriented by the literal's sign in this clause; positive if absent.
                    let positive = sign_in(clause, s - idx.var(0)).unwrap_or(true);
                    let says_true = a == A_T;
                    if says_true == positive {
                        zero
                    } else {
                        plus
                    }
                } else {
                    s
                }
            });
            Model::new(cost.clone(), kernel)
        })
        .collect();
    if models.is_empty() {
        return Err(Error::EmptyUncertaintySet);
    }
    let mut mu = vec![0.0; n_states];
    mu[idx.ini()] = 1.0;
    let instance = RmdpInstance::new(
        n_states,
        NUM_ACTIONS,
        mu,
        gamma,
        UncertaintySet::Finite(models.clone()),
    )?
    .with_labels(idx.labels(), action_labels())?;
    Ok(ReductionArtifact {
        formula: formula.clone(),
        instance,
        state_index: idx,
        variant: ReductionVariant::FiniteP,
        gap_threshold: gap_threshold(ReductionVariant::FiniteP, gamma),
        clause_models: models,
    })
}

/// sa-rectangular transitions (uncertainty only at `s_ini`) with one cost
/// function per clause.
pub fn build_reduction_sa_rect(formula: &CnfFormula, gamma: f64) -> Result<ReductionArtifact> {
    check_formula(formula, gamma)?;
    let big_m = formula.num_clauses();
    if big_m == 0 {
        return Err(Error::EmptyUncertaintySet);
    }
    let idx = StateIndex {
        num_clauses: big_m,
        num_vars: formula.num_vars(),
        has_absorbing: false,
    };
    let n_states = idx.num_states();
    let unit = |t: usize| {
        let mut row = vec![0.0; n_states];
        row[t] = 1.0;
        row
    };
    let next = |s: usize, a: usize| -> usize {
        if s >= idx.clause(0) && s < idx.var(0) {
            let lits = &formula.clauses()[s - idx.clause(0)];
            idx.var(lits[a].unsigned_abs() as usize - 1)
        } else {
            s
        }
    };
    let mut choices = Vec::with_capacity(n_states * NUM_ACTIONS);
    for s in 0..n_states {
        for a in 0..NUM_ACTIONS {
            if s == idx.ini() {
                choices.push((0..big_m).map(|m| unit(idx.clause(m))).collect());
            } else {
                choices.push(vec![unit(next(s, a))]);
            }
        }
    }
    let penalty = -1.0 / (1.0 - gamma);
    let costs: Vec<SaTable> = formula
        .clauses()
        .iter()
        .enumerate()
        .map(|(m, clause)| {
            SaTable::from_fn(n_states, NUM_ACTIONS, |s, a| {
                if s >= idx.clause(0) && s < idx.var(0) {
                    if s == idx.clause(m) {
                        0.0
                    } else {
                        penalty
                    }
                } else if s >= idx.var(0) {
                    match sign_in(clause, s - idx.var(0)) {
                        Some(positive) => {
                            if (a == A_T) == positive {
                                0.0
                            } else {
                                1.0
                            }
                        }
                        None => 0.0,
                    }
                } else {
                    0.0
                }
            })
        })
        .collect();
    let clause_models = costs
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let kernel = Kernel::deterministic(n_states, NUM_ACTIONS, |s, a| {
                if s == idx.ini() {
                    idx.clause(m)
                } else {
                    next(s, a)
                }
            });
            Model::new(c.clone(), kernel)
        })
        .collect();
    let mut mu = vec![0.0; n_states];
    mu[idx.ini()] = 1.0;
    let instance = RmdpInstance::new(
        n_states,
        NUM_ACTIONS,
        mu,
        gamma,
        UncertaintySet::SaRectFinite(SaRectSet {
            costs,
            choices,
            num_actions: NUM_ACTIONS,
        }),
    )?
    .with_labels(idx.labels(), action_labels())?;
    Ok(ReductionArtifact {
        formula: formula.clone(),
        instance,
        state_index: idx,
        variant: ReductionVariant::SaRect,
        gap_threshold: gap_threshold(ReductionVariant::SaRect, gamma),
        clause_models,
    })
}

pub fn build_reduction(formula: &CnfFormula, variant: ReductionVariant, gamma: f64) -> Result<ReductionArtifact> {
    match variant {
        ReductionVariant::FiniteP => build_reduction_finite_p(formula, gamma),
        ReductionVariant::SaRect => build_reduction_sa_rect(formula, gamma),
    }
}

/// Replaces each clause-state row of `policy` by the action whose successor
/// has the smallest value under that clause's model (ties to the lowest
/// index). Variable-state values never depend on clause-state rows, so one
/// evaluation per clause suffices.
pub fn greedy_clause_completion(artifact: &ReductionArtifact, policy: &Policy) -> Result<Policy> {
    let inst = &artifact.instance;
    let idx = &artifact.state_index;
    let mut table = policy.table().clone();
    for (m, model) in artifact.clause_models.iter().enumerate() {
        let bundle = evaluate_fixed(model, policy, inst)?;
        let s = idx.clause(m);
        let mut best = 0;
        for a in 1..NUM_ACTIONS {
            if bundle.q.get(s, a) < bundle.q.get(s, best) {
                best = a;
            }
        }
        let row = table.row_mut(s);
        row.iter_mut().for_each(|x| *x = 0.0);
        row[best] = 1.0;
    }
    Policy::new(table)
}

/// `pi_beta`: `a_T` at variables set true, `a_F` otherwise, greedy clause
/// actions, `a1` elsewhere.
pub fn assignment_policy(artifact: &ReductionArtifact, assignment: &[bool]) -> Result<Policy> {
    let idx = &artifact.state_index;
    if assignment.len() != idx.num_vars {
        return Err(Error::Dimension {
            what: "assignment".into(),
            expected: idx.num_vars,
            found: assignment.len(),
        });
    }
    let mut actions = vec![0usize; idx.num_states()];
    for (n, &v) in assignment.iter().enumerate() {
        actions[idx.var(n)] = if v { A_T } else { A_F };
    }
    let base = Policy::deterministic(NUM_ACTIONS, &actions);
    greedy_clause_completion(artifact, &base)
}

/// The constraint block of the robust constrained MDP and its budget
/// `0.5 gamma^2 / (1 - gamma)`.
pub fn rcmdp_feasibility_instance(formula: &CnfFormula, gamma: f64) -> Result<(ReductionArtifact, f64)> {
    let artifact = build_reduction_sa_rect(formula, gamma)?;
    let budget = artifact.gap_threshold;
    Ok((artifact, budget))
}

/// Outcome of comparing the reduction with DPLL on one formula.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub variant: ReductionVariant,
    pub satisfiable: bool,
    pub threshold: f64,
    /// Robust cost of `pi_beta` for the DPLL assignment, when satisfiable.
    pub pi_beta_cost: Option<f64>,
    /// Minimum over the `2^N` deterministic variable-state policies (greedy clause rows).
    pub min_deterministic: f64,
    /// Minimum over the sampled random policies (`inf` if none were sampled).
    pub min_random: f64,
    pub random_policies: usize,
    pub rmdp_min_found: f64,
    /// Satisfiability decided by `min_deterministic < threshold`.
    pub rmdp_decision: bool,
    pub consistent: bool,
}

/// Largest variable count for which all `2^N` assignments are enumerated.
const ENUMERATION_CAP: usize = 16;

pub fn certify(
    formula: &CnfFormula,
    variant: ReductionVariant,
    gamma: f64,
    random_policies: usize,
    seed: u64,
) -> Result<Certificate> {
    let artifact = build_reduction(formula, variant, gamma)?;
    let inst = &artifact.instance;
    let n = formula.num_vars();
    if n > ENUMERATION_CAP {
        return Err(Error::InvalidParameter {
            name: "formula",
            reason: format!("{n} variables exceeds the enumeration cap of {ENUMERATION_CAP}"),
        });
    }
    let assignment = dpll_sat(formula, DEFAULT_DPLL_CAP)?;
    let pi_beta_cost = match &assignment {
        Some(beta) => Some(robust_cost(inst, &assignment_policy(&artifact, beta)?)?),
        None => None,
    };
    let mut min_deterministic = f64::INFINITY;
    let mut beta = vec![false; n];
    for bits in 0u64..(1u64 << n) {
        for (i, b) in beta.iter_mut().enumerate() {
            *b = bits >> i & 1 == 1;
        }
        let j = robust_cost(inst, &assignment_policy(&artifact, &beta)?)?;
        min_deterministic = min_deterministic.min(j);
    }
    let mut rng = seeded(seed);
    let mut min_random = f64::INFINITY;
    for _ in 0..random_policies {
        let pol = random_policy(&mut rng, inst.num_states, inst.num_actions);
        min_random = min_random.min(robust_cost(inst, &pol)?);
    }
    let rmdp_min_found = min_deterministic.min(min_random).min(pi_beta_cost.unwrap_or(f64::INFINITY));
    let threshold = artifact.gap_threshold;
    let satisfiable = assignment.is_some();
    let rmdp_decision = min_deterministic < threshold;
    let consistent = rmdp_decision == satisfiable
        && if satisfiable {
            pi_beta_cost.is_some_and(|j| j <= 1e-9)
        } else {
            rmdp_min_found >= threshold - 1e-9
        };
    Ok(Certificate {
        variant,
        satisfiable,
        threshold,
        pi_beta_cost,
        min_deterministic,
        min_random,
        random_policies,
        rmdp_min_found,
        rmdp_decision,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds() {
        assert!((gap_threshold(ReductionVariant::FiniteP, 0.9) - 3.645).abs() < 1e-12);
        assert!((gap_threshold(ReductionVariant::SaRect, 0.9) - 4.05).abs() < 1e-12);
    }

    #[test]
    fn state_layout_is_a_bijection() {
        let idx = StateIndex {
            num_clauses: 3,
            num_vars: 2,
            has_absorbing: true,
        };
        let mut seen = vec![idx.ini()];
        seen.extend((0..3).map(|m| idx.clause(m)));
        seen.extend((0..2).map(|n| idx.var(n)));
        seen.push(idx.zero().unwrap());
        seen.push(idx.plus_one().unwrap());
        seen.sort();
        assert_eq!(seen, (0..idx.num_states()).collect::<Vec<_>>());
        assert_eq!(idx.labels().len(), idx.num_states());
    }

    #[test]
    fn complementary_clause_is_rejected() {
        let f = CnfFormula::new(2, vec![[1, -1, 2]]).unwrap();
        assert!(build_reduction_finite_p(&f, 0.9).is_err());
        assert!(build_reduction_sa_rect(&f, 0.9).is_err());
    }

    #[test]
    fn all_false_on_positive_clause_hits_the_cost_state() {
        let f = CnfFormula::new(3, vec![[1, 2, 3]]).unwrap();
        let art = build_reduction_finite_p(&f, 0.9).unwrap();
        let pol = assignment_policy(&art, &[false, false, false]).unwrap();
        let plus = art.state_index.plus_one().unwrap();
        let k = &art.clause_models[0].kernel;
        for a in 0..3 {
            let var_state = k.row(art.state_index.clause(0), a).iter().position(|&p| p == 1.0).unwrap();
            let next = k.row(var_state, A_F).iter().position(|&p| p == 1.0).unwrap();
            assert_eq!(next, plus);
        }
        let j = robust_cost(&art.instance, &pol).unwrap();
        assert!((j - 0.9f64.powi(3) / 0.1).abs() < 1e-12);
    }
}
