//! Concrete instances: the trapping counterexample, the two independence
//! examples, the s-rectangular example and seeded random instances.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{KlRegSet, Model, Policy, RRectSet, RmdpInstance, SaRectSet, UncertaintySet};
use crate::rng::{dirichlet_ones, seeded, uniform};
use crate::table::{Kernel, SaTable};

/// Discount used by the fixed examples unless stated otherwise.
pub const DEFAULT_GAMMA: f64 = 0.9;

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Counterexample state and action indices.
pub mod cx {
    pub const S1: usize = 0;
    pub const S2: usize = 1;
    pub const S_PLUS: usize = 2;
    pub const A1: usize = 0;
    pub const A2: usize = 1;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleSpec {
    pub gamma: f64,
    /// Over `(s1, s2, s+)`.
    pub mu: [f64; 3],
}

impl Default for CounterexampleSpec {
    fn default() -> Self {
        CounterexampleSpec {
            gamma: DEFAULT_GAMMA,
            mu: [0.45, 0.45, 0.1],
        }
    }
}

/// Three states `s1, s2, s+`, two actions, unit cost at `s+` and two
/// deterministic kernels that mirror each other under `s1 <-> s2`.
pub fn build_counterexample(spec: &CounterexampleSpec) -> Result<RmdpInstance> {
    use cx::*;
    if !(spec.gamma > 0.5 && spec.gamma < 1.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("the counterexample needs gamma in (0.5, 1), got {}", spec.gamma),
        });
    }
    let cost = SaTable::from_fn(3, 2, |s, _| if s == S_PLUS { 1.0 } else { 0.0 });
    let p1 = |s: usize, a: usize| match (s, a) {
        (S1, A1) => S1,
        (S1, _) => S_PLUS,
        (S2, A1) => S1,
        (S2, _) => S2,
        (_, A1) => S1,
        _ => S2,
    };
    let k1 = Kernel::deterministic(3, 2, p1);
    let k2 = k1.permute_states(&[S2, S1, S_PLUS]);
    RmdpInstance::new(
        3,
        2,
        spec.mu.to_vec(),
        spec.gamma,
        UncertaintySet::Finite(vec![Model::new(cost.clone(), k1), Model::new(cost, k2)]),
    )?
    .with_labels(labels(&["s1", "s2", "s+"]), labels(&["a1", "a2"]))
}

/// Always `a1`.
pub fn pi_tilde1() -> Policy {
    Policy::deterministic(2, &[cx::A1; 3])
}

/// Always `a2`.
pub fn pi_tilde2() -> Policy {
    Policy::deterministic(2, &[cx::A2; 3])
}

/// `pi(a1|s1) = x`, `pi(a1|s2) = y`, and `a2` at `s+`.
pub fn counterexample_policy(x: f64, y: f64) -> Result<Policy> {
    Policy::from_rows(&[vec![x, 1.0 - x], vec![y, 1.0 - y], vec![0.0, 1.0]])
}

/// Three states, one action, zero cost; two kernels sending `s1` to `s2`
/// or to `s3`; the process starts in `s1`.
pub fn build_independence_example1() -> Result<RmdpInstance> {
    let cost = SaTable::zeros(3, 1);
    let k1 = Kernel::deterministic(3, 1, |s, _| if s == 0 { 1 } else { s });
    let k2 = Kernel::deterministic(3, 1, |s, _| if s == 0 { 2 } else { s });
    RmdpInstance::new(
        3,
        1,
        vec![1.0, 0.0, 0.0],
        DEFAULT_GAMMA,
        UncertaintySet::Finite(vec![Model::new(cost.clone(), k1), Model::new(cost, k2)]),
    )?
    .with_labels(labels(&["s1", "s2", "s3"]), labels(&["a1"]))
}

/// Two states, two actions, one kernel (`s1 -> s2`, `s2` absorbing) and two
/// mirrored cost functions at `s1`.
pub fn build_independence_example2() -> Result<RmdpInstance> {
    let kernel = Kernel::deterministic(2, 2, |_, _| 1);
    let c1 = SaTable::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).expect("rectangular");
    let c2 = SaTable::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).expect("rectangular");
    RmdpInstance::new(
        2,
        2,
        vec![1.0, 0.0],
        DEFAULT_GAMMA,
        UncertaintySet::Finite(vec![Model::new(c1, kernel.clone()), Model::new(c2, kernel)]),
    )?
    .with_labels(labels(&["s1", "s2"]), labels(&["a1", "a2"]))
}

/// Two states `s0` (initial) and `s1` (absorbing, unit cost), with kernels
/// `P1: a1 -> s0, a2 -> s1` and `P2: a1 -> s1, a2 -> s0` at `s0`.
pub fn build_s_rect_two_state(gamma: f64) -> Result<RmdpInstance> {
    let cost = SaTable::from_fn(2, 2, |s, _| if s == 1 { 1.0 } else { 0.0 });
    let k1 = Kernel::deterministic(2, 2, |s, a| if s == 1 { 1 } else { a });
    let k2 = Kernel::deterministic(2, 2, |s, a| if s == 1 { 1 } else { 1 - a });
    RmdpInstance::new(
        2,
        2,
        vec![1.0, 0.0],
        gamma,
        UncertaintySet::Finite(vec![Model::new(cost.clone(), k1), Model::new(cost, k2)]),
    )?
    .with_labels(labels(&["s0", "s1"]), labels(&["a1", "a2"]))
}

/// `pi(a1|s0) = p`; `s1` plays `a1`.
pub fn s_rect_two_state_policy(p: f64) -> Result<Policy> {
    Policy::from_rows(&[vec![p, 1.0 - p], vec![1.0, 0.0]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomStructure {
    /// `num_models` independent (cost, kernel) pairs.
    Finite,
    /// One cost table, `num_models` candidate rows per state-action pair.
    SaRect,
    /// One cost table, `factors` factors with `num_models` candidates each.
    RRect { factors: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub num_models: usize,
    pub structure: RandomStructure,
    pub gamma: f64,
}

impl RandomSpec {
    pub fn new(num_states: usize, num_actions: usize, num_models: usize, structure: RandomStructure) -> Self {
        RandomSpec {
            num_states,
            num_actions,
            num_models,
            structure,
            gamma: DEFAULT_GAMMA,
        }
    }
}

/// Seeded instance with costs uniform in `[0, 1]`, Dirichlet(1, ..., 1)
/// kernel rows and uniform `mu`.
pub fn random_instance(seed: u64, spec: &RandomSpec) -> Result<RmdpInstance> {
    let (n, m, k) = (spec.num_states, spec.num_actions, spec.num_models);
    if n == 0 || m == 0 || k == 0 {
        return Err(Error::InvalidParameter {
            name: "spec",
            reason: "states, actions and models must be positive".into(),
        });
    }
    let mut rng = seeded(seed);
    let cost = |rng: &mut _| {
        let mut c = SaTable::zeros(n, m);
        for x in c.as_mut_slice() {
            *x = uniform(rng, 0.0, 1.0);
        }
        c
    };
    let uncertainty = match spec.structure {
        RandomStructure::Finite => {
            let mut models = Vec::with_capacity(k);
            for _ in 0..k {
                let c = cost(&mut rng);
                let mut kernel = Kernel::zeros(n, m);
                for s in 0..n {
                    for a in 0..m {
                        kernel.row_mut(s, a).copy_from_slice(&dirichlet_ones(&mut rng, n));
                    }
                }
                models.push(Model::new(c, kernel));
            }
            UncertaintySet::Finite(models)
        }
        RandomStructure::SaRect => {
            let c = cost(&mut rng);
            let choices = (0..n * m)
                .map(|_| (0..k).map(|_| dirichlet_ones(&mut rng, n)).collect())
                .collect();
            UncertaintySet::SaRectFinite(SaRectSet {
                costs: vec![c],
                choices,
                num_actions: m,
            })
        }
        RandomStructure::RRect { factors } => {
            if factors == 0 {
                return Err(Error::InvalidParameter {
                    name: "factors",
                    reason: "must be positive".into(),
                });
            }
            let c = cost(&mut rng);
            let phi = (0..n * m).map(|_| dirichlet_ones(&mut rng, factors)).collect();
            let factor_choices = (0..factors)
                .map(|_| (0..k).map(|_| dirichlet_ones(&mut rng, n)).collect())
                .collect();
            UncertaintySet::RRect(RRectSet {
                cost: c,
                phi,
                factor_choices,
            })
        }
    };
    RmdpInstance::new(n, m, vec![1.0 / n as f64; n], spec.gamma, uncertainty)
}

/// Seeded KL-regularized instance around a Dirichlet nominal kernel.
pub fn random_kl_instance(seed: u64, num_states: usize, num_actions: usize, tau: f64, gamma: f64) -> Result<RmdpInstance> {
    let mut rng = seeded(seed);
    let mut cost = SaTable::zeros(num_states, num_actions);
    for x in cost.as_mut_slice() {
        *x = uniform(&mut rng, 0.0, 1.0);
    }
    let mut nominal = Kernel::zeros(num_states, num_actions);
    for s in 0..num_states {
        for a in 0..num_actions {
            nominal.row_mut(s, a).copy_from_slice(&dirichlet_ones(&mut rng, num_states));
        }
    }
    RmdpInstance::new(
        num_states,
        num_actions,
        vec![1.0 / num_states as f64; num_states],
        gamma,
        UncertaintySet::KlReg(KlRegSet { cost, nominal, tau }),
    )
}

/// Seeded s-rectangular instance: each state has `choices` candidate blocks
/// of rows (one row per action), and the finite set is their product over
/// states with a shared cost.
pub fn random_s_rect_instance(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    choices: usize,
    gamma: f64,
) -> Result<RmdpInstance> {
    let mut rng = seeded(seed);
    let mut cost = SaTable::zeros(num_states, num_actions);
    for x in cost.as_mut_slice() {
        *x = uniform(&mut rng, 0.0, 1.0);
    }
    let blocks: Vec<Vec<Vec<Vec<f64>>>> = (0..num_states)
        .map(|_| {
            (0..choices)
                .map(|_| (0..num_actions).map(|_| dirichlet_ones(&mut rng, num_states)).collect())
                .collect()
        })
        .collect();
    let models = crate::model::MixedRadix::new(vec![choices; num_states])
        .map(|sel| {
            let mut kernel = Kernel::zeros(num_states, num_actions);
            for s in 0..num_states {
                for a in 0..num_actions {
                    kernel.row_mut(s, a).copy_from_slice(&blocks[s][sel[s]][a]);
                }
            }
            Model::new(cost.clone(), kernel)
        })
        .collect();
    RmdpInstance::new(
        num_states,
        num_actions,
        vec![1.0 / num_states as f64; num_states],
        gamma,
        UncertaintySet::Finite(models),
    )
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &["counterexample", "independence-1", "independence-2", "s-rect-two-state"];

/// Looks up a named fixed instance.
pub fn builtin(name: &str) -> Result<RmdpInstance> {
    match name {
        "counterexample" => build_counterexample(&CounterexampleSpec::default()),
        "independence-1" => build_independence_example1(),
        "independence-2" => build_independence_example2(),
        "s-rect-two-state" => build_s_rect_two_state(DEFAULT_GAMMA),
        other => Err(Error::Unsupported(format!(
            "unknown instance `{other}`; expected one of {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::robust_cost;

    #[test]
    fn counterexample_kernels_are_mirrors() {
        let inst = build_counterexample(&CounterexampleSpec::default()).unwrap();
        let UncertaintySet::Finite(ms) = &inst.uncertainty else { unreachable!() };
        let swap = [1, 0, 2];
        assert_eq!(ms[0].kernel.permute_states(&swap), ms[1].kernel);
        assert_eq!(ms[1].kernel.row(cx::S1, cx::A2), &[1.0, 0.0, 0.0]);
        assert_eq!(ms[1].kernel.row(cx::S2, cx::A2), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn counterexample_rejects_small_gamma() {
        let spec = CounterexampleSpec {
            gamma: 0.4,
            ..CounterexampleSpec::default()
        };
        assert!(build_counterexample(&spec).is_err());
    }

    #[test]
    fn random_instances_are_reproducible() {
        for structure in [RandomStructure::Finite, RandomStructure::SaRect, RandomStructure::RRect { factors: 2 }] {
            let spec = RandomSpec::new(3, 2, 2, structure);
            assert_eq!(random_instance(11, &spec).unwrap(), random_instance(11, &spec).unwrap());
            assert_ne!(random_instance(11, &spec).unwrap(), random_instance(12, &spec).unwrap());
        }
    }

    #[test]
    fn builtin_lookup() {
        for name in BUILTIN_NAMES {
            builtin(name).unwrap();
        }
        assert!(builtin("nope").is_err());
    }

    #[test]
    fn independence_example1_zero_cost() {
        let inst = build_independence_example1().unwrap();
        assert_eq!(robust_cost(&inst, &Policy::uniform(3, 1)).unwrap(), 0.0);
    }
}
