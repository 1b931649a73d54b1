//! Exact policy evaluation for fixed models and for every supported
//! uncertainty-set structure.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Lu;
use crate::model::{KlRegSet, Model, Policy, RRectSet, RmdpInstance, SaRectSet, UncertaintySet};
use crate::table::{dot, max_abs_diff, Kernel, SaTable};

/// Fixed-point tolerance used by the structured evaluators.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Relative tolerance for deciding which models attain the maximum.
pub const DEFAULT_ACTIVE_TOL: f64 = 1e-9;
/// Largest model list produced when a product set is enumerated.
pub const DEFAULT_FLATTEN_CAP: usize = 4096;

const POLICY_ITERATION_LIMIT: usize = 10_000;
const VALUE_ITERATION_LIMIT: usize = 1_000_000;

/// Everything the Bellman equations determine for one `(c, P, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBundle {
    pub values: Vec<f64>,
    pub q: SaTable,
    /// `V(s) - Q(s, a)`.
    pub advantage: SaTable,
    /// Normalized discounted state-action occupancy; sums to one.
    pub occupancy: SaTable,
    pub state_occupancy: Vec<f64>,
    /// `mu^T V`.
    pub total_cost: f64,
}

fn policy_system(cost: &SaTable, kernel: &Kernel, policy: &Policy, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let n = cost.num_states();
    let m = cost.num_actions();
    let mut mat = vec![0.0; n * n];
    let mut c_pi = vec![0.0; n];
    for s in 0..n {
        mat[s * n + s] = 1.0;
        for a in 0..m {
            let p = policy.prob(s, a);
            if p == 0.0 {
                continue;
            }
            c_pi[s] += p * cost.get(s, a);
            for (t, &pt) in kernel.row(s, a).iter().enumerate() {
                mat[s * n + t] -= gamma * p * pt;
            }
        }
    }
    (mat, c_pi)
}

fn factor_system(mat: Vec<f64>, n: usize) -> Lu {
    // I - gamma P^pi is strictly diagonally dominant for gamma < 1.
    Lu::factor(mat, n).expect("I - gamma P^pi is nonsingular for gamma < 1")
}

fn q_from_values(cost: &SaTable, kernel: &Kernel, values: &[f64], gamma: f64) -> SaTable {
    SaTable::from_fn(cost.num_states(), cost.num_actions(), |s, a| {
        cost.get(s, a) + gamma * dot(kernel.row(s, a), values)
    })
}

/// Value function only; cheaper than a full bundle.
pub(crate) fn policy_values(cost: &SaTable, kernel: &Kernel, policy: &Policy, gamma: f64) -> Vec<f64> {
    let (mat, c_pi) = policy_system(cost, kernel, policy, gamma);
    factor_system(mat, cost.num_states()).solve(&c_pi)
}

pub(crate) fn evaluate_parts(
    cost: &SaTable,
    kernel: &Kernel,
    policy: &Policy,
    mu: &[f64],
    gamma: f64,
) -> EvalBundle {
    let n = cost.num_states();
    let m = cost.num_actions();
    let (mat, c_pi) = policy_system(cost, kernel, policy, gamma);
    let lu = factor_system(mat, n);
    let values = lu.solve(&c_pi);
    let visits = lu.solve_transpose(mu);
    let state_occupancy: Vec<f64> = visits.iter().map(|x| (1.0 - gamma) * x).collect();
    let q = q_from_values(cost, kernel, &values, gamma);
    let advantage = SaTable::from_fn(n, m, |s, a| values[s] - q.get(s, a));
    let occupancy = SaTable::from_fn(n, m, |s, a| state_occupancy[s] * policy.prob(s, a));
    let total_cost = dot(mu, &values);
    EvalBundle {
        values,
        q,
        advantage,
        occupancy,
        state_occupancy,
        total_cost,
    }
}

/// Evaluates `policy` under a single model by direct linear solves.
pub fn evaluate_fixed(model: &Model, policy: &Policy, instance: &RmdpInstance) -> Result<EvalBundle> {
    instance.check_model(model)?;
    instance.check_policy(policy)?;
    Ok(evaluate_parts(
        &model.cost,
        &model.kernel,
        policy,
        &instance.mu,
        instance.gamma,
    ))
}

/// Result of evaluating a policy against an explicit model list.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteRobust {
    pub robust_cost: f64,
    /// Models whose total cost is within `active_tol * (1 + |J|)` of the maximum.
    pub active: Vec<usize>,
    pub bundles: Vec<EvalBundle>,
}

/// Maximum of `costs` and the indices that attain it within the relative tolerance.
pub fn active_indices(costs: &[f64], active_tol: f64) -> (f64, Vec<usize>) {
    let best = costs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let slack = active_tol * (1.0 + best.abs());
    let active = costs
        .iter()
        .enumerate()
        .filter(|(_, &j)| best - j <= slack)
        .map(|(i, _)| i)
        .collect();
    (best, active)
}

pub fn robust_cost_finite(
    models: &[Model],
    policy: &Policy,
    instance: &RmdpInstance,
    active_tol: f64,
) -> Result<FiniteRobust> {
    if models.is_empty() {
        return Err(Error::EmptyUncertaintySet);
    }
    let bundles = models
        .iter()
        .map(|m| evaluate_fixed(m, policy, instance))
        .collect::<Result<Vec<_>>>()?;
    let costs: Vec<f64> = bundles.iter().map(|b| b.total_cost).collect();
    let (robust_cost, active) = active_indices(&costs, active_tol);
    if !robust_cost.is_finite() {
        return Err(Error::NonFinite("robust total cost".to_string()));
    }
    Ok(FiniteRobust {
        robust_cost,
        active,
        bundles,
    })
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tol",
            reason: format!("must be positive, got {tol}"),
        });
    }
    Ok(())
}

fn strictly_better(candidate: f64, incumbent: f64) -> bool {
    candidate > incumbent + 1e-14 * (1.0 + incumbent.abs())
}

fn argmax_first(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Stopping threshold on successive iterates that guarantees `tol` accuracy.
fn vi_threshold(tol: f64, gamma: f64) -> f64 {
    if gamma == 0.0 {
        f64::INFINITY
    } else {
        tol * (1.0 - gamma) / gamma
    }
}

/// Robust evaluation result for rectangular sets.
#[derive(Debug, Clone, PartialEq)]
pub struct RectEval {
    pub values: Vec<f64>,
    pub worst_kernel: Kernel,
    /// Chosen candidate per `(s, a)` (sa-rect) or per factor (r-rect).
    pub selection: Vec<usize>,
}

fn sa_rect_operator(
    set: &SaRectSet,
    cost: &SaTable,
    policy: &Policy,
    gamma: f64,
    values: &[f64],
) -> Vec<f64> {
    let n = cost.num_states();
    let m = cost.num_actions();
    (0..n)
        .map(|s| {
            (0..m)
                .map(|a| {
                    let p = policy.prob(s, a);
                    if p == 0.0 {
                        return 0.0;
                    }
                    let worst = set
                        .choices_at(s, a)
                        .iter()
                        .map(|row| dot(row, values))
                        .fold(f64::NEG_INFINITY, f64::max);
                    p * (cost.get(s, a) + gamma * worst)
                })
                .sum()
        })
        .collect()
}

/// Fixed point of the sa-rectangular robust policy-evaluation operator for one cost table.
///
/// The adversary's kernel selection is improved by policy iteration, which
/// terminates with the exact fixed point; value iteration with the
/// `tol * (1 - gamma) / gamma` stopping rule only runs if the final residual
/// still exceeds `tol`.
pub fn robust_eval_sa_rect(
    set: &SaRectSet,
    cost: &SaTable,
    policy: &Policy,
    instance: &RmdpInstance,
    tol: f64,
) -> Result<RectEval> {
    check_tol(tol)?;
    instance.check_policy(policy)?;
    let gamma = instance.gamma;
    let (n, m) = (instance.num_states, instance.num_actions);
    let mut selection = vec![0usize; n * m];
    let mut values = policy_values(cost, &set.kernel_for(&selection), policy, gamma);
    for _ in 0..POLICY_ITERATION_LIMIT {
        let mut improved = false;
        for (idx, sel) in selection.iter_mut().enumerate() {
            let cands = &set.choices[idx];
            let current = dot(&cands[*sel], &values);
            let (best, best_val) = argmax_first(cands.iter().map(|r| dot(r, &values)));
            if strictly_better(best_val, current) {
                *sel = best;
                improved = true;
            }
        }
        if !improved {
            break;
        }
        values = policy_values(cost, &set.kernel_for(&selection), policy, gamma);
    }
    let threshold = vi_threshold(tol, gamma);
    let mut next = sa_rect_operator(set, cost, policy, gamma, &values);
    let mut iters = 0;
    while max_abs_diff(&next, &values) > tol.min(threshold) && iters < VALUE_ITERATION_LIMIT {
        values = next;
        next = sa_rect_operator(set, cost, policy, gamma, &values);
        if max_abs_diff(&next, &values) <= threshold {
            values = next.clone();
            break;
        }
        iters += 1;
    }
    for (idx, sel) in selection.iter_mut().enumerate() {
        *sel = argmax_first(set.choices[idx].iter().map(|r| dot(r, &values))).0;
    }
    let worst_kernel = set.kernel_for(&selection);
    Ok(RectEval {
        values,
        worst_kernel,
        selection,
    })
}

fn r_rect_betas(set: &RRectSet, values: &[f64]) -> Vec<(usize, f64)> {
    set.factor_choices
        .iter()
        .map(|cands| argmax_first(cands.iter().map(|w| dot(w, values))))
        .collect()
}

fn r_rect_operator(set: &RRectSet, policy: &Policy, gamma: f64, values: &[f64]) -> Vec<f64> {
    let betas: Vec<f64> = r_rect_betas(set, values).into_iter().map(|b| b.1).collect();
    let n = set.cost.num_states();
    let m = set.cost.num_actions();
    (0..n)
        .map(|s| {
            (0..m)
                .map(|a| {
                    let p = policy.prob(s, a);
                    if p == 0.0 {
                        return 0.0;
                    }
                    let cont = dot(&set.phi[s * m + a], &betas);
                    p * (set.cost.get(s, a) + gamma * cont)
                })
                .sum()
        })
        .collect()
}

/// r-rectangular robust evaluation; `beta[i]` is factor `i`'s attained maximum of `w^T V`.
#[derive(Debug, Clone, PartialEq)]
pub struct RRectEval {
    pub values: Vec<f64>,
    pub beta: Vec<f64>,
    pub worst_kernel: Kernel,
    pub selection: Vec<usize>,
}

/// Fixed point of the r-rectangular robust policy-evaluation operator.
pub fn robust_eval_r_rect(
    set: &RRectSet,
    policy: &Policy,
    instance: &RmdpInstance,
    tol: f64,
) -> Result<RRectEval> {
    check_tol(tol)?;
    instance.check_policy(policy)?;
    let gamma = instance.gamma;
    let mut selection = vec![0usize; set.num_factors()];
    let mut values = policy_values(&set.cost, &set.kernel_for(&selection), policy, gamma);
    for _ in 0..POLICY_ITERATION_LIMIT {
        let mut improved = false;
        for (i, sel) in selection.iter_mut().enumerate() {
            let cands = &set.factor_choices[i];
            let current = dot(&cands[*sel], &values);
            let (best, best_val) = argmax_first(cands.iter().map(|w| dot(w, &values)));
            if strictly_better(best_val, current) {
                *sel = best;
                improved = true;
            }
        }
        if !improved {
            break;
        }
        values = policy_values(&set.cost, &set.kernel_for(&selection), policy, gamma);
    }
    let threshold = vi_threshold(tol, gamma);
    let mut next = r_rect_operator(set, policy, gamma, &values);
    let mut iters = 0;
    while max_abs_diff(&next, &values) > tol.min(threshold) && iters < VALUE_ITERATION_LIMIT {
        values = next;
        next = r_rect_operator(set, policy, gamma, &values);
        if max_abs_diff(&next, &values) <= threshold {
            values = next.clone();
            break;
        }
        iters += 1;
    }
    let betas = r_rect_betas(set, &values);
    let selection: Vec<usize> = betas.iter().map(|b| b.0).collect();
    let beta = betas.iter().map(|b| b.1).collect();
    let worst_kernel = set.kernel_for(&selection);
    Ok(RRectEval {
        values,
        beta,
        worst_kernel,
        selection,
    })
}

/// Worst-case next-state distribution and attained value of
/// `max_p p^T V - tau * KL(p || nominal)`.
///
/// Computed in log space: the maximizer is `nominal * exp(V / tau)`
/// normalized, and the value is `tau * log sum nominal * exp(V / tau)`.
/// Zero-probability nominal entries stay at zero.
pub fn kl_worst_case(nominal_row: &[f64], values: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("must be positive, got {tau}"),
        });
    }
    if nominal_row.len() != values.len() {
        return Err(Error::Dimension {
            what: "nominal row".to_string(),
            expected: values.len(),
            found: nominal_row.len(),
        });
    }
    let shift = nominal_row
        .iter()
        .zip(values)
        .filter(|(&p, _)| p > 0.0)
        .map(|(_, &v)| v / tau)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = nominal_row
        .iter()
        .zip(values)
        .map(|(&p, &v)| if p > 0.0 { p * libm::exp(v / tau - shift) } else { 0.0 })
        .collect();
    let z: f64 = weights.iter().sum();
    let soft = tau * (shift + libm::log(z));
    if !(z.is_finite() && z > 0.0 && soft.is_finite()) {
        return Err(Error::NonFinite(format!("KL tilt (normalizer {z}, value {soft})")));
    }
    Ok((weights.into_iter().map(|w| w / z).collect(), soft))
}

/// Per-pair tilted rows and the effective model `(c - gamma (p*^T V - soft), p*)`.
fn kl_tilted_model(set: &KlRegSet, values: &[f64], gamma: f64) -> Result<(Model, SaTable)> {
    let n = set.cost.num_states();
    let m = set.cost.num_actions();
    let mut kernel = Kernel::zeros(n, m);
    let mut soft = SaTable::zeros(n, m);
    let mut cost = SaTable::zeros(n, m);
    for s in 0..n {
        for a in 0..m {
            let (row, sv) = kl_worst_case(set.nominal.row(s, a), values, set.tau)?;
            let expected = dot(&row, values);
            cost.set(s, a, set.cost.get(s, a) - gamma * (expected - sv));
            soft.set(s, a, sv);
            kernel.row_mut(s, a).copy_from_slice(&row);
        }
    }
    Ok((Model::new(cost, kernel), soft))
}

fn kl_operator(set: &KlRegSet, policy: &Policy, gamma: f64, values: &[f64]) -> Result<Vec<f64>> {
    let n = set.cost.num_states();
    let m = set.cost.num_actions();
    let mut out = vec![0.0; n];
    for (s, o) in out.iter_mut().enumerate() {
        for a in 0..m {
            let p = policy.prob(s, a);
            if p == 0.0 {
                continue;
            }
            let (_, soft) = kl_worst_case(set.nominal.row(s, a), values, set.tau)?;
            *o += p * (set.cost.get(s, a) + gamma * soft);
        }
    }
    Ok(out)
}

/// KL-regularized robust evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KlEval {
    pub values: Vec<f64>,
    /// Unique worst case as an ordinary model: the tilted kernel with the
    /// regularization penalty folded into the cost.
    pub worst_model: Model,
    /// `tau log sum P0 exp(V / tau)` per pair at the fixed point.
    pub soft_values: SaTable,
}

/// Fixed point of `V(s) = sum_a pi(a|s) [c(s,a) + gamma * softmax_value(s,a)]`.
///
/// Solved by regularized policy iteration for the adversary (monotone,
/// quadratically convergent near the fixed point) with value iteration as a
/// fallback.
pub fn kl_evaluate(set: &KlRegSet, policy: &Policy, instance: &RmdpInstance, tol: f64) -> Result<KlEval> {
    check_tol(tol)?;
    instance.check_policy(policy)?;
    let gamma = instance.gamma;
    let mut values = policy_values(&set.cost, &set.nominal, policy, gamma);
    let mut converged = false;
    for _ in 0..200 {
        let (model, _) = kl_tilted_model(set, &values, gamma)?;
        let next = policy_values(&model.cost, &model.kernel, policy, gamma);
        let delta = max_abs_diff(&next, &values);
        values = next;
        if delta <= tol * (1.0 - gamma) {
            converged = true;
            break;
        }
    }
    if !converged {
        let threshold = vi_threshold(tol, gamma);
        for _ in 0..VALUE_ITERATION_LIMIT {
            let next = kl_operator(set, policy, gamma, &values)?;
            let delta = max_abs_diff(&next, &values);
            values = next;
            if delta <= threshold {
                break;
            }
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("KL-regularized values".to_string()));
    }
    let (worst_model, soft_values) = kl_tilted_model(set, &values, gamma)?;
    Ok(KlEval {
        values,
        worst_model,
        soft_values,
    })
}

/// Robust value, action-value and total cost for any uncertainty-set variant.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustEval {
    pub robust_cost: f64,
    /// Worst-case value function (for finite sets: of the lowest-index active model).
    pub values: Vec<f64>,
    pub q: SaTable,
    /// Active model indices for finite sets; the maximizing cost index for sa-rect sets.
    pub active: Vec<usize>,
}

pub fn robust_evaluate(instance: &RmdpInstance, policy: &Policy) -> Result<RobustEval> {
    instance.check_policy(policy)?;
    let gamma = instance.gamma;
    match &instance.uncertainty {
        UncertaintySet::Finite(models) => {
            let fr = robust_cost_finite(models, policy, instance, DEFAULT_ACTIVE_TOL)?;
            let b = &fr.bundles[fr.active[0]];
            Ok(RobustEval {
                robust_cost: fr.robust_cost,
                values: b.values.clone(),
                q: b.q.clone(),
                active: fr.active.clone(),
            })
        }
        UncertaintySet::SaRectFinite(set) => {
            let mut costs = Vec::with_capacity(set.costs.len());
            let mut evals = Vec::with_capacity(set.costs.len());
            for cost in &set.costs {
                let ev = robust_eval_sa_rect(set, cost, policy, instance, DEFAULT_TOL)?;
                costs.push(dot(&instance.mu, &ev.values));
                evals.push(ev);
            }
            let (robust_cost, active) = active_indices(&costs, DEFAULT_ACTIVE_TOL);
            let ev = &evals[active[0]];
            let q = q_from_values(&set.costs[active[0]], &ev.worst_kernel, &ev.values, gamma);
            Ok(RobustEval {
                robust_cost,
                values: ev.values.clone(),
                q,
                active,
            })
        }
        UncertaintySet::RRect(set) => {
            let ev = robust_eval_r_rect(set, policy, instance, DEFAULT_TOL)?;
            let q = q_from_values(&set.cost, &ev.worst_kernel, &ev.values, gamma);
            Ok(RobustEval {
                robust_cost: dot(&instance.mu, &ev.values),
                values: ev.values,
                q,
                active: vec![0],
            })
        }
        UncertaintySet::KlReg(set) => {
            let ev = kl_evaluate(set, policy, instance, DEFAULT_TOL)?;
            let q = SaTable::from_fn(instance.num_states, instance.num_actions, |s, a| {
                set.cost.get(s, a) + gamma * ev.soft_values.get(s, a)
            });
            Ok(RobustEval {
                robust_cost: dot(&instance.mu, &ev.values),
                values: ev.values,
                q,
                active: vec![0],
            })
        }
    }
}

/// Robust total cost `J_U(pi)`, dispatched on the uncertainty-set structure.
pub fn robust_cost(instance: &RmdpInstance, policy: &Policy) -> Result<f64> {
    instance.check_policy(policy)?;
    match &instance.uncertainty {
        UncertaintySet::Finite(models) => {
            // Values only; skips the occupancy solve.
            let mut best = f64::NEG_INFINITY;
            for model in models {
                let v = policy_values(&model.cost, &model.kernel, policy, instance.gamma);
                best = best.max(dot(&instance.mu, &v));
            }
            if !best.is_finite() {
                return Err(Error::NonFinite("robust total cost".to_string()));
            }
            Ok(best)
        }
        _ => robust_evaluate(instance, policy).map(|r| r.robust_cost),
    }
}

/// Worst-case models at a policy, as an explicit list.
#[derive(Debug, Clone, PartialEq)]
pub struct WorstCaseSet {
    pub robust_cost: f64,
    /// Indices into the (flattened) model list; empty meaning for KL sets is `[0]`.
    pub indices: Vec<usize>,
    pub models: Vec<Model>,
    pub bundles: Vec<EvalBundle>,
}

/// Active worst-case models. Product sets are flattened up to `cap` models;
/// KL-regularized sets yield their unique effective worst-case model.
pub fn worst_case_set(
    instance: &RmdpInstance,
    policy: &Policy,
    active_tol: f64,
    cap: usize,
) -> Result<WorstCaseSet> {
    instance.check_policy(policy)?;
    let from_list = |models: &[Model]| -> Result<WorstCaseSet> {
        let fr = robust_cost_finite(models, policy, instance, active_tol)?;
        let FiniteRobust {
            robust_cost,
            active,
            bundles,
        } = fr;
        let mut bundles: Vec<Option<EvalBundle>> = bundles.into_iter().map(Some).collect();
        Ok(WorstCaseSet {
            robust_cost,
            models: active.iter().map(|&i| models[i].clone()).collect(),
            bundles: active.iter().map(|&i| bundles[i].take().unwrap()).collect(),
            indices: active,
        })
    };
    match &instance.uncertainty {
        UncertaintySet::Finite(models) => from_list(models),
        UncertaintySet::SaRectFinite(_) | UncertaintySet::RRect(_) => {
            from_list(&instance.uncertainty.flatten(cap)?)
        }
        UncertaintySet::KlReg(set) => {
            let ev = kl_evaluate(set, policy, instance, DEFAULT_TOL)?;
            let bundle = evaluate_fixed(&ev.worst_model, policy, instance)?;
            Ok(WorstCaseSet {
                robust_cost: bundle.total_cost,
                indices: vec![0],
                models: vec![ev.worst_model],
                bundles: vec![bundle],
            })
        }
    }
}

/// Optimal robust cost by (robust) value iteration, for structures where the
/// min-max Bellman equation is exact: a single model, an sa-rectangular set
/// with one cost table, or a KL-regularized set. Returns `J*` evaluated at the
/// greedy deterministic policy, and that policy.
pub fn optimal_by_value_iteration(instance: &RmdpInstance, tol: f64) -> Result<(f64, Policy)> {
    check_tol(tol)?;
    let (n, m, gamma) = (instance.num_states, instance.num_actions, instance.gamma);
    let backup: alloc::boxed::Box<dyn Fn(&[f64]) -> Result<SaTable>> = match &instance.uncertainty {
        UncertaintySet::Finite(models) if models.len() == 1 => {
            let model = &models[0];
            alloc::boxed::Box::new(move |v: &[f64]| Ok(q_from_values(&model.cost, &model.kernel, v, gamma)))
        }
        UncertaintySet::SaRectFinite(set) if set.costs.len() == 1 => {
            let cost = &set.costs[0];
            alloc::boxed::Box::new(move |v: &[f64]| {
                Ok(SaTable::from_fn(n, m, |s, a| {
                    let worst = set
                        .choices_at(s, a)
                        .iter()
                        .map(|row| dot(row, v))
                        .fold(f64::NEG_INFINITY, f64::max);
                    cost.get(s, a) + gamma * worst
                }))
            })
        }
        UncertaintySet::KlReg(set) => alloc::boxed::Box::new(move |v: &[f64]| {
            let mut q = SaTable::zeros(n, m);
            for s in 0..n {
                for a in 0..m {
                    let (_, soft) = kl_worst_case(set.nominal.row(s, a), v, set.tau)?;
                    q.set(s, a, set.cost.get(s, a) + gamma * soft);
                }
            }
            Ok(q)
        }),
        other => {
            return Err(Error::Unsupported(format!(
                "value iteration is not exact for a `{}` set of this shape",
                other.kind()
            )))
        }
    };
    let threshold = vi_threshold(tol, gamma);
    let mut values = vec![0.0; n];
    let mut q = backup(&values)?;
    for _ in 0..VALUE_ITERATION_LIMIT {
        let next: Vec<f64> = q.rows().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).collect();
        let delta = max_abs_diff(&next, &values);
        values = next;
        q = backup(&values)?;
        if delta <= threshold {
            break;
        }
    }
    let actions: Vec<usize> = q
        .rows()
        .map(|r| {
            let mut best = 0;
            for (a, &x) in r.iter().enumerate() {
                if x < r[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    let policy = Policy::deterministic(m, &actions);
    let j = robust_cost(instance, &policy)?;
    Ok((j, policy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn single_state(cost: f64, gamma: f64) -> RmdpInstance {
        let model = Model::new(SaTable::filled(1, 1, cost), Kernel::deterministic(1, 1, |_, _| 0));
        RmdpInstance::new(1, 1, vec![1.0], gamma, UncertaintySet::Finite(vec![model])).unwrap()
    }

    #[test]
    fn geometric_series() {
        let inst = single_state(1.0, 0.9);
        let UncertaintySet::Finite(models) = &inst.uncertainty else { unreachable!() };
        let b = evaluate_fixed(&models[0], &Policy::uniform(1, 1), &inst).unwrap();
        assert!((b.values[0] - 10.0).abs() < 1e-12);
        assert!((b.total_cost - 10.0).abs() < 1e-12);
        assert!((b.state_occupancy[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cost_gives_zero_values() {
        let inst = single_state(0.0, 0.7);
        let UncertaintySet::Finite(models) = &inst.uncertainty else { unreachable!() };
        let b = evaluate_fixed(&models[0], &Policy::uniform(1, 1), &inst).unwrap();
        assert_eq!(b.values, vec![0.0]);
        assert_eq!(b.q.as_slice(), &[0.0]);
        assert_eq!(b.total_cost, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let inst = single_state(1.0, 0.5);
        let UncertaintySet::Finite(models) = &inst.uncertainty else { unreachable!() };
        let err = evaluate_fixed(&models[0], &Policy::uniform(2, 1), &inst).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn empty_model_list_is_an_error() {
        let inst = single_state(1.0, 0.5);
        let err = robust_cost_finite(&[], &Policy::uniform(1, 1), &inst, DEFAULT_ACTIVE_TOL).unwrap_err();
        assert_eq!(err, Error::EmptyUncertaintySet);
    }

    #[test]
    fn active_set_uses_relative_tolerance() {
        let (best, act) = active_indices(&[1.0, 1.0 - 1e-10, 0.5], 1e-9);
        assert_eq!(best, 1.0);
        assert_eq!(act, vec![0, 1]);
    }

    #[test]
    fn kl_constant_values_return_nominal() {
        let nominal = [0.2, 0.3, 0.5];
        let (row, soft) = kl_worst_case(&nominal, &[4.0, 4.0, 4.0], 0.3).unwrap();
        for (x, y) in row.iter().zip(&nominal) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((soft - 4.0).abs() < 1e-12);
    }

    #[test]
    fn kl_large_tau_is_nominal() {
        let nominal = [0.25, 0.25, 0.5];
        let (row, _) = kl_worst_case(&nominal, &[1.0, -3.0, 7.0], 1e6).unwrap();
        for (x, y) in row.iter().zip(&nominal) {
            assert!((x - y).abs() < 1e-5);
        }
    }

    #[test]
    fn kl_rejects_nonpositive_tau() {
        assert!(kl_worst_case(&[0.5, 0.5], &[0.0, 1.0], 0.0).is_err());
        assert!(kl_worst_case(&[0.5, 0.5], &[0.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn kl_zero_nominal_entries_stay_zero() {
        let (row, soft) = kl_worst_case(&[0.0, 1.0], &[100.0, 1.0], 1.0).unwrap();
        assert_eq!(row, vec![0.0, 1.0]);
        assert!((soft - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let inst = single_state(1.0, 0.5);
        let set = SaRectSet {
            costs: vec![SaTable::filled(1, 1, 1.0)],
            choices: vec![vec![vec![1.0]]],
            num_actions: 1,
        };
        let cost = set.costs[0].clone();
        assert!(robust_eval_sa_rect(&set, &cost, &Policy::uniform(1, 1), &inst, 0.0).is_err());
    }
}
