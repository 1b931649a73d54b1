//! Numerical checks of the uniqueness assumptions, the subgradient-dominance
//! inequality and the PSD rate.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::{
    optimal_by_value_iteration, policy_values, robust_cost, worst_case_set, active_indices, DEFAULT_ACTIVE_TOL,
    DEFAULT_FLATTEN_CAP, DEFAULT_TOL,
};
use crate::model::{MixedRadix, Policy, RmdpInstance, UncertaintySet};
use crate::psd::{psd_run, PsdConfig, StepRule};
use crate::rng::{random_policy, seeded};
use crate::subgrad::{compute_constants, stationarity_gap};
use crate::table::{dot, SaTable};

pub const DEFAULT_UNIQ_TOL: f64 = 1e-8;
/// Largest number of grid points the grid oracle will evaluate.
pub const GRID_POINT_CAP: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelWitness {
    pub models: (usize, usize),
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub values: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QWitness {
    pub models: (usize, usize),
    pub state: usize,
    pub action: usize,
    pub values: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessCheck<W> {
    pub holds: bool,
    pub active_models: Vec<usize>,
    pub witness: Option<W>,
}

/// Whether every worst-case model at `policy` has the same kernel.
pub fn check_unique_worst_kernel(
    instance: &RmdpInstance,
    policy: &Policy,
    uniq_tol: f64,
) -> Result<UniquenessCheck<KernelWitness>> {
    let wc = worst_case_set(instance, policy, DEFAULT_ACTIVE_TOL, DEFAULT_FLATTEN_CAP)?;
    let n = instance.num_states;
    let first = &wc.models[0].kernel;
    for (j, model) in wc.models.iter().enumerate().skip(1) {
        for s in 0..n {
            for a in 0..instance.num_actions {
                let (r0, r1) = (first.row(s, a), model.kernel.row(s, a));
                if let Some(t) = (0..n).find(|&t| (r0[t] - r1[t]).abs() > uniq_tol) {
                    return Ok(UniquenessCheck {
                        holds: false,
                        witness: Some(KernelWitness {
                            models: (wc.indices[0], wc.indices[j]),
                            state: s,
                            action: a,
                            next_state: t,
                            values: (r0[t], r1[t]),
                        }),
                        active_models: wc.indices,
                    });
                }
            }
        }
    }
    Ok(UniquenessCheck {
        holds: true,
        active_models: wc.indices,
        witness: None,
    })
}

fn first_q_difference(q0: &SaTable, q1: &SaTable, tol: f64) -> Option<(usize, usize)> {
    (0..q0.num_states())
        .flat_map(|s| (0..q0.num_actions()).map(move |a| (s, a)))
        .find(|&(s, a)| (q0.get(s, a) - q1.get(s, a)).abs() > tol)
}

/// Whether every worst-case model at `policy` has the same action-value table.
pub fn check_unique_worst_q(instance: &RmdpInstance, policy: &Policy, uniq_tol: f64) -> Result<UniquenessCheck<QWitness>> {
    let wc = worst_case_set(instance, policy, DEFAULT_ACTIVE_TOL, DEFAULT_FLATTEN_CAP)?;
    let q0 = &wc.bundles[0].q;
    for (j, b) in wc.bundles.iter().enumerate().skip(1) {
        if let Some((s, a)) = first_q_difference(q0, &b.q, uniq_tol) {
            return Ok(UniquenessCheck {
                holds: false,
                witness: Some(QWitness {
                    models: (wc.indices[0], wc.indices[j]),
                    state: s,
                    action: a,
                    values: (q0.get(s, a), b.q.get(s, a)),
                }),
                active_models: wc.indices,
            });
        }
    }
    Ok(UniquenessCheck {
        holds: true,
        active_models: wc.indices,
        witness: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RRectPolicyCheck {
    /// Factor selections of every worst-case product.
    pub worst_products: Vec<Vec<usize>>,
    pub max_q_spread: f64,
    pub max_beta_spread: f64,
    pub unique: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RRectUniquenessReport {
    pub checks: Vec<RRectPolicyCheck>,
    pub all_unique: bool,
}

/// Enumerates the factor-choice products of an r-rectangular set and checks
/// that all worst-case products share `Q` and the factor values `beta`.
pub fn check_r_rect_q_uniqueness(
    instance: &RmdpInstance,
    policies: &[Policy],
    tol: f64,
) -> Result<RRectUniquenessReport> {
    let UncertaintySet::RRect(set) = &instance.uncertainty else {
        return Err(Error::Unsupported(format!(
            "r-rectangular Q check needs an `r_rect` set, got `{}`",
            instance.uncertainty.kind()
        )));
    };
    let count = set.num_products();
    if count > DEFAULT_FLATTEN_CAP as u128 {
        return Err(Error::FlattenCap {
            count,
            cap: DEFAULT_FLATTEN_CAP,
        });
    }
    let radices: Vec<usize> = set.factor_choices.iter().map(Vec::len).collect();
    let selections: Vec<Vec<usize>> = MixedRadix::new(radices).collect();
    let kernels: Vec<_> = selections.iter().map(|sel| set.kernel_for(sel)).collect();
    let mut checks = Vec::with_capacity(policies.len());
    for policy in policies {
        instance.check_policy(policy)?;
        let values: Vec<Vec<f64>> = kernels
            .iter()
            .map(|k| policy_values(&set.cost, k, policy, instance.gamma))
            .collect();
        let costs: Vec<f64> = values.iter().map(|v| dot(&instance.mu, v)).collect();
        let (_, active) = active_indices(&costs, DEFAULT_ACTIVE_TOL);
        let qs: Vec<SaTable> = active
            .iter()
            .map(|&i| {
                SaTable::from_fn(instance.num_states, instance.num_actions, |s, a| {
                    set.cost.get(s, a) + instance.gamma * dot(kernels[i].row(s, a), &values[i])
                })
            })
            .collect();
        let betas: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| {
                selections[i]
                    .iter()
                    .enumerate()
                    .map(|(f, &c)| dot(&set.factor_choices[f][c], &values[i]))
                    .collect()
            })
            .collect();
        let max_q_spread = qs.iter().map(|q| q.max_abs_diff(&qs[0])).fold(0.0, f64::max);
        let max_beta_spread = betas
            .iter()
            .flat_map(|b| b.iter().zip(&betas[0]).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        checks.push(RRectPolicyCheck {
            worst_products: active.iter().map(|&i| selections[i].clone()).collect(),
            max_q_spread,
            max_beta_spread,
            unique: max_q_spread <= tol && max_beta_spread <= tol,
        });
    }
    let all_unique = checks.iter().all(|c| c.unique);
    Ok(RRectUniquenessReport { checks, all_unique })
}

/// Source of the optimal robust cost `J*`.
#[derive(Debug, Clone, PartialEq)]
pub enum JStarOracle {
    /// Minimum over the product grid of per-state simplices with step `resolution`.
    Grid { resolution: f64 },
    /// Best cost over multi-start PSD with `eta = 1/sqrt(T)`; an upper bound on `J*`.
    Psd { starts: usize, iterations: usize, seed: u64 },
    /// Robust value iteration; exact where the Bellman equation is (single model,
    /// one-cost sa-rect, KL-regularized).
    ValueIteration,
    /// Caller-supplied value.
    Explicit(f64),
}

impl JStarOracle {
    pub fn default_psd() -> Self {
        JStarOracle::Psd {
            starts: 32,
            iterations: 1000,
            seed: 0,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            JStarOracle::Grid { resolution } => format!("grid(resolution={resolution})"),
            JStarOracle::Psd { starts, iterations, seed } => {
                format!("psd(starts={starts}, iterations={iterations}, seed={seed}; upper bound)")
            }
            JStarOracle::ValueIteration => "value-iteration".into(),
            JStarOracle::Explicit(v) => format!("explicit({v})"),
        }
    }
}

/// All compositions of `k` into `parts` nonnegative integers, lexicographically.
fn compositions(k: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![k]];
    }
    let mut out = Vec::new();
    for first in (0..=k).rev() {
        for mut rest in compositions(k - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Minimum robust cost over the product simplex grid, and its argmin.
pub fn grid_minimum(instance: &RmdpInstance, resolution: f64) -> Result<(f64, Policy)> {
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "resolution",
            reason: format!("must lie in (0, 1], got {resolution}"),
        });
    }
    let k = libm::round(1.0 / resolution) as usize;
    if (k as f64 * resolution - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter {
            name: "resolution",
            reason: format!("1/{resolution} is not an integer"),
        });
    }
    let (n, m) = (instance.num_states, instance.num_actions);
    let per_state = binomial((k + m - 1) as u128, (m - 1) as u128);
    let total = (0..n).fold(1u128, |acc, _| acc.saturating_mul(per_state));
    if total > GRID_POINT_CAP {
        return Err(Error::InvalidParameter {
            name: "resolution",
            reason: format!("grid has {total} points, above the cap of {GRID_POINT_CAP}"),
        });
    }
    let rows: Vec<Vec<f64>> = compositions(k, m)
        .into_iter()
        .map(|c| c.into_iter().map(|x| x as f64 / k as f64).collect())
        .collect();
    let mut best = (f64::INFINITY, Policy::uniform(n, m));
    let mut table = SaTable::zeros(n, m);
    for idx in MixedRadix::new(vec![rows.len(); n]) {
        for (s, &r) in idx.iter().enumerate() {
            table.row_mut(s).copy_from_slice(&rows[r]);
        }
        let pol = Policy::from_table_unchecked(table.clone());
        let j = robust_cost(instance, &pol)?;
        if j < best.0 {
            best = (j, pol);
        }
    }
    Ok(best)
}

/// Best robust cost found by multi-start PSD (uniform start, then Dirichlet starts).
pub fn psd_minimum(instance: &RmdpInstance, starts: usize, iterations: usize, seed: u64) -> Result<(f64, Policy)> {
    let (n, m) = (instance.num_states, instance.num_actions);
    let mut rng = seeded(seed);
    let config = PsdConfig {
        iterations,
        step_rule: StepRule::InverseSqrtT,
        record_every: iterations,
        ..PsdConfig::default()
    };
    let mut best = (f64::INFINITY, Policy::uniform(n, m));
    for i in 0..starts.max(1) {
        let init = if i == 0 {
            Policy::uniform(n, m)
        } else {
            random_policy(&mut rng, n, m)
        };
        let trace = psd_run(instance, &init, &config)?;
        if trace.best_cost < best.0 {
            let pol = trace
                .records
                .iter()
                .find(|r| r.t == trace.best_iterate)
                .map(|r| r.policy.clone())
                .unwrap_or(trace.final_policy);
            best = (trace.best_cost, pol);
        }
    }
    Ok(best)
}

pub fn optimal_cost(instance: &RmdpInstance, oracle: &JStarOracle) -> Result<f64> {
    match oracle {
        JStarOracle::Grid { resolution } => grid_minimum(instance, *resolution).map(|r| r.0),
        JStarOracle::Psd { starts, iterations, seed } => psd_minimum(instance, *starts, *iterations, *seed).map(|r| r.0),
        JStarOracle::ValueIteration => optimal_by_value_iteration(instance, DEFAULT_TOL).map(|r| r.0),
        JStarOracle::Explicit(v) => Ok(*v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DominanceConstant {
    /// `((1 - gamma) min_s mu(s))^{-1}`; needs full-support `mu`.
    FromInstance,
    Explicit(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub seed: u64,
    /// Policies with independent Dirichlet(1, ..., 1) rows.
    pub dirichlet_samples: usize,
    /// Add every deterministic policy when there are at most this many.
    pub deterministic_cap: u128,
    /// Extra policies checked first.
    pub extra: Vec<Policy>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            dirichlet_samples: 32,
            deterministic_cap: 1024,
            extra: Vec::new(),
        }
    }
}

/// Extra policies, the uniform policy, Dirichlet samples, then (if few
/// enough) all deterministic policies. The uniform policy is where symmetric
/// instances tie, which random samples almost surely miss.
pub fn sample_policies(instance: &RmdpInstance, sampler: &SamplerConfig) -> Vec<Policy> {
    let (n, m) = (instance.num_states, instance.num_actions);
    let mut out = sampler.extra.clone();
    out.push(Policy::uniform(n, m));
    let mut rng = seeded(sampler.seed);
    for _ in 0..sampler.dirichlet_samples {
        out.push(random_policy(&mut rng, n, m));
    }
    let count = (0..n).fold(1u128, |acc, _| acc.saturating_mul(m as u128));
    if count <= sampler.deterministic_cap {
        for actions in MixedRadix::new(vec![m; n]) {
            out.push(Policy::deterministic(m, &actions));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceConfig {
    pub sampler: SamplerConfig,
    pub oracle: JStarOracle,
    pub constant: DominanceConstant,
    /// A violation needs `J - J* - D G > tolerance (1 + |J|)`.
    pub tolerance: f64,
    pub active_tol: f64,
    pub uniq_tol: f64,
}

impl Default for DominanceConfig {
    fn default() -> Self {
        DominanceConfig {
            sampler: SamplerConfig::default(),
            oracle: JStarOracle::default_psd(),
            constant: DominanceConstant::FromInstance,
            tolerance: 1e-9,
            active_tol: DEFAULT_ACTIVE_TOL,
            uniq_tol: DEFAULT_UNIQ_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCheck {
    pub policy: Policy,
    pub j: f64,
    pub g: f64,
    pub alpha: Vec<f64>,
    /// `J - J*`.
    pub gap: f64,
    /// `J - J* - D G`; positive beyond tolerance is a violation.
    pub slack: f64,
    pub violation: bool,
    pub unique_kernel: bool,
    pub unique_q: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub jstar: f64,
    pub oracle: String,
    pub constant: f64,
    pub checks: Vec<PolicyCheck>,
    /// Unique worst-case kernel at every sampled policy.
    pub unique_kernel_holds: bool,
    /// Unique worst-case action values at every sampled policy.
    pub unique_q_holds: bool,
    pub max_slack: f64,
    pub violations: Vec<usize>,
    pub dominance_holds: bool,
}

/// Samples policies and tests `J(pi) - J* <= D G(pi)` at each.
///
/// `J*` is the oracle value, lowered to the smallest sampled cost if that is
/// smaller, so it stays an upper bound on the true optimum and a reported
/// violation is never an artifact of the oracle.
pub fn verify_dominance(instance: &RmdpInstance, config: &DominanceConfig) -> Result<DominanceReport> {
    let constant = match config.constant {
        DominanceConstant::FromInstance => compute_constants(instance)?.dominance,
        DominanceConstant::Explicit(d) => d,
    };
    let policies = sample_policies(instance, &config.sampler);
    let mut jstar = optimal_cost(instance, &config.oracle)?;
    let mut rows = Vec::with_capacity(policies.len());
    for pol in policies {
        let j = robust_cost(instance, &pol)?;
        jstar = jstar.min(j);
        let g = stationarity_gap(instance, &pol, config.active_tol)?;
        let uk = check_unique_worst_kernel(instance, &pol, config.uniq_tol)?.holds;
        let uq = check_unique_worst_q(instance, &pol, config.uniq_tol)?.holds;
        rows.push((pol, j, g, uk, uq));
    }
    let mut checks = Vec::with_capacity(rows.len());
    let mut violations = Vec::new();
    let mut max_slack = f64::NEG_INFINITY;
    for (i, (policy, j, g, uk, uq)) in rows.into_iter().enumerate() {
        let gap = j - jstar;
        let slack = gap - constant * g.gap;
        let violation = slack > config.tolerance * (1.0 + j.abs());
        if violation {
            violations.push(i);
        }
        max_slack = max_slack.max(slack);
        checks.push(PolicyCheck {
            policy,
            j,
            g: g.gap,
            alpha: g.alpha,
            gap,
            slack,
            violation,
            unique_kernel: uk,
            unique_q: uq,
        });
    }
    Ok(DominanceReport {
        jstar,
        oracle: config.oracle.describe(),
        constant,
        unique_kernel_holds: checks.iter().all(|c| c.unique_kernel),
        unique_q_holds: checks.iter().all(|c| c.unique_q),
        dominance_holds: violations.is_empty(),
        checks,
        max_slack,
        violations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub iterations: usize,
    pub eta: f64,
    pub best_cost: f64,
    pub min_suboptimality: f64,
    pub bound: f64,
    /// `None` when the check was skipped.
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub jstar: f64,
    pub rate_c: f64,
    pub rows: Vec<RateRow>,
    pub skipped: Option<String>,
    /// Least-squares slope of `log(min suboptimality)` against `log T`.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateConfig {
    pub iterations: Vec<usize>,
    pub initial: Option<Policy>,
    pub oracle: JStarOracle,
    /// Policies sampled to decide whether an assumption holds.
    pub assumption_samples: usize,
    pub seed: u64,
}

impl Default for RateConfig {
    fn default() -> Self {
        RateConfig {
            iterations: vec![100, 1000, 10_000],
            initial: None,
            oracle: JStarOracle::ValueIteration,
            assumption_samples: 16,
            seed: 0,
        }
    }
}

/// Runs PSD with `eta = 1/sqrt(T)` for each `T` and compares the best
/// suboptimality with `C T^{-1/4}`. The comparison is skipped (rows still
/// reported) when neither uniqueness assumption holds on sampled policies.
pub fn verify_rate(instance: &RmdpInstance, config: &RateConfig) -> Result<RateReport> {
    let (n, m) = (instance.num_states, instance.num_actions);
    let constants = compute_constants(instance)?;
    let initial = config.initial.clone().unwrap_or_else(|| Policy::uniform(n, m));
    let mut probes = vec![initial.clone()];
    let mut rng = seeded(config.seed);
    probes.extend((0..config.assumption_samples).map(|_| random_policy(&mut rng, n, m)));
    let mut a11 = true;
    let mut a12 = true;
    for p in &probes {
        a11 &= check_unique_worst_kernel(instance, p, DEFAULT_UNIQ_TOL)?.holds;
        a12 &= check_unique_worst_q(instance, p, DEFAULT_UNIQ_TOL)?.holds;
    }
    let skipped = (!a11 && !a12).then(|| String::from("no assumption holds"));
    let jstar = optimal_cost(instance, &config.oracle)?;
    let mut rows = Vec::with_capacity(config.iterations.len());
    for &t in &config.iterations {
        let cfg = PsdConfig {
            iterations: t,
            step_rule: StepRule::InverseSqrtT,
            record_every: t,
            ..PsdConfig::default()
        };
        let trace = psd_run(instance, &initial, &cfg)?;
        let min_sub = trace.best_cost - jstar;
        let bound = constants.rate_bound(t);
        rows.push(RateRow {
            iterations: t,
            eta: trace.step,
            best_cost: trace.best_cost,
            min_suboptimality: min_sub,
            bound,
            holds: skipped.is_none().then_some(min_sub <= bound),
        });
    }
    let slope = log_log_slope(&rows);
    Ok(RateReport {
        jstar,
        rate_c: constants.rate_c,
        rows,
        skipped,
        slope,
    })
}

fn log_log_slope(rows: &[RateRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| !(r.min_suboptimality > 0.0)) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (libm::log(r.iterations as f64), libm::log(r.min_suboptimality)))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub trials: usize,
    /// `(instance seed, largest slack)` for instances with a violation.
    pub violations: Vec<(u64, f64)>,
    pub max_slack: f64,
}

/// Looks for dominance violations on random s-rectangular instances. A clean
/// result is evidence, not proof.
pub fn search_s_rect(
    seed: u64,
    trials: usize,
    num_states: usize,
    num_actions: usize,
    choices: usize,
    config: &DominanceConfig,
) -> Result<SearchReport> {
    let mut violations = Vec::new();
    let mut max_slack = f64::NEG_INFINITY;
    for i in 0..trials {
        let inst_seed = seed.wrapping_add(i as u64);
        let inst = crate::zoo::random_s_rect_instance(inst_seed, num_states, num_actions, choices, crate::zoo::DEFAULT_GAMMA)?;
        let report = verify_dominance(&inst, config)?;
        max_slack = max_slack.max(report.max_slack);
        if !report.dominance_holds {
            violations.push((inst_seed, report.max_slack));
        }
    }
    Ok(SearchReport {
        trials,
        violations,
        max_slack,
    })
}
