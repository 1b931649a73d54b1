//! Policy gradients, the Danskin subdifferential of the robust cost, the
//! stationarity gap and the Moreau-envelope proximal point.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::eval::{evaluate_fixed, worst_case_set, EvalBundle, DEFAULT_FLATTEN_CAP};
use crate::lp::{LinearProgram, Relation};
use crate::model::{Model, Policy, RmdpInstance};
use crate::psd::project_policy;
use crate::table::SaTable;

/// `dJ/dpi(a|s) = d(s) Q(s, a) / (1 - gamma)`.
pub fn gradient_from_bundle(bundle: &EvalBundle, gamma: f64) -> SaTable {
    let q = &bundle.q;
    SaTable::from_fn(q.num_states(), q.num_actions(), |s, a| {
        bundle.state_occupancy[s] * q.get(s, a) / (1.0 - gamma)
    })
}

/// Exact policy gradient of `J_{c,P}` under the direct parameterization.
pub fn policy_gradient(model: &Model, policy: &Policy, instance: &RmdpInstance) -> Result<SaTable> {
    let bundle = evaluate_fixed(model, policy, instance)?;
    Ok(gradient_from_bundle(&bundle, instance.gamma))
}

/// Generators of the subdifferential: one gradient per active worst-case model.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientSet {
    pub vertices: Vec<SaTable>,
    pub active_models: Vec<usize>,
    pub robust_cost: f64,
}

impl SubgradientSet {
    /// Convex combination `sum_i w_i * vertex_i`.
    pub fn combine(&self, weights: &[f64]) -> SaTable {
        let v0 = &self.vertices[0];
        let mut out = SaTable::zeros(v0.num_states(), v0.num_actions());
        for (v, &w) in self.vertices.iter().zip(weights) {
            out.axpy(w, v);
        }
        out
    }

    pub fn average(&self) -> SaTable {
        let k = self.vertices.len();
        self.combine(&vec![1.0 / k as f64; k])
    }
}

pub fn subdifferential(instance: &RmdpInstance, policy: &Policy, active_tol: f64) -> Result<SubgradientSet> {
    subdifferential_with_cap(instance, policy, active_tol, DEFAULT_FLATTEN_CAP)
}

/// Like [`subdifferential`] with an explicit cap on flattened product sets.
pub fn subdifferential_with_cap(
    instance: &RmdpInstance,
    policy: &Policy,
    active_tol: f64,
    cap: usize,
) -> Result<SubgradientSet> {
    let wc = worst_case_set(instance, policy, active_tol, cap)?;
    let vertices = wc
        .bundles
        .iter()
        .map(|b| gradient_from_bundle(b, instance.gamma))
        .collect();
    Ok(SubgradientSet {
        vertices,
        active_models: wc.indices,
        robust_cost: wc.robust_cost,
    })
}

/// Per-state greedy regret `sum_{s,a} pi g - sum_s min_a g(s, a)`.
pub fn greedy_regret(policy: &Policy, g: &SaTable) -> f64 {
    let mut total = 0.0;
    for s in 0..g.num_states() {
        let row = g.row(s);
        let lin: f64 = policy.row(s).iter().zip(row).map(|(p, x)| p * x).sum();
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        total += lin - min;
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityGap {
    pub gap: f64,
    /// Weights over the subgradient vertices attaining the gap.
    pub alpha: Vec<f64>,
}

/// `G(pi) = min_{g in conv(vertices)} max_{pi'} <pi - pi', g>`.
///
/// With `L` the smallest vertex entry and `t_s = L + u_s`, this is the LP
/// `min sum_i alpha_i <pi, v_i> - sum_s u_s - S L` over `alpha` in the simplex
/// and `u >= 0` with `u_s <= sum_i alpha_i (v_i(s, a) - L)` for every `(s, a)`.
pub fn gap_for_vertices(policy: &Policy, vertices: &[SaTable]) -> Result<StationarityGap> {
    let k = vertices.len();
    if k == 0 {
        return Err(Error::EmptyUncertaintySet);
    }
    if vertices.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("subgradient vertex".into()));
    }
    if k == 1 {
        return Ok(StationarityGap {
            gap: greedy_regret(policy, &vertices[0]).max(0.0),
            alpha: vec![1.0],
        });
    }
    let (n, m) = (policy.num_states(), policy.num_actions());
    let floor = vertices
        .iter()
        .flat_map(|v| v.as_slice().iter().copied())
        .fold(f64::INFINITY, f64::min);
    let mut objective: Vec<f64> = vertices
        .iter()
        .map(|v| v.as_slice().iter().zip(policy.table().as_slice()).map(|(g, p)| g * p).sum())
        .collect();
    objective.extend(core::iter::repeat_n(-1.0, n));
    let mut lp = LinearProgram::minimize(objective);
    for s in 0..n {
        for a in 0..m {
            let mut row: Vec<f64> = vertices.iter().map(|v| -(v.get(s, a) - floor)).collect();
            row.extend((0..n).map(|t| if t == s { 1.0 } else { 0.0 }));
            lp.add_constraint(row, Relation::Le, 0.0)?;
        }
    }
    let mut simplex_row = vec![1.0; k];
    simplex_row.extend(core::iter::repeat(0.0).take(n));
    lp.add_constraint(simplex_row, Relation::Eq, 1.0)?;
    let sol = lp.solve()?;
    let mut alpha: Vec<f64> = sol.x[..k].iter().map(|x| x.max(0.0)).collect();
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|x| *x /= total);
    // Recompute from alpha directly rather than trusting the tableau value.
    let g = {
        let mut out = SaTable::zeros(n, m);
        for (v, &w) in vertices.iter().zip(&alpha) {
            out.axpy(w, v);
        }
        out
    };
    let gap = greedy_regret(policy, &g).min(sol.objective - n as f64 * floor);
    Ok(StationarityGap {
        gap: gap.max(0.0),
        alpha,
    })
}

pub fn stationarity_gap(instance: &RmdpInstance, policy: &Policy, active_tol: f64) -> Result<StationarityGap> {
    let sub = subdifferential(instance, policy, active_tol)?;
    gap_for_vertices(policy, &sub.vertices)
}

/// Smoothness constant `2 gamma A / (1 - gamma)^3` of a single-model objective.
pub fn smoothness_constant(gamma: f64, num_actions: usize) -> f64 {
    2.0 * gamma * num_actions as f64 / libm::pow(1.0 - gamma, 3.0)
}

/// `sqrt(4/(1-gamma) + 4 gamma A^2/(1-gamma)^7)`, the stationarity-rate constant.
pub fn stationarity_rate_constant(gamma: f64, num_actions: usize) -> f64 {
    let a = num_actions as f64;
    libm::sqrt(4.0 / (1.0 - gamma) + 4.0 * gamma * a * a / libm::pow(1.0 - gamma, 7.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub gamma: f64,
    pub num_states: usize,
    pub num_actions: usize,
    /// `l`
    pub smoothness: f64,
    /// `L`
    pub lipschitz: f64,
    /// `D`
    pub dominance: f64,
    /// `D'`
    pub moreau_d_prime: f64,
    /// `C`
    pub rate_c: f64,
    pub f_max: f64,
}

impl BoundConstants {
    /// `C T^{-1/4}`.
    pub fn rate_bound(&self, iterations: usize) -> f64 {
        self.rate_c * libm::pow(iterations as f64, -0.25)
    }

    /// Bound on the smallest Moreau-gradient norm after `iterations` steps with `eta = 1/sqrt(T)`.
    pub fn moreau_bound(&self, iterations: usize) -> f64 {
        libm::pow(iterations as f64, -0.25) * stationarity_rate_constant(self.gamma, self.num_actions)
    }
}

pub fn compute_constants(instance: &RmdpInstance) -> Result<BoundConstants> {
    let (s, a, gamma) = (instance.num_states, instance.num_actions, instance.gamma);
    let min_mu = instance.min_mu();
    if !(min_mu > 0.0) {
        return Err(Error::NotFullSupport {
            state: instance.mu.iter().position(|&m| m <= 0.0).unwrap_or(0),
        });
    }
    let sa = libm::sqrt(a as f64);
    let one_minus = 1.0 - gamma;
    let smoothness = smoothness_constant(gamma, a);
    let lipschitz = sa / (one_minus * one_minus);
    let dominance = 1.0 / (one_minus * min_mu);
    let moreau_d_prime =
        2.0 * dominance * libm::sqrt(s as f64) + 2.0 * smoothness * sa / (one_minus * one_minus);
    let rate_c = moreau_d_prime * stationarity_rate_constant(gamma, a);
    Ok(BoundConstants {
        gamma,
        num_states: s,
        num_actions: a,
        smoothness,
        lipschitz,
        dominance,
        moreau_d_prime,
        rate_c,
        f_max: 1.0 / one_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxConfig {
    /// Defaults to `1 / (2 l)`.
    pub nu: Option<f64>,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub active_tol: f64,
}

impl Default for ProxConfig {
    fn default() -> Self {
        ProxConfig {
            nu: None,
            inner_tol: 1e-8,
            max_inner: 200_000,
            active_tol: crate::eval::DEFAULT_ACTIVE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub prox_policy: Policy,
    /// `(anchor - prox) / nu`.
    pub moreau_grad: SaTable,
    pub moreau_grad_norm: f64,
    pub nu: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Approximate proximal point of `J_U` at `anchor`:
/// `argmin_{pi'} J_U(pi') + |pi' - anchor|^2 / (2 nu)`.
///
/// The objective is `(1/nu - l)`-strongly convex, so plain projected
/// subgradient descent with steps `2 / (mu (k + 1))` and `k`-weighted
/// averaging converges. Subgradients of `J_U` are the uniform average of
/// the active vertices. When `max_inner` is hit the current average is
/// returned with `converged = false`.
pub fn prox_point(instance: &RmdpInstance, anchor: &Policy, config: &ProxConfig) -> Result<ProxResult> {
    instance.check_policy(anchor)?;
    let ell = smoothness_constant(instance.gamma, instance.num_actions);
    let nu = match config.nu {
        Some(nu) => nu,
        None if ell > 0.0 => 1.0 / (2.0 * ell),
        None => 1.0,
    };
    if !(nu > 0.0 && nu * ell < 1.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "nu",
            reason: format!("must lie in (0, 1/l) = (0, {}), got {nu}", 1.0 / ell),
        });
    }
    if !(config.inner_tol > 0.0) || config.max_inner == 0 {
        return Err(Error::InvalidParameter {
            name: "inner_tol/max_inner",
            reason: "tolerance and iteration budget must be positive".into(),
        });
    }
    let strong = 1.0 / nu - ell;
    let mut x = anchor.clone();
    let mut avg = anchor.table().clone();
    let mut weight_sum = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=config.max_inner {
        iterations = k;
        let sub = subdifferential(instance, &x, config.active_tol)?;
        let mut g = sub.average();
        // Gradient of the quadratic term.
        for ((gi, xi), ai) in g
            .as_mut_slice()
            .iter_mut()
            .zip(x.table().as_slice())
            .zip(anchor.table().as_slice())
        {
            *gi += (xi - ai) / nu;
        }
        if !g.is_finite() {
            return Err(Error::NonFinite("prox subgradient".into()));
        }
        let step = 2.0 / (strong * (k as f64 + 1.0));
        let mut y = x.table().clone();
        y.axpy(-step, &g);
        x = project_policy(&y)?;
        // Weighted average with weights k.
        let w = k as f64;
        weight_sum += w;
        let frac = w / weight_sum;
        let mut change_sq = 0.0;
        for (a, xi) in avg.as_mut_slice().iter_mut().zip(x.table().as_slice()) {
            let d = frac * (xi - *a);
            *a += d;
            change_sq += d * d;
        }
        if k > 1 && libm::sqrt(change_sq) <= config.inner_tol {
            converged = true;
            break;
        }
    }
    let prox_policy = project_policy(&avg)?;
    let moreau_grad = SaTable::from_fn(anchor.num_states(), anchor.num_actions(), |s, a| {
        (anchor.prob(s, a) - prox_policy.prob(s, a)) / nu
    });
    let moreau_grad_norm = moreau_grad.l2_norm();
    Ok(ProxResult {
        prox_policy,
        moreau_grad,
        moreau_grad_norm,
        nu,
        converged,
        iterations,
    })
}
