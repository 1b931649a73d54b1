//! Projected subgradient descent over directly parameterized policies.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::DEFAULT_ACTIVE_TOL;
use crate::model::{Policy, RmdpInstance};
use crate::rng::seeded;
use crate::subgrad::{prox_point, subdifferential, BoundConstants, ProxConfig};
use crate::table::SaTable;

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidParameter {
            name: "v",
            reason: "cannot project an empty vector".into(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("projection input".into()));
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    Ok(v.iter().map(|x| (x - theta).max(0.0)).collect())
}

/// Row-wise simplex projection of a state-action table.
pub fn project_policy(table: &SaTable) -> Result<Policy> {
    let mut out = SaTable::zeros(table.num_states(), table.num_actions());
    for s in 0..table.num_states() {
        let row = project_simplex(table.row(s))?;
        out.row_mut(s).copy_from_slice(&row);
    }
    Ok(Policy::from_table_unchecked(out))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Constant(f64),
    /// `eta = 1 / sqrt(T)`.
    InverseSqrtT,
}

impl StepRule {
    pub fn step(&self, iterations: usize) -> f64 {
        match *self {
            StepRule::Constant(eta) => eta,
            StepRule::InverseSqrtT => 1.0 / libm::sqrt(iterations as f64),
        }
    }
}

/// Which element of the subdifferential to follow when several models are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    /// Gradient of the lowest-index active model.
    FirstActive,
    /// Uniform average of the active vertices.
    #[default]
    Average,
    /// One active vertex drawn uniformly from a seeded ChaCha8 stream.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdConfig {
    pub iterations: usize,
    pub step_rule: StepRule,
    pub tie_break: TieBreak,
    pub record_every: usize,
    /// Evaluate the proximal point at recorded iterates (expensive).
    pub track_moreau: bool,
    pub active_tol: f64,
    /// Iterates are compared against this policy in the sup norm.
    pub reference: Option<Policy>,
    pub prox: ProxConfig,
}

impl Default for PsdConfig {
    fn default() -> Self {
        PsdConfig {
            iterations: 1000,
            step_rule: StepRule::InverseSqrtT,
            tie_break: TieBreak::Average,
            record_every: 1,
            track_moreau: false,
            active_tol: DEFAULT_ACTIVE_TOL,
            reference: None,
            prox: ProxConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdRecord {
    pub t: usize,
    pub policy: Policy,
    pub robust_cost: f64,
    /// `(active model index, weight)` pairs of the step taken from this iterate.
    pub subgradient: Vec<(usize, f64)>,
    pub distance_to_reference: Option<f64>,
    pub moreau_grad_norm: Option<f64>,
    /// `|pi_t - prox(pi_t)|_2` and the `nu` used, when Moreau tracking is on.
    pub prox_distance: Option<f64>,
    pub nu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdTrace {
    pub iterations: usize,
    pub step: f64,
    pub records: Vec<PsdRecord>,
    /// Robust cost of every iterate `pi_0, ..., pi_T`.
    pub costs: Vec<f64>,
    pub best_cost: f64,
    pub best_iterate: usize,
    pub min_moreau_grad_norm: Option<f64>,
    /// Largest sup-norm distance to the reference over all iterates.
    pub max_distance_to_reference: Option<f64>,
    pub final_policy: Policy,
}

/// Runs `pi_{t+1} = proj(pi_t - eta g_t)` for `T` steps.
pub fn psd_run(instance: &RmdpInstance, initial: &Policy, config: &PsdConfig) -> Result<PsdTrace> {
    instance.check_policy(initial)?;
    let t_max = config.iterations;
    if t_max == 0 || config.record_every == 0 {
        return Err(Error::InvalidParameter {
            name: "iterations/record_every",
            reason: "must be at least 1".into(),
        });
    }
    let eta = config.step_rule.step(t_max);
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "eta",
            reason: format!("step size must be positive, got {eta}"),
        });
    }
    if let Some(r) = &config.reference {
        instance.check_policy(r)?;
    }
    let mut rng = match config.tie_break {
        TieBreak::Random(seed) => Some(seeded(seed)),
        _ => None,
    };
    let mut pi = initial.clone();
    let mut records = Vec::new();
    let mut costs = Vec::with_capacity(t_max + 1);
    let mut max_dist: Option<f64> = None;
    let mut min_moreau: Option<f64> = None;
    for t in 0..=t_max {
        let sub = subdifferential(instance, &pi, config.active_tol)?;
        if !sub.robust_cost.is_finite() {
            return Err(Error::NonFinite(format!("robust cost at iterate {t}")));
        }
        costs.push(sub.robust_cost);
        let dist = config.reference.as_ref().map(|r| pi.linf_distance(r));
        if let Some(d) = dist {
            max_dist = Some(max_dist.map_or(d, |m: f64| m.max(d)));
        }
        let (g, weights) = if t < t_max {
            let k = sub.vertices.len();
            match config.tie_break {
                TieBreak::FirstActive => (sub.vertices[0].clone(), vec![(sub.active_models[0], 1.0)]),
                TieBreak::Average => (
                    sub.average(),
                    sub.active_models.iter().map(|&i| (i, 1.0 / k as f64)).collect(),
                ),
                TieBreak::Random(_) => {
                    let j = rng.as_mut().expect("seeded for random tie-break").gen_range(0..k);
                    (sub.vertices[j].clone(), vec![(sub.active_models[j], 1.0)])
                }
            }
        } else {
            (SaTable::zeros(0, 0), Vec::new())
        };
        if t % config.record_every == 0 || t == t_max {
            let (norm, prox_dist, nu) = if config.track_moreau {
                let prox = prox_point(instance, &pi, &config.prox)?;
                let d = pi.l2_distance(&prox.prox_policy);
                min_moreau = Some(min_moreau.map_or(prox.moreau_grad_norm, |m: f64| m.min(prox.moreau_grad_norm)));
                (Some(prox.moreau_grad_norm), Some(d), Some(prox.nu))
            } else {
                (None, None, None)
            };
            records.push(PsdRecord {
                t,
                policy: pi.clone(),
                robust_cost: sub.robust_cost,
                subgradient: weights,
                distance_to_reference: dist,
                moreau_grad_norm: norm,
                prox_distance: prox_dist,
                nu,
            });
        }
        if t == t_max {
            break;
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("subgradient at iterate {t}")));
        }
        let mut y = pi.table().clone();
        y.axpy(-eta, &g);
        pi = project_policy(&y)?;
    }
    let (best_iterate, best_cost) = costs
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |b, (i, c)| if c < b.1 { (i, c) } else { b });
    Ok(PsdTrace {
        iterations: t_max,
        step: eta,
        records,
        costs,
        best_cost,
        best_iterate,
        min_moreau_grad_norm: min_moreau,
        max_distance_to_reference: max_dist,
        final_policy: pi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoreauReport {
    pub min_norm: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Compares the smallest recorded Moreau-gradient norm with
/// `T^{-1/4} sqrt(4/(1-gamma) + 4 gamma A^2/(1-gamma)^7)`.
pub fn moreau_decay_report(trace: &PsdTrace, constants: &BoundConstants) -> Result<MoreauReport> {
    let min_norm = trace.min_moreau_grad_norm.ok_or_else(|| Error::InvalidParameter {
        name: "trace",
        reason: "recorded without Moreau tracking".into(),
    })?;
    let bound = constants.moreau_bound(trace.iterations);
    Ok(MoreauReport {
        min_norm,
        bound,
        holds: min_norm <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_point_is_fixed() {
        let v = [0.2, 0.5, 0.3];
        let p = project_simplex(&v).unwrap();
        for (a, b) in p.iter().zip(&v) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_two_coordinates() {
        let p = project_simplex(&[0.9, 0.3]).unwrap();
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn dominant_coordinate_saturates() {
        assert_eq!(project_simplex(&[5.0, -3.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn ties_are_symmetric() {
        let p = project_simplex(&[2.0, 2.0, -1.0]).unwrap();
        assert_eq!(p[0], p[1]);
        assert!((p[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_and_nonfinite_inputs() {
        assert!(project_simplex(&[]).is_err());
        assert!(project_simplex(&[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn projection_touches_only_the_perturbed_row() {
        let pol = Policy::from_rows(&[vec![0.25, 0.75], vec![0.6, 0.4]]).unwrap();
        let mut t = pol.table().clone();
        t.set(1, 0, 3.0);
        let out = project_policy(&t).unwrap();
        assert_eq!(out.row(0), pol.row(0));
        assert_eq!(out.row(1), &[1.0, 0.0]);
    }

    #[test]
    fn step_rules() {
        assert_eq!(StepRule::Constant(0.1).step(10), 0.1);
        assert_eq!(StepRule::InverseSqrtT.step(100), 0.1);
    }
}
