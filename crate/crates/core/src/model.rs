//! Instances, models, uncertainty sets and policies.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::table::{Kernel, SaTable};

/// Probability vectors must sum to one within this tolerance.
pub const DISTRIBUTION_TOL: f64 = 1e-12;

fn check_distribution(what: impl FnOnce() -> String, p: &[f64]) -> Result<()> {
    let sum: f64 = p.iter().sum();
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    let finite = p.iter().all(|x| x.is_finite());
    if !finite || min < 0.0 || (sum - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::InvalidDistribution {
            what: what(),
            sum,
            min,
        });
    }
    Ok(())
}

fn check_len(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension {
            what: what.to_string(),
            expected,
            found,
        });
    }
    Ok(())
}

/// A cost function paired with a transition kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub cost: SaTable,
    pub kernel: Kernel,
}

impl Model {
    pub fn new(cost: SaTable, kernel: Kernel) -> Self {
        Self { cost, kernel }
    }

    pub fn num_states(&self) -> usize {
        self.cost.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.cost.num_actions()
    }

    fn validate(&self, num_states: usize, num_actions: usize, strict: bool, label: &str) -> Result<()> {
        check_cost(&self.cost, num_states, num_actions, strict, label)?;
        check_kernel(&self.kernel, num_states, num_actions, label)
    }
}

fn check_cost(cost: &SaTable, num_states: usize, num_actions: usize, strict: bool, label: &str) -> Result<()> {
    check_len(&format!("{label} cost states"), num_states, cost.num_states())?;
    check_len(&format!("{label} cost actions"), num_actions, cost.num_actions())?;
    for s in 0..num_states {
        for a in 0..num_actions {
            let c = cost.get(s, a);
            if !c.is_finite() {
                return Err(Error::InvalidCost {
                    state: s,
                    action: a,
                    value: c,
                    reason: "finiteness",
                });
            }
            if strict && !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidCost {
                    state: s,
                    action: a,
                    value: c,
                    reason: "the strict [0, 1] cost range",
                });
            }
        }
    }
    Ok(())
}

fn check_kernel(kernel: &Kernel, num_states: usize, num_actions: usize, label: &str) -> Result<()> {
    check_len(&format!("{label} kernel states"), num_states, kernel.num_states())?;
    check_len(&format!("{label} kernel actions"), num_actions, kernel.num_actions())?;
    for s in 0..num_states {
        for a in 0..num_actions {
            check_distribution(|| format!("{label} kernel row ({s}, {a})"), kernel.row(s, a))?;
        }
    }
    Ok(())
}

/// Finite sa-rectangular set: a list of cost tables times the product over
/// `(s, a)` of finite candidate rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SaRectSet {
    pub costs: Vec<SaTable>,
    /// Candidate next-state distributions, indexed `[s * A + a][choice]`.
    pub choices: Vec<Vec<Vec<f64>>>,
    pub num_actions: usize,
}

impl SaRectSet {
    pub fn choices_at(&self, s: usize, a: usize) -> &[Vec<f64>] {
        &self.choices[s * self.num_actions + a]
    }

    /// Number of product kernels (saturating).
    pub fn num_products(&self) -> u128 {
        self.choices
            .iter()
            .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
    }

    /// Kernel that picks `selection[s * A + a]` at every pair.
    pub fn kernel_for(&self, selection: &[usize]) -> Kernel {
        let num_states = self.choices.len() / self.num_actions.max(1);
        Kernel::from_row_fn(num_states, self.num_actions, |s, a| {
            let idx = s * self.num_actions + a;
            &self.choices[idx][selection[idx]]
        })
    }
}

/// Finite r-rectangular set `P(s'|s,a) = sum_i phi_i(s,a) w_i(s')` with each
/// factor `w_i` drawn from its own finite list.
#[derive(Debug, Clone, PartialEq)]
pub struct RRectSet {
    pub cost: SaTable,
    /// Factor weights indexed `[s * A + a][i]`.
    pub phi: Vec<Vec<f64>>,
    /// Candidate factors indexed `[i][choice][s']`.
    pub factor_choices: Vec<Vec<Vec<f64>>>,
}

impl RRectSet {
    pub fn num_factors(&self) -> usize {
        self.factor_choices.len()
    }

    pub fn num_products(&self) -> u128 {
        self.factor_choices
            .iter()
            .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
    }

    pub fn kernel_for(&self, selection: &[usize]) -> Kernel {
        let num_states = self.cost.num_states();
        let num_actions = self.cost.num_actions();
        let mut k = Kernel::zeros(num_states, num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                let weights = &self.phi[s * num_actions + a];
                let row = k.row_mut(s, a);
                for (i, &w) in weights.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for (dst, &p) in row.iter_mut().zip(&self.factor_choices[i][selection[i]]) {
                        *dst += w * p;
                    }
                }
            }
        }
        k
    }
}

/// KL-regularized adversary around a nominal kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KlRegSet {
    pub cost: SaTable,
    pub nominal: Kernel,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    Finite(Vec<Model>),
    SaRectFinite(SaRectSet),
    RRect(RRectSet),
    KlReg(KlRegSet),
}

impl UncertaintySet {
    pub fn kind(&self) -> &'static str {
        match self {
            UncertaintySet::Finite(_) => "finite",
            UncertaintySet::SaRectFinite(_) => "sa_rect_finite",
            UncertaintySet::RRect(_) => "r_rect",
            UncertaintySet::KlReg(_) => "kl_reg",
        }
    }

    /// Number of models in the flattened set, if finite.
    pub fn flat_size(&self) -> Option<u128> {
        match self {
            UncertaintySet::Finite(m) => Some(m.len() as u128),
            UncertaintySet::SaRectFinite(set) => {
                Some((set.costs.len() as u128).saturating_mul(set.num_products()))
            }
            UncertaintySet::RRect(set) => Some(set.num_products()),
            UncertaintySet::KlReg(_) => None,
        }
    }

    /// Enumerates the set as an explicit model list.
    ///
    /// Products are enumerated in mixed radix with the lowest `(s, a)` pair
    /// (or factor) varying fastest; for sa-rectangular sets the cost index is
    /// the outermost loop.
    pub fn flatten(&self, cap: usize) -> Result<Vec<Model>> {
        let count = self
            .flat_size()
            .ok_or_else(|| Error::Unsupported("a KL-regularized set has no finite enumeration".to_string()))?;
        if count > cap as u128 {
            return Err(Error::FlattenCap { count, cap });
        }
        match self {
            UncertaintySet::Finite(models) => Ok(models.clone()),
            UncertaintySet::SaRectFinite(set) => {
                let radices: Vec<usize> = set.choices.iter().map(Vec::len).collect();
                let kernels: Vec<Kernel> = MixedRadix::new(radices).map(|sel| set.kernel_for(&sel)).collect();
                Ok(set
                    .costs
                    .iter()
                    .flat_map(|c| kernels.iter().map(move |k| Model::new(c.clone(), k.clone())))
                    .collect())
            }
            UncertaintySet::RRect(set) => {
                let radices: Vec<usize> = set.factor_choices.iter().map(Vec::len).collect();
                Ok(MixedRadix::new(radices)
                    .map(|sel| Model::new(set.cost.clone(), set.kernel_for(&sel)))
                    .collect())
            }
            UncertaintySet::KlReg(_) => unreachable!(),
        }
    }
}

/// Iterator over all index tuples of a mixed-radix counter, first digit fastest.
#[derive(Debug, Clone)]
pub struct MixedRadix {
    radices: Vec<usize>,
    current: Option<Vec<usize>>,
}

impl MixedRadix {
    pub fn new(radices: Vec<usize>) -> Self {
        let current = if radices.contains(&0) {
            None
        } else {
            Some(vec![0; radices.len()])
        };
        Self { radices, current }
    }
}

impl Iterator for MixedRadix {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let cur = self.current.as_mut().unwrap();
        let mut i = 0;
        loop {
            if i == cur.len() {
                self.current = None;
                break;
            }
            cur[i] += 1;
            if cur[i] < self.radices[i] {
                break;
            }
            cur[i] = 0;
            i += 1;
        }
        Some(out)
    }
}

/// A tabular robust MDP `(S, A, mu, gamma, U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RmdpInstance {
    pub num_states: usize,
    pub num_actions: usize,
    pub mu: Vec<f64>,
    pub gamma: f64,
    pub uncertainty: UncertaintySet,
    pub state_labels: Option<Vec<String>>,
    pub action_labels: Option<Vec<String>>,
    /// Enforce costs in `[0, 1]` during validation.
    pub strict_cost_bounds: bool,
}

impl RmdpInstance {
    /// Builds and validates an instance with arbitrary finite costs.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        mu: Vec<f64>,
        gamma: f64,
        uncertainty: UncertaintySet,
    ) -> Result<Self> {
        let inst = Self {
            num_states,
            num_actions,
            mu,
            gamma,
            uncertainty,
            state_labels: None,
            action_labels: None,
            strict_cost_bounds: false,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_labels(mut self, states: Vec<String>, actions: Vec<String>) -> Result<Self> {
        self.state_labels = Some(states);
        self.action_labels = Some(actions);
        self.validate()?;
        Ok(self)
    }

    pub fn with_strict_cost_bounds(mut self, strict: bool) -> Result<Self> {
        self.strict_cost_bounds = strict;
        self.validate()?;
        Ok(self)
    }

    pub fn has_full_support(&self) -> bool {
        self.mu.iter().all(|&m| m > 0.0)
    }

    pub fn min_mu(&self) -> f64 {
        self.mu.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Checks every structural invariant of the instance.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.num_states, self.num_actions);
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "num_states",
                reason: "must be positive".to_string(),
            });
        }
        if m == 0 {
            return Err(Error::InvalidParameter {
                name: "num_actions",
                reason: "must be positive".to_string(),
            });
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidDiscount(self.gamma));
        }
        check_len("mu", n, self.mu.len())?;
        check_distribution(|| "mu".to_string(), &self.mu)?;
        if let Some(labels) = &self.state_labels {
            check_len("state labels", n, labels.len())?;
        }
        if let Some(labels) = &self.action_labels {
            check_len("action labels", m, labels.len())?;
        }
        let strict = self.strict_cost_bounds;
        match &self.uncertainty {
            UncertaintySet::Finite(models) => {
                if models.is_empty() {
                    return Err(Error::EmptyUncertaintySet);
                }
                for (i, model) in models.iter().enumerate() {
                    model.validate(n, m, strict, &format!("model {i}"))?;
                }
            }
            UncertaintySet::SaRectFinite(set) => {
                if set.costs.is_empty() {
                    return Err(Error::EmptyUncertaintySet);
                }
                check_len("sa-rect action count", m, set.num_actions)?;
                for (i, c) in set.costs.iter().enumerate() {
                    check_cost(c, n, m, strict, &format!("cost {i}"))?;
                }
                check_len("sa-rect choice table", n * m, set.choices.len())?;
                for (idx, list) in set.choices.iter().enumerate() {
                    if list.is_empty() {
                        return Err(Error::EmptyUncertaintySet);
                    }
                    for (j, p) in list.iter().enumerate() {
                        check_len("sa-rect candidate", n, p.len())?;
                        check_distribution(
                            || format!("sa-rect candidate {j} at ({}, {})", idx / m, idx % m),
                            p,
                        )?;
                    }
                }
            }
            UncertaintySet::RRect(set) => {
                check_cost(&set.cost, n, m, strict, "r-rect")?;
                let r = set.num_factors();
                if r == 0 {
                    return Err(Error::EmptyUncertaintySet);
                }
                check_len("r-rect phi table", n * m, set.phi.len())?;
                for (idx, w) in set.phi.iter().enumerate() {
                    check_len("r-rect phi row", r, w.len())?;
                    check_distribution(|| format!("phi({}, {})", idx / m, idx % m), w)?;
                }
                for (i, list) in set.factor_choices.iter().enumerate() {
                    if list.is_empty() {
                        return Err(Error::EmptyUncertaintySet);
                    }
                    for (j, w) in list.iter().enumerate() {
                        check_len("r-rect factor", n, w.len())?;
                        check_distribution(|| format!("factor {i} candidate {j}"), w)?;
                    }
                }
            }
            UncertaintySet::KlReg(set) => {
                check_cost(&set.cost, n, m, strict, "kl")?;
                check_kernel(&set.nominal, n, m, "nominal")?;
                if !(set.tau > 0.0 && set.tau.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "tau",
                        reason: format!("must be positive and finite, got {}", set.tau),
                    });
                }
            }
        }
        Ok(())
    }

    /// Checks that `policy` has this instance's shape.
    pub fn check_policy(&self, policy: &Policy) -> Result<()> {
        check_len("policy states", self.num_states, policy.num_states())?;
        check_len("policy actions", self.num_actions, policy.num_actions())
    }

    pub fn check_model(&self, model: &Model) -> Result<()> {
        check_len("model cost states", self.num_states, model.cost.num_states())?;
        check_len("model cost actions", self.num_actions, model.cost.num_actions())?;
        check_len("model kernel states", self.num_states, model.kernel.num_states())?;
        check_len("model kernel actions", self.num_actions, model.kernel.num_actions())
    }
}

/// A stationary Markov policy in the direct parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy(SaTable);

impl Policy {
    /// Validates row-stochasticity.
    pub fn new(table: SaTable) -> Result<Self> {
        for s in 0..table.num_states() {
            check_distribution(|| format!("policy row {s}"), table.row(s))?;
        }
        Ok(Self(table))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let table = SaTable::from_rows(rows).ok_or_else(|| Error::Dimension {
            what: "policy rows".to_string(),
            expected: rows.first().map_or(0, Vec::len),
            found: rows.iter().map(Vec::len).find(|&l| l != rows[0].len()).unwrap_or(0),
        })?;
        Self::new(table)
    }

    /// Uniform distribution over actions in every state.
    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self(SaTable::filled(num_states, num_actions, 1.0 / num_actions as f64))
    }

    /// Deterministic policy choosing `actions[s]` in state `s`.
    pub fn deterministic(num_actions: usize, actions: &[usize]) -> Self {
        Self(SaTable::from_fn(actions.len(), num_actions, |s, a| {
            if actions[s] == a {
                1.0
            } else {
                0.0
            }
        }))
    }

    /// Wraps a table the caller guarantees is row-stochastic.
    pub(crate) fn from_table_unchecked(table: SaTable) -> Self {
        Self(table)
    }

    pub fn table(&self) -> &SaTable {
        &self.0
    }

    pub fn into_table(self) -> SaTable {
        self.0
    }

    pub fn num_states(&self) -> usize {
        self.0.num_states()
    }

    pub fn num_actions(&self) -> usize {
        self.0.num_actions()
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.0.get(s, a)
    }

    pub fn row(&self, s: usize) -> &[f64] {
        self.0.row(s)
    }

    /// Largest absolute entrywise difference.
    pub fn linf_distance(&self, other: &Policy) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    pub fn l2_distance(&self, other: &Policy) -> f64 {
        self.0.l2_distance(&other.0)
    }

    /// Largest deviation of any row sum from one, or most negative entry.
    pub fn simplex_violation(&self) -> f64 {
        self.0
            .rows()
            .map(|r| {
                let sum_err = (r.iter().sum::<f64>() - 1.0).abs();
                let neg = r.iter().copied().fold(0.0, |m: f64, x| m.max(-x));
                sum_err.max(neg)
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_radix_enumerates_all_tuples() {
        let all: Vec<Vec<usize>> = MixedRadix::new(vec![2, 3]).collect();
        assert_eq!(all.len(), 6);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![1, 0]);
        assert_eq!(all[5], vec![1, 2]);
        assert_eq!(MixedRadix::new(vec![]).count(), 1);
        assert_eq!(MixedRadix::new(vec![2, 0]).count(), 0);
    }

    fn one_state(mu: Vec<f64>, gamma: f64) -> Result<RmdpInstance> {
        let model = Model::new(SaTable::filled(1, 1, 1.0), Kernel::deterministic(1, 1, |_, _| 0));
        RmdpInstance::new(1, 1, mu, gamma, UncertaintySet::Finite(vec![model]))
    }

    #[test]
    fn rejects_bad_discount_and_mu() {
        assert!(matches!(one_state(vec![1.0], 1.0), Err(Error::InvalidDiscount(_))));
        assert!(matches!(one_state(vec![0.9], 0.5), Err(Error::InvalidDistribution { .. })));
        assert!(one_state(vec![1.0], 0.0).is_ok());
    }

    #[test]
    fn strict_cost_flag_rejects_negative_costs() {
        let model = Model::new(SaTable::filled(1, 1, -2.0), Kernel::deterministic(1, 1, |_, _| 0));
        let inst = RmdpInstance::new(1, 1, vec![1.0], 0.5, UncertaintySet::Finite(vec![model])).unwrap();
        assert!(matches!(
            inst.with_strict_cost_bounds(true),
            Err(Error::InvalidCost { .. })
        ));
    }

    #[test]
    fn empty_finite_set_is_rejected() {
        let r = RmdpInstance::new(1, 1, vec![1.0], 0.5, UncertaintySet::Finite(vec![]));
        assert_eq!(r, Err(Error::EmptyUncertaintySet));
    }

    #[test]
    fn policy_validation() {
        assert!(Policy::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).is_ok());
        assert!(Policy::from_rows(&[vec![0.6, 0.5]]).is_err());
        assert!(Policy::from_rows(&[vec![1.5, -0.5]]).is_err());
    }
}
