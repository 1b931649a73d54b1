//! JSON instance schema.
//!
//! ```json
//! {"num_states": 2, "num_actions": 2, "mu": [0.5, 0.5], "gamma": 0.9,
//!  "uncertainty": {"kind": "finite", "models": [{"cost": [[..]], "kernel": [[[..]]]}]}}
//! ```
//!
//! `kind` is one of `finite`, `sa_rect_finite` (`costs`, `kernel_choices`
//! indexed `[s][a][choice][s']`), `r_rect` (`cost`, `phi` indexed `[s][a][i]`,
//! `factor_choices` indexed `[i][choice][s']`) or `kl_reg` (`cost`, `nominal`,
//! `tau`). Floats are written in shortest round-trip form, so a document read
//! and written again is byte-identical.

use std::path::Path;

use rmdp_core::model::{KlRegSet, RRectSet, SaRectSet};
use rmdp_core::{Kernel, Model, Policy, RmdpInstance, SaTable, UncertaintySet};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};

type Rows = Vec<Vec<f64>>;
type Cube = Vec<Vec<Vec<f64>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub num_states: usize,
    pub num_actions: usize,
    pub mu: Vec<f64>,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub strict_cost_bounds: bool,
    pub uncertainty: UncertaintyDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UncertaintyDoc {
    Finite {
        models: Vec<ModelDoc>,
    },
    SaRectFinite {
        costs: Vec<Rows>,
        kernel_choices: Vec<Vec<Rows>>,
    },
    RRect {
        cost: Rows,
        phi: Cube,
        factor_choices: Cube,
    },
    KlReg {
        cost: Rows,
        nominal: Cube,
        tau: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub cost: Rows,
    pub kernel: Cube,
}

fn table(rows: &[Vec<f64>], what: &str, n: usize, m: usize) -> Result<SaTable> {
    let t = SaTable::from_rows(rows).ok_or_else(|| LabError::usage(format!("{what}: ragged rows")))?;
    if t.num_states() != n || t.num_actions() != m {
        return Err(LabError::usage(format!(
            "{what}: expected {n}x{m}, found {}x{}",
            t.num_states(),
            t.num_actions()
        )));
    }
    Ok(t)
}

fn kernel(cube: &Cube, what: &str, n: usize, m: usize) -> Result<Kernel> {
    let ok = cube.len() == n && cube.iter().all(|r| r.len() == m && r.iter().all(|p| p.len() == n));
    if !ok {
        return Err(LabError::usage(format!("{what}: expected shape [{n}][{m}][{n}]")));
    }
    let flat = cube.iter().flatten().flatten().copied().collect();
    Ok(Kernel::from_flat(n, m, flat).expect("shape checked"))
}

impl InstanceDoc {
    pub fn from_instance(inst: &RmdpInstance) -> Self {
        let (n, m) = (inst.num_states, inst.num_actions);
        let uncertainty = match &inst.uncertainty {
            UncertaintySet::Finite(models) => UncertaintyDoc::Finite {
                models: models
                    .iter()
                    .map(|md| ModelDoc {
                        cost: md.cost.to_rows(),
                        kernel: md.kernel.to_nested(),
                    })
                    .collect(),
            },
            UncertaintySet::SaRectFinite(set) => UncertaintyDoc::SaRectFinite {
                costs: set.costs.iter().map(SaTable::to_rows).collect(),
                kernel_choices: set.choices.chunks(m).map(<[_]>::to_vec).collect(),
            },
            UncertaintySet::RRect(set) => UncertaintyDoc::RRect {
                cost: set.cost.to_rows(),
                phi: set.phi.chunks(m).map(<[_]>::to_vec).collect(),
                factor_choices: set.factor_choices.clone(),
            },
            UncertaintySet::KlReg(set) => UncertaintyDoc::KlReg {
                cost: set.cost.to_rows(),
                nominal: set.nominal.to_nested(),
                tau: set.tau,
            },
        };
        debug_assert!(n > 0);
        InstanceDoc {
            num_states: n,
            num_actions: m,
            mu: inst.mu.clone(),
            gamma: inst.gamma,
            state_labels: inst.state_labels.clone(),
            action_labels: inst.action_labels.clone(),
            strict_cost_bounds: inst.strict_cost_bounds,
            uncertainty,
        }
    }

    /// Converts to a validated instance.
    pub fn to_instance(&self) -> Result<RmdpInstance> {
        let (n, m) = (self.num_states, self.num_actions);
        let uncertainty = match &self.uncertainty {
            UncertaintyDoc::Finite { models } => UncertaintySet::Finite(
                models
                    .iter()
                    .enumerate()
                    .map(|(i, md)| {
                        Ok(Model::new(
                            table(&md.cost, &format!("models[{i}].cost"), n, m)?,
                            kernel(&md.kernel, &format!("models[{i}].kernel"), n, m)?,
                        ))
                    })
                    .collect::<Result<_>>()?,
            ),
            UncertaintyDoc::SaRectFinite { costs, kernel_choices } => {
                if kernel_choices.len() != n || kernel_choices.iter().any(|r| r.len() != m) {
                    return Err(LabError::usage(format!("kernel_choices: expected [{n}][{m}][..][{n}]")));
                }
                UncertaintySet::SaRectFinite(SaRectSet {
                    costs: costs
                        .iter()
                        .enumerate()
                        .map(|(i, c)| table(c, &format!("costs[{i}]"), n, m))
                        .collect::<Result<_>>()?,
                    choices: kernel_choices.iter().flatten().cloned().collect(),
                    num_actions: m,
                })
            }
            UncertaintyDoc::RRect { cost, phi, factor_choices } => {
                if phi.len() != n || phi.iter().any(|r| r.len() != m) {
                    return Err(LabError::usage(format!("phi: expected [{n}][{m}][r]")));
                }
                UncertaintySet::RRect(RRectSet {
                    cost: table(cost, "cost", n, m)?,
                    phi: phi.iter().flatten().cloned().collect(),
                    factor_choices: factor_choices.clone(),
                })
            }
            UncertaintyDoc::KlReg { cost, nominal, tau } => UncertaintySet::KlReg(KlRegSet {
                cost: table(cost, "cost", n, m)?,
                nominal: kernel(nominal, "nominal", n, m)?,
                tau: *tau,
            }),
        };
        let mut inst = RmdpInstance::new(n, m, self.mu.clone(), self.gamma, uncertainty)?;
        if let (Some(s), Some(a)) = (&self.state_labels, &self.action_labels) {
            inst = inst.with_labels(s.clone(), a.clone())?;
        } else if self.state_labels.is_some() || self.action_labels.is_some() {
            return Err(LabError::usage("state_labels and action_labels must be given together"));
        }
        Ok(inst.with_strict_cost_bounds(self.strict_cost_bounds)?)
    }
}

pub fn instance_to_json(inst: &RmdpInstance) -> String {
    let mut s = serde_json::to_string_pretty(&InstanceDoc::from_instance(inst)).expect("serializable");
    s.push('\n');
    s
}

pub fn instance_from_json(text: &str, origin: &str) -> Result<RmdpInstance> {
    let doc: InstanceDoc = serde_json::from_str(text).map_err(|source| LabError::Json {
        path: origin.to_string(),
        source,
    })?;
    doc.to_instance()
}

/// SHA-256 of the compact JSON form, as lowercase hex.
pub fn instance_hash(inst: &RmdpInstance) -> String {
    let compact = serde_json::to_vec(&InstanceDoc::from_instance(inst)).expect("serializable");
    hex_digest(&compact)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads `builtin:NAME` or a JSON file.
pub fn load_instance(spec: &str) -> Result<RmdpInstance> {
    match spec.strip_prefix("builtin:") {
        Some(name) => Ok(rmdp_core::zoo::builtin(name)?),
        None => instance_from_json(&read_text(Path::new(spec))?, spec),
    }
}

/// Policy from a name (`uniform`, `pi1`, `pi2`), `det:a0,a1,...`, or a JSON
/// file holding per-state probability rows.
pub fn load_policy(spec: &str, inst: &RmdpInstance) -> Result<Policy> {
    let (n, m) = (inst.num_states, inst.num_actions);
    let policy = match spec {
        "uniform" => Policy::uniform(n, m),
        "pi1" | "pi2" => {
            let a = if spec == "pi1" { 0 } else { 1 };
            if m < 2 {
                return Err(LabError::usage(format!("`{spec}` needs at least two actions")));
            }
            Policy::deterministic(m, &vec![a; n])
        }
        _ => {
            if let Some(list) = spec.strip_prefix("det:") {
                let actions = list
                    .split(',')
                    .map(|a| a.trim().parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| LabError::usage(format!("bad action list `{list}`: {e}")))?;
                if actions.len() != n || actions.iter().any(|&a| a >= m) {
                    return Err(LabError::usage(format!("`{spec}` needs {n} actions below {m}")));
                }
                Policy::deterministic(m, &actions)
            } else {
                let rows: Rows = serde_json::from_str(&read_text(Path::new(spec))?).map_err(|source| LabError::Json {
                    path: spec.to_string(),
                    source,
                })?;
                Policy::from_rows(&rows)?
            }
        }
    };
    inst.check_policy(&policy)?;
    Ok(policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rmdp_core::zoo::{self, RandomSpec, RandomStructure};

    fn roundtrip(inst: &RmdpInstance) {
        let text = instance_to_json(inst);
        let back = instance_from_json(&text, "memory").unwrap();
        assert_eq!(&back, inst);
        assert_eq!(instance_to_json(&back), text);
    }

    #[test]
    fn builtins_roundtrip() {
        for name in zoo::BUILTIN_NAMES {
            roundtrip(&zoo::builtin(name).unwrap());
        }
    }

    #[test]
    fn random_structures_roundtrip() {
        for structure in [
            RandomStructure::Finite,
            RandomStructure::SaRect,
            RandomStructure::RRect { factors: 3 },
        ] {
            roundtrip(&zoo::random_instance(3, &RandomSpec::new(3, 2, 2, structure)).unwrap());
        }
        roundtrip(&zoo::random_kl_instance(4, 3, 2, 0.7, 0.9).unwrap());
    }

    #[test]
    fn rejects_bad_shapes_and_unknown_kinds() {
        let mut doc = InstanceDoc::from_instance(&zoo::builtin("s-rect-two-state").unwrap());
        doc.mu = vec![1.0];
        assert!(doc.to_instance().is_err());
        let text = r#"{"num_states":1,"num_actions":1,"mu":[1],"gamma":0.5,"uncertainty":{"kind":"ellipsoid"}}"#;
        assert!(matches!(instance_from_json(text, "x"), Err(LabError::Json { .. })));
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = zoo::builtin("counterexample").unwrap();
        let mut b = a.clone();
        b.gamma = 0.8;
        assert_eq!(instance_hash(&a), instance_hash(&a.clone()));
        assert_ne!(instance_hash(&a), instance_hash(&b));
        assert_eq!(instance_hash(&a).len(), 64);
    }

    #[test]
    fn policy_specs() {
        let inst = zoo::builtin("counterexample").unwrap();
        assert_eq!(load_policy("pi2", &inst).unwrap(), zoo::pi_tilde2());
        assert_eq!(load_policy("det:0,0,0", &inst).unwrap(), zoo::pi_tilde1());
        assert!(load_policy("det:0,2,0", &inst).is_err());
        assert!(load_policy("det:0,0", &inst).is_err());
    }
}
