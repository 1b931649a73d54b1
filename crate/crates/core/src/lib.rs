//! Tabular robust Markov decision processes.
//!
//! Exact evaluation under finite, sa-rectangular, r-rectangular and
//! KL-regularized uncertainty, the Danskin subdifferential of the robust
//! cost, projected subgradient descent over directly parameterized
//! policies, the 3-SAT reductions, and numerical checks of the two
//! uniqueness conditions that restore subgradient dominance.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command-line driver live in `rmdp-lab`.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dominance;
pub mod error;
pub mod eval;
pub mod hardness;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod psd;
pub mod rng;
pub mod subgrad;
pub mod table;
pub mod zoo;

pub use error::{Error, Result};
pub use eval::{evaluate_fixed, robust_cost, robust_cost_finite, EvalBundle};
pub use model::{
    KlRegSet, Model, Policy, RRectSet, RmdpInstance, SaRectSet, UncertaintySet,
};
pub use table::{Kernel, SaTable};
