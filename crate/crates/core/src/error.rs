use alloc::string::String;

use crate::hardness::CnfError;
use crate::lp::LpError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("{what} is not a probability distribution (sum = {sum}, min = {min})")]
    InvalidDistribution { what: String, sum: f64, min: f64 },
    #[error("discount factor {0} is outside [0, 1)")]
    InvalidDiscount(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("uncertainty set is empty")]
    EmptyUncertaintySet,
    #[error("cost entry {value} at ({state}, {action}) violates {reason}")]
    InvalidCost {
        state: usize,
        action: usize,
        value: f64,
        reason: &'static str,
    },
    #[error(
        "initial distribution lacks full support (mu({state}) = 0); \
         the dominance constant requires that the initial distribution mu has full support"
    )]
    NotFullSupport { state: usize },
    #[error("flattening would produce {count} models, above the cap of {cap}; use the structured evaluator")]
    FlattenCap { count: u128, cap: usize },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
    #[error(transparent)]
    Cnf(#[from] CnfError),
}
