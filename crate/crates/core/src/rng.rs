//! Seeded sampling helpers.
//!
//! Every random quantity in the crate comes from [`ChaCha8Rng`] seeded with
//! `seed_from_u64`, so streams are identical across platforms and releases
//! of this crate.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

use crate::model::Policy;
use crate::table::SaTable;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform sample from the probability simplex (Dirichlet(1, ..., 1)) via
/// normalized exponentials.
pub fn dirichlet_ones<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            // gen() is in [0, 1), so 1 - u is in (0, 1].
            let u: f64 = rng.gen();
            -libm::log(1.0 - u)
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        for x in &mut w {
            *x /= total;
        }
    } else {
        w.iter_mut().for_each(|x| *x = 1.0 / n as f64);
    }
    w
}

/// Policy with independent Dirichlet(1, ..., 1) rows.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, num_states: usize, num_actions: usize) -> Policy {
    let mut t = SaTable::zeros(num_states, num_actions);
    for s in 0..num_states {
        let row = dirichlet_ones(rng, num_actions);
        t.row_mut(s).copy_from_slice(&row);
    }
    Policy::from_table_unchecked(t)
}

/// Uniform draw in `[lo, hi)`.
pub fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}
