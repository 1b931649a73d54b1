//! Dense state-action tables and transition kernels.

use alloc::vec;
use alloc::vec::Vec;

/// A real-valued table indexed by (state, action), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SaTable {
    num_states: usize,
    num_actions: usize,
    data: Vec<f64>,
}

impl SaTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::filled(num_states, num_actions, 0.0)
    }

    pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self {
            num_states,
            num_actions,
            data: vec![value; num_states * num_actions],
        }
    }

    /// Builds a table from a flat row-major buffer. Returns `None` on a length mismatch.
    pub fn from_flat(num_states: usize, num_actions: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == num_states * num_actions).then_some(Self {
            num_states,
            num_actions,
            data,
        })
    }

    /// Builds a table from per-state rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let num_actions = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_actions) {
            return None;
        }
        Some(Self {
            num_states: rows.len(),
            num_actions,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_fn(num_states: usize, num_actions: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                data.push(f(s, a));
            }
        }
        Self {
            num_states,
            num_actions,
            data,
        }
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.data[s * self.num_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.data[s * self.num_actions + a] = value;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.num_actions..(s + 1) * self.num_actions]
    }

    #[inline]
    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.data[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.num_actions.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn same_shape(&self, other: &SaTable) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }

    /// Entrywise `self + scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &SaTable) {
        debug_assert!(self.same_shape(other));
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += scale * y;
        }
    }

    pub fn max_abs_diff(&self, other: &SaTable) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    pub fn l2_distance(&self, other: &SaTable) -> f64 {
        libm::sqrt(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>(),
        )
    }

    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum::<f64>())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Transition kernel `P(s' | s, a)` stored as `[s][a][s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    num_states: usize,
    num_actions: usize,
    data: Vec<f64>,
}

impl Kernel {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            data: vec![0.0; num_states * num_actions * num_states],
        }
    }

    pub fn from_flat(num_states: usize, num_actions: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == num_states * num_actions * num_states).then_some(Self {
            num_states,
            num_actions,
            data,
        })
    }

    /// Deterministic kernel where `(s, a)` moves to `next(s, a)` with probability one.
    pub fn deterministic(
        num_states: usize,
        num_actions: usize,
        next: impl Fn(usize, usize) -> usize,
    ) -> Self {
        let mut k = Self::zeros(num_states, num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                let t = next(s, a);
                k.row_mut(s, a)[t] = 1.0;
            }
        }
        k
    }

    /// Kernel whose `(s, a)` row is `row(s, a)`.
    pub fn from_row_fn<'a>(
        num_states: usize,
        num_actions: usize,
        row: impl Fn(usize, usize) -> &'a [f64],
    ) -> Self {
        let mut k = Self::zeros(num_states, num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                k.row_mut(s, a).copy_from_slice(row(s, a));
            }
        }
        k
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.num_states;
        let start = (s * self.num_actions + a) * n;
        &self.data[start..start + n]
    }

    #[inline]
    pub fn row_mut(&mut self, s: usize, a: usize) -> &mut [f64] {
        let n = self.num_states;
        let start = (s * self.num_actions + a) * n;
        &mut self.data[start..start + n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Nested `[s][a][s']` representation.
    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_states)
            .map(|s| (0..self.num_actions).map(|a| self.row(s, a).to_vec()).collect())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Kernel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    /// Relabels states through the permutation `perm` (old index -> new index).
    pub fn permute_states(&self, perm: &[usize]) -> Kernel {
        let mut k = Kernel::zeros(self.num_states, self.num_actions);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                let src = self.row(s, a);
                let dst = k.row_mut(perm[s], a);
                for (t, &p) in src.iter().enumerate() {
                    dst[perm[t]] = p;
                }
            }
        }
        k
    }
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub(crate) fn max_abs_diff(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
}
