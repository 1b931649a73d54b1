//! Reference computations that share no code with the library: plain
//! Gauss-Jordan solves on nested vectors, exhaustive enumeration and truth
//! tables.
#![allow(dead_code)]

use rmdp_core::{Kernel, Policy, SaTable};

pub type Rows = Vec<Vec<f64>>;

/// Gauss-Jordan elimination with partial pivoting.
pub fn solve(mut a: Rows, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular system");
        for j in 0..n {
            a[col][j] /= p;
        }
        b[col] /= p;
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                    }
                    b[i] -= f * b[col];
                }
            }
        }
    }
    b
}

/// `V = (I - gamma P^pi)^{-1} c^pi` for an arbitrary (not necessarily stochastic) table `pi`.
pub fn values(cost: &Rows, kernel: &[Rows], pi: &Rows, gamma: f64) -> Vec<f64> {
    let n = cost.len();
    let m = cost[0].len();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        a[s][s] += 1.0;
        for act in 0..m {
            b[s] += pi[s][act] * cost[s][act];
            for t in 0..n {
                a[s][t] -= gamma * pi[s][act] * kernel[s][act][t];
            }
        }
    }
    solve(a, b)
}

/// Normalized discounted state occupancy `(1 - gamma) mu^T (I - gamma P^pi)^{-1}`.
pub fn state_occupancy(kernel: &[Rows], pi: &Rows, mu: &[f64], gamma: f64) -> Vec<f64> {
    let n = mu.len();
    let m = pi[0].len();
    let mut a = vec![vec![0.0; n]; n];
    for s in 0..n {
        a[s][s] += 1.0;
        for act in 0..m {
            for t in 0..n {
                a[t][s] -= gamma * pi[s][act] * kernel[s][act][t];
            }
        }
    }
    solve(a, mu.to_vec()).into_iter().map(|x| (1.0 - gamma) * x).collect()
}

pub fn total(mu: &[f64], v: &[f64]) -> f64 {
    mu.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn rows(t: &SaTable) -> Rows {
    t.to_rows()
}

pub fn nested(k: &Kernel) -> Vec<Rows> {
    k.to_nested()
}

pub fn pol(p: &Policy) -> Rows {
    p.table().to_rows()
}

/// Every tuple in `prod 0..radices[i]`.
pub fn product(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &r in radices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..r).map(move |c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    out
}

/// Satisfiability by trying all assignments.
pub fn brute_force_sat(num_vars: usize, clauses: &[[i32; 3]]) -> bool {
    (0u64..1 << num_vars).any(|bits| {
        clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let v = bits >> (l.unsigned_abs() - 1) & 1 == 1;
                if l > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    })
}
