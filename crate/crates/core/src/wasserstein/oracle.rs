//! Brute-force reference for equal-size uniform transport.
//!
//! Between two uniform measures with the same number of atoms an optimal
//! coupling can be taken to be a permutation matrix (the extreme points of
//! the Birkhoff polytope), so enumerating all `k!` assignments gives the
//! exact optimum independently of any linear-programming code.

use crate::error::{Error, Result};
use crate::simplex::{check_order, lq_distance, ExpressionProfile};

pub const ORACLE_MAX_ATOMS: usize = 8;

/// `min_σ ((1/k) Σ dist(a_i, b_σ(i))^p)^(1/p)` over all permutations `σ`.
pub fn assignment_oracle(atoms_a: &[ExpressionProfile], atoms_b: &[ExpressionProfile], p: f64, q: f64) -> Result<f64> {
    let k = atoms_a.len();
    if k != atoms_b.len() {
        return Err(Error::DimensionMismatch {
            left: k,
            right: atoms_b.len(),
        });
    }
    if k > ORACLE_MAX_ATOMS {
        return Err(Error::TooLarge {
            got: k,
            max: ORACLE_MAX_ATOMS,
        });
    }
    if k == 0 {
        return Ok(0.0);
    }
    check_order("p", p)?;
    let mut cost = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            cost[i][j] = lq_distance(&atoms_a[i], &atoms_b[j], q)?.powf(p);
        }
    }

    // Heap's algorithm
    let mut perm: Vec<usize> = (0..k).collect();
    let eval = |perm: &[usize]| perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();
    let mut best = eval(&perm);
    let mut c = vec![0usize; k];
    let mut i = 0;
    while i < k {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(eval(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok((best / k as f64).powf(1.0 / p))
}
