#![allow(dead_code)]

use rand::Rng;
use seqdepth::{DiscreteDistribution, ExpressionProfile};

/// `k` orthonormal directions in the zero-sum subspace of `R^d`.
pub fn tangent_basis<R: Rng>(d: usize, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(k);
    while dirs.len() < k {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        let mean = v.iter().sum::<f64>() / d as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        for u in &dirs {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            dirs.push(v);
        }
    }
    dirs
}

/// Uniform population on a `k`-dimensional cube patch centred at the uniform
/// profile of `Δ_(d-1)`; points leaving the open simplex are rejected.
pub fn affine_patch<R: Rng>(n_atoms: usize, d: usize, k: usize, side: f64, rng: &mut R) -> DiscreteDistribution {
    let dirs = tangent_basis(d, k, rng);
    let mut atoms = Vec::with_capacity(n_atoms);
    while atoms.len() < n_atoms {
        let mut p = vec![1.0 / d as f64; d];
        for u in &dirs {
            let t = (rng.random::<f64>() - 0.5) * side;
            p.iter_mut().zip(u).for_each(|(a, b)| *a += t * b);
        }
        if p.iter().all(|&x| x > 0.0) {
            atoms.push(ExpressionProfile::from_dense(&p).unwrap());
        }
    }
    DiscreteDistribution::uniform(atoms).unwrap()
}

/// Uniform population on all profiles `(e_i + e_j)/2`, `i < j`, in `Δ_(d-1)`:
/// every atom has `|P|_0 = 2` and `|P|_2^2 = 1/2`.
pub fn pair_population(d: usize) -> DiscreteDistribution {
    let atoms = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .map(|(i, j)| ExpressionProfile::from_sparse(d, [(i, 0.5), (j, 0.5)]).unwrap())
        .collect();
    DiscreteDistribution::uniform(atoms).unwrap()
}

pub fn toy_csv() -> &'static str {
    "cell,g1,g2,g3\nc1,1,0,2\nc2,0,0,5\n"
}
