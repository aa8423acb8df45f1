//! Points and measures on the probability simplex `Δ_(d-1)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on the unit-mass constraint of a profile.
pub const PROFILE_SUM_TOL: f64 = 1e-9;
/// Tolerance on the unit-mass constraint of distribution weights.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Relative gene expression of one cell: a point on the simplex, stored sparse.
///
/// Only strictly positive entries are stored, in increasing index order, so
/// the number of stored entries is the ℓ₀ norm of the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionProfile {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl ExpressionProfile {
    /// Normalizes nonnegative sparse `(index, value)` pairs onto the simplex.
    ///
    /// Pairs may come in any order; duplicates are summed and zeros dropped.
    pub fn from_sparse(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().collect();
        for &(j, v) in &pairs {
            if j >= dim {
                return Err(invalid("index", format!("{j} out of range for dimension {dim}")));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(invalid("value", format!("entry {j} is {v}")));
            }
        }
        pairs.sort_by_key(|&(j, _)| j);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        for (j, v) in pairs {
            if v == 0.0 {
                continue;
            }
            if indices.last() == Some(&(j as u32)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j as u32);
                values.push(v);
            }
        }
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroRow);
        }
        values.iter_mut().for_each(|v| *v /= total);
        Ok(Self { dim, indices, values })
    }

    /// Takes already normalized sparse entries verbatim, without rescaling.
    /// Indices must be strictly increasing and values positive with unit sum.
    pub fn from_normalized(dim: usize, indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch {
                left: indices.len(),
                right: values.len(),
            });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || indices.last().is_some_and(|&j| j as usize >= dim) {
            return Err(invalid("indices", "must be strictly increasing and below the dimension"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(invalid("values", "stored entries must be positive"));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > PROFILE_SUM_TOL {
            return Err(invalid("values", format!("sum to {total}, not 1")));
        }
        Ok(Self { dim, indices, values })
    }

    /// Normalizes a dense nonnegative vector onto the simplex.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::from_sparse(values.len(), values.iter().copied().enumerate())
    }

    /// Builds a profile from integer counts `Z` as `Z / |Z|_1`.
    pub fn from_counts(dim: usize, counts: impl IntoIterator<Item = (usize, u64)>) -> Result<Self> {
        Self::from_sparse(dim, counts.into_iter().map(|(j, c)| (j, c as f64)))
    }

    /// The standard basis vector `e_j`.
    pub fn basis(dim: usize, j: usize) -> Self {
        assert!(j < dim, "basis index {j} out of range for dimension {dim}");
        Self {
            dim,
            indices: vec![j as u32],
            values: vec![1.0],
        }
    }

    /// The barycenter `(1/d, ..., 1/d)`.
    pub fn uniform(dim: usize) -> Self {
        assert!(dim > 0);
        Self {
            dim,
            indices: (0..dim as u32).collect(),
            values: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&j| j as usize).zip(self.values.iter().copied())
    }

    pub fn get(&self, j: usize) -> f64 {
        match self.indices.binary_search(&(j as u32)) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, v) in self.iter() {
            out[j] = v;
        }
        out
    }

    /// Number of nonzero entries.
    pub fn l0_norm(&self) -> usize {
        self.indices.len()
    }

    /// Squared Euclidean norm `|P|_2^2`.
    pub fn sq_l2(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// True when `self` is supported inside the support of `other`.
    pub fn support_within(&self, other: &Self) -> bool {
        self.indices.iter().all(|j| other.indices.binary_search(j).is_ok())
    }
}

/// Normalizes one row of read counts, `C_l / |C_l|_1`.
pub fn normalize_counts_row(counts: &[u64]) -> Result<ExpressionProfile> {
    ExpressionProfile::from_counts(counts.len(), counts.iter().copied().enumerate())
}

/// Sparsity `|P|_0`.
pub fn l0_norm(p: &ExpressionProfile) -> usize {
    p.l0_norm()
}

/// Validates a metric order `q`, which may be `f64::INFINITY`.
pub fn check_order(name: &'static str, q: f64) -> Result<()> {
    if q.is_nan() || q < 1.0 {
        return Err(invalid(name, format!("must lie in [1, inf], got {q}")));
    }
    Ok(())
}

/// ℓ_q distance between two profiles; `q = f64::INFINITY` gives the max norm.
pub fn lq_distance(a: &ExpressionProfile, b: &ExpressionProfile, q: f64) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    check_order("q", q)?;
    Ok(lq_distance_unchecked(a, b, q))
}

/// [`lq_distance`] without dimension and order validation.
pub(crate) fn lq_distance_unchecked(a: &ExpressionProfile, b: &ExpressionProfile, q: f64) -> f64 {
    let mut acc = 0.0f64;
    let mut fold = |diff: f64| {
        let d = diff.abs();
        if q == 1.0 {
            acc += d;
        } else if q == 2.0 {
            acc += d * d;
        } else if q.is_infinite() {
            acc = acc.max(d);
        } else {
            acc += d.powf(q);
        }
    };
    let (mut i, mut j) = (0, 0);
    let (ai, av, bi, bv) = (&a.indices, &a.values, &b.indices, &b.values);
    while i < ai.len() && j < bi.len() {
        match ai[i].cmp(&bi[j]) {
            std::cmp::Ordering::Less => {
                fold(av[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                fold(bv[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                fold(av[i] - bv[j]);
                i += 1;
                j += 1;
            }
        }
    }
    av[i..].iter().for_each(|&v| fold(v));
    bv[j..].iter().for_each(|&v| fold(v));
    if q == 1.0 || q.is_infinite() {
        acc
    } else if q == 2.0 {
        acc.sqrt()
    } else {
        acc.powf(1.0 / q)
    }
}

/// A finitely supported probability measure on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<ExpressionProfile>,
    weights: Vec<f64>,
    uniform: bool,
    /// When set, every weight is an integer multiple of `1/grid`.
    grid: Option<u64>,
}

impl DiscreteDistribution {
    /// Equal weight `1/N` on every atom.
    pub fn uniform(atoms: Vec<ExpressionProfile>) -> Result<Self> {
        Self::check_atoms(&atoms)?;
        let w = 1.0 / atoms.len() as f64;
        Ok(Self {
            weights: vec![w; atoms.len()],
            grid: Some(atoms.len() as u64),
            atoms,
            uniform: true,
        })
    }

    pub fn new(atoms: Vec<ExpressionProfile>, weights: Vec<f64>) -> Result<Self> {
        Self::check_atoms(&atoms)?;
        if weights.len() != atoms.len() {
            return Err(Error::DimensionMismatch {
                left: atoms.len(),
                right: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights", "entries must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(invalid("weights", format!("sum to {total}, not 1")));
        }
        Ok(Self {
            atoms,
            weights,
            uniform: false,
            grid: None,
        })
    }

    fn check_atoms(atoms: &[ExpressionProfile]) -> Result<()> {
        let first = atoms.first().ok_or_else(|| invalid("atoms", "distribution needs at least one atom"))?;
        if let Some(bad) = atoms.iter().find(|a| a.dim != first.dim) {
            return Err(Error::DimensionMismatch {
                left: first.dim,
                right: bad.dim,
            });
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[ExpressionProfile] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Common denominator of the weights, when known exactly.
    pub fn weight_grid(&self) -> Option<u64> {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim
    }

    /// Merges identical atoms, summing their weights. The result is the same
    /// measure, so every transport distance is unchanged.
    pub fn compact(&self) -> Self {
        let mut seen: std::collections::HashMap<(Vec<u32>, Vec<u64>), usize> = Default::default();
        let mut atoms = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            let key = (a.indices.clone(), a.values.iter().map(|v| v.to_bits()).collect());
            match seen.get(&key) {
                Some(&pos) => weights[pos] += w,
                None => {
                    seen.insert(key, atoms.len());
                    atoms.push(a.clone());
                    weights.push(w);
                }
            }
        }
        let uniform = self.uniform && atoms.len() == self.atoms.len();
        Self {
            atoms,
            weights,
            uniform,
            grid: self.grid,
        }
    }
}

/// Population-level moments that drive the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    /// `E|P|_0`
    pub mean_l0: f64,
    /// `E|P|_2^2`
    pub mean_sq_l2: f64,
    pub ambient_dim: usize,
    pub atom_count: usize,
}

/// Weighted means of `|P|_0` and `|P|_2^2` over the atoms of `mu`.
pub fn population_stats(mu: &DiscreteDistribution) -> PopulationStats {
    let (mut l0, mut l2) = (0.0, 0.0);
    for (a, &w) in mu.atoms.iter().zip(&mu.weights) {
        l0 += w * a.l0_norm() as f64;
        l2 += w * a.sq_l2();
    }
    PopulationStats {
        mean_l0: l0,
        mean_sq_l2: l2,
        ambient_dim: mu.dim(),
        atom_count: mu.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn normalize_examples() {
        let p = normalize_counts_row(&[0, 3, 1]).unwrap();
        assert_eq!(p.to_dense(), vec![0.0, 0.75, 0.25]);
        let p = normalize_counts_row(&[5, 0, 0]).unwrap();
        assert_eq!(p.to_dense(), vec![1.0, 0.0, 0.0]);
        assert!(matches!(normalize_counts_row(&[0, 0, 0]), Err(Error::ZeroRow)));
    }

    #[test]
    fn l0_examples() {
        let p = ExpressionProfile::from_dense(&[0.0, 0.75, 0.25]).unwrap();
        assert_eq!(l0_norm(&p), 2);
        assert_eq!(l0_norm(&ExpressionProfile::uniform(1000)), 1000);
    }

    #[test]
    fn lq_examples() {
        let e1 = ExpressionProfile::basis(3, 0);
        let e2 = ExpressionProfile::basis(3, 1);
        assert!(close(lq_distance(&e1, &e2, 1.0).unwrap(), 2.0));
        assert!(close(lq_distance(&e1, &e2, 2.0).unwrap(), 2f64.sqrt()));
        assert!(close(lq_distance(&e1, &e2, f64::INFINITY).unwrap(), 1.0));
        assert!(close(lq_distance(&e1, &e2, 3.0).unwrap(), 2f64.powf(1.0 / 3.0)));
        let e4 = ExpressionProfile::basis(4, 0);
        assert!(matches!(lq_distance(&e1, &e4, 1.0), Err(Error::DimensionMismatch { .. })));
        assert!(lq_distance(&e1, &e2, 0.5).is_err());
    }

    #[test]
    fn stats_examples() {
        let mu = DiscreteDistribution::uniform(vec![ExpressionProfile::basis(2, 0)]).unwrap();
        let s = population_stats(&mu);
        assert_eq!((s.mean_l0, s.mean_sq_l2), (1.0, 1.0));

        let mu = DiscreteDistribution::uniform(vec![
            ExpressionProfile::from_dense(&[1.0, 0.0]).unwrap(),
            ExpressionProfile::from_dense(&[0.5, 0.5]).unwrap(),
        ])
        .unwrap();
        let s = population_stats(&mu);
        assert!(close(s.mean_l0, 1.5));
        assert!(close(s.mean_sq_l2, 0.75));
        assert_eq!((s.ambient_dim, s.atom_count), (2, 2));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let atoms = vec![ExpressionProfile::basis(2, 0), ExpressionProfile::basis(2, 1)];
        assert!(DiscreteDistribution::new(atoms.clone(), vec![0.5, 0.4]).is_err());
        assert!(DiscreteDistribution::new(atoms, vec![0.25, 0.75]).is_ok());
        assert!(DiscreteDistribution::uniform(vec![]).is_err());
    }

    #[test]
    fn compact_merges_duplicates() {
        let a = ExpressionProfile::basis(2, 0);
        let b = ExpressionProfile::basis(2, 1);
        let mu = DiscreteDistribution::uniform(vec![a.clone(), b, a]).unwrap();
        let c = mu.compact();
        assert_eq!(c.len(), 2);
        assert!(close(c.weights()[0], 2.0 / 3.0));
    }

    fn simplex_point(d: usize) -> impl Strategy<Value = ExpressionProfile> {
        proptest::collection::vec(0.0f64..1.0, d).prop_filter_map("zero", |v| {
            let v: Vec<f64> = v.into_iter().map(|x| if x < 0.3 { 0.0 } else { x }).collect();
            ExpressionProfile::from_dense(&v).ok()
        })
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent(p in simplex_point(8)) {
            let again = ExpressionProfile::from_sparse(p.dim(), p.iter()).unwrap();
            for (x, y) in p.values().iter().zip(again.values()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            prop_assert!((again.sum() - 1.0).abs() <= PROFILE_SUM_TOL);
        }

        #[test]
        fn metric_axioms(a in simplex_point(6), b in simplex_point(6), c in simplex_point(6),
                         q in prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0), Just(f64::INFINITY)]) {
            let ab = lq_distance(&a, &b, q).unwrap();
            let ba = lq_distance(&b, &a, q).unwrap();
            let ac = lq_distance(&a, &c, q).unwrap();
            let cb = lq_distance(&c, &b, q).unwrap();
            prop_assert!((ab - ba).abs() < 1e-15);
            prop_assert!(ab <= ac + cb + 1e-12);
            prop_assert_eq!(lq_distance(&a, &a, q).unwrap(), 0.0);
            if a != b {
                prop_assert!(ab > 0.0);
            }
            let l1 = lq_distance(&a, &b, 1.0).unwrap();
            prop_assert!(ab <= l1 + 1e-12);
            prop_assert!(l1 <= 2.0 + 1e-12);
        }

        #[test]
        fn l0_matches_positive_counts(c in proptest::collection::vec(0u64..4, 1..20)) {
            prop_assume!(c.iter().any(|&x| x > 0));
            let p = normalize_counts_row(&c).unwrap();
            prop_assert_eq!(p.l0_norm(), c.iter().filter(|&&x| x > 0).count());
            prop_assert!((p.sum() - 1.0).abs() <= PROFILE_SUM_TOL);
        }
    }
}
