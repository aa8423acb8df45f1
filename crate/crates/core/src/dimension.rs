//! Intrinsic dimension by explained variance, and low-rank synthetic
//! populations by nonnegative matrix factorization.

use std::io::Write;

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::simplex::{DiscreteDistribution, ExpressionProfile};

pub const DEFAULT_THRESHOLD: f64 = 0.95;
pub const NMF_MAX_ITERS: usize = 500;
pub const NMF_TOL: f64 = 1e-5;
pub const NMF_ALGORITHM: &str = "lee-seung-multiplicative-frobenius";

/// Above this ambient dimension the spectrum is taken from the `N x N` Gram
/// matrix instead of the `d x d` covariance.
pub const GRAM_SWITCH_DIM: usize = 2000;

const NMF_EPS: f64 = 1e-12;

/// Eigenvalues of the weighted covariance of a population, largest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub total_variance: f64,
}

impl Spectrum {
    /// Fraction of the total variance captured by the first `i + 1` components.
    pub fn cumulative_fractions(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.eigenvalues
            .iter()
            .map(|l| {
                acc += l;
                if self.total_variance > 0.0 {
                    (acc / self.total_variance).min(1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Smallest number of leading components whose eigenvalues add up to at
    /// least `threshold` of the total. Zero for a degenerate spectrum.
    pub fn intrinsic_dim(&self, threshold: f64) -> usize {
        if self.total_variance <= 0.0 {
            return 0;
        }
        let target = threshold * self.total_variance * (1.0 - 1e-12);
        let mut acc = 0.0;
        for (i, l) in self.eigenvalues.iter().enumerate() {
            acc += l;
            if acc >= target {
                return i + 1;
            }
        }
        self.eigenvalues.len()
    }

    /// CSV with columns `component,eigenvalue,cumulative_fraction`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["component", "eigenvalue", "cumulative_fraction"])
            .map_err(std::io::Error::from)?;
        for (i, (l, c)) in self.eigenvalues.iter().zip(self.cumulative_fractions()).enumerate() {
            w.write_record([(i + 1).to_string(), l.to_string(), c.to_string()])
                .map_err(std::io::Error::from)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn dense_rows(atoms: &[ExpressionProfile]) -> DMatrix<f64> {
    let d = atoms.first().map_or(0, |a| a.dim());
    let mut m = DMatrix::zeros(atoms.len(), d);
    for (i, a) in atoms.iter().enumerate() {
        for (j, v) in a.iter() {
            m[(i, j)] = v;
        }
    }
    m
}

/// Spectrum of the weighted covariance `Σ_i w_i (x_i - x̄)(x_i - x̄)^T`.
pub fn spectrum(mu: &DiscreteDistribution) -> Result<Spectrum> {
    if mu.len() < 2 {
        return Err(invalid("mu", "at least two atoms are needed for a spectrum"));
    }
    let x = dense_rows(mu.atoms());
    let (n, d) = x.shape();
    let w = mu.weights();
    let mut mean = vec![0.0; d];
    for a in 0..n {
        for (j, v) in mu.atoms()[a].iter() {
            mean[j] += w[a] * v;
        }
    }
    // rows scaled by sqrt(w_i) after centering
    let mut xc = x;
    for a in 0..n {
        let s = w[a].sqrt();
        for j in 0..d {
            xc[(a, j)] = (xc[(a, j)] - mean[j]) * s;
        }
    }
    let total: f64 = xc.iter().map(|v| v * v).sum();
    let gram = if d <= GRAM_SWITCH_DIM { xc.tr_mul(&xc) } else { &xc * xc.transpose() };
    let mut eig: Vec<f64> = SymmetricEigen::new(gram).eigenvalues.iter().map(|l| l.max(0.0)).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let scale: f64 = mu.atoms().iter().zip(w).map(|(a, w)| w * a.sq_l2()).sum();
    let total_variance = if total <= 1e-15 * scale { 0.0 } else { total };
    Ok(Spectrum {
        eigenvalues: eig,
        total_variance,
    })
}

/// The PCA intrinsic dimension of `mu` and its spectrum.
pub fn pca_intrinsic_dim(mu: &DiscreteDistribution, threshold: f64) -> Result<(usize, Spectrum)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(invalid("threshold", "must lie in (0, 1]"));
    }
    let s = spectrum(mu)?;
    if s.total_variance == 0.0 {
        warn!("population has zero variance; intrinsic dimension is 0");
        return Ok((0, s));
    }
    Ok((s.intrinsic_dim(threshold), s))
}

/// Nonnegative factors `W` (`N x r`) and `H` (`r x d`) with `M ≈ WH`.
#[derive(Debug, Clone)]
pub struct FactorPair {
    pub w: DMatrix<f64>,
    pub h: DMatrix<f64>,
    /// `|WH - M|_F / |M|_F`.
    pub relative_error: f64,
    /// `|M - WH|_F^2` at initialization and after every iteration.
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub algorithm: &'static str,
}

impl FactorPair {
    pub fn product(&self) -> DMatrix<f64> {
        &self.w * &self.h
    }
}

fn frob_sq(m: &DMatrix<f64>, w: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let wh = w * h;
    m.iter().zip(wh.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Rank-`r` NMF by multiplicative updates on the Frobenius loss.
///
/// The update `x <- x (a + eps) / (b + eps)` minimizes the usual diagonal
/// majorizer, so the objective never increases. Iteration stops when the
/// relative decrease falls below `tol` or the residual reaches the rounding
/// floor `(64 eps |M|_F)^2`, below which the objective is not resolved.
pub fn nmf<R: Rng + ?Sized>(m: &DMatrix<f64>, r: usize, max_iters: usize, tol: f64, rng: &mut R) -> Result<FactorPair> {
    let (n, d) = m.shape();
    if r == 0 || r > n.min(d) {
        return Err(invalid("r", format!("rank must lie in [1, {}]", n.min(d))));
    }
    if m.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("M", "entries must be finite and nonnegative"));
    }
    let mean = m.mean();
    let scale = (mean / r as f64).sqrt();
    let mut draw = || (1.0 - rng.random::<f64>()) * scale;
    let mut w = DMatrix::from_fn(n, r, |_, _| draw());
    let mut h = DMatrix::from_fn(r, d, |_, _| draw());

    let floor = (64.0 * f64::EPSILON * m.norm()).powi(2);
    let mut history = vec![frob_sq(m, &w, &h)];
    let mut iterations = 0;
    while iterations < max_iters {
        let num = w.tr_mul(m);
        let den = w.tr_mul(&w) * &h;
        h.zip_zip_apply(&num, &den, |x, a, b| *x *= (a + NMF_EPS) / (b + NMF_EPS));
        let num = m * h.transpose();
        let den = &w * (&h * h.transpose());
        w.zip_zip_apply(&num, &den, |x, a, b| *x *= (a + NMF_EPS) / (b + NMF_EPS));
        iterations += 1;

        let obj = frob_sq(m, &w, &h);
        let prev = *history.last().unwrap();
        history.push(obj);
        if obj <= floor || (prev - obj) <= tol * prev {
            break;
        }
    }
    let norm = m.norm();
    let relative_error = if norm > 0.0 { history.last().unwrap().sqrt() / norm } else { 0.0 };
    Ok(FactorPair {
        w,
        h,
        relative_error,
        objective_history: history,
        iterations,
        algorithm: NMF_ALGORITHM,
    })
}

/// A low-rank stand-in for a population, with the statistics reported for it.
#[derive(Debug, Clone)]
pub struct SyntheticPopulation {
    pub mu_k: DiscreteDistribution,
    pub k: usize,
    /// `|M̄_r - M|_F / |M|_F` with `M̄_r` the row-normalized `WH`.
    pub relative_error: f64,
    pub mean_l0: f64,
    /// Rows of `M` that produced an atom (all-zero rows of `WH` are dropped).
    pub kept_rows: Vec<usize>,
    pub rank: usize,
    pub iterations: usize,
}

/// Factors the atom matrix of `mu` at rank `r` and renormalizes the rows of
/// `WH` to the simplex.
pub fn synthesize_low_dim<R: Rng + ?Sized>(mu: &DiscreteDistribution, r: usize, rng: &mut R) -> Result<SyntheticPopulation> {
    let m = dense_rows(mu.atoms());
    let f = nmf(&m, r, NMF_MAX_ITERS, NMF_TOL, rng)?;
    let wh = f.product();
    let (n, d) = wh.shape();
    let mut atoms = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut kept = Vec::with_capacity(n);
    let mut rescaled = DMatrix::zeros(n, d);
    for i in 0..n {
        let row: Vec<f64> = wh.row(i).iter().copied().collect();
        match ExpressionProfile::from_dense(&row) {
            Ok(p) => {
                for (j, v) in p.iter() {
                    rescaled[(i, j)] = v;
                }
                atoms.push(p);
                weights.push(mu.weights()[i]);
                kept.push(i);
            }
            Err(_) => warn!("row {i} of the rank-{r} product is zero; dropping it"),
        }
    }
    if atoms.is_empty() {
        return Err(invalid("r", "every row of the factorization vanished"));
    }
    let total: f64 = weights.iter().sum();
    let mu_k = if mu.is_uniform() {
        DiscreteDistribution::uniform(atoms)?
    } else {
        let mut w: Vec<f64> = weights.iter().map(|x| x / total).collect();
        let rest: f64 = w[1..].iter().sum();
        w[0] = 1.0 - rest;
        DiscreteDistribution::new(atoms, w)?
    };
    let relative_error = (&rescaled - &m).norm() / m.norm();
    let k = if mu_k.len() >= 2 { pca_intrinsic_dim(&mu_k, DEFAULT_THRESHOLD)?.0 } else { 0 };
    let mean_l0 = mu_k.atoms().iter().zip(mu_k.weights()).map(|(a, w)| w * a.l0_norm() as f64).sum();
    Ok(SyntheticPopulation {
        mu_k,
        k,
        relative_error,
        mean_l0,
        kept_rows: kept,
        rank: r,
        iterations: f.iterations,
    })
}
