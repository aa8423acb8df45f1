//! Two-stage read sampling: reads are distributed over cells according to
//! the cell weights, then each cell's reads are distributed over genes
//! according to its expression profile.
//!
//! The read-by-read loop is equivalent in distribution to drawing the
//! per-cell read counts `T ~ Multinomial(m, u)` first and then, for each cell
//! independently, `Z_i ~ Multinomial(T_i, P_i)`. The batched form is what is
//! implemented here; its cost scales with `m` and the profile supports rather
//! than with `m * d`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::simplex::{lq_distance_unchecked, DiscreteDistribution, ExpressionProfile};

/// Scenario tag, without the frequency data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// `u_i = 1/n`.
    #[default]
    Uniform,
    /// Each sampled cell keeps the frequency of the atom it was drawn from.
    Coupled,
    /// Each sampled cell gets a frequency drawn independently of its profile.
    Independent,
}

/// How sampling frequencies `U` attach to sampled cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightModel {
    Uniform,
    /// `frequencies[l]` belongs to population atom `l`.
    Coupled(Vec<f64>),
    /// Frequencies are paired with cells uniformly at random.
    Independent(Vec<f64>),
}

impl WeightModel {
    pub fn new(kind: ScenarioKind, frequencies: Option<Vec<f64>>) -> Result<Self> {
        let model = match kind {
            ScenarioKind::Uniform => return Ok(Self::Uniform),
            ScenarioKind::Coupled => Self::Coupled(
                frequencies.ok_or_else(|| invalid("scenario", "coupled weights need per-atom frequencies"))?,
            ),
            ScenarioKind::Independent => Self::Independent(
                frequencies.ok_or_else(|| invalid("scenario", "independent weights need a frequency list"))?,
            ),
        };
        if let Some(f) = model.frequencies() {
            if f.is_empty() || f.iter().any(|&u| !(u.is_finite() && u > 0.0)) {
                return Err(invalid("frequencies", "all frequencies must be positive"));
            }
        }
        Ok(model)
    }

    pub fn kind(&self) -> ScenarioKind {
        match self {
            Self::Uniform => ScenarioKind::Uniform,
            Self::Coupled(_) => ScenarioKind::Coupled,
            Self::Independent(_) => ScenarioKind::Independent,
        }
    }

    pub fn frequencies(&self) -> Option<&[f64]> {
        match self {
            Self::Uniform => None,
            Self::Coupled(f) | Self::Independent(f) => Some(f),
        }
    }
}

/// What a cell that received no reads is reported as.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnseenPolicy {
    /// The barycenter `(1/d, ..., 1/d)`.
    #[default]
    Uniform,
    /// A fixed, caller-chosen profile.
    Fixed(ExpressionProfile),
    /// Unseen cells are left out of the noisy empirical distribution.
    Drop,
}

impl UnseenPolicy {
    fn profile(&self, dim: usize) -> Result<ExpressionProfile> {
        match self {
            Self::Uniform | Self::Drop => Ok(ExpressionProfile::uniform(dim)),
            Self::Fixed(p) if p.dim() == dim => Ok(p.clone()),
            Self::Fixed(p) => Err(Error::DimensionMismatch {
                left: dim,
                right: p.dim(),
            }),
        }
    }
}

/// Per-cell read counts `T_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadAllocation {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl ReadAllocation {
    /// Cells that received at least one read.
    pub fn observed(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.iter().enumerate().filter(|(_, &t)| t > 0).map(|(i, _)| i)
    }
}

/// One execution of shallow sequencing.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencingRun {
    pub sampled_cells: Vec<ExpressionProfile>,
    /// Normalized cell weights `u`.
    pub weights: Vec<f64>,
    pub allocation: ReadAllocation,
    pub noisy_profiles: Vec<ExpressionProfile>,
    pub unseen_policy: UnseenPolicy,
}

impl SequencingRun {
    pub fn n(&self) -> usize {
        self.sampled_cells.len()
    }

    /// `min_i n u_i`, the realized lower-bound constant on the weights.
    pub fn c_star(&self) -> f64 {
        let n = self.n() as f64;
        self.weights.iter().fold(f64::INFINITY, |acc, &u| acc.min(n * u))
    }

    /// `(1/n) Σ dist(P̂_i, P_i)^p`, the cost of the identity pairing.
    pub fn paired_cost(&self, p: f64, q: f64) -> f64 {
        let total: f64 = self
            .noisy_profiles
            .iter()
            .zip(&self.sampled_cells)
            .map(|(a, b)| lq_distance_unchecked(a, b, q).powf(p))
            .sum();
        total / self.n() as f64
    }
}

/// Samples `trials` categorical draws from `probs` and returns the counts.
///
/// Uses sequential binomial conditioning when there are many trials per
/// category and direct inversion otherwise; both are exact.
pub fn multinomial_counts<R: Rng + ?Sized>(trials: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let k = probs.len();
    let mut counts = vec![0u64; k];
    if trials == 0 || k == 0 {
        return counts;
    }
    if k == 1 {
        counts[0] = trials;
        return counts;
    }
    if trials.saturating_mul(4) < k as u64 {
        let mut cumulative = Vec::with_capacity(k);
        let mut acc = 0.0;
        for &p in probs {
            acc += p;
            cumulative.push(acc);
        }
        for _ in 0..trials {
            let x = rng.random::<f64>() * acc;
            let pos = cumulative.partition_point(|&c| c <= x).min(k - 1);
            // skip zero-probability categories that share a cumulative value
            let pos = (pos..k).find(|&i| probs[i] > 0.0).unwrap_or(pos);
            counts[pos] += 1;
        }
        return counts;
    }
    let mut remaining = trials;
    let mut mass: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate().take(k - 1) {
        if remaining == 0 {
            break;
        }
        let prob = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let x = if prob >= 1.0 {
            remaining
        } else if prob <= 0.0 {
            0
        } else {
            Binomial::new(remaining, prob).expect("valid binomial").sample(rng)
        };
        counts[i] = x;
        remaining -= x;
        mass -= p;
    }
    counts[k - 1] += remaining;
    counts
}

/// `Multinomial(T, Q) / T`: the empirical profile of `T` reads drawn from `Q`.
pub fn multinomial_estimate<R: Rng + ?Sized>(trials: u64, q: &ExpressionProfile, rng: &mut R) -> Result<ExpressionProfile> {
    if trials == 0 {
        return Err(Error::InvalidTrials);
    }
    let counts = multinomial_counts(trials, q.values(), rng);
    ExpressionProfile::from_counts(q.dim(), q.indices().iter().map(|&j| j as usize).zip(counts))
}

/// Cells drawn from a population together with their raw sampling frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSample {
    /// Population atom each cell was drawn from.
    pub atom_indices: Vec<usize>,
    pub cells: Vec<ExpressionProfile>,
    pub raw_weights: Vec<f64>,
}

/// Draws `n` cells i.i.d. from `mu` and attaches frequencies per `scenario`.
pub fn sample_cells<R: Rng + ?Sized>(mu: &DiscreteDistribution, n: usize, scenario: &WeightModel, rng: &mut R) -> Result<CellSample> {
    if n == 0 {
        return Err(invalid("n", "need at least one cell"));
    }
    if let WeightModel::Coupled(f) = scenario {
        if f.len() != mu.len() {
            return Err(Error::ScenarioMismatch {
                frequencies: f.len(),
                atoms: mu.len(),
            });
        }
    }
    if let WeightModel::Independent(f) = scenario {
        if f.is_empty() {
            return Err(Error::ScenarioMismatch {
                frequencies: 0,
                atoms: mu.len(),
            });
        }
    }
    let atom_indices: Vec<usize> = if mu.is_uniform() {
        (0..n).map(|_| rng.random_range(0..mu.len())).collect()
    } else {
        let dist = WeightedIndex::new(mu.weights()).map_err(|e| invalid("weights", e.to_string()))?;
        (0..n).map(|_| dist.sample(rng)).collect()
    };
    let raw_weights = match scenario {
        WeightModel::Uniform => vec![1.0; n],
        WeightModel::Coupled(f) => atom_indices.iter().map(|&l| f[l]).collect(),
        WeightModel::Independent(f) => (0..n).map(|_| f[rng.random_range(0..f.len())]).collect(),
    };
    let cells = atom_indices.iter().map(|&l| mu.atoms()[l].clone()).collect();
    Ok(CellSample {
        atom_indices,
        cells,
        raw_weights,
    })
}

/// `T ~ Multinomial(m, u)`.
pub fn allocate_reads<R: Rng + ?Sized>(u: &[f64], m: u64, rng: &mut R) -> ReadAllocation {
    ReadAllocation {
        counts: multinomial_counts(m, u, rng),
        total: m,
    }
}

fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
        return Err(invalid("raw_weights", "weights must be finite and nonnegative"));
    }
    if raw.iter().all(|&w| w == raw[0]) && raw[0] > 0.0 {
        return Ok(vec![1.0 / raw.len() as f64; raw.len()]);
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(invalid("raw_weights", "weights sum to zero"));
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

/// Sequences `m` reads from `cells` with sampling frequencies `raw_weights`.
pub fn shallow_sequence<R: Rng + ?Sized>(
    cells: &[ExpressionProfile],
    raw_weights: &[f64],
    m: u64,
    unseen_policy: &UnseenPolicy,
    rng: &mut R,
) -> Result<SequencingRun> {
    if cells.is_empty() {
        return Err(invalid("cells", "need at least one cell"));
    }
    if raw_weights.len() != cells.len() {
        return Err(Error::DimensionMismatch {
            left: cells.len(),
            right: raw_weights.len(),
        });
    }
    let weights = normalize_weights(raw_weights)?;
    let allocation = allocate_reads(&weights, m, rng);
    let unseen = unseen_policy.profile(cells[0].dim())?;
    let noisy_profiles = cells
        .iter()
        .zip(&allocation.counts)
        .map(|(cell, &t)| if t > 0 { multinomial_estimate(t, cell, rng) } else { Ok(unseen.clone()) })
        .collect::<Result<Vec<_>>>()?;
    Ok(SequencingRun {
        sampled_cells: cells.to_vec(),
        weights,
        allocation,
        noisy_profiles,
        unseen_policy: unseen_policy.clone(),
    })
}

/// The noisy empirical distribution `(1/n) Σ δ_{P̂_i}`.
///
/// Under [`UnseenPolicy::Drop`] the unseen cells are omitted and the weights
/// are `1/|A|` over the observed set `A` (all cells if none were observed).
pub fn noisy_empirical(run: &SequencingRun) -> DiscreteDistribution {
    let atoms: Vec<ExpressionProfile> = match run.unseen_policy {
        UnseenPolicy::Drop if run.allocation.observed().next().is_some() => {
            run.allocation.observed().map(|i| run.noisy_profiles[i].clone()).collect()
        }
        _ => run.noisy_profiles.clone(),
    };
    DiscreteDistribution::uniform(atoms).expect("runs are nonempty")
}

/// The true empirical distribution `(1/n) Σ δ_{P_i}` of the sampled cells.
pub fn true_empirical(run: &SequencingRun) -> DiscreteDistribution {
    DiscreteDistribution::uniform(run.sampled_cells.clone()).expect("runs are nonempty")
}
