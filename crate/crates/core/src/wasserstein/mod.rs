//! Exact p-Wasserstein distances between finitely supported measures.
//!
//! The transport problem is solved without regularization by a network
//! simplex on the bipartite transportation graph. Weights are moved to a
//! common integer grid first, so the basic flows are exact integers and the
//! solver cannot cycle on floating-point ties.

mod network_simplex;
mod oracle;

use rayon::prelude::*;

pub use network_simplex::{solve_transport, FlowSolution};
pub use oracle::{assignment_oracle, ORACLE_MAX_ATOMS};

use crate::error::{invalid, Error, Result};
use crate::simplex::{check_order, lq_distance_unchecked, DiscreteDistribution};

/// Largest dense cost matrix that will be materialized.
pub const MAX_COST_ENTRIES: usize = 10_000_000;

/// Default weight grid denominator.
pub const DEFAULT_GRID: u64 = 1_000_000_000;

/// Entry `(i, j)` is `|x_i - y_j|_q^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    p: f64,
    q: f64,
    data: Vec<f64>,
}

impl CostMatrix {
    /// Wraps a row-major matrix of nonnegative costs.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>, p: f64, q: f64) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                left: rows * cols,
                right: data.len(),
            });
        }
        if data.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(invalid("cost", "entries must be finite and nonnegative"));
        }
        Ok(Self { rows, cols, p, q, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

fn check_size(rows: usize, cols: usize) -> Result<()> {
    if rows.saturating_mul(cols) > MAX_COST_ENTRIES {
        return Err(Error::SizeLimit {
            rows,
            cols,
            limit: MAX_COST_ENTRIES,
            context: None,
        });
    }
    Ok(())
}

/// Ground costs `|x_i - y_j|_q^p` between the atoms of `a` and `b`.
pub fn cost_matrix(a: &DiscreteDistribution, b: &DiscreteDistribution, p: f64, q: f64) -> Result<CostMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    check_order("p", p)?;
    if p.is_infinite() {
        return Err(invalid("p", "must be finite"));
    }
    check_order("q", q)?;
    let (rows, cols) = (a.len(), b.len());
    check_size(rows, cols)?;
    let mut data = vec![0.0; rows * cols];
    let fill = |(i, row): (usize, &mut [f64])| {
        let x = &a.atoms()[i];
        for (c, y) in row.iter_mut().zip(b.atoms()) {
            let d = lq_distance_unchecked(x, y, q);
            *c = if p == 1.0 {
                d
            } else if p == 2.0 {
                d * d
            } else {
                d.powf(p)
            };
        }
    };
    if rows * cols >= 4096 {
        data.par_chunks_mut(cols).enumerate().for_each(fill);
    } else {
        data.chunks_mut(cols).enumerate().for_each(fill);
    }
    Ok(CostMatrix { rows, cols, p, q, data })
}

/// A coupling, stored as its nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TransportPlan {
    pub fn row_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for &(i, _, x) in &self.entries {
            out[i] += x;
        }
        out
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for &(_, j, x) in &self.entries {
            out[j] += x;
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for &(i, j, x) in &self.entries {
            out[i][j] += x;
        }
        out
    }

    pub fn total_cost(&self, cost: &CostMatrix) -> f64 {
        self.entries.iter().map(|&(i, j, x)| x * cost.get(i, j)).sum()
    }
}

/// Optimal plan with its dual certificate.
#[derive(Debug, Clone)]
pub struct EmdSolution {
    /// `min <plan, cost>`, i.e. `W_p^p`.
    pub value: f64,
    pub plan: TransportPlan,
    pub source_potentials: Vec<f64>,
    pub sink_potentials: Vec<f64>,
    /// The source and target weights actually transported (on the grid).
    pub source_mass: Vec<f64>,
    pub target_mass: Vec<f64>,
    pub pivots: usize,
}

/// Optimality evidence recomputed from an [`EmdSolution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    /// `|<plan, cost> - (Σ a_i u_i + Σ b_j v_j)|`
    pub duality_gap: f64,
    /// `min_ij c_ij - u_i - v_j`; nonnegative up to rounding.
    pub min_reduced_cost: f64,
    /// Largest `|c_ij - u_i - v_j|` over the support of the plan.
    pub max_slack_on_support: f64,
    /// Largest marginal deviation from the requested weights.
    pub max_marginal_error: f64,
}

impl EmdSolution {
    pub fn certify(&self, weights_a: &[f64], weights_b: &[f64], cost: &CostMatrix) -> Certificate {
        let primal = self.plan.total_cost(cost);
        let dual: f64 = self.source_mass.iter().zip(&self.source_potentials).map(|(a, u)| a * u).sum::<f64>()
            + self.target_mass.iter().zip(&self.sink_potentials).map(|(b, v)| b * v).sum::<f64>();
        let mut min_rc = f64::INFINITY;
        for i in 0..cost.rows {
            for j in 0..cost.cols {
                min_rc = min_rc.min(cost.get(i, j) - self.source_potentials[i] - self.sink_potentials[j]);
            }
        }
        let max_slack = self
            .plan
            .entries
            .iter()
            .map(|&(i, j, _)| (cost.get(i, j) - self.source_potentials[i] - self.sink_potentials[j]).abs())
            .fold(0.0, f64::max);
        let rows = self.plan.row_sums();
        let cols = self.plan.col_sums();
        let marginal = rows
            .iter()
            .zip(weights_a)
            .chain(cols.iter().zip(weights_b))
            .map(|(x, w)| (x - w).abs())
            .fold(0.0, f64::max);
        Certificate {
            duality_gap: (primal - dual).abs(),
            min_reduced_cost: min_rc,
            max_slack_on_support: max_slack,
            max_marginal_error: marginal,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Picks the integer grid. When both weight vectors are known multiples of
/// `1/g_a` and `1/g_b`, a multiple of `lcm(g_a, g_b)` represents them exactly.
fn grid_denominator(grid_a: Option<u64>, grid_b: Option<u64>) -> u64 {
    if let (Some(ga), Some(gb)) = (grid_a, grid_b) {
        let l = (ga / gcd(ga, gb)).checked_mul(gb);
        if let Some(l) = l.filter(|&l| l > 0 && l <= 1_000_000_000_000) {
            return l * DEFAULT_GRID.div_ceil(l);
        }
    }
    DEFAULT_GRID
}

/// Rounds `weights * denom / Σ weights` to integers summing exactly to
/// `denom`, by largest remainders.
fn to_grid(weights: &[f64], denom: u64) -> Vec<i64> {
    let total: f64 = weights.iter().sum();
    let scaled: Vec<f64> = weights.iter().map(|w| w / total * denom as f64).collect();
    let mut ints: Vec<i64> = scaled.iter().map(|x| x.floor() as i64).collect();
    let mut short = denom as i64 - ints.iter().sum::<i64>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    let rem = |i: usize| scaled[i] - scaled[i].floor();
    if short > 0 {
        order.sort_by(|&x, &y| rem(y).total_cmp(&rem(x)).then(x.cmp(&y)));
        for &i in order.iter().cycle() {
            if short == 0 {
                break;
            }
            ints[i] += 1;
            short -= 1;
        }
    } else if short < 0 {
        order.sort_by(|&x, &y| rem(x).total_cmp(&rem(y)).then(x.cmp(&y)));
        for &i in order.iter().cycle() {
            if short == 0 {
                break;
            }
            if ints[i] > 0 {
                ints[i] -= 1;
                short += 1;
            }
        }
    }
    ints
}

fn check_weights(name: &'static str, w: &[f64]) -> Result<f64> {
    if w.is_empty() {
        return Err(invalid(name, "empty weight vector"));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(invalid(name, "weights must be finite and nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(invalid(name, "weights sum to zero"));
    }
    Ok(total)
}

/// Exact optimal transport between `weights_a` and `weights_b` under `cost`.
pub fn emd(weights_a: &[f64], weights_b: &[f64], cost: &CostMatrix) -> Result<EmdSolution> {
    emd_on_grid(weights_a, weights_b, cost, None, None)
}

fn emd_on_grid(
    weights_a: &[f64],
    weights_b: &[f64],
    cost: &CostMatrix,
    grid_a: Option<u64>,
    grid_b: Option<u64>,
) -> Result<EmdSolution> {
    if weights_a.len() != cost.rows || weights_b.len() != cost.cols {
        return Err(Error::DimensionMismatch {
            left: weights_a.len() * weights_b.len(),
            right: cost.rows * cost.cols,
        });
    }
    let mass_a = check_weights("weights_a", weights_a)?;
    let mass_b = check_weights("weights_b", weights_b)?;
    if (mass_a - mass_b).abs() > 1e-6 {
        return Err(Error::MassMismatch {
            source_mass: mass_a,
            target_mass: mass_b,
        });
    }
    let denom = grid_denominator(grid_a, grid_b);
    let supply = to_grid(weights_a, denom);
    let demand = to_grid(weights_b, denom);
    let flow = solve_transport(&supply, &demand, &cost.data)?;
    let scale = mass_a / denom as f64;
    let entries: Vec<(usize, usize, f64)> = flow.flows.iter().map(|&(i, j, f)| (i, j, f as f64 * scale)).collect();
    let value: f64 = flow.flows.iter().map(|&(i, j, f)| f as f64 * cost.get(i, j)).sum::<f64>() * scale;
    Ok(EmdSolution {
        value: value.max(0.0),
        plan: TransportPlan {
            rows: cost.rows,
            cols: cost.cols,
            entries,
        },
        source_potentials: flow.source_potentials,
        sink_potentials: flow.sink_potentials,
        source_mass: supply.iter().map(|&s| s as f64 * scale).collect(),
        target_mass: demand.iter().map(|&s| s as f64 * scale).collect(),
        pivots: flow.pivots,
    })
}

/// Solves the transport problem between two distributions.
pub fn transport(a: &DiscreteDistribution, b: &DiscreteDistribution, p: f64, q: f64) -> Result<(CostMatrix, EmdSolution)> {
    let cost = cost_matrix(a, b, p, q)?;
    let sol = emd_on_grid(a.weights(), b.weights(), &cost, a.weight_grid(), b.weight_grid())?;
    Ok((cost, sol))
}

/// `W_p(a, b)` with `ℓ_q` ground metric.
pub fn wasserstein_p(a: &DiscreteDistribution, b: &DiscreteDistribution, p: f64, q: f64) -> Result<f64> {
    if a.len() == 1 || b.len() == 1 {
        // a point mass has a single coupling
        let cost = cost_matrix(a, b, p, q)?;
        let (w, c) = if a.len() == 1 { (b.weights(), cost.data) } else { (a.weights(), cost.data) };
        let value: f64 = w.iter().zip(&c).map(|(w, c)| w * c).sum();
        return Ok(value.max(0.0).powf(1.0 / p));
    }
    let (_, sol) = transport(a, b, p, q)?;
    Ok(sol.value.powf(1.0 / p))
}
