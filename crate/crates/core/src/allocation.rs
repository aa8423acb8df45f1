//! Closed-form read budgets, error bounds and the optimal number of cells.
//!
//! All quantities are real-valued; callers round cell counts up.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Inputs shared by the bounds and the allocation rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocationParams {
    /// Wasserstein order, in `[1, 2]`.
    pub p: f64,
    /// Tail exponent, in `(0, 1)`.
    pub alpha: f64,
    /// Lower-bound constant on cell weights: most cells have `u_i >= c_star / n`.
    pub c_star: f64,
    /// Constant of the allocation power law.
    #[serde(rename = "C")]
    pub c_alloc: f64,
    /// Intrinsic dimension, `> 4`.
    pub k: f64,
    /// `E|P|_0`.
    pub mean_l0: f64,
    /// `E|P|_2^2`.
    pub mean_sq_l2: f64,
}

impl Default for AllocationParams {
    fn default() -> Self {
        Self {
            p: 1.0,
            alpha: 0.5,
            c_star: 1.0,
            c_alloc: 0.5,
            k: 8.0,
            mean_l0: 1.0,
            mean_sq_l2: 0.0,
        }
    }
}

impl AllocationParams {
    pub fn validate(&self) -> Result<()> {
        if !(1.0..=2.0).contains(&self.p) {
            return Err(invalid("p", "must lie in [1, 2]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1)"));
        }
        if !(self.c_star > 0.0 && self.c_star.is_finite()) {
            return Err(invalid("c_star", "must be positive"));
        }
        if !(self.c_alloc > 0.0 && self.c_alloc.is_finite()) {
            return Err(invalid("C", "must be positive"));
        }
        if !(self.k > 4.0 && self.k.is_finite()) {
            return Err(invalid("k", "must exceed 4"));
        }
        if !(self.mean_l0 >= 1.0 && self.mean_l0.is_finite()) {
            return Err(invalid("mean_l0", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mean_sq_l2) {
            return Err(invalid("mean_sq_l2", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Exponent `1 - 2/(k+2)` of the allocation rule.
    pub fn allocation_exponent(&self) -> f64 {
        allocation_exponent(self.k)
    }
}

pub fn allocation_exponent(k: f64) -> f64 {
    1.0 - 2.0 / (k + 2.0)
}

/// Smallest read budget for which the expected error of the noisy empirical
/// measure is below `eps`, floored at zero.
pub fn min_reads(n: f64, eps: f64, params: &AllocationParams) -> f64 {
    let lead = 8.0 * (1.0 + params.alpha) * n * params.mean_l0 / params.c_star;
    let first = lead / (eps * eps);
    let second = lead * eps.powf(params.p - 2.0) * (params.alpha * n.ln() / n).sqrt();
    (first - second).max(0.0)
}

/// `sqrt(8 E|P|_0 n / (c_star m))`, without the vanishing `o_n(1)` term.
pub fn expected_error_upper(n: f64, m: f64, params: &AllocationParams) -> f64 {
    (8.0 * params.mean_l0 * n / (params.c_star * m)).sqrt()
}

/// `(1 - E|P|_2^2)/4 * n/m` for uniform cell weights, and whether the read
/// budget satisfies `m >= 2n ln(4/(1 - E|P|_2^2))`.
pub fn expected_error_lower(n: f64, m: f64, params: &AllocationParams) -> (f64, bool) {
    let gap = 1.0 - params.mean_sq_l2;
    if gap <= 0.0 {
        return (0.0, false);
    }
    (gap / 4.0 * n / m, m >= 2.0 * n * (4.0 / gap).ln())
}

/// Read budget below which the allocation rule is not guaranteed:
/// `ln(c_star m) > ln(8(1+alpha) E|P|_0)` fails for `m <= m0`.
pub fn m0(params: &AllocationParams) -> f64 {
    8.0 * (1.0 + params.alpha) * params.mean_l0 / params.c_star
}

/// `(C m / E|P|_0)^(1 - 2/(k+2))`.
pub fn optimal_cells(m: f64, params: &AllocationParams) -> f64 {
    let guard = m0(params);
    if m <= guard {
        warn!("m = {m} is below the validity threshold m0 = {guard}");
    }
    (params.c_alloc * m / params.mean_l0).powf(params.allocation_exponent())
}

/// `(E|P|_0 / m)^(1/(k+2))`.
pub fn rate_upper(m: f64, params: &AllocationParams) -> f64 {
    (params.mean_l0 / m).powf(1.0 / (params.k + 2.0))
}

/// `(lower(n, m) - constant * n^(-1/k))_+`, the lower bound against the
/// population rather than the sample.
pub fn full_lower_bound(n: f64, m: f64, params: &AllocationParams, constant: f64) -> f64 {
    let (lower, _) = expected_error_lower(n, m, params);
    (lower - constant * n.powf(-1.0 / params.k)).max(0.0)
}

/// Everything the `allocate` command prints.
#[derive(Debug, Clone, Serialize)]
pub struct AllocationReport {
    pub m: f64,
    pub n_opt: f64,
    pub n_cells: u64,
    pub exponent: f64,
    pub m0: f64,
    pub below_m0: bool,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub lower_bound_valid: bool,
    pub rate_upper: f64,
    pub min_reads: Option<f64>,
    pub omitted_terms: Vec<&'static str>,
}

pub fn report(m: f64, eps: Option<f64>, params: &AllocationParams) -> AllocationReport {
    let n_opt = optimal_cells(m, params);
    let n_cells = n_opt.ceil().max(1.0) as u64;
    let n = n_cells as f64;
    let (lower, valid) = expected_error_lower(n, m, params);
    AllocationReport {
        m,
        n_opt,
        n_cells,
        exponent: params.allocation_exponent(),
        m0: m0(params),
        below_m0: m <= m0(params),
        upper_bound: expected_error_upper(n, m, params),
        lower_bound: lower,
        lower_bound_valid: valid,
        rate_upper: rate_upper(m, params),
        min_reads: eps.map(|e| min_reads(n.max(2.0), e, params)),
        omitted_terms: vec![
            "upper_bound: o_n(1) term dropped",
            "rate_upper: multiplicative constant dropped",
            "n_opt: proportionality constant set to C",
        ],
    }
}

/// Rows `m, n_opt, upper_rate, lower_bound` for overlay plots; the lower
/// bound is evaluated at `n_opt`.
pub fn write_theory_csv<W: Write>(out: W, m_grid: &[u64], params: &AllocationParams) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["m", "n_opt", "upper_rate", "lower_bound"])
        .map_err(std::io::Error::from)?;
    for &m in m_grid {
        let m = m as f64;
        let n = optimal_cells(m, params);
        let (lower, _) = expected_error_lower(n, m, params);
        w.write_record([m.to_string(), n.to_string(), rate_upper(m, params).to_string(), lower.to_string()])
            .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}
