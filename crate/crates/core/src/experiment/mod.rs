//! `(m, n)` grid sweeps: repeated shallow-sequencing trials, mean errors,
//! the empirically optimal `n*` per budget and the log-log slope of `n*(m)`.

mod output;
mod svg;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{optimal_cells, AllocationParams};
use crate::error::{invalid, Error, Result};
use crate::ingest::PopulationSpec;
use crate::rng::substream;
use crate::sequencing::{noisy_empirical, sample_cells, shallow_sequence, true_empirical, ScenarioKind, UnseenPolicy, WeightModel};
use crate::simplex::{check_order, DiscreteDistribution};
use crate::wasserstein::{transport, wasserstein_p};

pub use output::{emit_outputs, read_nstar_csv, read_results_csv, read_summary_csv, OutputFiles, PlotOptions, SummaryRow};
pub use svg::{error_curves_svg, nstar_svg};

/// Absolute slack on the convexity check `W_p^p(noisy, mu_n) <= paired cost`.
pub const CONVEXITY_SLACK: f64 = 1e-9;

/// Sweep parameters, readable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub m_grid: Vec<u64>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub p: f64,
    pub q: f64,
    pub scenario: ScenarioKind,
    pub unseen_policy: UnseenPolicy,
    pub master_seed: u64,
    /// Allocation parameters for the theoretical `n(m)` overlay.
    pub theory: Option<AllocationParams>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            m_grid: log_grid(1_000, 1_000_000, 7),
            n_grid: log_grid(10, 1_000, 9).into_iter().map(|n| n as usize).collect(),
            trials: 10,
            p: 1.0,
            q: 2.0,
            scenario: ScenarioKind::Uniform,
            unseen_policy: UnseenPolicy::Uniform,
            master_seed: 0,
            theory: None,
        }
    }
}

/// `count` log-spaced integers from `lo` to `hi` inclusive, deduplicated.
pub fn log_grid(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    assert!(lo >= 1 && hi >= lo && count >= 1);
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    out.dedup();
    out
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_grid.is_empty() || self.n_grid.is_empty() {
            return Err(invalid("grid", "m_grid and n_grid must be nonempty"));
        }
        if self.m_grid.windows(2).any(|w| w[0] >= w[1]) || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("grid", "grids must be strictly increasing"));
        }
        if self.n_grid[0] == 0 {
            return Err(invalid("n_grid", "cell counts must be positive"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "need at least one trial"));
        }
        check_order("p", self.p)?;
        if self.p.is_infinite() {
            return Err(invalid("p", "must be finite"));
        }
        check_order("q", self.q)?;
        if let Some(t) = &self.theory {
            t.validate()?;
        }
        Ok(())
    }
}

/// The three distances recorded for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub m: u64,
    pub n: usize,
    pub trial: usize,
    #[serde(rename = "W_noisy_vs_mu")]
    pub w_noisy_vs_mu: f64,
    #[serde(rename = "W_noisy_vs_mun")]
    pub w_noisy_vs_mun: f64,
    #[serde(rename = "W_mun_vs_mu")]
    pub w_mun_vs_mu: f64,
}

/// Which recorded distance to aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    NoisyVsMu,
    NoisyVsMun,
    MunVsMu,
}

impl Metric {
    pub fn of(self, r: &TrialRecord) -> f64 {
        match self {
            Self::NoisyVsMu => r.w_noisy_vs_mu,
            Self::NoisyVsMun => r.w_noisy_vs_mun,
            Self::MunVsMu => r.w_mun_vs_mu,
        }
    }
}

/// A trial plus the quantities behind the convexity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    /// `W_p^p(noisy, mu_n)`.
    pub transport_cost: f64,
    /// `(1/n) Σ dist(P̂_i, P_i)^p`; `None` when unseen cells were dropped.
    pub paired_cost: Option<f64>,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Population prepared once per sweep.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub mu: DiscreteDistribution,
    /// `mu` with identical atoms merged, used as the transport target.
    pub mu_compact: DiscreteDistribution,
    pub scenario: WeightModel,
}

impl Prepared {
    pub fn new(population: &PopulationSpec, kind: ScenarioKind) -> Result<Self> {
        let scenario = if kind == population.scenario.kind() {
            population.scenario.clone()
        } else {
            population.with_scenario(kind)?.scenario
        };
        Ok(Self {
            mu_compact: population.mu.compact(),
            mu: population.mu.clone(),
            scenario,
        })
    }
}

fn with_context(e: Error, m: u64, n: usize) -> Error {
    match e {
        Error::SizeLimit { rows, cols, limit, .. } => Error::SizeLimit {
            rows,
            cols,
            limit,
            context: Some((m, n)),
        },
        e => e,
    }
}

/// One trial: sample `n` cells, sequence `m` reads, compare.
///
/// The random stream is keyed by `(m, n, trial)` under the master seed, so
/// results do not depend on which trials run or in what order.
pub fn run_trial(prep: &Prepared, m: u64, n: usize, trial: usize, config: &SweepConfig) -> Result<TrialOutcome> {
    let mut rng = substream(config.master_seed, &[m, n as u64, trial as u64]);
    let sample = sample_cells(&prep.mu, n, &prep.scenario, &mut rng)?;
    let run = shallow_sequence(&sample.cells, &sample.raw_weights, m, &config.unseen_policy, &mut rng)?;
    let noisy = noisy_empirical(&run).compact();
    let mun = true_empirical(&run).compact();
    let (p, q) = (config.p, config.q);
    let ctx = |e| with_context(e, m, n);

    let w_noisy_vs_mu = wasserstein_p(&noisy, &prep.mu_compact, p, q).map_err(ctx)?;
    let (_, sol) = transport(&noisy, &mun, p, q).map_err(ctx)?;
    let transport_cost = sol.value;
    let w_noisy_vs_mun = transport_cost.powf(1.0 / p);
    let w_mun_vs_mu = wasserstein_p(&mun, &prep.mu_compact, p, q).map_err(ctx)?;

    let paired_cost = match config.unseen_policy {
        UnseenPolicy::Drop => None,
        _ => {
            let paired = run.paired_cost(p, q);
            if transport_cost > paired + CONVEXITY_SLACK {
                return Err(Error::ConvexityViolation {
                    transport: transport_cost,
                    paired,
                });
            }
            Some(paired)
        }
    };
    Ok(TrialOutcome {
        record: TrialRecord {
            m,
            n,
            trial,
            w_noisy_vs_mu,
            w_noisy_vs_mun,
            w_mun_vs_mu,
        },
        transport_cost,
        paired_cost,
    })
}

/// Aggregated trials of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub m: u64,
    pub n: usize,
    /// Mean of `W(noisy, mu)` over trials.
    pub mean_w: f64,
    /// Sample standard deviation of `W(noisy, mu)`.
    pub std_w: f64,
    pub trials: Vec<TrialRecord>,
}

impl CellResult {
    pub fn from_trials(m: u64, n: usize, trials: Vec<TrialRecord>) -> Self {
        let (mean_w, std_w) = mean_std(&trials.iter().map(|r| r.w_noisy_vs_mu).collect::<Vec<_>>());
        Self {
            m,
            n,
            mean_w,
            std_w,
            trials,
        }
    }

    pub fn stats(&self, metric: Metric) -> (f64, f64) {
        mean_std(&self.trials.iter().map(|r| metric.of(r)).collect::<Vec<_>>())
    }
}

/// Every trial of one grid cell, in trial order.
pub fn run_cell(prep: &Prepared, m: u64, n: usize, config: &SweepConfig) -> Result<CellResult> {
    let trials = (0..config.trials)
        .map(|t| run_trial(prep, m, n, t, config).map(|o| o.record))
        .collect::<Result<Vec<_>>>()?;
    Ok(CellResult::from_trials(m, n, trials))
}

/// The optimal number of cells found for one budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NStar {
    pub n: usize,
    /// `n` is the first or last value of the grid, so the optimum may lie outside it.
    pub boundary: bool,
}

/// A grid cell that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub m: u64,
    pub n: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Sorted by `(m, n)`.
    pub cells: Vec<CellResult>,
    pub errors: Vec<CellError>,
    pub n_star: BTreeMap<u64, NStar>,
    /// `optimal_cells(m)` when a theory overlay is configured.
    pub theory_curve: BTreeMap<u64, f64>,
    /// Trials in which the convexity bound was checked (and held).
    pub convexity_checks: usize,
}

impl SweepResult {
    /// Rebuilds the aggregates from per-trial records.
    pub fn from_records(config: SweepConfig, records: Vec<TrialRecord>) -> Self {
        let mut by_cell: BTreeMap<(u64, usize), Vec<TrialRecord>> = BTreeMap::new();
        for r in records {
            by_cell.entry((r.m, r.n)).or_default().push(r);
        }
        let cells = by_cell
            .into_iter()
            .map(|((m, n), mut t)| {
                t.sort_by_key(|r| r.trial);
                CellResult::from_trials(m, n, t)
            })
            .collect();
        let mut out = Self {
            theory_curve: theory_curve(&config),
            config,
            cells,
            errors: Vec::new(),
            n_star: BTreeMap::new(),
            convexity_checks: 0,
        };
        out.n_star = find_optimal_n(&out);
        out
    }

    pub fn cell(&self, m: u64, n: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.m == m && c.n == n)
    }
}

fn theory_curve(config: &SweepConfig) -> BTreeMap<u64, f64> {
    match &config.theory {
        Some(t) => config.m_grid.iter().map(|&m| (m, optimal_cells(m as f64, t))).collect(),
        None => BTreeMap::new(),
    }
}

/// Runs every `(m, n, trial)` of the grid on up to `workers` threads
/// (`0` uses all cores). Cells that fail are recorded in `errors`.
pub fn sweep(population: &PopulationSpec, config: &SweepConfig, workers: usize) -> Result<SweepResult> {
    config.validate()?;
    let prep = Prepared::new(population, config.scenario)?;
    let tasks: Vec<(u64, usize, usize)> = config
        .m_grid
        .iter()
        .flat_map(|&m| config.n_grid.iter().flat_map(move |&n| (0..config.trials).map(move |t| (m, n, t))))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    let outcomes: Vec<((u64, usize, usize), Result<TrialOutcome>)> =
        pool.install(|| tasks.par_iter().map(|&(m, n, t)| ((m, n, t), run_trial(&prep, m, n, t, config))).collect());

    let mut by_cell: BTreeMap<(u64, usize), Result<Vec<TrialOutcome>, String>> = BTreeMap::new();
    for ((m, n, _), outcome) in outcomes {
        let entry = by_cell.entry((m, n)).or_insert_with(|| Ok(Vec::new()));
        match (entry.as_mut(), outcome) {
            (Ok(list), Ok(o)) => list.push(o),
            (Ok(_), Err(e)) => *entry = Err(e.to_string()),
            (Err(_), _) => {}
        }
    }
    let mut cells = Vec::new();
    let mut errors = Vec::new();
    let mut convexity_checks = 0;
    for ((m, n), entry) in by_cell {
        match entry {
            Ok(list) => {
                convexity_checks += list.iter().filter(|o| o.paired_cost.is_some()).count();
                let mut trials: Vec<TrialRecord> = list.into_iter().map(|o| o.record).collect();
                trials.sort_by_key(|r| r.trial);
                cells.push(CellResult::from_trials(m, n, trials));
            }
            Err(message) => {
                log::warn!("cell m={m} n={n} failed: {message}");
                errors.push(CellError { m, n, message });
            }
        }
    }
    let mut result = SweepResult {
        config: config.clone(),
        cells,
        errors,
        n_star: BTreeMap::new(),
        theory_curve: theory_curve(config),
        convexity_checks,
    };
    result.n_star = find_optimal_n(&result);
    Ok(result)
}

/// For each budget, the `n` with the lowest mean error (smallest `n` on
/// ties), flagged when it sits on either end of the grid.
pub fn find_optimal_n(result: &SweepResult) -> BTreeMap<u64, NStar> {
    let grid = &result.config.n_grid;
    let (lo, hi) = (grid.first().copied(), grid.last().copied());
    let mut best: BTreeMap<u64, (usize, f64)> = BTreeMap::new();
    for c in &result.cells {
        let e = best.entry(c.m).or_insert((c.n, c.mean_w));
        if c.mean_w < e.1 || (c.mean_w == e.1 && c.n < e.0) {
            *e = (c.n, c.mean_w);
        }
    }
    best.into_iter()
        .map(|(m, (n, _))| {
            (
                m,
                NStar {
                    n,
                    boundary: Some(n) == lo || Some(n) == hi,
                },
            )
        })
        .collect()
}

/// Least-squares line through `(ln m, ln n*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fits `ln n* = slope ln m + intercept` over the non-boundary points.
pub fn fit_slope(n_star: &BTreeMap<u64, NStar>) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = n_star
        .iter()
        .filter(|(_, s)| !s.boundary)
        .map(|(&m, s)| ((m as f64).ln(), (s.n as f64).ln()))
        .collect();
    fit_line(&pts)
}

pub(crate) fn fit_line(pts: &[(f64, f64)]) -> Result<SlopeFit> {
    let k = pts.len();
    if k < 2 {
        return Err(Error::InsufficientData(k));
    }
    let n = k as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(1));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(SlopeFit {
        slope,
        intercept,
        r2,
        points: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::ExpressionProfile;

    fn point_mass(p: ExpressionProfile) -> PopulationSpec {
        PopulationSpec::from_distribution(DiscreteDistribution::uniform(vec![p]).unwrap())
    }

    fn config(m: Vec<u64>, n: Vec<usize>) -> SweepConfig {
        SweepConfig {
            m_grid: m,
            n_grid: n,
            trials: 3,
            p: 1.0,
            q: 1.0,
            master_seed: 99,
            ..Default::default()
        }
    }

    fn fake(m_grid: Vec<u64>, n_grid: Vec<usize>, rows: &[Vec<f64>]) -> SweepResult {
        let mut cells = Vec::new();
        for (i, &m) in m_grid.iter().enumerate() {
            for (j, &n) in n_grid.iter().enumerate() {
                cells.push(CellResult {
                    m,
                    n,
                    mean_w: rows[i][j],
                    std_w: 0.0,
                    trials: vec![],
                });
            }
        }
        SweepResult {
            config: config(m_grid, n_grid),
            cells,
            errors: vec![],
            n_star: BTreeMap::new(),
            theory_curve: BTreeMap::new(),
            convexity_checks: 0,
        }
    }

    #[test]
    fn point_mass_with_matching_unseen_profile_is_exact() {
        let p = ExpressionProfile::from_dense(&[0.3, 0.7]).unwrap();
        let pop = point_mass(p.clone());
        for m in [0, 5] {
            let cfg = SweepConfig {
                unseen_policy: UnseenPolicy::Fixed(p.clone()),
                ..config(vec![m], vec![4])
            };
            let prep = Prepared::new(&pop, ScenarioKind::Uniform).unwrap();
            let c = run_cell(&prep, m, 4, &cfg).unwrap();
            if m == 0 {
                assert_eq!(c.mean_w, 0.0);
            } else {
                assert!(c.mean_w >= 0.0);
            }
            assert!(c.trials.iter().all(|t| t.w_mun_vs_mu == 0.0));
        }
    }

    #[test]
    fn zero_reads_give_uniform_profiles() {
        let pop = point_mass(ExpressionProfile::basis(2, 0));
        let cfg = config(vec![0], vec![3]);
        let prep = Prepared::new(&pop, ScenarioKind::Uniform).unwrap();
        let c = run_cell(&prep, 0, 3, &cfg).unwrap();
        for t in &c.trials {
            assert!((t.w_noisy_vs_mu - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn optimal_n_rules() {
        let r = fake(vec![10], vec![1, 2, 3], &[vec![3.0, 1.0, 2.0]]);
        assert_eq!(find_optimal_n(&r)[&10], NStar { n: 2, boundary: false });
        let r = fake(vec![10], vec![1, 2, 3], &[vec![1.0, 1.0, 1.0]]);
        assert_eq!(find_optimal_n(&r)[&10], NStar { n: 1, boundary: true });
        let r = fake(vec![10], vec![1, 2, 3], &[vec![3.0, 2.0, 1.0]]);
        assert_eq!(find_optimal_n(&r)[&10], NStar { n: 3, boundary: true });
        let r = fake(vec![7], vec![5], &[vec![0.5]]);
        assert_eq!(find_optimal_n(&r)[&7].n, 5);
    }

    #[test]
    fn slope_examples() {
        assert!(matches!(fit_line(&[(1.0, 2.0)]), Err(Error::InsufficientData(1))));
        let pts: Vec<(f64, f64)> = [1e2f64, 1e3, 1e4, 1e5].iter().map(|m| (m.ln(), 0.8 * m.ln())).collect();
        let fit = fit_line(&pts).unwrap();
        assert!((fit.slope - 0.8).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);

        let mut one = BTreeMap::new();
        one.insert(5, NStar { n: 3, boundary: false });
        one.insert(50, NStar { n: 30, boundary: true });
        assert!(matches!(fit_slope(&one), Err(Error::InsufficientData(1))));
    }

    #[test]
    fn sweep_is_order_independent() {
        let atoms: Vec<_> = (0..4).map(|j| ExpressionProfile::basis(4, j)).collect();
        let pop = PopulationSpec::from_distribution(DiscreteDistribution::uniform(atoms).unwrap());
        let a = sweep(&pop, &config(vec![10, 100], vec![2, 5]), 2).unwrap();
        let b = sweep(&pop, &config(vec![100], vec![5]), 1).unwrap();
        assert_eq!(a.cell(100, 5).unwrap(), b.cell(100, 5).unwrap());
        assert_eq!(a.cells.len(), 4);
        assert!(a.cells.iter().all(|c| c.trials.len() == 3));
        assert_eq!(a.convexity_checks, 12);
    }

    #[test]
    fn size_limit_is_recorded_with_context() {
        let atoms: Vec<_> = (0..4).map(|j| ExpressionProfile::basis(4, j)).collect();
        let pop = PopulationSpec::from_distribution(DiscreteDistribution::uniform(atoms).unwrap());
        let e = with_context(
            Error::SizeLimit {
                rows: 1,
                cols: 2,
                limit: 3,
                context: None,
            },
            7,
            8,
        );
        assert!(e.to_string().contains("m=7, n=8"));
        let r = sweep(&pop, &config(vec![10], vec![2]), 1).unwrap();
        assert!(r.errors.is_empty());
    }

    #[test]
    fn config_validation() {
        assert!(config(vec![10, 10], vec![1]).validate().is_err());
        assert!(config(vec![], vec![1]).validate().is_err());
        assert!(config(vec![1], vec![0]).validate().is_err());
        assert!(SweepConfig { trials: 0, ..config(vec![1], vec![1]) }.validate().is_err());
        assert!(config(vec![1, 2], vec![1, 3]).validate().is_ok());
        let json = r#"{"m_grid":[10],"n_grid":[2],"bogus":1}"#;
        assert!(serde_json::from_str::<SweepConfig>(json).is_err());
        let json = r#"{"m_grid":[10],"n_grid":[2],"unseen_policy":"drop","scenario":"coupled"}"#;
        let c: SweepConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.unseen_policy, UnseenPolicy::Drop);
        assert_eq!(c.trials, 10);
    }

    #[test]
    fn log_grid_is_increasing() {
        assert_eq!(log_grid(10, 1000, 3), vec![10, 100, 1000]);
        assert_eq!(log_grid(1, 3, 10), vec![1, 2, 3]);
        let g = log_grid(1000, 1_000_000, 7);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
