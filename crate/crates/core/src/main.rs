use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use seqdepth::allocation::{self, AllocationParams};
use seqdepth::dimension::{pca_intrinsic_dim, synthesize_low_dim, DEFAULT_THRESHOLD, NMF_ALGORITHM};
use seqdepth::experiment::{emit_outputs, fit_slope, run_trial, sweep, PlotOptions, Prepared, SweepConfig};
use seqdepth::ingest::{
    build_population, load_input, preprocess, read_counts, read_matrix_market, save_population, Format, PopulationSpec, Provenance, Step,
    DEFAULT_HVG, DEFAULT_MIN_CELLS,
};
use seqdepth::manifest::{load_config_object, RunManifest};
use seqdepth::rng::{fresh_seed, substream};
use seqdepth::sequencing::{ScenarioKind, UnseenPolicy};
use seqdepth::simplex::population_stats;

/// Sequencing-depth trade-off: simulate shallow sequencing, measure
/// Wasserstein error, and evaluate the optimal cells-versus-reads allocation.
#[derive(Parser)]
#[command(name = "seqdepth", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read a counts matrix, filter genes, select variable genes and store a population.
    Ingest(IngestArgs),
    /// Print N, d, E|P|_0 and E|P|_2^2 of a population.
    Stats(StatsArgs),
    /// Estimate the intrinsic dimension by PCA and write the spectrum.
    Dimension(DimensionArgs),
    /// Build a low-rank synthetic population by NMF.
    Synth(SynthArgs),
    /// Evaluate the optimal number of cells and the error bounds for a read budget.
    Allocate(AllocateArgs),
    /// Run one shallow-sequencing trial and print its three distances.
    Simulate(SimulateArgs),
    /// Sweep an (m, n) grid and write tables and figures.
    Sweep(SweepArgs),
}

fn parse_f64(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| e.to_string()),
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("must lie in (0, 1)".into())
    }
}

fn half_open_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err("must lie in (0, 1]".into())
    }
}

fn closed_unit(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("must lie in [0, 1]".into())
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must be a positive number".into())
    }
}

fn metric_order(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v >= 1.0 {
        Ok(v)
    } else {
        Err("must be at least 1 (or inf)".into())
    }
}

fn transport_order(s: &str) -> Result<f64, String> {
    let v = metric_order(s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite".into())
    }
}

fn bound_order(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (1.0..=2.0).contains(&v) {
        Ok(v)
    } else {
        Err("must lie in [1, 2]".into())
    }
}

fn dimension_k(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 4.0 && v.is_finite() {
        Ok(v)
    } else {
        Err("must exceed 4".into())
    }
}

/// Unseen-cell policies selectable from the command line.
#[derive(Debug, Clone, Copy, ValueEnum)]
enum UnseenArg {
    Uniform,
    Drop,
}

impl From<UnseenArg> for UnseenPolicy {
    fn from(u: UnseenArg) -> Self {
        match u {
            UnseenArg::Uniform => UnseenPolicy::Uniform,
            UnseenArg::Drop => UnseenPolicy::Drop,
        }
    }
}

/// Starts from defaults, then the `--config` file (a plain config or a
/// manifest of the same command).
fn base_config<T: DeserializeOwned + Default>(path: Option<&Path>, command: &str) -> Result<T> {
    match path {
        Some(p) => {
            let obj = load_config_object(p, command)?;
            serde_json::from_value(Value::Object(obj)).with_context(|| format!("invalid config {}", p.display()))
        }
        None => Ok(T::default()),
    }
}

macro_rules! overlay {
    ($cfg:expr, $args:expr, $($field:ident),+) => {
        $(if let Some(v) = $args.$field.clone() { $cfg.$field = v.into(); })+
    };
}

fn require_input(input: &Option<PathBuf>) -> Result<&Path> {
    input.as_deref().context("no input given (use --input or an `input` entry in --config)")
}

fn resolve_seed(seed: &mut Option<u64>) -> u64 {
    match seed {
        Some(s) => *s,
        None => {
            let s = fresh_seed();
            println!("seed = {s} (generated; pass --seed {s} to repeat this run)");
            *seed = Some(s);
            s
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn manifest<T: Serialize>(command: &str, config: &T, seed: Option<u64>, inputs: &[&Path]) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, serde_json::to_value(config)?, seed);
    for p in inputs {
        m.add_input(p)?;
    }
    Ok(m)
}

#[derive(Args)]
struct IngestArgs {
    /// Counts matrix (cells by genes), CSV or MatrixMarket.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Gene ids, one per line (MatrixMarket input).
    #[arg(long)]
    genes: Option<PathBuf>,
    /// Cell ids, one per line (MatrixMarket input).
    #[arg(long)]
    cells: Option<PathBuf>,
    /// Drop genes with positive counts in fewer cells than this.
    #[arg(long)]
    min_cells: Option<usize>,
    /// Number of highly variable genes to keep.
    #[arg(long)]
    hvg: Option<usize>,
    /// Cell-weight scenario stored with the population.
    #[arg(long, value_enum)]
    scenario: Option<ScenarioKind>,
    /// JSON config, or a manifest of an earlier run of this command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output population directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IngestConfig {
    input: Option<PathBuf>,
    format: Option<Format>,
    genes: Option<PathBuf>,
    cells: Option<PathBuf>,
    min_cells: usize,
    hvg: usize,
    scenario: ScenarioKind,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            input: None,
            format: None,
            genes: None,
            cells: None,
            min_cells: DEFAULT_MIN_CELLS,
            hvg: DEFAULT_HVG,
            scenario: ScenarioKind::Uniform,
        }
    }
}

fn ingest_cmd(args: IngestArgs) -> Result<()> {
    let mut cfg: IngestConfig = base_config(args.config.as_deref(), "ingest")?;
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    if args.format.is_some() {
        cfg.format = args.format;
    }
    if args.genes.is_some() {
        cfg.genes = args.genes.clone();
    }
    if args.cells.is_some() {
        cfg.cells = args.cells.clone();
    }
    overlay!(cfg, args, min_cells, hvg, scenario);
    let input = require_input(&cfg.input)?;
    let format = match cfg.format.or_else(|| Format::from_path(input)) {
        Some(f) => f,
        None => bail!("cannot infer the format of {}; pass --format", input.display()),
    };
    let counts = match format {
        Format::Csv => read_counts(input, format)?,
        Format::MatrixMarket => read_matrix_market(input, cfg.genes.as_deref(), cfg.cells.as_deref())?,
    };
    let mut prov = Provenance {
        source: Some(input.to_path_buf()),
        steps: vec![Step::Read {
            format,
            cells: counts.n_cells(),
            genes: counts.n_genes(),
        }],
    };
    let kept = preprocess(&counts, cfg.min_cells, cfg.hvg, &mut prov)?;
    let mut spec = build_population(&kept, cfg.scenario)?;
    prov.steps.append(&mut spec.provenance.steps);
    spec.provenance = prov;
    let s = population_stats(&spec.mu);
    let stats = BTreeMap::from([
        ("N".to_owned(), s.atom_count as f64),
        ("d".to_owned(), s.ambient_dim as f64),
        ("mean_l0".to_owned(), s.mean_l0),
        ("mean_sq_l2".to_owned(), s.mean_sq_l2),
    ]);
    let mut inputs = vec![input];
    inputs.extend(cfg.genes.as_deref());
    inputs.extend(cfg.cells.as_deref());
    let m = manifest("ingest", &cfg, None, &inputs)?;
    save_population(&args.out, &spec, Some(&kept), None, stats)?;
    m.write(&args.out)?;
    println!("N = {}", s.atom_count);
    println!("d = {}", s.ambient_dim);
    println!("mean_l0 = {}", s.mean_l0);
    println!("mean_sq_l2 = {}", s.mean_sq_l2);
    println!("population written to {}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct StatsArgs {
    /// Population directory, or a CSV / MatrixMarket counts file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON config, or a manifest of an earlier run of this command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write `stats.json` and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StatsConfig {
    input: Option<PathBuf>,
}

fn stats_cmd(args: StatsArgs) -> Result<()> {
    let mut cfg: StatsConfig = base_config(args.config.as_deref(), "stats")?;
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    let input = require_input(&cfg.input)?;
    let spec = load_input(input)?;
    let s = population_stats(&spec.mu);
    println!("N = {}", s.atom_count);
    println!("d = {}", s.ambient_dim);
    println!("mean_l0 = {}", s.mean_l0);
    println!("mean_sq_l2 = {}", s.mean_sq_l2);
    if let Some(out) = &args.out {
        let m = manifest("stats", &cfg, None, &[input])?;
        std::fs::create_dir_all(out)?;
        write_json(&out.join("stats.json"), &s)?;
        m.write(out)?;
    }
    Ok(())
}

#[derive(Args)]
struct DimensionArgs {
    /// Population directory, or a CSV / MatrixMarket counts file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Fraction of variance the leading components must capture.
    #[arg(long, value_parser = half_open_unit)]
    threshold: Option<f64>,
    /// JSON config, or a manifest of an earlier run of this command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for `spectrum.csv` and the manifest.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DimensionConfig {
    input: Option<PathBuf>,
    threshold: f64,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        Self {
            input: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

fn dimension_cmd(args: DimensionArgs) -> Result<()> {
    let mut cfg: DimensionConfig = base_config(args.config.as_deref(), "dimension")?;
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    overlay!(cfg, args, threshold);
    let input = require_input(&cfg.input)?;
    let m = manifest("dimension", &cfg, None, &[input])?;
    let spec = load_input(input)?;
    let (k, spectrum) = pca_intrinsic_dim(&spec.mu, cfg.threshold)?;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join("spectrum.csv");
    spectrum.write_csv(std::fs::File::create(&path)?)?;
    m.write(&args.out)?;
    println!("k = {k}");
    println!("threshold = {}", cfg.threshold);
    println!("spectrum written to {}", path.display());
    Ok(())
}

#[derive(Args)]
struct SynthArgs {
    /// Population directory, or a CSV / MatrixMarket counts file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Factorization rank r.
    #[arg(long)]
    rank: Option<usize>,
    /// Master seed; generated and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON config, or a manifest of an earlier run of this command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output population directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthConfig {
    input: Option<PathBuf>,
    rank: Option<usize>,
    seed: Option<u64>,
}

fn synth_cmd(args: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = base_config(args.config.as_deref(), "synth")?;
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    if args.rank.is_some() {
        cfg.rank = args.rank;
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    let input = require_input(&cfg.input)?.to_path_buf();
    let rank = cfg.rank.context("no rank given (use --rank)")?;
    let seed = resolve_seed(&mut cfg.seed);
    let m = manifest("synth", &cfg, Some(seed), &[&input])?;
    let spec = load_input(&input)?;
    let mut rng = substream(seed, &[]);
    let syn = synthesize_low_dim(&spec.mu, rank, &mut rng)?;

    let frequencies = spec.frequencies.as_ref().map(|f| syn.kept_rows.iter().map(|&i| f[i]).collect::<Vec<_>>());
    let mut provenance = spec.provenance.clone();
    provenance.steps.push(Step::Synthesize {
        rank,
        algorithm: NMF_ALGORITHM.into(),
        iterations: syn.iterations,
        relative_error: syn.relative_error,
        k: syn.k,
        dropped_rows: spec.mu.len() - syn.kept_rows.len(),
    });
    let kind = spec.scenario.kind();
    let out_spec = PopulationSpec {
        scenario: seqdepth::sequencing::WeightModel::new(kind, frequencies.clone())?,
        mu: syn.mu_k.clone(),
        frequencies,
        provenance,
    };
    let genes = if input.is_dir() {
        let p = input.join("genes.txt");
        std::fs::read_to_string(&p)
            .ok()
            .map(|t| t.lines().map(str::to_owned).collect::<Vec<_>>())
            .filter(|g| g.len() == syn.mu_k.dim())
    } else {
        None
    };
    let stats = BTreeMap::from([
        ("rank".to_owned(), rank as f64),
        ("relative_error".to_owned(), syn.relative_error),
        ("k".to_owned(), syn.k as f64),
        ("mean_l0".to_owned(), syn.mean_l0),
    ]);
    save_population(&args.out, &out_spec, None, genes.as_deref(), stats)?;
    let table = format!("rank,relative_error,k,mean_l0\n{},{},{},{}\n", rank, syn.relative_error, syn.k, syn.mean_l0);
    std::fs::write(args.out.join("stats.csv"), &table)?;
    m.write(&args.out)?;
    println!("rank = {rank}");
    println!("relative_error = {:.4}", syn.relative_error);
    println!("k = {}", syn.k);
    println!("mean_l0 = {:.2}", syn.mean_l0);
    println!("population written to {}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct AllocateArgs {
    /// Total read budget m.
    #[arg(long, value_parser = positive)]
    m: Option<f64>,
    /// E|P|_0; taken from --input when omitted.
    #[arg(long, value_parser = positive)]
    mean_l0: Option<f64>,
    /// E|P|_2^2 for the lower bound; taken from --input when omitted.
    #[arg(long, value_parser = closed_unit)]
    mean_sq_l2: Option<f64>,
    /// Intrinsic dimension k (> 4).
    #[arg(long, value_parser = dimension_k)]
    k: Option<f64>,
    /// Allocation constant C.
    #[arg(long = "C", value_parser = positive)]
    c_alloc: Option<f64>,
    /// Target error for the minimum read budget.
    #[arg(long, value_parser = open_unit)]
    eps: Option<f64>,
    /// Tail exponent in (0, 1).
    #[arg(long, value_parser = open_unit)]
    alpha: Option<f64>,
    /// Lower-bound constant on cell weights.
    #[arg(long = "c-star", value_parser = positive)]
    c_star: Option<f64>,
    /// Wasserstein order in [1, 2].
    #[arg(long, value_parser = bound_order)]
    p: Option<f64>,
    /// Population (directory or counts file) to read E|P|_0 and E|P|_2^2 from.
    #[arg(long)]
    input: Option<PathBuf>,
    /// JSON config, or a manifest of an earlier run of this command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write `allocation.json` and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AllocateConfig {
    m: Option<f64>,
    eps: Option<f64>,
    input: Option<PathBuf>,
    params: AllocationParams,
}

fn allocate_cmd(args: AllocateArgs) -> Result<()> {
    let mut cfg: AllocateConfig = base_config(args.config.as_deref(), "allocate")?;
    if args.m.is_some() {
        cfg.m = args.m;
    }
    if args.eps.is_some() {
        cfg.eps = args.eps;
    }
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    if let Some(input) = &cfg.input {
        let s = population_stats(&load_input(input)?.mu);
        cfg.params.mean_l0 = s.mean_l0;
        cfg.params.mean_sq_l2 = s.mean_sq_l2;
    }
    let p = &mut cfg.params;
    overlay!(p, args, mean_l0, mean_sq_l2, k, c_alloc, alpha, c_star, p);
    if args.mean_l0.is_none() && cfg.input.is_none() && args.config.is_none() {
        bail!("no E|P|_0 given (use --mean-l0 or --input)");
    }
    let m = cfg.m.context("no read budget given (use --m)")?;
    cfg.params.validate()?;
    let report = allocation::report(m, cfg.eps, &cfg.params);
    println!("m = {}", report.m);
    println!("n_opt = {:.3}", report.n_opt);
    println!("n_cells = {}", report.n_cells);
    println!("exponent = {:.6}", report.exponent);
    println!("upper_bound = {:.6}", report.upper_bound);
    println!(
        "lower_bound = {:.6} ({})",
        report.lower_bound,
        if report.lower_bound_valid { "valid" } else { "read-budget condition not met" }
    );
    println!("rate_upper = {:.6}", report.rate_upper);
    if let Some(r) = report.min_reads {
        println!("min_reads = {r:.1}");
    }
    println!("m0 = {:.1}{}", report.m0, if report.below_m0 { " (m is below m0)" } else { "" });
    for t in &report.omitted_terms {
        println!("note: {t}");
    }
    if let Some(out) = &args.out {
        let inputs: Vec<&Path> = cfg.input.as_deref().into_iter().collect();
        let man = manifest("allocate", &cfg, None, &inputs)?;
        std::fs::create_dir_all(out)?;
        write_json(&out.join("allocation.json"), &report)?;
        man.write(out)?;
    }
    Ok(())
}

#[derive(Args)]
struct SimulateArgs {
    /// Population directory, or a CSV / MatrixMarket counts file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Number of cells.
    #[arg(long)]
    n: Option<usize>,
    /// Number of reads.
    #[arg(long)]
    m: Option<u64>,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioKind>,
    /// Master seed; generated and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Wasserstein order.
    #[arg(long, value_parser = transport_order)]
    p: Option<f64>,
    /// Ground metric l_q.
    #[arg(long, value_parser = metric_order)]
    q: Option<f64>,
    /// Treatment of cells that receive no reads.
    #[arg(long, value_enum)]
    unseen: Option<UnseenArg>,
    /// JSON config, or a manifest of an earlier run of this command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write `simulate.json` and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateConfig {
    input: Option<PathBuf>,
    n: Option<usize>,
    m: Option<u64>,
    scenario: ScenarioKind,
    seed: Option<u64>,
    p: f64,
    q: f64,
    unseen: UnseenPolicy,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let s = SweepConfig::default();
        Self {
            input: None,
            n: None,
            m: None,
            scenario: s.scenario,
            seed: None,
            p: s.p,
            q: s.q,
            unseen: s.unseen_policy,
        }
    }
}

#[derive(Serialize)]
struct SimulateOutput {
    #[serde(rename = "W_noisy_vs_mu")]
    w_noisy_vs_mu: f64,
    #[serde(rename = "W_noisy_vs_mun")]
    w_noisy_vs_mun: f64,
    #[serde(rename = "W_mun_vs_mu")]
    w_mun_vs_mu: f64,
    paired_cost: Option<f64>,
}

fn simulate_cmd(args: SimulateArgs) -> Result<()> {
    let mut cfg: SimulateConfig = base_config(args.config.as_deref(), "simulate")?;
    if args.input.is_some() {
        cfg.input = args.input.clone();
    }
    for (dst, src) in [(&mut cfg.seed, args.seed), (&mut cfg.m, args.m)] {
        if src.is_some() {
            *dst = src;
        }
    }
    if args.n.is_some() {
        cfg.n = args.n;
    }
    overlay!(cfg, args, scenario, p, q, unseen);
    let input = require_input(&cfg.input)?.to_path_buf();
    let n = cfg.n.context("no cell count given (use --n)")?;
    let m = cfg.m.context("no read budget given (use --m)")?;
    if n == 0 {
        bail!("--n must be at least 1");
    }
    let seed = resolve_seed(&mut cfg.seed);
    let man = manifest("simulate", &cfg, Some(seed), &[&input])?;
    let spec = load_input(&input)?;
    let sweep_cfg = SweepConfig {
        m_grid: vec![m],
        n_grid: vec![n],
        trials: 1,
        p: cfg.p,
        q: cfg.q,
        scenario: cfg.scenario,
        unseen_policy: cfg.unseen.clone(),
        master_seed: seed,
        theory: None,
    };
    let prep = Prepared::new(&spec, cfg.scenario)?;
    let o = run_trial(&prep, m, n, 0, &sweep_cfg)?;
    let out = SimulateOutput {
        w_noisy_vs_mu: o.record.w_noisy_vs_mu,
        w_noisy_vs_mun: o.record.w_noisy_vs_mun,
        w_mun_vs_mu: o.record.w_mun_vs_mu,
        paired_cost: o.paired_cost,
    };
    println!("W_noisy_vs_mu = {}", out.w_noisy_vs_mu);
    println!("W_noisy_vs_mun = {}", out.w_noisy_vs_mun);
    println!("W_mun_vs_mu = {}", out.w_mun_vs_mu);
    if let Some(c) = out.paired_cost {
        println!("paired_cost = {c}");
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("simulate.json"), &out)?;
        man.write(dir)?;
    }
    Ok(())
}

#[derive(Args)]
struct SweepArgs {
    /// Population directory, or a CSV / MatrixMarket counts file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Sweep configuration (JSON), or a manifest of an earlier sweep.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Master seed; generated and printed when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per grid cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated read budgets.
    #[arg(long, value_delimiter = ',')]
    m_grid: Option<Vec<u64>>,
    /// Comma-separated cell counts.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Wasserstein order.
    #[arg(long, value_parser = transport_order)]
    p: Option<f64>,
    /// Ground metric l_q (`inf` allowed).
    #[arg(long, value_parser = metric_order)]
    q: Option<f64>,
    /// Cell-weight scenario.
    #[arg(long, value_enum)]
    scenario: Option<ScenarioKind>,
    /// Treatment of cells that receive no reads.
    #[arg(long, value_enum)]
    unseen: Option<UnseenArg>,
    /// Intrinsic dimension for the theoretical overlay.
    #[arg(long, value_parser = dimension_k)]
    k: Option<f64>,
    /// Allocation constant for the theoretical overlay.
    #[arg(long = "C", value_parser = positive)]
    c_alloc: Option<f64>,
    /// Figure width in pixels.
    #[arg(long, default_value_t = 640)]
    width: u32,
    /// Figure height in pixels.
    #[arg(long, default_value_t = 480)]
    height: u32,
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let mut obj: Map<String, Value> = match &args.config {
        Some(p) => load_config_object(p, "sweep")?,
        None => Map::new(),
    };
    let mut input: Option<PathBuf> = obj.remove("input").map(serde_json::from_value).transpose()?;
    let seed_in_config = obj.contains_key("master_seed");
    let mut cfg: SweepConfig = serde_json::from_value(Value::Object(obj)).context("invalid sweep config")?;
    if args.input.is_some() {
        input = args.input.clone();
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    } else if !seed_in_config {
        let mut s = None;
        cfg.master_seed = resolve_seed(&mut s);
    }
    overlay!(cfg, args, trials, m_grid, n_grid, p, q, scenario);
    if let Some(u) = args.unseen {
        cfg.unseen_policy = u.into();
    }
    let input = require_input(&input)?.to_path_buf();
    let spec = load_input(&input)?;
    if args.k.is_some() || args.c_alloc.is_some() {
        let s = population_stats(&spec.mu);
        let mut t = cfg.theory.unwrap_or_default();
        t.mean_l0 = s.mean_l0;
        t.mean_sq_l2 = s.mean_sq_l2;
        if let Some(k) = args.k {
            t.k = k;
        }
        if let Some(c) = args.c_alloc {
            t.c_alloc = c;
        }
        cfg.theory = Some(t);
    }
    cfg.validate()?;

    let mut snapshot = serde_json::to_value(&cfg)?;
    snapshot["input"] = serde_json::to_value(&input)?;
    let mut man = RunManifest::new("sweep", snapshot, Some(cfg.master_seed));
    man.add_input(&input)?;

    let result = sweep(&spec, &cfg, args.workers)?;
    let files = emit_outputs(
        &result,
        &args.out,
        &PlotOptions {
            width: args.width,
            height: args.height,
        },
    )?;
    match fit_slope(&result.n_star) {
        Ok(fit) => {
            write_json(&args.out.join("fit.json"), &fit)?;
            println!("slope = {:.4} (r2 = {:.4}, {} points)", fit.slope, fit.r2, fit.points);
        }
        Err(e) => println!("slope not fitted: {e}"),
    }
    man.write(&args.out)?;
    println!("m,n_star,boundary");
    for (m, s) in &result.n_star {
        println!("{m},{},{}", s.n, s.boundary);
    }
    if !result.errors.is_empty() {
        println!("{} grid cells failed; see {}", result.errors.len(), files.errors.unwrap().display());
    }
    println!("results written to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let outcome = match cli.command {
        Command::Ingest(a) => ingest_cmd(a),
        Command::Stats(a) => stats_cmd(a),
        Command::Dimension(a) => dimension_cmd(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Allocate(a) => allocate_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
