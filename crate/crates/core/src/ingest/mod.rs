//! Counts matrices, gene filtering, highly-variable-gene selection and
//! population construction.

mod mtx;
mod store;

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequencing::{ScenarioKind, WeightModel};
use crate::simplex::{DiscreteDistribution, ExpressionProfile};

pub use mtx::{read_matrix_market, write_counts_mtx};
pub use store::{load_input, load_population, save_population, PopulationFile, StoredKind};

pub const DEFAULT_MIN_CELLS: usize = 10;
pub const DEFAULT_HVG: usize = 1000;
pub const HVG_METHOD: &str = "dispersion(variance/mean of raw counts)";

/// Input file layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Header of gene ids, one row per cell starting with its id.
    Csv,
    /// `coordinate integer general`, cells as rows.
    #[value(name = "mtx")]
    #[serde(rename = "mtx")]
    MatrixMarket,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "mtx" => Some(Self::MatrixMarket),
            _ => None,
        }
    }
}

/// Cells-by-genes read counts, stored as sparse rows of positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsMatrix {
    rows: Vec<Vec<(u32, u64)>>,
    gene_ids: Vec<String>,
    cell_ids: Vec<String>,
}

impl CountsMatrix {
    /// Rows may list genes in any order; duplicates are summed and zeros dropped.
    pub fn new(rows: Vec<Vec<(u32, u64)>>, gene_ids: Vec<String>, cell_ids: Vec<String>) -> Result<Self> {
        if rows.len() != cell_ids.len() {
            return Err(Error::DimensionMismatch {
                left: rows.len(),
                right: cell_ids.len(),
            });
        }
        let d = gene_ids.len();
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.sort_by_key(|&(j, _)| j);
                let mut out: Vec<(u32, u64)> = Vec::with_capacity(r.len());
                for (j, c) in r {
                    if j as usize >= d {
                        return Err(Error::DimensionMismatch { left: d, right: j as usize + 1 });
                    }
                    match out.last_mut() {
                        Some(last) if last.0 == j => last.1 += c,
                        _ if c > 0 => out.push((j, c)),
                        _ => {}
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rows, gene_ids, cell_ids })
    }

    /// Builds a matrix from dense rows with generated ids.
    pub fn from_dense(rows: &[Vec<u64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let sparse = rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &c)| c > 0).map(|(j, &c)| (j as u32, c)).collect())
            .collect();
        Self::new(sparse, default_ids("gene", d), default_ids("cell", rows.len()))
    }

    pub fn n_cells(&self) -> usize {
        self.rows.len()
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn rows(&self) -> &[Vec<(u32, u64)>] {
        &self.rows
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cell_ids
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.iter().map(|&(_, c)| c).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<u64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut out = vec![0; self.n_genes()];
                for &(j, c) in r {
                    out[j as usize] = c;
                }
                out
            })
            .collect()
    }

    /// Number of cells in which each gene has a positive count.
    pub fn cells_per_gene(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_genes()];
        for r in &self.rows {
            for &(j, _) in r {
                out[j as usize] += 1;
            }
        }
        out
    }

    /// Keeps the flagged genes in their original order.
    fn keep_genes(&self, keep: &[bool]) -> Self {
        let mut remap = vec![u32::MAX; keep.len()];
        let mut gene_ids = Vec::new();
        for (j, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
            remap[j] = gene_ids.len() as u32;
            gene_ids.push(self.gene_ids[j].clone());
        }
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().filter(|&&(j, _)| keep[j as usize]).map(|&(j, c)| (remap[j as usize], c)).collect())
            .collect();
        Self {
            rows,
            gene_ids,
            cell_ids: self.cell_ids.clone(),
        }
    }

    /// Removes cells without any counts, returning how many were dropped.
    pub fn drop_empty_cells(&mut self) -> usize {
        let before = self.rows.len();
        let mut ids = std::mem::take(&mut self.cell_ids).into_iter();
        let (rows, cell_ids): (Vec<_>, Vec<_>) = std::mem::take(&mut self.rows)
            .into_iter()
            .map(|r| (r, ids.next().unwrap()))
            .filter(|(r, _)| !r.is_empty())
            .unzip();
        self.rows = rows;
        self.cell_ids = cell_ids;
        before - self.rows.len()
    }
}

pub(crate) fn default_ids(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Reads a counts matrix in the given format.
pub fn read_counts(path: &Path, format: Format) -> Result<CountsMatrix> {
    match format {
        Format::Csv => read_csv(path),
        Format::MatrixMarket => read_matrix_market(path, None, None),
    }
}

fn read_csv(path: &Path) -> Result<CountsMatrix> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(0, e.to_string()))?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| parse_err(e.position().map_or(1, |p| p.line()), e.to_string()))?,
        None => return Err(parse_err(1, "empty file".into())),
    };
    let gene_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if gene_ids.is_empty() {
        return Err(parse_err(1, "header has no gene columns".into()));
    }
    let mut rows = Vec::new();
    let mut cell_ids = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != gene_ids.len() + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", gene_ids.len() + 1, rec.len())));
        }
        cell_ids.push(rec[0].to_owned());
        let mut row = Vec::new();
        for (j, field) in rec.iter().skip(1).enumerate() {
            let c: u64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("`{field}` is not a nonnegative integer count")))?;
            if c > 0 {
                row.push((j as u32, c));
            }
        }
        rows.push(row);
    }
    CountsMatrix::new(rows, gene_ids, cell_ids)
}

/// Writes the matrix as CSV in the layout `read_counts` expects.
pub fn write_counts_csv(path: &Path, counts: &CountsMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    let header = std::iter::once("cell").chain(counts.gene_ids.iter().map(String::as_str));
    w.write_record(header).map_err(std::io::Error::from)?;
    for (id, row) in counts.cell_ids.iter().zip(counts.to_dense()) {
        let fields = std::iter::once(id.clone()).chain(row.iter().map(u64::to_string));
        w.write_record(fields).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// One preprocessing step, as recorded in the provenance sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Step {
    Read {
        format: Format,
        cells: usize,
        genes: usize,
    },
    FilterGenes {
        min_cells: usize,
        genes_before: usize,
        genes_after: usize,
    },
    SelectHvg {
        d_target: usize,
        genes_before: usize,
        genes_after: usize,
        method: String,
    },
    DropEmptyCells {
        dropped: usize,
    },
    BuildPopulation {
        scenario: ScenarioKind,
        atoms: usize,
        dropped_cells: usize,
    },
    Synthesize {
        rank: usize,
        algorithm: String,
        iterations: usize,
        relative_error: f64,
        k: usize,
        dropped_rows: usize,
    },
}

/// Where a population came from and what was done to it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    pub steps: Vec<Step>,
}

/// Drops genes with positive counts in fewer than `min_cells` cells.
pub fn filter_genes(counts: &CountsMatrix, min_cells: usize) -> Result<CountsMatrix> {
    let keep: Vec<bool> = counts.cells_per_gene().iter().map(|&c| c >= min_cells && c > 0).collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::EmptyMatrix);
    }
    Ok(counts.keep_genes(&keep))
}

/// Keeps the `d_target` genes with the largest variance-to-mean ratio of
/// their counts across cells. Ties go to the smaller gene id; the kept genes
/// stay in their original column order.
pub fn select_hvg(counts: &CountsMatrix, d_target: usize) -> CountsMatrix {
    let d = counts.n_genes();
    if d_target >= d {
        if d_target > d {
            warn!("requested {d_target} variable genes but only {d} remain; keeping all");
        }
        return counts.clone();
    }
    let n = counts.n_cells() as f64;
    let mut sum = vec![0.0f64; d];
    let mut sum_sq = vec![0.0f64; d];
    for r in counts.rows() {
        for &(j, c) in r {
            let c = c as f64;
            sum[j as usize] += c;
            sum_sq[j as usize] += c * c;
        }
    }
    let dispersion: Vec<f64> = (0..d)
        .map(|j| {
            let mean = sum[j] / n;
            if mean <= 0.0 {
                return 0.0;
            }
            let var = (sum_sq[j] / n - mean * mean).max(0.0);
            var / mean
        })
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| match dispersion[b].total_cmp(&dispersion[a]) {
        Ordering::Equal => counts.gene_ids[a].cmp(&counts.gene_ids[b]),
        o => o,
    });
    let mut keep = vec![false; d];
    for &j in &order[..d_target] {
        keep[j] = true;
    }
    counts.keep_genes(&keep)
}

/// Filtering then HVG selection then removal of cells left without counts.
pub fn preprocess(counts: &CountsMatrix, min_cells: usize, hvg: usize, provenance: &mut Provenance) -> Result<CountsMatrix> {
    let filtered = filter_genes(counts, min_cells)?;
    provenance.steps.push(Step::FilterGenes {
        min_cells,
        genes_before: counts.n_genes(),
        genes_after: filtered.n_genes(),
    });
    let mut selected = select_hvg(&filtered, hvg);
    provenance.steps.push(Step::SelectHvg {
        d_target: hvg,
        genes_before: filtered.n_genes(),
        genes_after: selected.n_genes(),
        method: HVG_METHOD.into(),
    });
    let dropped = selected.drop_empty_cells();
    if dropped > 0 {
        warn!("{dropped} cells have no counts left after gene selection; dropping them");
    }
    provenance.steps.push(Step::DropEmptyCells { dropped });
    if selected.n_cells() == 0 {
        return Err(Error::EmptyMatrix);
    }
    Ok(selected)
}

/// Ground-truth population with its cell-weight scenario.
#[derive(Debug, Clone)]
pub struct PopulationSpec {
    pub mu: DiscreteDistribution,
    pub scenario: WeightModel,
    /// Per-atom sampling frequencies (library sizes), when known.
    pub frequencies: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl PopulationSpec {
    /// A population without frequency information.
    pub fn from_distribution(mu: DiscreteDistribution) -> Self {
        Self {
            mu,
            scenario: WeightModel::Uniform,
            frequencies: None,
            provenance: Provenance::default(),
        }
    }

    /// Same population under another weight scenario.
    pub fn with_scenario(&self, kind: ScenarioKind) -> Result<Self> {
        Ok(Self {
            scenario: WeightModel::new(kind, self.frequencies.clone())?,
            ..self.clone()
        })
    }
}

/// The uniform mixture of normalized count rows. Under the coupled and
/// independent scenarios the row sums become the sampling frequencies.
pub fn build_population(counts: &CountsMatrix, kind: ScenarioKind) -> Result<PopulationSpec> {
    let d = counts.n_genes();
    let mut atoms = Vec::with_capacity(counts.n_cells());
    let mut freqs = Vec::with_capacity(counts.n_cells());
    let mut dropped = 0;
    for (row, id) in counts.rows().iter().zip(counts.cell_ids()) {
        if row.is_empty() {
            warn!("cell {id} has no counts; dropping it");
            dropped += 1;
            continue;
        }
        atoms.push(ExpressionProfile::from_counts(d, row.iter().map(|&(j, c)| (j as usize, c)))?);
        freqs.push(row.iter().map(|&(_, c)| c as f64).sum());
    }
    if atoms.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let n_atoms = atoms.len();
    let mu = DiscreteDistribution::uniform(atoms)?;
    let scenario = WeightModel::new(kind, Some(freqs.clone()))?;
    Ok(PopulationSpec {
        mu,
        scenario,
        frequencies: Some(freqs),
        provenance: Provenance {
            source: None,
            steps: vec![Step::BuildPopulation {
                scenario: kind,
                atoms: n_atoms,
                dropped_cells: dropped,
            }],
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn toy() -> CountsMatrix {
        CountsMatrix::from_dense(&[vec![1, 0, 2], vec![0, 0, 5]]).unwrap()
    }

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn reads_toy_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "toy.csv", "cell,g1,g2,g3\nc1,1,0,2\nc2,0,0,5\n");
        let m = read_counts(&p, Format::Csv).unwrap();
        assert_eq!((m.n_cells(), m.n_genes()), (2, 3));
        assert_eq!(m.to_dense(), vec![vec![1, 0, 2], vec![0, 0, 5]]);
        assert_eq!(m.gene_ids(), ["g1", "g2", "g3"]);
        assert_eq!(m.cell_ids(), ["c1", "c2"]);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        for (text, line) in [
            ("cell,a,b\nc1,1,2\nc2,-1,0\n", 3),
            ("cell,a,b\nc1,1.5,2\n", 2),
            ("cell,a,b\nc1,1,2\nc2,1\n", 3),
            ("cell,a,b\nc1,1,x\n", 2),
        ] {
            let p = write(dir.path(), "bad.csv", text);
            match read_counts(&p, Format::Csv) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn mtx_matches_csv() {
        let dir = tempfile::tempdir().unwrap();
        let csv = write(dir.path(), "m.csv", "cell,gene1,gene2,gene3\ncell1,1,0,2\ncell2,0,3,5\n");
        let mtx = write(
            dir.path(),
            "m.mtx",
            "%%MatrixMarket matrix coordinate integer general\n% comment\n2 3 4\n1 1 1\n1 3 2\n2 2 3\n2 3 5\n",
        );
        assert_eq!(read_counts(&csv, Format::Csv).unwrap(), read_counts(&mtx, Format::MatrixMarket).unwrap());
    }

    #[test]
    fn filter_examples() {
        let m = CountsMatrix::from_dense(&[vec![1, 0, 2], vec![3, 0, 0]]).unwrap();
        let f = filter_genes(&m, 1).unwrap();
        assert_eq!(f.gene_ids(), ["gene1", "gene3"]);
        let f = filter_genes(&toy(), 1).unwrap();
        assert_eq!(f.gene_ids(), ["gene1", "gene3"]);
        assert!(matches!(filter_genes(&toy(), 3), Err(Error::EmptyMatrix)));

        // gene A in 9 of 12 cells, gene B in 10
        let rows: Vec<Vec<u64>> = (0..12).map(|i| vec![(i < 9) as u64, (i < 10) as u64 * 2]).collect();
        let m = CountsMatrix::from_dense(&rows).unwrap();
        let f = filter_genes(&m, 10).unwrap();
        assert_eq!(f.gene_ids(), ["gene2"]);
        assert_eq!(f.rows()[11], vec![]);
    }

    #[test]
    fn filter_min_one_is_identity_without_empty_genes() {
        let m = CountsMatrix::from_dense(&[vec![1, 4, 2], vec![0, 1, 5]]).unwrap();
        assert_eq!(filter_genes(&m, 1).unwrap(), m);
    }

    #[test]
    fn hvg_examples() {
        // per-gene variance/mean over 2 cells: gene x = 5, y = 2, z = 2
        let rows = vec![vec![10u64, 4, 4], vec![0, 0, 0], vec![0, 0, 0]];
        let disp = |col: &[f64]| {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / n / mean
        };
        assert!((disp(&[10.0, 0.0, 0.0]) - 6.666666666666667).abs() < 1e-12);
        let m = CountsMatrix::new(
            rows.iter().map(|r| r.iter().enumerate().map(|(j, &c)| (j as u32, c)).collect()).collect(),
            vec!["x".into(), "z".into(), "y".into()],
            default_ids("cell", 3),
        )
        .unwrap();
        let h = select_hvg(&m, 2);
        assert_eq!(h.gene_ids(), ["x", "y"]);

        assert_eq!(select_hvg(&toy(), 3), toy());

        let c = CountsMatrix::from_dense(&[vec![3, 1, 0], vec![3, 5, 2]]).unwrap();
        assert_eq!(select_hvg(&c, 2).gene_ids(), ["gene2", "gene3"]);
    }

    #[test]
    fn hvg_exact_dispersions() {
        // gene a: counts (0, 10) -> mean 5, var 25, dispersion 5
        // genes b, c: counts (0, 4) -> mean 2, var 4, dispersion 2
        let m = CountsMatrix::new(
            vec![vec![], vec![(0, 10), (1, 4), (2, 4)]],
            vec!["a".into(), "c".into(), "b".into()],
            default_ids("cell", 2),
        )
        .unwrap();
        assert_eq!(select_hvg(&m, 2).gene_ids(), ["a", "b"]);
    }

    #[test]
    fn population_examples() {
        let m = CountsMatrix::from_dense(&[vec![2, 2]]).unwrap();
        let p = build_population(&m, ScenarioKind::Coupled).unwrap();
        assert_eq!(p.mu.atoms()[0].to_dense(), vec![0.5, 0.5]);
        assert_eq!(p.scenario, WeightModel::Coupled(vec![4.0]));

        let m = CountsMatrix::from_dense(&[vec![1, 0, 2], vec![0, 0, 0], vec![0, 0, 5]]).unwrap();
        let u = build_population(&m, ScenarioKind::Uniform).unwrap();
        let c = build_population(&m, ScenarioKind::Coupled).unwrap();
        let i = build_population(&m, ScenarioKind::Independent).unwrap();
        assert_eq!(u.mu.len(), 2);
        assert_eq!(u.scenario, WeightModel::Uniform);
        assert_eq!(u.mu, c.mu);
        assert_eq!(c.mu, i.mu);
        assert_eq!(i.scenario, WeightModel::Independent(vec![3.0, 5.0]));
        for a in u.mu.atoms() {
            assert!((a.sum() - 1.0).abs() < 1e-12);
        }
        let empty = CountsMatrix::from_dense(&[vec![0, 0]]).unwrap();
        assert!(matches!(build_population(&empty, ScenarioKind::Uniform), Err(Error::EmptyMatrix)));
    }

    #[test]
    fn preprocess_records_steps() {
        let rows: Vec<Vec<u64>> = (0..12).map(|i| vec![(i < 9) as u64, (i < 10) as u64 * (i + 1), 1]).collect();
        let m = CountsMatrix::from_dense(&rows).unwrap();
        let mut prov = Provenance::default();
        let out = preprocess(&m, 10, 1, &mut prov).unwrap();
        assert_eq!(out.gene_ids(), ["gene2"]);
        assert_eq!(out.n_cells(), 10);
        assert_eq!(prov.steps.len(), 3);
        assert_eq!(prov.steps[2], Step::DropEmptyCells { dropped: 2 });
        let json = serde_json::to_string(&prov).unwrap();
        assert!(json.contains("\"step\":\"filter_genes\""));
    }
}
