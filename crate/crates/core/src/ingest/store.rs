//! On-disk population directories.
//!
//! A directory holds `population.json` (metadata), either `counts.mtx`
//! (integer counts, rows normalized on load) or `atoms.mtx` (profiles stored
//! verbatim), `genes.txt`, `cells.txt` and `provenance.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mtx::{read_coordinates, read_ids, write_ids, Field};
use super::{build_population, read_counts, read_matrix_market, write_counts_mtx, CountsMatrix, Format, PopulationSpec, Provenance, Step};
use crate::error::{invalid, Error, Result};
use crate::sequencing::{ScenarioKind, WeightModel};
use crate::simplex::{DiscreteDistribution, ExpressionProfile};

pub const METADATA_FILE: &str = "population.json";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoredKind {
    Counts,
    Atoms,
}

/// Contents of `population.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationFile {
    pub kind: StoredKind,
    pub atoms: usize,
    pub dim: usize,
    pub scenario: ScenarioKind,
    /// Atom weights; absent for the uniform mixture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Per-atom sampling frequencies; absent when unknown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<f64>>,
    /// Free-form statistics written by the producing command.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub stats: BTreeMap<String, f64>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `spec` to `dir`. With `counts`, the raw matrix is stored and the
/// population is rebuilt from it on load; otherwise atoms are stored exactly.
pub fn save_population(
    dir: &Path,
    spec: &PopulationSpec,
    counts: Option<&CountsMatrix>,
    gene_ids: Option<&[String]>,
    stats: BTreeMap<String, f64>,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mu = &spec.mu;
    let kind = match counts {
        Some(c) => {
            if c.nnz() == 0 || c.rows().iter().any(Vec::is_empty) || c.n_cells() != mu.len() {
                return Err(invalid("counts", "stored counts must have one nonempty row per atom"));
            }
            write_counts_mtx(&dir.join("counts.mtx"), c)?;
            write_ids(&dir.join("genes.txt"), c.gene_ids())?;
            write_ids(&dir.join("cells.txt"), c.cell_ids())?;
            StoredKind::Counts
        }
        None => {
            write_atoms(&dir.join("atoms.mtx"), mu)?;
            let genes = gene_ids.map(<[String]>::to_vec).unwrap_or_else(|| super::default_ids("gene", mu.dim()));
            if genes.len() != mu.dim() {
                return Err(Error::DimensionMismatch {
                    left: mu.dim(),
                    right: genes.len(),
                });
            }
            write_ids(&dir.join("genes.txt"), &genes)?;
            write_ids(&dir.join("cells.txt"), &super::default_ids("atom", mu.len()))?;
            StoredKind::Atoms
        }
    };
    let meta = PopulationFile {
        kind,
        atoms: mu.len(),
        dim: mu.dim(),
        scenario: spec.scenario.kind(),
        weights: (!mu.is_uniform()).then(|| mu.weights().to_vec()),
        frequencies: spec.frequencies.clone(),
        stats,
    };
    write_json(&dir.join(METADATA_FILE), &meta)?;
    write_json(&dir.join(PROVENANCE_FILE), &spec.provenance)?;
    Ok(())
}

fn write_atoms(path: &Path, mu: &DiscreteDistribution) -> Result<()> {
    use std::io::Write;
    let nnz: usize = mu.atoms().iter().map(ExpressionProfile::l0_norm).sum();
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", mu.len(), mu.dim(), nnz)?;
    for (i, a) in mu.atoms().iter().enumerate() {
        for (j, v) in a.iter() {
            // shortest representation that parses back to the same bits
            writeln!(w, "{} {} {}", i + 1, j + 1, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_atoms(path: &Path) -> Result<Vec<ExpressionProfile>> {
    let c = read_coordinates(path, Field::Real)?;
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); c.rows];
    for (i, j, v) in c.entries {
        if v > 0.0 {
            rows[i].push((j as u32, v));
        }
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.sort_by_key(|&(j, _)| j);
            let (idx, val) = r.into_iter().unzip();
            ExpressionProfile::from_normalized(c.cols, idx, val).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("atom {}: {e}", i + 1),
            })
        })
        .collect()
}

pub fn read_metadata(dir: &Path) -> Result<PopulationFile> {
    let text = fs::read_to_string(dir.join(METADATA_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads a population directory written by [`save_population`].
pub fn load_population(dir: &Path) -> Result<PopulationSpec> {
    let meta = read_metadata(dir)?;
    let provenance: Provenance = match fs::read_to_string(dir.join(PROVENANCE_FILE)) {
        Ok(text) => serde_json::from_str(&text)?,
        Err(_) => Provenance::default(),
    };
    let ids = |name: &str, n: usize| -> Result<Option<std::path::PathBuf>> {
        let p = dir.join(name);
        if p.exists() {
            read_ids(&p, n)?;
            Ok(Some(p))
        } else {
            Ok(None)
        }
    };
    let mu = match meta.kind {
        StoredKind::Counts => {
            let genes = ids("genes.txt", meta.dim)?;
            let cells = ids("cells.txt", meta.atoms)?;
            let counts = read_matrix_market(&dir.join("counts.mtx"), genes.as_deref(), cells.as_deref())?;
            build_population(&counts, ScenarioKind::Uniform)?.mu
        }
        StoredKind::Atoms => {
            let atoms = read_atoms(&dir.join("atoms.mtx"))?;
            match &meta.weights {
                Some(w) => DiscreteDistribution::new(atoms, w.clone())?,
                None => DiscreteDistribution::uniform(atoms)?,
            }
        }
    };
    if mu.len() != meta.atoms || mu.dim() != meta.dim {
        return Err(invalid("population.json", "atom count or dimension disagrees with the stored matrix"));
    }
    if let Some(f) = &meta.frequencies {
        if f.len() != mu.len() {
            return Err(Error::ScenarioMismatch {
                frequencies: f.len(),
                atoms: mu.len(),
            });
        }
    }
    Ok(PopulationSpec {
        scenario: WeightModel::new(meta.scenario, meta.frequencies.clone())?,
        mu,
        frequencies: meta.frequencies,
        provenance,
    })
}

/// A population directory, or a counts file (CSV or MatrixMarket) taken
/// as-is under uniform weights.
pub fn load_input(path: &Path) -> Result<PopulationSpec> {
    if path.is_dir() {
        return load_population(path);
    }
    let format = Format::from_path(path)
        .ok_or_else(|| invalid("input", format!("cannot infer the format of {}", path.display())))?;
    let counts = read_counts(path, format)?;
    let mut spec = build_population(&counts, ScenarioKind::Uniform)?;
    spec.provenance.source = Some(path.to_path_buf());
    spec.provenance.steps.insert(
        0,
        Step::Read {
            format,
            cells: counts.n_cells(),
            genes: counts.n_genes(),
        },
    );
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use rand::Rng;

    #[test]
    fn counts_directory_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let counts = CountsMatrix::from_dense(&[vec![1, 0, 2], vec![0, 3, 5]]).unwrap();
        let spec = build_population(&counts, ScenarioKind::Coupled).unwrap();
        save_population(dir.path(), &spec, Some(&counts), None, BTreeMap::new()).unwrap();
        let back = load_population(dir.path()).unwrap();
        assert_eq!(back.mu, spec.mu);
        assert_eq!(back.scenario, spec.scenario);
        assert_eq!(back.provenance, spec.provenance);
    }

    #[test]
    fn atoms_directory_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = substream(21, &[]);
        let atoms: Vec<_> = (0..5)
            .map(|_| {
                let v: Vec<f64> = (0..7).map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { rng.random() }).collect();
                ExpressionProfile::from_dense(&v).unwrap()
            })
            .collect();
        let w = vec![0.1, 0.2, 0.3, 0.15, 0.25];
        let mu = DiscreteDistribution::new(atoms, w).unwrap();
        let spec = PopulationSpec::from_distribution(mu);
        save_population(dir.path(), &spec, None, None, BTreeMap::new()).unwrap();
        let back = load_population(dir.path()).unwrap();
        assert_eq!(back.mu, spec.mu);
    }

    #[test]
    fn csv_input_is_a_uniform_population() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("toy.csv");
        fs::write(&p, "cell,a,b,c\nx,1,0,2\ny,0,0,5\n").unwrap();
        let spec = load_input(&p).unwrap();
        assert_eq!(spec.mu.len(), 2);
        assert_eq!(spec.scenario, WeightModel::Uniform);
        assert!(matches!(spec.provenance.steps[0], Step::Read { cells: 2, genes: 3, .. }));
        assert!(load_input(&dir.path().join("toy.txt")).is_err());
    }
}
