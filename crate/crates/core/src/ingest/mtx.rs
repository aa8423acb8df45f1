//! MatrixMarket coordinate files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{default_ids, CountsMatrix};
use crate::error::{Error, Result};

/// Field type of a coordinate file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Field {
    Integer,
    Real,
}

pub(crate) struct Coordinates {
    pub rows: usize,
    pub cols: usize,
    /// 0-based `(row, col, value)` in file order.
    pub entries: Vec<(usize, usize, f64)>,
}

/// Parses a `coordinate general` MatrixMarket file.
pub(crate) fn read_coordinates(path: &Path, expect: Field) -> Result<Coordinates> {
    let err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i as u64 + 1, l));

    let (_, banner) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let banner = banner?;
    let tokens: Vec<String> = banner.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(err(1, format!("unsupported banner `{banner}`")));
    }
    let field = match tokens[3].as_str() {
        "integer" => Field::Integer,
        "real" => Field::Real,
        other => return Err(err(1, format!("unsupported field `{other}`"))),
    };
    if field != expect {
        return Err(err(1, format!("expected a {expect:?} matrix, found {field:?}").to_lowercase()));
    }
    if tokens[4] != "general" {
        return Err(err(1, format!("unsupported symmetry `{}`", tokens[4])));
    }

    let mut size = None;
    let mut entries = Vec::new();
    for (no, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(err(no, "size line must hold rows, columns and entries".into()));
                }
                let parse = |s: &str| s.parse::<usize>().map_err(|_| err(no, format!("bad size `{s}`")));
                size = Some((parse(parts[0])?, parse(parts[1])?, parse(parts[2])?));
                entries.reserve(size.unwrap().2);
            }
            Some((rows, cols, _)) => {
                if parts.len() != 3 {
                    return Err(err(no, format!("expected `row col value`, found `{t}`")));
                }
                let idx = |s: &str, max: usize| match s.parse::<usize>() {
                    Ok(i) if (1..=max).contains(&i) => Ok(i - 1),
                    _ => Err(err(no, format!("index `{s}` out of range 1..={max}"))),
                };
                let i = idx(parts[0], rows)?;
                let j = idx(parts[1], cols)?;
                let v = match field {
                    Field::Integer => parts[2]
                        .parse::<u64>()
                        .map_err(|_| err(no, format!("`{}` is not a nonnegative integer count", parts[2])))?
                        as f64,
                    Field::Real => match parts[2].parse::<f64>() {
                        Ok(v) if v.is_finite() && v >= 0.0 => v,
                        _ => return Err(err(no, format!("`{}` is not a nonnegative real", parts[2]))),
                    },
                };
                entries.push((i, j, v));
            }
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| err(1, "missing size line".into()))?;
    if entries.len() != nnz {
        return Err(err(0, format!("size line declares {nnz} entries, found {}", entries.len())));
    }
    Ok(Coordinates { rows, cols, entries })
}

pub(crate) fn read_ids(path: &Path, expected: usize) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let ids: Vec<String> = text.lines().map(|l| l.trim().to_owned()).filter(|l| !l.is_empty()).collect();
    if ids.len() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: ids.len() as u64,
            msg: format!("expected {expected} identifiers, found {}", ids.len()),
        });
    }
    Ok(ids)
}

/// Reads an integer coordinate file with cells as rows; duplicate entries
/// are summed. Gene and cell ids come from optional one-per-line files.
pub fn read_matrix_market(path: &Path, genes: Option<&Path>, cells: Option<&Path>) -> Result<CountsMatrix> {
    let c = read_coordinates(path, Field::Integer)?;
    let mut rows: Vec<Vec<(u32, u64)>> = vec![Vec::new(); c.rows];
    for (i, j, v) in c.entries {
        rows[i].push((j as u32, v as u64));
    }
    let gene_ids = match genes {
        Some(p) => read_ids(p, c.cols)?,
        None => default_ids("gene", c.cols),
    };
    let cell_ids = match cells {
        Some(p) => read_ids(p, c.rows)?,
        None => default_ids("cell", c.rows),
    };
    CountsMatrix::new(rows, gene_ids, cell_ids)
}

/// Writes a counts matrix as `coordinate integer general`.
pub fn write_counts_mtx(path: &Path, counts: &CountsMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate integer general")?;
    writeln!(w, "{} {} {}", counts.n_cells(), counts.n_genes(), counts.nnz())?;
    for (i, row) in counts.rows().iter().enumerate() {
        for &(j, c) in row {
            writeln!(w, "{} {} {}", i + 1, j + 1, c)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_ids(path: &Path, ids: &[String]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for id in ids {
        writeln!(w, "{id}")?;
    }
    w.flush()?;
    Ok(())
}
