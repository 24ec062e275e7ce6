//! CSV ingestion of grouped samples and labels, and embedding export.
//!
//! Samples: header `group_id,x_1,...,x_d`, one sample per row, rows of one
//! group need not be contiguous. Labels: header `group_id,y`. A reference
//! measure uses the samples layout with an optional trailing `weight` column.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::distributions::{EmpiricalDistribution, ReferenceMeasure, RegressionDataset};
use crate::embeddings::{EmbeddingVector, Fingerprint};
use crate::error::{Error, Result};

/// Float formatting used by every text artifact: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    /// `(line, fields)`.
    rows: Vec<(u64, Vec<String>)>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_table<R: Read>(path: &Path, reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line());
        Error::Csv {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        }
    };
    let mut records = rdr.records();
    let header: Vec<String> = match records.next() {
        Some(r) => r.map_err(csv_err)?.iter().map(str::to_owned).collect(),
        None => {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        rows.push((line, rec.iter().map(str::to_owned).collect()));
    }
    Ok(Table {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

impl Table {
    fn number(&self, line: u64, column: usize, cell: &str) -> Result<f64> {
        match cell.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Csv {
                path: self.path.clone(),
                line,
                message: format!("column {}: cannot parse {cell:?} as a finite number", column + 1),
            }),
        }
    }

    fn expect_first_column(&self, name: &str) -> Result<()> {
        if self.header.first().map(String::as_str) != Some(name) {
            return Err(Error::Csv {
                path: self.path.clone(),
                line: 1,
                message: format!("header must start with {name}"),
            });
        }
        Ok(())
    }
}

/// Groups in order of first appearance.
fn group_rows(table: &Table, value_columns: usize) -> Result<Vec<(String, Vec<f64>)>> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for (line, fields) in &table.rows {
        let slot = *index.entry(fields[0].clone()).or_insert_with(|| {
            groups.push((fields[0].clone(), Vec::new()));
            groups.len() - 1
        });
        for (c, cell) in fields.iter().enumerate().skip(1).take(value_columns) {
            let v = table.number(*line, c, cell)?;
            groups[slot].1.push(v);
        }
    }
    Ok(groups)
}

fn samples_table(path: &Path) -> Result<Table> {
    let table = read_table(path, open(path)?)?;
    table.expect_first_column("group_id")?;
    if table.header.len() < 2 {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: "samples need at least one coordinate column".into(),
        });
    }
    Ok(table)
}

/// Reads every group of a samples file, in order of first appearance.
pub fn load_samples(path: &Path) -> Result<(usize, Vec<EmpiricalDistribution>)> {
    let table = samples_table(path)?;
    let dim = table.header.len() - 1;
    let dists = group_rows(&table, dim)?
        .into_iter()
        .map(|(id, pts)| EmpiricalDistribution::new(id, dim, pts))
        .collect::<Result<Vec<_>>>()?;
    Ok((dim, dists))
}

/// Joins samples with labels; the dataset follows the labels-file order.
pub fn load_dataset(samples_path: &Path, labels_path: &Path) -> Result<RegressionDataset> {
    let (dim, dists) = load_samples(samples_path)?;
    let mut by_id: HashMap<String, EmpiricalDistribution> =
        dists.into_iter().map(|d| (d.group_id().to_owned(), d)).collect();

    let labels = read_table(labels_path, open(labels_path)?)?;
    labels.expect_first_column("group_id")?;
    if labels.header.len() != 2 {
        return Err(Error::Csv {
            path: labels_path.to_path_buf(),
            line: 1,
            message: "labels header must be group_id,y".into(),
        });
    }
    let mut items = Vec::with_capacity(labels.rows.len());
    let mut ys = Vec::with_capacity(labels.rows.len());
    for (line, fields) in &labels.rows {
        let y = labels.number(*line, 1, &fields[1])?;
        let dist = by_id.remove(&fields[0]).ok_or_else(|| {
            if items.iter().any(|d: &EmpiricalDistribution| d.group_id() == fields[0]) {
                Error::Csv {
                    path: labels_path.to_path_buf(),
                    line: *line,
                    message: format!("duplicate label for group {}", fields[0]),
                }
            } else {
                Error::UnknownGroup(fields[0].clone())
            }
        })?;
        items.push(dist);
        ys.push(y);
    }
    RegressionDataset::new(dim, items, ys)
}

/// Reference measure; uniform weights unless the last column is `weight`.
pub fn load_reference(path: &Path) -> Result<ReferenceMeasure> {
    let table = samples_table(path)?;
    let weighted = table.header.last().map(String::as_str) == Some("weight");
    let dim = table.header.len() - 1 - usize::from(weighted);
    if dim == 0 {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: "reference needs at least one coordinate column".into(),
        });
    }
    let mut points = Vec::with_capacity(table.rows.len() * dim);
    let mut weights = Vec::with_capacity(table.rows.len());
    for (line, fields) in &table.rows {
        for (c, cell) in fields.iter().enumerate().skip(1).take(dim) {
            points.push(table.number(*line, c, cell)?);
        }
        if weighted {
            weights.push(table.number(*line, dim + 1, &fields[dim + 1])?);
        }
    }
    if weighted {
        ReferenceMeasure::new(dim, points, weights)
    } else {
        ReferenceMeasure::uniform(dim, points)
    }
}

/// Marker in the first column of the weights row.
pub const WEIGHTS_ROW: &str = "__weights__";

/// Header `group_id,e_1..e_m`, then a `__weights__` row, then one row of
/// coordinates per group.
pub fn write_embeddings<W: Write>(mut out: W, ids: &[&str], vectors: &[EmbeddingVector]) -> std::io::Result<()> {
    let m = vectors.first().map_or(0, EmbeddingVector::len);
    let header: Vec<String> = std::iter::once("group_id".to_owned())
        .chain((1..=m).map(|k| format!("e_{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    if let Some(first) = vectors.first() {
        let w: Vec<String> = first.weights().iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "{WEIGHTS_ROW},{}", w.join(","))?;
    }
    for (id, v) in ids.iter().zip(vectors) {
        let c: Vec<String> = v.coords().iter().map(|&x| fmt_f64(x)).collect();
        writeln!(out, "{id},{}", c.join(","))?;
    }
    Ok(())
}

/// Inverse of [`write_embeddings`]; the fingerprint comes from the sidecar.
pub fn read_embeddings(path: &Path, fingerprint: &Fingerprint) -> Result<Vec<(String, EmbeddingVector)>> {
    let table = read_table(path, open(path)?)?;
    table.expect_first_column("group_id")?;
    let mut rows = table.rows.iter();
    let weights: Arc<[f64]> = match rows.next() {
        None => return Ok(Vec::new()),
        Some((line, fields)) if fields[0] == WEIGHTS_ROW => fields[1..]
            .iter()
            .enumerate()
            .map(|(c, cell)| table.number(*line, c + 1, cell))
            .collect::<Result<Vec<_>>>()?
            .into(),
        Some((line, _)) => {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                line: *line,
                message: format!("expected the {WEIGHTS_ROW} row"),
            })
        }
    };
    rows.map(|(line, fields)| {
        let coords = fields[1..]
            .iter()
            .enumerate()
            .map(|(c, cell)| table.number(*line, c + 1, cell))
            .collect::<Result<Vec<_>>>()?;
        Ok((
            fields[0].clone(),
            EmbeddingVector::new(coords, weights.clone(), fingerprint.clone())?,
        ))
    })
    .collect()
}
