//! CSV readers and writers for every file format the pipeline touches.
//!
//! All numeric output goes through [`fmt_g12`]: UTF-8, '.' decimal,
//! 12 significant digits, so re-running a stage reproduces files byte for
//! byte.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cluster::Method;
use crate::embed::{EmbeddingMatrix, SolverTrace};
use crate::error::{Error, Result};
use crate::features::{ActivityGrid, AttributeTable, CaseSeries, GridCell, PairwiseIndexMatrix};
use crate::graph::EdgeRecord;
use crate::linalg::Matrix;

/// Formats a float with 12 significant digits, trimming trailing zeros.
pub fn fmt_g12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{x:.11e}");
    let epos = sci.find('e').expect("scientific format");
    let exp: i32 = sci[epos + 1..].parse().expect("exponent");
    let trim = |mut s: String| {
        if s.contains('.') {
            while s.ends_with('0') {
                s.pop();
            }
            if s.ends_with('.') {
                s.pop();
            }
        }
        s
    };
    if (-4..12).contains(&exp) {
        let prec = (11 - exp).max(0) as usize;
        let s = trim(format!("{x:.prec$}"));
        if s == "-0" {
            "0".to_string()
        } else {
            s
        }
    } else {
        let mantissa = trim(sci[..epos].to_string());
        format!("{mantissa}e{exp}")
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn input_err(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Input(format!("{}:{line}: {msg}", path.display()))
}

fn parse_f64(field: &str, path: &Path, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| input_err(path, line, format!("cannot parse `{field}` as a number")))
}

/// Non-empty, non-comment CSV rows split on commas, with 1-based line numbers.
fn rows(content: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.split(',').collect()))
}

pub struct CsvWriter {
    out: BufWriter<fs::File>,
    path: String,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
        let file = fs::File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(CsvWriter {
            out: BufWriter::new(file),
            path: path.display().to_string(),
        })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<()> {
        let line = fields
            .iter()
            .map(|f| f.as_ref())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(self.out, "{line}").map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })
    }
}

/// Writes plain text (used for SVG output), creating parent directories.
pub fn write_text(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    fs::write(path, content).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Activity grid CSV: header `x,y,intensity`.
pub fn read_activity_grid(path: &Path) -> Result<ActivityGrid> {
    let content = read_to_string(path)?;
    let mut cells = Vec::new();
    for (line, fields) in rows(&content).skip(1) {
        if fields.len() != 3 {
            return Err(input_err(path, line, "expected 3 columns: x,y,intensity"));
        }
        cells.push(GridCell {
            x: parse_f64(fields[0], path, line)?,
            y: parse_f64(fields[1], path, line)?,
            intensity: parse_f64(fields[2], path, line)?,
        });
    }
    ActivityGrid::new(cells)
}

/// Case series CSV: header `date,cumulative_cases`; dates are carried as
/// opaque labels and the cadence comes from `step_days`.
pub fn read_case_series(path: &Path, step_days: f64) -> Result<CaseSeries> {
    let content = read_to_string(path)?;
    let mut counts = Vec::new();
    for (line, fields) in rows(&content).skip(1) {
        if fields.len() != 2 {
            return Err(input_err(path, line, "expected 2 columns: date,cumulative_cases"));
        }
        let count: u64 = fields[1]
            .trim()
            .parse()
            .map_err(|_| input_err(path, line, format!("cannot parse `{}` as a count", fields[1])))?;
        counts.push(count);
    }
    CaseSeries::new(counts, step_days)
}

/// Dense square pairwise matrix CSV with a header row of node ids. Each data
/// row may optionally start with its node id.
pub fn read_pairwise_matrix(path: &Path) -> Result<PairwiseIndexMatrix> {
    let content = read_to_string(path)?;
    let mut iter = rows(&content);
    let (_, header) = iter
        .next()
        .ok_or_else(|| input_err(path, 1, "empty pairwise matrix file"))?;
    let node_ids: Vec<String> = header
        .iter()
        .filter(|f| !f.trim().is_empty() && f.trim() != "node_id")
        .map(|f| f.trim().to_string())
        .collect();
    let n = node_ids.len();
    let mut values = Matrix::zeros(n, n);
    let mut r = 0usize;
    for (line, fields) in iter {
        if r >= n {
            return Err(input_err(path, line, format!("more than {n} data rows")));
        }
        let offset = if fields.len() == n + 1 { 1 } else { 0 };
        if fields.len() - offset != n {
            return Err(input_err(path, line, format!("expected {n} values")));
        }
        for (c, field) in fields[offset..].iter().enumerate() {
            values[(r, c)] = parse_f64(field, path, line)?;
        }
        r += 1;
    }
    if r != n {
        return Err(Error::Input(format!(
            "{}: expected {n} data rows, found {r}",
            path.display()
        )));
    }
    PairwiseIndexMatrix::new(values, node_ids)
}

/// Attribute table CSV: header `node_id,<feature...>`; empty cells are
/// missing values (NaN) until imputation.
pub fn read_attribute_table(path: &Path, timestep: usize) -> Result<AttributeTable> {
    let content = read_to_string(path)?;
    let mut iter = rows(&content);
    let (_, header) = iter
        .next()
        .ok_or_else(|| input_err(path, 1, "empty attribute file"))?;
    if header.is_empty() || header[0].trim() != "node_id" {
        return Err(input_err(path, 1, "first column must be node_id"));
    }
    let feature_names: Vec<String> = header[1..].iter().map(|f| f.trim().to_string()).collect();
    let m = feature_names.len();
    let mut node_ids = Vec::new();
    let mut data = Vec::new();
    for (line, fields) in iter {
        if fields.len() != m + 1 {
            return Err(input_err(path, line, format!("expected {} columns", m + 1)));
        }
        node_ids.push(fields[0].trim().to_string());
        for field in &fields[1..] {
            if field.trim().is_empty() {
                data.push(f64::NAN);
            } else {
                data.push(parse_f64(field, path, line)?);
            }
        }
    }
    let n = node_ids.len();
    AttributeTable::new(node_ids, feature_names, Matrix::from_vec(n, m, data), timestep)
}

pub fn write_attribute_table(path: &Path, table: &AttributeTable) -> Result<()> {
    let mut w = CsvWriter::create(path)?;
    let mut header = vec!["node_id".to_string()];
    header.extend(table.feature_names().iter().cloned());
    w.row(&header)?;
    for (i, id) in table.node_ids().iter().enumerate() {
        let mut fields = vec![id.clone()];
        fields.extend(table.values().row(i).iter().map(|&v| fmt_g12(v)));
        w.row(&fields)?;
    }
    w.finish()
}

/// Edge list CSV: header `src,dst,count`.
pub fn read_edge_records(path: &Path) -> Result<Vec<EdgeRecord>> {
    let content = read_to_string(path)?;
    let mut records = Vec::new();
    for (line, fields) in rows(&content).skip(1) {
        if fields.len() != 3 {
            return Err(input_err(path, line, "expected 3 columns: src,dst,count"));
        }
        records.push(EdgeRecord {
            src: fields[0].trim().to_string(),
            dst: fields[1].trim().to_string(),
            count: parse_f64(fields[2], path, line)?,
        });
    }
    Ok(records)
}

pub fn write_edge_records(path: &Path, records: &[EdgeRecord]) -> Result<()> {
    let mut w = CsvWriter::create(path)?;
    w.row(&["src", "dst", "count"])?;
    for r in records {
        w.row(&[r.src.clone(), r.dst.clone(), fmt_g12(r.count)])?;
    }
    w.finish()
}

/// Embedding CSV: `node_id` followed by d real columns.
pub fn write_embedding(path: &Path, emb: &EmbeddingMatrix) -> Result<()> {
    let mut w = CsvWriter::create(path)?;
    let mut header = vec!["node_id".to_string()];
    header.extend((0..emb.dimension()).map(|k| format!("e{k}")));
    w.row(&header)?;
    for (i, id) in emb.node_ids().iter().enumerate() {
        let mut fields = vec![id.clone()];
        fields.extend(emb.row(i).iter().map(|&v| fmt_g12(v)));
        w.row(&fields)?;
    }
    w.finish()
}

pub fn read_embedding(path: &Path) -> Result<EmbeddingMatrix> {
    let content = read_to_string(path)?;
    let mut iter = rows(&content);
    let (_, header) = iter
        .next()
        .ok_or_else(|| input_err(path, 1, "empty embedding file"))?;
    let d = header.len() - 1;
    let mut node_ids = Vec::new();
    let mut data = Vec::new();
    for (line, fields) in iter {
        if fields.len() != d + 1 {
            return Err(input_err(path, line, format!("expected {} columns", d + 1)));
        }
        node_ids.push(fields[0].trim().to_string());
        for field in &fields[1..] {
            data.push(parse_f64(field, path, line)?);
        }
    }
    let n = node_ids.len();
    Ok(EmbeddingMatrix::new(Matrix::from_vec(n, d, data), node_ids))
}

/// Solver trace CSV: `iteration,objective,residual`. Row 0 holds the initial
/// iterate, whose primal residual is zero by construction.
pub fn write_trace(path: &Path, trace: &SolverTrace) -> Result<()> {
    let mut w = CsvWriter::create(path)?;
    w.row(&["iteration", "objective", "residual"])?;
    w.row(&["0".to_string(), fmt_g12(trace.initial_objective), "0".to_string()])?;
    for i in 0..trace.iterations {
        w.row(&[
            (i + 1).to_string(),
            fmt_g12(trace.objective[i]),
            fmt_g12(trace.residual[i]),
        ])?;
    }
    w.finish()
}

/// One persisted assignment row.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentRow {
    pub node_id: String,
    pub timestep: usize,
    pub method: Method,
    pub k: usize,
    pub label: usize,
}

/// Assignments CSV: `node_id,timestep,method,k,label`.
pub fn write_assignments(path: &Path, rows_in: &[AssignmentRow]) -> Result<()> {
    let mut w = CsvWriter::create(path)?;
    w.row(&["node_id", "timestep", "method", "k", "label"])?;
    for r in rows_in {
        w.row(&[
            r.node_id.clone(),
            r.timestep.to_string(),
            r.method.to_string(),
            r.k.to_string(),
            r.label.to_string(),
        ])?;
    }
    w.finish()
}

pub fn read_assignments(path: &Path) -> Result<Vec<AssignmentRow>> {
    let content = read_to_string(path)?;
    let mut out = Vec::new();
    for (line, fields) in rows(&content).skip(1) {
        if fields.len() != 5 {
            return Err(input_err(path, line, "expected 5 columns"));
        }
        let parse_usize = |f: &str| -> Result<usize> {
            f.trim()
                .parse()
                .map_err(|_| input_err(path, line, format!("cannot parse `{f}` as an integer")))
        };
        out.push(AssignmentRow {
            node_id: fields[0].trim().to_string(),
            timestep: parse_usize(fields[1])?,
            method: fields[2].trim().parse()?,
            k: parse_usize(fields[3])?,
            label: parse_usize(fields[4])?,
        });
    }
    Ok(out)
}
