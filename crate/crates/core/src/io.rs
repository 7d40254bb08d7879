//! File formats: matrices (dense text and labeled CSV), versioned geometry
//! files, and one-column value tables. Every write goes through a temporary
//! file in the destination directory followed by a rename.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy::energy;
use crate::error::{Error, Result};
use crate::geometry::block_intensities;
use crate::model::{validate_permutation, BinaryMatrix, CouplingGeometry};

/// Version written into every JSON document produced by the crate.
pub const SCHEMA_VERSION: u32 = 1;

const GEOMETRY_KIND: &str = "coupling_geometry";

/// Stored and recomputed block intensities may differ by this much.
const LAMBDA_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    /// Lines of space-separated 0/1, no labels.
    DenseText,
    /// Header of column labels, first field of each row its label.
    LabeledCsv,
}

impl MatrixFormat {
    /// `.csv` files are labeled CSV, everything else dense text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::LabeledCsv,
            _ => MatrixFormat::DenseText,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dense" | "dense-text" | "text" | "txt" => Ok(MatrixFormat::DenseText),
            "csv" | "labeled-csv" => Ok(MatrixFormat::LabeledCsv),
            _ => Err(Error::arg(format!("unknown matrix format '{s}'"))),
        }
    }
}

fn parse_cell(token: &str, line: usize, column: usize) -> Result<u8> {
    match token.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Parse {
            line,
            column,
            message: format!("cell '{other}' is not 0 or 1"),
        }),
    }
}

/// Blank lines and lines starting with `#` are ignored. Columns in errors
/// count cells, starting at 1.
pub fn parse_dense(text: &str) -> Result<BinaryMatrix> {
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split_whitespace()
            .enumerate()
            .map(|(c, tok)| parse_cell(tok, line, c + 1))
            .collect::<Result<Vec<u8>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line,
                    column: row.len().min(first.len()) + 1,
                    message: format!("row has {} cells, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no matrix rows found".into(),
        });
    }
    BinaryMatrix::from_rows(&rows)
}

fn duplicate_label(labels: &[String]) -> Option<usize> {
    let mut seen = std::collections::HashSet::new();
    labels.iter().position(|l| !seen.insert(l.as_str()))
}

/// The header's first field is ignored.
pub fn parse_labeled_csv(text: &str) -> Result<BinaryMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let csv_err = |e: csv::Error| {
        let line = e.position().map_or(0, |p| p.line() as usize);
        Error::Parse {
            line,
            column: 1,
            message: e.to_string(),
        }
    };
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: "empty file".into(),
            })
        }
    };
    let col_labels: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    if col_labels.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 2,
            message: "header has no column labels".into(),
        });
    }
    if let Some(c) = duplicate_label(&col_labels) {
        return Err(Error::Parse {
            line: 1,
            column: c + 2,
            message: format!("duplicate column label '{}'", col_labels[c]),
        });
    }
    let mut row_labels = Vec::new();
    let mut row_lines = Vec::new();
    let mut cells = Vec::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if rec.len() != col_labels.len() + 1 {
            return Err(Error::Parse {
                line,
                column: rec.len().min(col_labels.len() + 1) + 1,
                message: format!("row has {} cells, expected {}", rec.len().saturating_sub(1), col_labels.len()),
            });
        }
        row_labels.push(rec[0].trim().to_string());
        row_lines.push(line);
        for (c, field) in rec.iter().enumerate().skip(1) {
            cells.push(parse_cell(field, line, c + 1)?);
        }
    }
    if row_labels.is_empty() {
        return Err(Error::Parse {
            line: 2,
            column: 1,
            message: "no matrix rows found".into(),
        });
    }
    if let Some(r) = duplicate_label(&row_labels) {
        return Err(Error::Parse {
            line: row_lines[r],
            column: 1,
            message: format!("duplicate row label '{}'", row_labels[r]),
        });
    }
    BinaryMatrix::new(row_labels, col_labels, cells)
}

pub fn parse_matrix(text: &str, format: MatrixFormat) -> Result<BinaryMatrix> {
    match format {
        MatrixFormat::DenseText => parse_dense(text),
        MatrixFormat::LabeledCsv => parse_labeled_csv(text),
    }
}

/// Loads a matrix; `format` defaults to the one implied by the extension.
pub fn load_matrix(path: &Path, format: Option<MatrixFormat>) -> Result<BinaryMatrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix(&text, format.unwrap_or_else(|| MatrixFormat::from_path(path)))
}

pub fn format_dense(matrix: &BinaryMatrix) -> String {
    let mut out = String::with_capacity(matrix.rows() * (2 * matrix.cols() + 1));
    for i in 0..matrix.rows() {
        let row: Vec<&str> = matrix.row(i).iter().map(|&c| if c == 1 { "1" } else { "0" }).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn format_labeled_csv(matrix: &BinaryMatrix) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec![String::new()];
    header.extend(matrix.col_labels().iter().cloned());
    w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
    for i in 0..matrix.rows() {
        let mut rec = vec![matrix.row_labels()[i].clone()];
        rec.extend(matrix.row(i).iter().map(|c| c.to_string()));
        w.write_record(&rec).map_err(|e| Error::Io(e.into()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn save_matrix(matrix: &BinaryMatrix, path: &Path, format: Option<MatrixFormat>) -> Result<()> {
    let text = match format.unwrap_or_else(|| MatrixFormat::from_path(path)) {
        MatrixFormat::DenseText => format_dense(matrix),
        MatrixFormat::LabeledCsv => format_labeled_csv(matrix)?,
    };
    write_atomic(path, text.as_bytes())
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`. Missing parent directories are created.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value)?.as_bytes())
}

/// Matrix as stored inside a geometry file: one `0`/`1` string per row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub rows: Vec<String>,
}

impl MatrixRecord {
    pub fn from_matrix(matrix: &BinaryMatrix) -> Self {
        Self {
            row_labels: matrix.row_labels().to_vec(),
            col_labels: matrix.col_labels().to_vec(),
            rows: (0..matrix.rows())
                .map(|i| matrix.row(i).iter().map(|&c| if c == 1 { '1' } else { '0' }).collect())
                .collect(),
        }
    }

    pub fn to_matrix(&self) -> Result<BinaryMatrix> {
        let mut cells = Vec::with_capacity(self.rows.len() * self.col_labels.len());
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.col_labels.len() {
                return Err(Error::Corrupted(format!("stored matrix row {i} has the wrong length")));
            }
            for (j, ch) in row.chars().enumerate() {
                cells.push(match ch {
                    '0' => 0,
                    '1' => 1,
                    _ => return Err(Error::Corrupted(format!("stored matrix cell ({i}, {j}) is '{ch}'"))),
                });
            }
        }
        if self.rows.len() != self.row_labels.len() {
            return Err(Error::Corrupted("stored matrix row count differs from its labels".into()));
        }
        BinaryMatrix::new(self.row_labels.clone(), self.col_labels.clone(), cells)
            .map_err(|e| Error::Corrupted(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    pub schema_version: u32,
    pub kind: String,
    /// Seconds since the Unix epoch; omitted for reproducible output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
    /// The matrix the geometry was computed from, for recompute checks.
    pub matrix: MatrixRecord,
    pub geometry: CouplingGeometry,
}

#[derive(Debug, Clone)]
pub struct LoadedGeometry {
    pub geometry: CouplingGeometry,
    pub matrix: BinaryMatrix,
    /// Recompute checks that failed; empty for an intact file.
    pub warnings: Vec<String>,
    pub created_unix: Option<u64>,
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn geometry_to_json(geometry: &CouplingGeometry, matrix: &BinaryMatrix, created_unix: Option<u64>) -> Result<String> {
    if matrix.shape() != (geometry.row_perm.len(), geometry.col_perm.len()) {
        return Err(Error::arg("matrix shape differs from the geometry"));
    }
    to_json(&GeometryFile {
        schema_version: SCHEMA_VERSION,
        kind: GEOMETRY_KIND.into(),
        created_unix,
        matrix: MatrixRecord::from_matrix(matrix),
        geometry: geometry.clone(),
    })
}

pub fn save_geometry(
    geometry: &CouplingGeometry,
    matrix: &BinaryMatrix,
    path: &Path,
    created_unix: Option<u64>,
) -> Result<()> {
    write_atomic(path, geometry_to_json(geometry, matrix, created_unix)?.as_bytes())
}

pub fn geometry_from_json(text: &str) -> Result<LoadedGeometry> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Corrupted(format!("not valid JSON: {e}")))?;
    let found = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Corrupted("missing schema_version".into()))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(Error::Version {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: SCHEMA_VERSION,
        });
    }
    let file: GeometryFile =
        serde_json::from_value(value).map_err(|e| Error::Corrupted(format!("unexpected layout: {e}")))?;
    if file.kind != GEOMETRY_KIND {
        return Err(Error::Corrupted(format!("expected a {GEOMETRY_KIND} file, found '{}'", file.kind)));
    }
    let matrix = file.matrix.to_matrix()?;
    let geometry = file.geometry;
    check_structure(&geometry, &matrix)?;
    let warnings = integrity_warnings(&geometry, &matrix);
    Ok(LoadedGeometry {
        geometry,
        matrix,
        warnings,
        created_unix: file.created_unix,
    })
}

pub fn load_geometry(path: &Path) -> Result<LoadedGeometry> {
    geometry_from_json(&fs::read_to_string(path)?)
}

/// Failures that make the geometry unusable.
fn check_structure(g: &CouplingGeometry, matrix: &BinaryMatrix) -> Result<()> {
    let corrupt = |e: Error| Error::Corrupted(e.to_string());
    validate_permutation(&g.row_perm, matrix.rows()).map_err(corrupt)?;
    validate_permutation(&g.col_perm, matrix.cols()).map_err(corrupt)?;
    g.row_tree.validate().map_err(corrupt)?;
    g.col_tree.validate().map_err(corrupt)?;
    if g.row_tree.axis_size != matrix.rows() || g.col_tree.axis_size != matrix.cols() {
        return Err(Error::Corrupted("tree sizes differ from the matrix".into()));
    }
    if !g.finest_grid.covers(matrix) {
        return Err(Error::Corrupted("finest grid does not cover the matrix".into()));
    }
    let (i, j) = g.finest_grid.shape();
    if g.lambda.len() != i || g.lambda.iter().any(|r| r.len() != j) {
        return Err(Error::Corrupted("block intensities do not match the grid shape".into()));
    }
    g.params.validate().map_err(corrupt)?;
    Ok(())
}

/// Recomputable fields that disagree with the stored matrix.
pub fn integrity_warnings(g: &CouplingGeometry, matrix: &BinaryMatrix) -> Vec<String> {
    let mut out = Vec::new();
    if g.grid_at_level(g.row_tree.bottom_level(), g.col_tree.bottom_level()).ok().as_ref() != Some(&g.finest_grid) {
        out.push("finest grid is not the grid of the core clusters".to_string());
    }
    if !g.row_tree.is_contiguous_in(&g.row_perm) || !g.col_tree.is_contiguous_in(&g.col_perm) {
        out.push("tree clusters are not contiguous under the permutation".to_string());
    }
    match block_intensities(matrix, &g.finest_grid) {
        Ok(lambda) => {
            let worst = lambda
                .iter()
                .flatten()
                .zip(g.lambda.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if !(worst <= LAMBDA_TOLERANCE) {
                out.push(format!("stored block intensities differ from the matrix by up to {worst}"));
            }
        }
        Err(e) => out.push(e.to_string()),
    }
    if let Ok(arranged) = g.arrange(matrix) {
        let e = energy(&arranged, g.params.neighborhood);
        if e != g.energy {
            out.push(format!("stored energy {} differs from recomputed {e}", g.energy));
        }
    }
    if g.energy_trace.last() != Some(&g.energy) {
        out.push("energy trace does not end at the stored energy".to_string());
    }
    out
}

/// Two-column CSV `index,value`.
pub fn format_values_csv(values: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (k, v) in values.iter().enumerate() {
        out.push_str(&format!("{k},{v:?}\n"));
    }
    out
}

pub fn save_values_csv(values: &[f64], path: &Path) -> Result<()> {
    write_atomic(path, format_values_csv(values).as_bytes())
}

/// Reads the `value` column of a CSV written by [`save_values_csv`] (any
/// table with a `value` header works).
pub fn parse_values_csv(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        column: 1,
        message: e.to_string(),
    })?;
    let col = headers.iter().position(|h| h.trim() == "value").ok_or_else(|| Error::Parse {
        line: 1,
        column: 1,
        message: "no 'value' column".into(),
    })?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 1,
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = rec.get(col).ok_or_else(|| Error::Parse {
            line,
            column: col + 1,
            message: "missing value".into(),
        })?;
        out.push(field.trim().parse::<f64>().map_err(|e| Error::Parse {
            line,
            column: col + 1,
            message: format!("'{field}': {e}"),
        })?);
    }
    Ok(out)
}

pub fn load_values_csv(path: &Path) -> Result<Vec<f64>> {
    parse_values_csv(&fs::read_to_string(path)?)
}
