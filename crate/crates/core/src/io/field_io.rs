//! Field persistence: CSV for inspection, a compact binary format for
//! bit-exact round trips.
//!
//! Binary layout: 16-byte header (magic `PVLF`, u32 dim, u32 nx, u32 nt,
//! little-endian) followed by (nt+1) * nx^dim f64 values, row-major in time.
//! nt = 0 marks a space-only field (one row). Grid geometry is not stored;
//! loaders default to the unit box unless a grid is supplied.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{Field, SpatialField};
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"PVLF";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldFormat {
    Csv,
    Binary,
}

impl FieldFormat {
    /// Pick a format from a file extension (`.csv` vs anything else).
    pub fn from_path(path: &Path) -> FieldFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => FieldFormat::Csv,
            _ => FieldFormat::Binary,
        }
    }
}

pub fn save_field(field: &Field, path: &Path, format: FieldFormat) -> Result<()> {
    match format {
        FieldFormat::Csv => fs::write(path, field_to_csv(field)).map_err(Error::from),
        FieldFormat::Binary => fs::write(
            path,
            encode(field.grid(), field.grid().nt(), field.values()),
        )
        .map_err(Error::from),
    }
}

pub fn save_spatial_field(field: &SpatialField, path: &Path) -> Result<()> {
    fs::write(path, encode(field.grid(), 0, field.values())).map_err(Error::from)
}

/// Load a field, inferring the shape from the file. Geometry defaults to the
/// unit box with unit horizon; use [`load_field_on`] to place the data on a
/// known grid. CSV carries no dimension tag and is read as dim 1.
pub fn load_field(path: &Path) -> Result<Field> {
    match FieldFormat::from_path(path) {
        FieldFormat::Csv => {
            let (rows, cols, values) = csv_values(path)?;
            let grid = Grid::unit(1, cols, rows - 1, 1.0)?;
            Field::new(grid, values)
        }
        FieldFormat::Binary => {
            let (dim, nx, nt, values) = decode(&fs::read(path)?)?;
            if nt == 0 {
                return Err(Error::Format(
                    "file holds a space-only field; load it as one".into(),
                ));
            }
            let grid = Grid::unit(dim, nx, nt, 1.0)?;
            Field::new(grid, values)
        }
    }
}

/// Load field values onto a caller-supplied grid, validating the shape.
pub fn load_field_on(path: &Path, grid: &Grid) -> Result<Field> {
    let values = match FieldFormat::from_path(path) {
        FieldFormat::Csv => {
            let (rows, cols, values) = csv_values(path)?;
            if rows != grid.nt() + 1 || cols != grid.n_nodes() {
                return Err(Error::Format(format!(
                    "csv shape {rows}x{cols} does not match grid {}x{}",
                    grid.nt() + 1,
                    grid.n_nodes()
                )));
            }
            values
        }
        FieldFormat::Binary => {
            let (dim, nx, nt, values) = decode(&fs::read(path)?)?;
            if dim != grid.dim() || nx != grid.nx() || nt != grid.nt() {
                return Err(Error::Format(format!(
                    "field header (dim {dim}, nx {nx}, nt {nt}) does not match grid \
                     (dim {}, nx {}, nt {})",
                    grid.dim(),
                    grid.nx(),
                    grid.nt()
                )));
            }
            values
        }
    };
    Field::new(*grid, values)
}

pub fn load_spatial_field_on(path: &Path, grid: &Grid) -> Result<SpatialField> {
    let (dim, nx, nt, values) = decode(&fs::read(path)?)?;
    if nt != 0 {
        return Err(Error::Format("file holds a space-time field".into()));
    }
    if dim != grid.dim() || nx != grid.nx() {
        return Err(Error::Format(format!(
            "spatial field header (dim {dim}, nx {nx}) does not match grid (dim {}, nx {})",
            grid.dim(),
            grid.nx()
        )));
    }
    SpatialField::new(*grid, values)
}

pub fn field_to_csv(field: &Field) -> String {
    let n = field.grid().n_nodes();
    let mut out = String::new();
    for j in 0..n {
        if j > 0 {
            out.push(',');
        }
        out.push_str(&format!("n{j}"));
    }
    out.push('\n');
    for i in 0..=field.grid().nt() {
        let row = field.row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            // 17 significant digits: lossless for f64
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    out
}

fn csv_values(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty csv".into()))?;
    let cols = header.split(',').count();
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| {
                Error::Format(format!("bad value `{tok}` at csv line {}", lineno + 2))
            })?;
            values.push(v);
            count += 1;
        }
        if count != cols {
            return Err(Error::Format(format!(
                "csv line {} has {count} columns, header has {cols}",
                lineno + 2
            )));
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(Error::Format("csv needs at least two data rows".into()));
    }
    Ok((rows, cols, values))
}

fn encode(grid: &Grid, nt: usize, values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + values.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.nx() as u32).to_le_bytes());
    out.extend_from_slice(&(nt as u32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    if bytes.len() < 16 {
        return Err(Error::Format("file shorter than the 16-byte header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, not a field file".into()));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let nx = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let nt = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if dim != 1 && dim != 2 {
        return Err(Error::Format(format!("bad dimension {dim} in header")));
    }
    let n_values = (nt + 1) * nx.pow(dim as u32);
    let expect = 16 + 8 * n_values;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "truncated field file: {} bytes, header implies {expect}",
            bytes.len()
        )));
    }
    let values = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dim, nx, nt, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let g = Grid::unit(1, 7, 5, 1.0).unwrap();
        let f = Field::from_fn(g, |t, x, _| (t * 13.7 + x * 0.3).sin() / 3.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pvlf");
        save_field(&f, &path, FieldFormat::Binary).unwrap();
        let back = load_field_on(&path, &g).unwrap();
        assert_eq!(f.values(), back.values());
    }

    #[test]
    fn csv_round_trip_is_exact_at_17_digits() {
        let g = Grid::unit(1, 5, 4, 1.0).unwrap();
        let f = Field::from_fn(g, |t, x, _| (t + 1.0) / (x + 0.07)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        save_field(&f, &path, FieldFormat::Csv).unwrap();
        let back = load_field_on(&path, &g).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn header_errors_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pvlf");
        std::fs::write(&path, b"PVLX0000000000000").unwrap();
        assert!(matches!(load_field(&path), Err(Error::Format(_))));
        let g = Grid::unit(1, 7, 5, 1.0).unwrap();
        let f = Field::zeros(g);
        save_field(&f, &path, FieldFormat::Binary).unwrap();
        let other = Grid::unit(1, 9, 5, 1.0).unwrap();
        assert!(load_field_on(&path, &other).is_err());
    }
}
