//! Field dumps and their decoders.
//!
//! One-dimensional fields are written as CSV with columns `x,u`, one row per
//! node in grid order. Two-dimensional fields are written as raw
//! little-endian `f64` values in row-major order (first axis slowest) to a
//! `.bin` file. A `.json` sidecar with the same stem holds a [`FieldHeader`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const FIELD_FORMAT: &str = "fracpen-field";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldFormat {
    Csv,
    Binary,
}

impl FieldFormat {
    /// CSV for one dimension, binary otherwise.
    pub fn default_for(dim: usize) -> Self {
        if dim == 1 {
            FieldFormat::Csv
        } else {
            FieldFormat::Binary
        }
    }
}

/// Sidecar describing a binary dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub format: String,
    pub version: u32,
    pub grid: Grid,
    pub dtype: String,
    pub byte_order: String,
    pub layout: String,
}

impl FieldHeader {
    pub fn for_grid(grid: &Grid) -> Self {
        FieldHeader {
            format: FIELD_FORMAT.into(),
            version: 1,
            grid: *grid,
            dtype: "f64".into(),
            byte_order: "little".into(),
            layout: "row-major".into(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.format != FIELD_FORMAT
            || self.version != 1
            || self.dtype != "f64"
            || self.byte_order != "little"
            || self.layout != "row-major"
        {
            return Err(Error::Input(format!("unsupported field header {self:?}")));
        }
        Ok(())
    }
}

pub fn encode_field_csv(u: &Field) -> Vec<u8> {
    let mut out = String::from("x,u\n");
    let g = u.grid();
    for (j, v) in u.values().iter().enumerate() {
        out.push_str(&format!("{},{}\n", g.axis_coord(j), v));
    }
    out.into_bytes()
}

/// Parses a one-dimensional CSV dump; the grid is recovered from the first
/// coordinate and the row count and must reproduce every coordinate.
pub fn decode_field_csv(bytes: &[u8]) -> Result<Field> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "u" {
        return Err(Error::Input("field CSV must have header x,u".into()));
    }
    let mut xs = Vec::new();
    let mut vs = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::Input("field CSV rows must have two columns".into()));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Input(format!("not a number: {s:?}")))
        };
        xs.push(parse(&rec[0])?);
        vs.push(parse(&rec[1])?);
    }
    if xs.is_empty() {
        return Err(Error::Input("field CSV has no rows".into()));
    }
    let grid = Grid::new(1, -xs[0], xs.len())?;
    let h = grid.spacing();
    for (j, x) in xs.iter().enumerate() {
        if (x - grid.axis_coord(j)).abs() > 1e-9 * h.max(grid.half_extent()) {
            return Err(Error::Input(format!("row {j}: coordinate {x} is off the grid")));
        }
    }
    Field::new(grid, vs)
}

pub fn encode_field_binary(u: &Field) -> (Vec<u8>, Vec<u8>) {
    let header = serde_json::to_vec_pretty(&FieldHeader::for_grid(u.grid())).expect("header serializes");
    let mut data = Vec::with_capacity(8 * u.values().len());
    for v in u.values() {
        data.extend_from_slice(&v.to_le_bytes());
    }
    (header, data)
}

pub fn decode_field_binary(header: &[u8], data: &[u8]) -> Result<Field> {
    let h: FieldHeader = serde_json::from_slice(header)?;
    h.check()?;
    if data.len() != 8 * h.grid.len() {
        return Err(Error::Input(format!(
            "binary field has {} bytes, header implies {}",
            data.len(),
            8 * h.grid.len()
        )));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::new(h.grid, values)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes `u` under `stem` (extension added) and returns the written paths.
pub fn write_field(stem: &Path, u: &Field, format: FieldFormat) -> Result<Vec<PathBuf>> {
    match format {
        FieldFormat::Csv => {
            if u.grid().dim() != 1 {
                return Err(Error::Config("CSV field dumps are one-dimensional only".into()));
            }
            let p = stem.with_extension("csv");
            write_bytes(&p, &encode_field_csv(u))?;
            Ok(vec![p])
        }
        FieldFormat::Binary => {
            let (header, data) = encode_field_binary(u);
            let hp = stem.with_extension("json");
            let dp = stem.with_extension("bin");
            write_bytes(&dp, &data)?;
            write_bytes(&hp, &header)?;
            Ok(vec![dp, hp])
        }
    }
}

/// Reads a dump by extension: `.csv`, or `.bin`/`.json` for the binary pair.
pub fn read_field(path: &Path) -> Result<Field> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => decode_field_csv(&read(path)?),
        Some("bin") | Some("json") => {
            let header = read(&path.with_extension("json"))?;
            let data = read(&path.with_extension("bin"))?;
            decode_field_binary(&header, &data)
        }
        _ => Err(Error::Input(format!(
            "{}: unknown field dump extension",
            path.display()
        ))),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&read(path)?))
}
