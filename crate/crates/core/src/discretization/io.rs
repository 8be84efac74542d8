//! Field serialization.
//!
//! CSV: `index,x1,x2,x3,value` for box grids and `index,r,value` for radial
//! grids. Binary: a 32-byte little-endian header
//! `QSLSPFLD | kind: u32 | n: u32 | h: f64 | count: u64`, then for box grids
//! the three centre coordinates, then `count` f64 values. Kind 1 is radial,
//! 2 a node-centred box and 3 a cell-centred box.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::field::ScalarField;
use super::grid::{BoxGrid, Centering, Grid, RadialGrid};

const MAGIC: &[u8; 8] = b"QSLSPFLD";

pub fn field_to_csv(f: &ScalarField) -> String {
    let grid = f.grid();
    let mut out = String::new();
    match &**grid {
        Grid::Radial(g) => {
            out.push_str("index,r,value\n");
            for (j, v) in f.values().iter().enumerate() {
                let _ = writeln!(out, "{j},{},{v:e}", g.r(j));
            }
        }
        Grid::Box(g) => {
            out.push_str("index,x1,x2,x3,value\n");
            for (i, v) in f.values().iter().enumerate() {
                let p = g.position(i);
                let _ = writeln!(out, "{i},{},{},{},{v:e}", p[0], p[1], p[2]);
            }
        }
    }
    out
}

/// Reads the value column of a CSV written by [`field_to_csv`] onto `grid`.
pub fn field_from_csv(text: &str, grid: Arc<Grid>) -> Result<ScalarField> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
    let expected = match &*grid {
        Grid::Radial(_) => "index,r,value",
        Grid::Box(_) => "index,x1,x2,x3,value",
    };
    if header.trim() != expected {
        return Err(Error::Format(format!("expected header `{expected}`, got `{header}`")));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or("");
        let v: f64 = last
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad value on data line {}", ln + 1)))?;
        values.push(v);
    }
    ScalarField::new(grid, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn field_to_bytes(f: &ScalarField) -> Vec<u8> {
    let grid = f.grid();
    let mut out = Vec::with_capacity(32 + 24 + 8 * f.len());
    out.extend_from_slice(MAGIC);
    let (kind, n) = match &**grid {
        Grid::Radial(g) => (1u32, g.n()),
        Grid::Box(g) => (
            if g.centering() == Centering::Node { 2 } else { 3 },
            g.n(),
        ),
    };
    out.extend_from_slice(&kind.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&grid.h().to_le_bytes());
    out.extend_from_slice(&(f.len() as u64).to_le_bytes());
    if let Grid::Box(g) = &**grid {
        for c in g.center() {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8]> {
    if buf.len() < n {
        return Err(Error::Format("truncated field file".into()));
    }
    let (head, tail) = buf.split_at(n);
    *buf = tail;
    Ok(head)
}

fn f64_at(buf: &mut &[u8]) -> Result<f64> {
    Ok(f64::from_le_bytes(take(buf, 8)?.try_into().unwrap()))
}

pub fn field_from_bytes(bytes: &[u8]) -> Result<ScalarField> {
    let mut buf = bytes;
    if take(&mut buf, 8)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let kind = u32::from_le_bytes(take(&mut buf, 4)?.try_into().unwrap());
    let n = u32::from_le_bytes(take(&mut buf, 4)?.try_into().unwrap()) as usize;
    let h = f64_at(&mut buf)?;
    let count = u64::from_le_bytes(take(&mut buf, 8)?.try_into().unwrap()) as usize;
    let bad = |e: Error| Error::Format(e.to_string());
    let grid = match kind {
        1 => Grid::Radial(RadialGrid::new(h * (n as f64 - 1.0), n).map_err(bad)?),
        2 | 3 => {
            let center = [f64_at(&mut buf)?, f64_at(&mut buf)?, f64_at(&mut buf)?];
            let (hw, centering) = if kind == 2 {
                (0.5 * h * (n as f64 - 1.0), Centering::Node)
            } else {
                (0.5 * h * n as f64, Centering::Cell)
            };
            Grid::Box(BoxGrid::with_center(hw, n, center, centering).map_err(bad)?)
        }
        k => return Err(Error::Format(format!("unknown grid kind {k}"))),
    };
    if count != grid.len() || buf.len() != 8 * count {
        return Err(Error::Format(format!(
            "value count {count} does not match grid of {} nodes",
            grid.len()
        )));
    }
    let values = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField::new(Arc::new(grid), values).map_err(bad)
}

pub fn write_field(path: &Path, f: &ScalarField) -> Result<()> {
    let bytes = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => field_to_csv(f).into_bytes(),
        _ => field_to_bytes(f),
    };
    std::fs::File::create(path)
        .and_then(|mut file| file.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut file| file.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    field_from_bytes(&bytes)
}
