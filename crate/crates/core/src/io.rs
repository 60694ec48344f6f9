//! Plain-text field serialization.
//!
//! ```text
//! # anisolab field v1
//! n_dims 2
//! resolution 64 64
//! extents 1 1
//! values
//! 0e0
//! ...
//! ```
//!
//! Values are listed one per line in lexicographic node order (last axis
//! fastest) using the shortest representation that round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const FIELD_MAGIC: &str = "# anisolab field v1";

pub fn field_to_string(field: &Field) -> String {
    let grid = field.grid();
    let mut s = String::with_capacity(16 * field.len() + 128);
    let join = |v: Vec<String>| v.join(" ");
    let _ = writeln!(s, "{FIELD_MAGIC}");
    let _ = writeln!(s, "n_dims {}", grid.n_dims());
    let _ = writeln!(s, "resolution {}", join(grid.resolution().iter().map(|n| n.to_string()).collect()));
    let _ = writeln!(s, "extents {}", join(grid.extents().iter().map(|e| format!("{e:e}")).collect()));
    let _ = writeln!(s, "values");
    for v in field.values() {
        let _ = writeln!(s, "{v:e}");
    }
    s
}

fn header_values<'a>(line: Option<&'a str>, key: &str) -> Result<Vec<&'a str>> {
    let line = line.ok_or_else(|| Error::Format(format!("missing `{key}` line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::Format(format!("expected `{key}`, found `{line}`")));
    }
    Ok(parts.collect())
}

pub fn parse_field(text: &str) -> Result<Field> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some(FIELD_MAGIC) {
        return Err(Error::Format("missing field header".into()));
    }
    let n_dims: usize = header_values(lines.next(), "n_dims")?
        .first()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Format("bad n_dims".into()))?;
    let resolution = header_values(lines.next(), "resolution")?
        .iter()
        .map(|v| v.parse::<usize>().map_err(|e| Error::Format(format!("resolution: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let extents = header_values(lines.next(), "extents")?
        .iter()
        .map(|v| v.parse::<f64>().map_err(|e| Error::Format(format!("extents: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if resolution.len() != n_dims || extents.len() != n_dims {
        return Err(Error::Format("header lengths disagree with n_dims".into()));
    }
    header_values(lines.next(), "values")?;
    let grid = if resolution.iter().all(|&n| n == 1) {
        Grid::single_node(&extents)?
    } else {
        Grid::new(&extents, &resolution)?
    };
    let values = lines
        .map(|l| l.parse::<f64>().map_err(|e| Error::Format(format!("value `{l}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Field::new(grid, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_field(path: &Path, field: &Field) -> Result<()> {
    fs::write(path, field_to_string(field))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<Field> {
    parse_field(&fs::read_to_string(path)?)
}
