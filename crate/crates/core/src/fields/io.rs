//! Field import and export.
//!
//! CSV: header `x[,y],c1,…,cK`, one row per cell in storage order.
//!
//! Binary: five little-endian `u64` header words `dim, r0, r1, r2, K`
//! (unused resolutions are 1), then the `r0·r1·r2·K` values as little-endian
//! `f64`, row-major over `(cell, component)`. Extents are not stored.

use super::grid::{Grid, GridField};
use crate::error::{Error, Result};
use crate::table::{fmt_f64, parse_f64, Table};

const AXES: [&str; 2] = ["x", "y"];

pub fn field_to_csv(field: &GridField) -> String {
    let g = field.grid();
    let mut header: Vec<String> = AXES[..g.dim()].iter().map(|s| s.to_string()).collect();
    header.extend((1..=field.n_components()).map(|k| format!("c{k}")));
    let mut t = Table::new(header);
    for idx in 0..g.cell_count() {
        let x = g.center(idx);
        let mut row: Vec<f64> = x[..g.dim()].to_vec();
        row.extend(field.at(idx));
        t.push_floats(&row);
    }
    t.to_csv()
}

/// Inverse of [`field_to_csv`]; the grid is recovered from the cell centres.
pub fn field_from_csv(text: &str) -> Result<GridField> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Format("empty field CSV".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let dim = header.iter().take_while(|h| AXES.contains(h)).count();
    if dim == 0 || header[..dim] != AXES[..dim] {
        return Err(Error::Format(
            "field CSV must start with x[,y] columns".into(),
        ));
    }
    let k = header.len() - dim;
    if k == 0 {
        return Err(Error::Format("field CSV has no component columns".into()));
    }
    let mut coords: Vec<Vec<f64>> = vec![Vec::new(); dim];
    let mut comps: Vec<Vec<f64>> = vec![Vec::new(); k];
    for (ln, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| {
                parse_f64(s)
                    .ok_or_else(|| Error::Format(format!("row {}: bad number `{s}`", ln + 2)))
            })
            .collect::<Result<_>>()?;
        if vals.len() != header.len() {
            return Err(Error::Format(format!(
                "row {} has {} columns",
                ln + 2,
                vals.len()
            )));
        }
        for a in 0..dim {
            coords[a].push(vals[a]);
        }
        for c in 0..k {
            comps[c].push(vals[dim + c]);
        }
    }
    let mut extents = Vec::with_capacity(dim);
    let mut resolution = Vec::with_capacity(dim);
    for axis_coords in &coords {
        let mut distinct = axis_coords.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
        let n = distinct.len();
        if n < 2 {
            return Err(Error::Format("need at least two cells per axis".into()));
        }
        let h = (distinct[n - 1] - distinct[0]) / (n - 1) as f64;
        extents.push(h * n as f64);
        resolution.push(n);
    }
    let grid = Grid::new(extents, resolution)?;
    GridField::new(grid, comps)
}

pub fn field_to_binary(field: &GridField) -> Vec<u8> {
    let g = field.grid();
    let res = g.resolution();
    let header = [
        g.dim() as u64,
        res[0] as u64,
        res.get(1).copied().unwrap_or(1) as u64,
        1,
        field.n_components() as u64,
    ];
    let k = field.n_components();
    let mut out = Vec::with_capacity(40 + 8 * g.cell_count() * k);
    for h in header {
        out.extend_from_slice(&h.to_le_bytes());
    }
    for idx in 0..g.cell_count() {
        for c in 0..k {
            out.extend_from_slice(&field.component(c)[idx].to_le_bytes());
        }
    }
    out
}

/// Decode [`field_to_binary`] output. `extents` defaults to the unit box.
pub fn field_from_binary(bytes: &[u8], extents: Option<&[f64]>) -> Result<GridField> {
    let word = |i: usize| -> Result<u64> {
        bytes
            .get(8 * i..8 * i + 8)
            .map(|b| u64::from_le_bytes(b.try_into().expect("8 bytes")))
            .ok_or_else(|| Error::Format("truncated binary header".into()))
    };
    let dim = word(0)? as usize;
    let res = [word(1)? as usize, word(2)? as usize, word(3)? as usize];
    let k = word(4)? as usize;
    if !(1..=2).contains(&dim) || res[dim..].iter().any(|&r| r != 1) || k == 0 {
        return Err(Error::Format(format!(
            "unsupported header dim={dim} res={res:?} k={k}"
        )));
    }
    let resolution = res[..dim].to_vec();
    let extents = match extents {
        Some(e) => e.to_vec(),
        None => vec![1.0; dim],
    };
    let grid = Grid::new(extents, resolution)?;
    let cells = grid.cell_count();
    let payload = &bytes[40..];
    if payload.len() != 8 * cells * k {
        return Err(Error::Format(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            8 * cells * k
        )));
    }
    let mut comps = vec![Vec::with_capacity(cells); k];
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        comps[i % k].push(f64::from_le_bytes(chunk.try_into().expect("8 bytes")));
    }
    GridField::new(grid, comps)
}

/// Human-oriented dump of a single value for summaries.
pub fn describe(field: &GridField) -> String {
    let g = field.grid();
    format!(
        "{}-D field, resolution {:?}, extents [{}], {} component(s)",
        g.dim(),
        g.resolution(),
        g.extents()
            .iter()
            .map(|&e| fmt_f64(e))
            .collect::<Vec<_>>()
            .join(", "),
        field.n_components()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_2d() {
        let g = Grid::new(vec![2.0, 1.0], vec![8, 5]).unwrap();
        let f = GridField::from_fn(&g, 2, |x| vec![x[0].sin(), x[0] * x[1] / 3.0]).unwrap();
        let back = field_from_csv(&field_to_csv(&f)).unwrap();
        assert_eq!(back.grid().resolution(), g.resolution());
        assert!((back.grid().extents()[0] - 2.0).abs() < 1e-12);
        assert_eq!(back.components(), f.components());
    }

    #[test]
    fn binary_layout() {
        let g = Grid::unit_interval(4).unwrap();
        let f = GridField::from_fn(&g, 2, |x| vec![x[0], -x[0]]).unwrap();
        let bytes = field_to_binary(&f);
        assert_eq!(bytes.len(), 40 + 8 * 8);
        assert_eq!(u64::from_le_bytes(bytes[0..8].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[32..40].try_into().unwrap()), 2);
        // first cell, first then second component
        assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), 0.125);
        assert_eq!(
            f64::from_le_bytes(bytes[48..56].try_into().unwrap()),
            -0.125
        );
        assert_eq!(field_from_binary(&bytes, None).unwrap(), f);
    }

    #[test]
    fn binary_rejects_truncation() {
        let g = Grid::unit_square(4).unwrap();
        let f = GridField::constant(&g, &[1.0]).unwrap();
        let bytes = field_to_binary(&f);
        assert!(field_from_binary(&bytes[..bytes.len() - 1], None).is_err());
        assert!(field_from_binary(&bytes[..20], None).is_err());
    }
}
