//! Portable mask and field files.
//!
//! A file is a short text header followed by a raw payload:
//!
//! ```text
//! electroelastic-mask 1          | electroelastic-field 1
//! dimension 2                    | dimension 2
//! dims 128 128                   | dims 128 128
//! origin -1 -1                   | origin -1 -1
//! spacing 0.015625               | spacing 0.015625
//! kind compact                   | quantity potential
//! data                           | data
//! <n_cells bytes, 0 or 1>        | <n_cells little-endian f64>
//! ```
//!
//! Cells are stored with the x index varying fastest. Floating-point header
//! values are written in shortest round-trip form, so reading a written file
//! reproduces every bit.

use std::io::{BufRead, Write};

use super::grid::{DistanceField, EulerianGrid, MaskKind, SetMask};
use crate::{Error, Result};

const MASK_MAGIC: &str = "electroelastic-mask 1";
const FIELD_MAGIC: &str = "electroelastic-field 1";

fn write_grid_header<W: Write>(w: &mut W, grid: &EulerianGrid) -> Result<()> {
    writeln!(w, "dimension {}", grid.dim())?;
    let dims: Vec<String> = grid.dims().iter().map(|d| d.to_string()).collect();
    writeln!(w, "dims {}", dims.join(" "))?;
    let origin: Vec<String> = grid.origin().iter().map(|x| x.to_string()).collect();
    writeln!(w, "origin {}", origin.join(" "))?;
    writeln!(w, "spacing {}", grid.spacing())?;
    Ok(())
}

struct Header {
    grid: EulerianGrid,
    tag: String,
}

fn read_line<R: BufRead>(r: &mut R, line_no: &mut usize) -> Result<String> {
    let mut s = String::new();
    if r.read_line(&mut s)? == 0 {
        return Err(Error::Parse { line: *line_no + 1, msg: "unexpected end of header".into() });
    }
    *line_no += 1;
    Ok(s.trim_end_matches(['\n', '\r']).to_string())
}

fn expect_key<'a>(line: &'a str, key: &str, line_no: usize) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected `{key}`") })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("bad number `{tok}`") })
}

fn read_header<R: BufRead>(r: &mut R, magic: &str, tag_key: &str) -> Result<Header> {
    let mut n = 0;
    let first = read_line(r, &mut n)?;
    if first != magic {
        return Err(Error::Parse { line: 1, msg: format!("expected `{magic}`") });
    }
    let l = read_line(r, &mut n)?;
    let dim: usize = parse_num(expect_key(&l, "dimension", n)?, n)?;
    let l = read_line(r, &mut n)?;
    let dims = expect_key(&l, "dims", n)?
        .split_whitespace()
        .map(|t| parse_num::<usize>(t, n))
        .collect::<Result<Vec<_>>>()?;
    let l = read_line(r, &mut n)?;
    let origin = expect_key(&l, "origin", n)?
        .split_whitespace()
        .map(|t| parse_num::<f64>(t, n))
        .collect::<Result<Vec<_>>>()?;
    let l = read_line(r, &mut n)?;
    let spacing: f64 = parse_num(expect_key(&l, "spacing", n)?, n)?;
    let l = read_line(r, &mut n)?;
    let tag = expect_key(&l, tag_key, n)?.to_string();
    let l = read_line(r, &mut n)?;
    if l != "data" {
        return Err(Error::Parse { line: n, msg: "expected `data`".into() });
    }
    let grid = EulerianGrid::new(dim, &origin, spacing, &dims)?;
    Ok(Header { grid, tag })
}

pub fn write_mask<W: Write>(w: &mut W, mask: &SetMask) -> Result<()> {
    writeln!(w, "{MASK_MAGIC}")?;
    write_grid_header(w, mask.grid())?;
    writeln!(w, "kind {}", mask.kind().as_str())?;
    writeln!(w, "data")?;
    let bytes: Vec<u8> = mask.cells().iter().map(|&c| c as u8).collect();
    w.write_all(&bytes)?;
    Ok(())
}

pub fn read_mask<R: BufRead>(r: &mut R) -> Result<SetMask> {
    let header = read_header(r, MASK_MAGIC, "kind")?;
    let kind = match header.tag.as_str() {
        "compact" => MaskKind::Compact,
        "open" => MaskKind::Open,
        other => return Err(Error::Parse { line: 6, msg: format!("unknown mask kind `{other}`") }),
    };
    let mut bytes = vec![0u8; header.grid.n_cells()];
    r.read_exact(&mut bytes)?;
    let cells = bytes
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::Parse { line: 8, msg: format!("mask byte {b} is not 0 or 1") }),
        })
        .collect::<Result<Vec<_>>>()?;
    SetMask::from_cells(header.grid, kind, cells)
}

/// Writes a scalar field; `quantity` names what the values mean.
pub fn write_field<W: Write>(w: &mut W, grid: &EulerianGrid, quantity: &str, values: &[f64]) -> Result<()> {
    writeln!(w, "{FIELD_MAGIC}")?;
    write_grid_header(w, grid)?;
    writeln!(w, "quantity {quantity}")?;
    writeln!(w, "data")?;
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a scalar field, returning its grid, quantity tag and values.
pub fn read_field<R: BufRead>(r: &mut R) -> Result<(EulerianGrid, String, Vec<f64>)> {
    let header = read_header(r, FIELD_MAGIC, "quantity")?;
    let mut buf = vec![0u8; header.grid.n_cells() * 8];
    r.read_exact(&mut buf)?;
    let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header.grid, header.tag, values))
}

pub fn write_distance_field<W: Write>(w: &mut W, field: &DistanceField) -> Result<()> {
    write_field(w, field.grid(), "distance", field.values())
}

pub fn read_distance_field<R: BufRead>(r: &mut R) -> Result<DistanceField> {
    let (grid, tag, values) = read_field(r)?;
    if tag != "distance" {
        return Err(Error::Parse { line: 6, msg: format!("expected a distance field, found `{tag}`") });
    }
    DistanceField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance_transform, shapes};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn mask_and_field_round_trip_bit_exactly(
            ox in -10.0f64..10.0, oy in -10.0f64..10.0,
            h in 1e-3f64..1.0,
            nx in 2usize..20, ny in 2usize..20,
            r in 0.1f64..0.5,
        ) {
            let g = EulerianGrid::new(2, &[ox, oy], h, &[nx, ny]).unwrap();
            let c = g.center(g.n_cells() / 2);
            let mask = shapes::ball(g, MaskKind::Compact, &c[..2], r * h * nx as f64);
            let mut buf = Vec::new();
            write_mask(&mut buf, &mask).unwrap();
            let back = read_mask(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(&back, &mask);

            let field = distance_transform(&mask).unwrap();
            let mut buf = Vec::new();
            write_distance_field(&mut buf, &field).unwrap();
            let back = read_distance_field(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.grid(), field.grid());
            let same = back.values().iter().zip(field.values()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }

    #[test]
    fn rejects_corrupt_files() {
        assert!(read_mask(&mut "electroelastic-mask 2\n".as_bytes()).is_err());
        let text = "electroelastic-mask 1\ndimension 2\ndims 2 2\norigin 0 0\nspacing 1\nkind open\ndata\n\x00\x01\x02\x00";
        assert!(matches!(read_mask(&mut text.as_bytes()), Err(Error::Parse { .. })));
        let short = "electroelastic-mask 1\ndimension 2\ndims 2 2\norigin 0 0\nspacing 1\nkind open\ndata\n\x00";
        assert!(matches!(read_mask(&mut short.as_bytes()), Err(Error::Io(_))));
    }
}
