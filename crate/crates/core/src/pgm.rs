//! Netpbm grayscale output (binary P5) and input (P5/P2).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid, Mask};

/// Writes an 8-bit PGM, mapping `[min, max]` of the grid linearly onto
/// `0..=255`. A constant grid is written as all zeros.
pub fn write_pgm<W: Write>(mut out: W, grid: &Grid<f64>) -> Result<()> {
    let (lo, hi) = (grid.min_value(), grid.max_value());
    let span = hi - lo;
    write!(out, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    let bytes: Vec<u8> = grid
        .iter()
        .map(|v| {
            if span > 0.0 && span.is_finite() {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// Writes a binary map as a two-level PGM (0 / 255).
pub fn write_mask_pgm<W: Write>(mut out: W, mask: &Mask) -> Result<()> {
    write!(out, "P5\n{} {}\n255\n", mask.width(), mask.height())?;
    let bytes: Vec<u8> = mask.iter().map(|b| if *b { 255 } else { 0 }).collect();
    out.write_all(&bytes)?;
    Ok(())
}

/// Reads a P5 or P2 image into raw sample values.
pub fn read_pgm<R: Read>(mut input: R) -> Result<Grid<u16>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut pos = 0;
    let magic = next_token(&bytes, &mut pos)?;
    let width: usize = parse_token(&bytes, &mut pos)?;
    let height: usize = parse_token(&bytes, &mut pos)?;
    let maxval: u32 = parse_token(&bytes, &mut pos)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    let g = Geometry::new(width, height);
    match magic.as_str() {
        "P5" => {
            // exactly one whitespace byte separates the header from the raster
            pos += 1;
            let wide = maxval > 255;
            let need = g.len() * if wide { 2 } else { 1 };
            let raster = bytes
                .get(pos..pos + need)
                .ok_or_else(|| Error::Format("PGM raster truncated".into()))?;
            let data = if wide {
                raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
            } else {
                raster.iter().map(|b| u16::from(*b)).collect()
            };
            Grid::from_vec(g, data)
        }
        "P2" => {
            let mut data = Vec::with_capacity(g.len());
            for _ in 0..g.len() {
                data.push(parse_token(&bytes, &mut pos)?);
            }
            Grid::from_vec(g, data)
        }
        other => Err(Error::Format(format!("unsupported PGM magic {other:?}"))),
    }
}

/// Reads a PGM as a binary map: any non-zero sample is set.
pub fn read_mask_pgm<R: Read>(input: R) -> Result<Mask> {
    let img = read_pgm(input)?;
    Ok(img.map(|v| *v > 0))
}

fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("PGM header truncated".into()));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_token<T: std::str::FromStr>(bytes: &[u8], pos: &mut usize) -> Result<T> {
    let tok = next_token(bytes, pos)?;
    tok.parse()
        .map_err(|_| Error::Format(format!("bad PGM header field {tok:?}")))
}
