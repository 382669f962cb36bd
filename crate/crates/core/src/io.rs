//! Grid files and PGM images.
//!
//! Grid file layout: the ASCII magic `GRD1\n`, one JSON header line
//! `{"dtype":"f32"|"c64","h":H,"w":W}\n`, then the row-major little-endian
//! `f32` payload (complex samples interleaved `re, im`). Samples are narrowed
//! to `f32` on write, so a file read and written back is byte-identical.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexGrid, RealGrid};

const MAGIC: &[u8] = b"GRD1\n";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32")]
    F32,
    #[serde(rename = "c64")]
    C64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dtype: Dtype,
    h: usize,
    w: usize,
}

/// Contents of a grid file.
#[derive(Debug, Clone, PartialEq)]
pub enum GridData {
    Real(RealGrid),
    Complex(ComplexGrid),
}

impl GridData {
    pub fn dtype(&self) -> Dtype {
        match self {
            GridData::Real(_) => Dtype::F32,
            GridData::Complex(_) => Dtype::C64,
        }
    }

    pub fn into_real(self) -> Result<RealGrid> {
        match self {
            GridData::Real(g) => Ok(g),
            GridData::Complex(_) => Err(Error::Format("expected a real (f32) grid".into())),
        }
    }

    /// Real grids are promoted to complex with zero imaginary part.
    pub fn into_complex(self) -> ComplexGrid {
        match self {
            GridData::Real(g) => g.to_complex(),
            GridData::Complex(g) => g,
        }
    }
}

fn write_header(out: &mut Vec<u8>, dtype: Dtype, h: usize, w: usize) {
    out.extend_from_slice(MAGIC);
    let header = serde_json::to_string(&Header { dtype, h, w }).expect("header serializes");
    out.extend_from_slice(header.as_bytes());
    out.push(b'\n');
}

pub fn encode_real(grid: &RealGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + grid.len() * 4);
    write_header(&mut out, Dtype::F32, grid.height(), grid.width());
    for &v in grid.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn encode_complex(grid: &ComplexGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + grid.len() * 8);
    write_header(&mut out, Dtype::C64, grid.height(), grid.width());
    for v in grid.as_slice() {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<GridData> {
    let rest = bytes
        .strip_prefix(MAGIC)
        .ok_or_else(|| Error::Format("missing GRD1 magic".into()))?;
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("unterminated grid header".into()))?;
    let header: Header = serde_json::from_slice(&rest[..nl])
        .map_err(|e| Error::Format(format!("bad grid header: {e}")))?;
    let payload = &rest[nl + 1..];
    let n = header.h * header.w;
    let per = match header.dtype {
        Dtype::F32 => 1,
        Dtype::C64 => 2,
    };
    if payload.len() != n * per * 4 {
        return Err(Error::Format(format!(
            "grid payload is {} bytes, header implies {}",
            payload.len(),
            n * per * 4
        )));
    }
    let vals: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(match header.dtype {
        Dtype::F32 => GridData::Real(RealGrid::from_vec(header.h, header.w, vals)?),
        Dtype::C64 => GridData::Complex(ComplexGrid::from_vec(
            header.h,
            header.w,
            vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
        )?),
    })
}

pub fn write_real_grid(path: impl AsRef<Path>, grid: &RealGrid) -> Result<()> {
    fs::write(path, encode_real(grid))?;
    Ok(())
}

pub fn write_complex_grid(path: impl AsRef<Path>, grid: &ComplexGrid) -> Result<()> {
    fs::write(path, encode_complex(grid))?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<GridData> {
    decode_grid(&fs::read(path)?)
}

/// Parses a binary (`P5`) PGM with 8- or 16-bit samples, normalized to `[0, 1]`
/// by the file's maxval.
pub fn decode_pgm(bytes: &[u8]) -> Result<RealGrid> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).unwrap_or("").to_string());
    }
    if fields[0] != "P5" {
        return Err(Error::Format(format!("unsupported PGM magic {:?}, expected P5", fields[0])));
    }
    let parse = |s: &str, what: &str| {
        s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM {what}: {s:?}")))
    };
    let w = parse(&fields[1], "width")?;
    let h = parse(&fields[2], "height")?;
    let maxval = parse(&fields[3], "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let raster = bytes.get(pos..).unwrap_or(&[]);
    let bps = if maxval < 256 { 1 } else { 2 };
    if raster.len() < w * h * bps {
        return Err(Error::Format("truncated PGM raster".into()));
    }
    let scale = 1.0 / maxval as f64;
    let data = if bps == 1 {
        raster[..w * h].iter().map(|&b| b as f64 * scale).collect()
    } else {
        raster[..2 * w * h]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
            .collect()
    };
    RealGrid::from_vec(h, w, data)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<RealGrid> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    decode_pgm(&buf)
}

/// Writes an 8-bit PGM, clamping samples to `[0, 1]`.
pub fn write_pgm(path: impl AsRef<Path>, grid: &RealGrid) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    let raster: Vec<u8> =
        grid.as_slice().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    f.write_all(&raster)?;
    Ok(())
}
