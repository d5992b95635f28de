//! Point-set files.
//!
//! Text: one point per line as a 0/1 string, coordinate 0 first. Blank lines
//! and lines starting with `#` are skipped.
//!
//! Binary: the magic `LSHD`, a little-endian `u32` format version (1), a
//! `u32` dimension and a `u64` point count, followed by `ceil(d/8)` bytes per
//! point. Coordinate `i` is bit `i % 8` of byte `i / 8` (least significant
//! bit first); padding bits are zero.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{LshError, Result};
use crate::point::Point;

pub const BINARY_MAGIC: &[u8; 4] = b"LSHD";
pub const BINARY_VERSION: u32 = 1;

pub fn parse_text(text: &str) -> Result<Vec<Point>> {
    let mut points = Vec::new();
    let mut dim = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p: Point = line
            .parse()
            .map_err(|e| LshError::Parse(format!("line {}: {e}", lineno + 1)))?;
        match dim {
            None => dim = Some(p.dim()),
            Some(d) if d != p.dim() => {
                return Err(LshError::Parse(format!(
                    "line {}: point has dimension {}, earlier points have {d}",
                    lineno + 1,
                    p.dim()
                )))
            }
            _ => {}
        }
        points.push(p);
    }
    Ok(points)
}

pub fn to_text(points: &[Point]) -> String {
    let mut out = String::new();
    for p in points {
        out.push_str(&p.to_string());
        out.push('\n');
    }
    out
}

fn check_uniform(points: &[Point]) -> Result<usize> {
    let dim = points.first().map_or(0, Point::dim);
    for p in points {
        p.check_dim(dim)?;
    }
    Ok(dim)
}

pub fn encode_binary(points: &[Point]) -> Result<Vec<u8>> {
    let dim = check_uniform(points)?;
    let dim32 = u32::try_from(dim).map_err(|_| LshError::invalid("d", "dimension does not fit in u32"))?;
    let stride = dim.div_ceil(8);
    let mut out = Vec::with_capacity(20 + stride * points.len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&dim32.to_le_bytes());
    out.extend_from_slice(&(points.len() as u64).to_le_bytes());
    for p in points {
        let bytes = p.words().iter().flat_map(|w| w.to_le_bytes());
        out.extend(bytes.take(stride));
    }
    Ok(out)
}

pub fn decode_binary(bytes: &[u8]) -> Result<Vec<Point>> {
    let header = |range: std::ops::Range<usize>| {
        bytes
            .get(range)
            .ok_or_else(|| LshError::Parse("binary dataset: truncated header".into()))
    };
    if header(0..4)? != BINARY_MAGIC {
        return Err(LshError::Parse("binary dataset: bad magic".into()));
    }
    let version = u32::from_le_bytes(header(4..8)?.try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(LshError::Parse(format!(
            "binary dataset: unsupported version {version}"
        )));
    }
    let dim = u32::from_le_bytes(header(8..12)?.try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(header(12..20)?.try_into().unwrap());
    let stride = dim.div_ceil(8);
    let body = &bytes[20..];
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(stride))
        .ok_or_else(|| LshError::Parse("binary dataset: point count too large".into()))?;
    if body.len() != expected {
        return Err(LshError::Parse(format!(
            "binary dataset: expected {expected} payload bytes for {count} points of dimension {dim}, found {}",
            body.len()
        )));
    }
    if dim == 0 {
        return Err(LshError::Parse("binary dataset: dimension 0".into()));
    }
    let pad_mask = if dim.is_multiple_of(8) { 0 } else { 0xffu8 << (dim % 8) };
    body.chunks_exact(stride)
        .map(|chunk| {
            if chunk[stride - 1] & pad_mask != 0 {
                return Err(LshError::Parse("binary dataset: nonzero padding bits".into()));
            }
            let words = chunk
                .chunks(8)
                .map(|c| {
                    let mut buf = [0u8; 8];
                    buf[..c.len()].copy_from_slice(c);
                    u64::from_le_bytes(buf)
                })
                .collect();
            Point::from_words(dim, words)
        })
        .collect()
}

/// Reads either format, detected by the binary magic.
pub fn read_points(path: &Path) -> Result<Vec<Point>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.starts_with(BINARY_MAGIC) {
        decode_binary(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| LshError::Parse("dataset is not UTF-8 text".into()))?;
        parse_text(&text)
    }
}

pub fn write_text(path: &Path, points: &[Point]) -> Result<()> {
    check_uniform(points)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(to_text(points).as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn write_binary(path: &Path, points: &[Point]) -> Result<()> {
    let bytes = encode_binary(points)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}
