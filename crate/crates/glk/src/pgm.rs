//! Plain (ASCII, `P2`) PGM reading and writing for instance label maps.
//!
//! Pixel values are instance ids: 0 is background, every other value an
//! instance. Read errors carry the byte offset of the offending token.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::label::LabelMap;

/// Maximum gray value written by [`write_labelmap`]; also the upper bound an
/// id may take in a map destined for disk.
pub const MAXVAL: u32 = 65535;

struct Raster {
    width: usize,
    height: usize,
    maxval: u32,
    values: Vec<u32>,
}

/// Shared header + raster scan for both label maps and soft masks.
fn parse_raster(text: &str) -> Result<Raster> {
    let mut tok = Tokenizer::new(text);

    let (magic, off) = tok.token()?.ok_or_else(|| Error::PgmParse {
        offset: 0,
        message: "empty input, expected magic 'P2'".into(),
    })?;
    if magic != "P2" {
        return Err(Error::PgmParse {
            offset: off,
            message: format!("expected magic 'P2', found '{magic}'"),
        });
    }

    let width = tok.number("width", 1, u64::from(u32::MAX))? as usize;
    let height = tok.number("height", 1, u64::from(u32::MAX))? as usize;
    let maxval = tok.number("maxval", 1, u64::from(MAXVAL))? as u32;

    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Config(format!("{width}x{height} overflows pixel count")))?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        let v = tok.number("pixel", 0, u64::from(maxval))? as u32;
        values.push(v);
    }

    if let Some((extra, off)) = tok.token()? {
        return Err(Error::PgmParse {
            offset: off,
            message: format!("trailing data after pixel raster: '{extra}'"),
        });
    }

    Ok(Raster {
        width,
        height,
        maxval,
        values,
    })
}

/// Parses plain-PGM text into a label map.
///
/// Comments (`#` to end of line) are allowed anywhere whitespace is. The
/// maxval must lie in `1..=65535` and every pixel in `0..=maxval`; trailing
/// non-whitespace after the last pixel is an error.
pub fn parse_labelmap(text: &str) -> Result<LabelMap> {
    let r = parse_raster(text)?;
    LabelMap::new(r.width, r.height, r.values)
}

/// Reads a label map from a plain-PGM file.
pub fn read_labelmap(path: &Path) -> Result<LabelMap> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labelmap(&text)
}

/// Parses plain-PGM text as one soft mask layer: each pixel scales to
/// `value / maxval`, so the result lies in [0, 1]. Shape is `(height, width)`.
pub fn parse_soft_mask(text: &str) -> Result<Array2<f64>> {
    let r = parse_raster(text)?;
    let max = f64::from(r.maxval);
    let values: Vec<f64> = r.values.iter().map(|&v| f64::from(v) / max).collect();
    Array2::from_shape_vec((r.height, r.width), values).map_err(|e| Error::Shape(e.to_string()))
}

/// Reads a soft mask layer from a plain-PGM file.
pub fn read_soft_mask(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_soft_mask(&text)
}

/// Renders one soft mask as plain-PGM text, quantizing each value in [0, 1]
/// to the nearest of `maxval + 1` levels.
pub fn format_soft_mask(mask: ArrayView2<'_, f64>, maxval: u32) -> Result<String> {
    if maxval == 0 || maxval > MAXVAL {
        return Err(Error::Range {
            value: u64::from(maxval),
            context: format!("PGM maxval must lie in 1..={MAXVAL}"),
        });
    }
    if mask.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Config("soft mask values must lie within [0, 1]".into()));
    }
    let (h, w) = mask.dim();
    let mut out = format!("P2\n{w} {h}\n{maxval}\n");
    for row in mask.rows() {
        let line: Vec<String> = row
            .iter()
            .map(|&v| ((v * f64::from(maxval)).round() as u32).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Writes a soft mask layer to a plain-PGM file.
pub fn write_soft_mask(path: &Path, mask: ArrayView2<'_, f64>, maxval: u32) -> Result<()> {
    let text = format_soft_mask(mask, maxval)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Renders a label map as plain-PGM text with maxval 65535, one raster row
/// per line.
pub fn format_labelmap(map: &LabelMap) -> Result<String> {
    if let Some(&id) = map.ids().iter().find(|&&id| id > MAXVAL) {
        return Err(Error::Range {
            value: u64::from(id),
            context: format!("instance id exceeds the PGM maxval {MAXVAL}"),
        });
    }
    let mut out = format!("P2\n{} {}\n{}\n", map.width(), map.height(), MAXVAL);
    for y in 0..map.height() {
        let row = &map.ids()[y * map.width()..(y + 1) * map.width()];
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

/// Writes a label map to a plain-PGM file.
pub fn write_labelmap(path: &Path, map: &LabelMap) -> Result<()> {
    let text = format_labelmap(map)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Whitespace/comment-aware token scanner that reports byte offsets.
struct Tokenizer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(text: &'a str) -> Self {
        Tokenizer {
            bytes: text.as_bytes(),
            pos: 0,
        }
    }

    /// Next token and its byte offset, or `None` at end of input.
    fn token(&mut self) -> Result<Option<(&'a str, usize)>> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        if self.pos >= self.bytes.len() {
            return Ok(None);
        }
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        let tok = std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| {
            Error::PgmParse {
                offset: start,
                message: "non-UTF-8 bytes in header token".into(),
            }
        })?;
        Ok(Some((tok, start)))
    }

    /// Next token parsed as an integer in `lo..=hi`.
    fn number(&mut self, what: &str, lo: u64, hi: u64) -> Result<u64> {
        let at_end = self.bytes.len();
        let (tok, off) = self.token()?.ok_or_else(|| Error::PgmParse {
            offset: at_end,
            message: format!("unexpected end of input, expected {what}"),
        })?;
        let v: u64 = tok.parse().map_err(|_| Error::PgmParse {
            offset: off,
            message: format!("expected {what} as a decimal integer, found '{tok}'"),
        })?;
        if v < lo || v > hi {
            return Err(Error::PgmParse {
                offset: off,
                message: format!("{what} {v} outside valid range {lo}..={hi}"),
            });
        }
        Ok(v)
    }
}
