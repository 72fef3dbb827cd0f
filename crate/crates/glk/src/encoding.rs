//! Sinusoidal and guided positional encodings over pixel grids.
//!
//! The standard encoding (SPE) devotes the first half of the channels to the
//! x coordinate and the second half to y, interleaving sin/cos within each
//! half. The guided encoding (GPE) phase-expands a trained guide bank to the
//! full channel depth and adds it on top of SPE, so position information and
//! the learned instance-separating harmonics share one tensor.

use std::f64::consts::TAU;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::guide::{eval_guide, GuideBank, GuideParams};

/// Dense per-pixel encoding: value tensor indexed `(y, x, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingGrid {
    values: Array3<f64>,
}

impl EncodingGrid {
    pub fn new(values: Array3<f64>) -> Result<Self> {
        let (h, w, d) = values.dim();
        if h == 0 || w == 0 {
            return Err(Error::Config("encoding grid must be non-empty".into()));
        }
        if d == 0 || d % 2 != 0 {
            return Err(Error::Config(format!(
                "encoding depth must be a positive even number, got {d}"
            )));
        }
        Ok(EncodingGrid { values })
    }

    pub fn height(&self) -> usize {
        self.values.dim().0
    }

    pub fn width(&self) -> usize {
        self.values.dim().1
    }

    pub fn depth(&self) -> usize {
        self.values.dim().2
    }

    pub fn value(&self, y: usize, x: usize, c: usize) -> f64 {
        self.values[(y, x, c)]
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    /// Flattens pixels to a `(h·w) × d` matrix in row-major pixel order, the
    /// key/value layout cross-attention expects.
    pub fn to_matrix(&self) -> Array2<f64> {
        let (h, w, d) = self.values.dim();
        let flat: Vec<f64> = self.values.iter().copied().collect();
        Array2::from_shape_vec((h * w, d), flat).expect("dims agree by construction")
    }
}

/// Standard sinusoidal positional encoding.
///
/// Channels `[0, d_p/2)` encode `pos = x`, channels `[d_p/2, d_p)` encode
/// `pos = y`. Within each half, channel `2j` is `sin(pos/10000^{2j/d_p})` and
/// channel `2j+1` the matching cosine, with `j` counted inside the half and
/// the exponent using the full depth.
pub fn spe(h: usize, w: usize, d_p: usize) -> Result<EncodingGrid> {
    if d_p == 0 || !d_p.is_multiple_of(4) {
        return Err(Error::Config(format!(
            "encoding depth must be divisible by 4, got {d_p}"
        )));
    }
    if h == 0 || w == 0 {
        return Err(Error::Config("grid dimensions must be positive".into()));
    }
    let half = d_p / 2;
    let mut values = Array3::zeros((h, w, d_p));
    for y in 0..h {
        for x in 0..w {
            for c in 0..d_p {
                let (pos, local) = if c < half {
                    (x as f64, c)
                } else {
                    (y as f64, c - half)
                };
                let j = (local / 2) as f64;
                let angle = pos / 10000f64.powf(2.0 * j / d_p as f64);
                values[(y, x, c)] = if local % 2 == 0 { angle.sin() } else { angle.cos() };
            }
        }
    }
    EncodingGrid::new(values)
}

/// A guide bank phase-expanded to `d_p` functions, `J = d_p/d_g` per source
/// guide, ordered source-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedGuideSet {
    functions: Vec<GuideParams>,
    source_d_g: usize,
    expansion: usize,
}

impl ExpandedGuideSet {
    pub fn functions(&self) -> &[GuideParams] {
        &self.functions
    }

    pub fn source_d_g(&self) -> usize {
        self.source_d_g
    }

    /// Expansion factor J.
    pub fn expansion(&self) -> usize {
        self.expansion
    }
}

/// Expands each guide `i` into `J = d_p/d_g` copies whose phases step by
/// `2π·(d_g/d_p)`, so each source guide's copies cover a full turn evenly.
/// Copy `(i, j)` lands at index `i·J + j`; `j = 0` reproduces the source.
pub fn expand_guides(bank: &GuideBank, d_p: usize) -> Result<ExpandedGuideSet> {
    let d_g = bank.d_g();
    if d_p == 0 || !d_p.is_multiple_of(d_g) {
        return Err(Error::Config(format!(
            "encoding depth {d_p} is not a multiple of the guide count {d_g}"
        )));
    }
    let j_count = d_p / d_g;
    let step = TAU * d_g as f64 / d_p as f64;
    let mut functions = Vec::with_capacity(d_p);
    for p in bank.params() {
        for j in 0..j_count {
            functions.push(GuideParams::new(
                p.freq_x,
                p.freq_y,
                p.phase + step * j as f64,
            ));
        }
    }
    Ok(ExpandedGuideSet {
        functions,
        source_d_g: d_g,
        expansion: j_count,
    })
}

/// Guided positional encoding: SPE plus the expanded guides evaluated over
/// the grid, channel `c` using expanded function `c`.
///
/// Guide evaluation normalizes by the grid's own dimensions so the encoding
/// tracks feature-map scale; the bank's reference dimensions only matter for
/// embedding computation.
pub fn gpe(bank: &GuideBank, h: usize, w: usize, d_p: usize) -> Result<EncodingGrid> {
    let expanded = expand_guides(bank, d_p)?;
    let base = spe(h, w, d_p)?;
    let (wf, hf) = (w as f64, h as f64);
    let mut values = base.values;
    for y in 0..h {
        for x in 0..w {
            for (c, p) in expanded.functions().iter().enumerate() {
                values[(y, x, c)] += eval_guide(p, x as f64, y as f64, wf, hf);
            }
        }
    }
    EncodingGrid::new(values)
}

/// Writes a tensor as a flat binary dump: ASCII header `"h w d\n"`, then
/// little-endian 64-bit floats in `(y, x, channel)` order.
pub fn write_tensor(path: &Path, values: &Array3<f64>) -> Result<()> {
    let (h, w, d) = values.dim();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>, buf: &[u8]| -> Result<()> {
        out.write_all(buf).map_err(|e| Error::io(path, e))
    };
    write(&mut out, format!("{h} {w} {d}\n").as_bytes())?;
    if let Some(slice) = values.as_slice() {
        for v in slice {
            write(&mut out, &v.to_le_bytes())?;
        }
    } else {
        for v in values.iter() {
            write(&mut out, &v.to_le_bytes())?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads a tensor written by [`write_tensor`].
pub fn read_tensor(path: &Path) -> Result<Array3<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let newline = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| {
        Error::Config(format!("{}: missing tensor header line", path.display()))
    })?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| Error::Config(format!("{}: non-UTF-8 tensor header", path.display())))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Config(format!("{}: bad header token '{t}'", path.display())))
        })
        .collect::<Result<_>>()?;
    let [h, w, d] = dims[..] else {
        return Err(Error::Config(format!(
            "{}: header must hold exactly three dimensions",
            path.display()
        )));
    };
    let body = &bytes[newline + 1..];
    let expected = h * w * d * 8;
    if body.len() != expected {
        return Err(Error::Config(format!(
            "{}: payload holds {} bytes, expected {expected}",
            path.display(),
            body.len()
        )));
    }
    let mut values = Vec::with_capacity(h * w * d);
    let mut chunk = [0u8; 8];
    let mut reader = body;
    while reader.read_exact(&mut chunk).is_ok() {
        values.push(f64::from_le_bytes(chunk));
    }
    Array3::from_shape_vec((h, w, d), values)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Dumps an `n × d` matrix through the tensor format as shape `(n, d, 1)`.
pub fn write_matrix(path: &Path, mat: ArrayView2<'_, f64>) -> Result<()> {
    let (r, c) = mat.dim();
    let values =
        Array3::from_shape_vec((r, c, 1), mat.iter().copied().collect()).expect("dims agree");
    write_tensor(path, &values)
}

/// Reads a matrix written by [`write_matrix`].
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let values = read_tensor(path)?;
    let (r, c, d) = values.dim();
    if d != 1 {
        return Err(Error::Config(format!(
            "{}: expected a matrix dump (depth 1), found depth {d}",
            path.display()
        )));
    }
    Ok(Array2::from_shape_vec((r, c), values.into_iter().collect()).expect("dims agree"))
}
