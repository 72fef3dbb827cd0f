//! Instance label maps and soft mask stacks.
//!
//! A [`LabelMap`] is a hard partition of the image: every pixel carries exactly
//! one non-negative instance id, with 0 reserved for background. Coordinates
//! are `(x, y)` with `x` the column and `y` the row, origin at the top-left.
//! All types here are immutable after construction.

use std::collections::BTreeMap;

use ndarray::{Array3, ArrayView2};

use crate::error::{Error, Result};

/// Per-pixel instance-id raster. Ids need not be contiguous; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    ids: Vec<u32>,
}

impl LabelMap {
    /// Builds a map from a row-major id raster.
    pub fn new(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Config(format!(
                "label map dimensions must be positive, got {width}x{height}"
            )));
        }
        if ids.len() != width * height {
            return Err(Error::Config(format!(
                "id raster length {} does not match {width}x{height}",
                ids.len()
            )));
        }
        Ok(LabelMap { width, height, ids })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major id raster.
    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    pub fn id_at(&self, x: usize, y: usize) -> u32 {
        debug_assert!(x < self.width && y < self.height);
        self.ids[y * self.width + x]
    }

    /// One pixel set per nonzero id, in ascending id order.
    ///
    /// The sets partition the nonzero pixels of the map; pixel lists are
    /// row-major sorted.
    pub fn instances(&self) -> Vec<InstancePixelSet> {
        let mut by_id: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let id = self.ids[y * self.width + x];
                if id != 0 {
                    by_id.entry(id).or_default().push((x as u32, y as u32));
                }
            }
        }
        by_id
            .into_iter()
            .map(|(id, pixels)| InstancePixelSet { id, pixels })
            .collect()
    }

    /// Pixels of instance `id` within Chebyshev distance `radius` of a pixel
    /// carrying any other id (background included).
    ///
    /// Image borders do not count as boundaries: only id transitions inside
    /// the raster create a band, so a map filled by one instance has an empty
    /// band. Returned pixels are row-major sorted.
    pub fn edge_band(&self, id: u32, radius: usize) -> Result<Vec<(u32, u32)>> {
        if radius == 0 {
            return Err(Error::Config("edge band radius must be >= 1".into()));
        }
        let mut present = false;
        let mut band = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if self.ids[y * self.width + x] != id {
                    continue;
                }
                present = true;
                let x0 = x.saturating_sub(radius);
                let y0 = y.saturating_sub(radius);
                let x1 = (x + radius).min(self.width - 1);
                let y1 = (y + radius).min(self.height - 1);
                let mut on_edge = false;
                'window: for wy in y0..=y1 {
                    for wx in x0..=x1 {
                        if self.ids[wy * self.width + wx] != id {
                            on_edge = true;
                            break 'window;
                        }
                    }
                }
                if on_edge {
                    band.push((x as u32, y as u32));
                }
            }
        }
        if !present {
            return Err(Error::InstanceNotFound { id });
        }
        Ok(band)
    }
}

/// The pixels of one instance: `(x, y)` coordinates, row-major sorted,
/// non-empty and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstancePixelSet {
    pub id: u32,
    pixels: Vec<(u32, u32)>,
}

impl InstancePixelSet {
    /// Validates, sorts row-major and wraps a pixel list.
    pub fn new(id: u32, mut pixels: Vec<(u32, u32)>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(Error::EmptyInstance(format!("instance {id} has no pixels")));
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        if pixels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config(format!(
                "instance {id} contains duplicate pixel coordinates"
            )));
        }
        Ok(InstancePixelSet { id, pixels })
    }

    pub fn pixels(&self) -> &[(u32, u32)] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: constructed non-empty
    }
}

/// A stack of `n` soft masks over one `height x width` grid, values in [0, 1].
///
/// Unlike a [`LabelMap`] the layers may overlap; each layer is an independent
/// (possibly fractional) mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMaskStack {
    values: Array3<f64>, // (n, height, width)
}

impl SoftMaskStack {
    pub fn new(values: Array3<f64>) -> Result<Self> {
        let (_, h, w) = values.dim();
        if h == 0 || w == 0 {
            return Err(Error::Config("mask stack grid must be non-empty".into()));
        }
        if values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Config(
                "mask stack values must lie within [0, 1]".into(),
            ));
        }
        Ok(SoftMaskStack { values })
    }

    /// Empty stack (n = 0) over the given grid.
    pub fn empty(height: usize, width: usize) -> Result<Self> {
        SoftMaskStack::new(Array3::zeros((0, height, width)))
    }

    pub fn n(&self) -> usize {
        self.values.dim().0
    }

    pub fn height(&self) -> usize {
        self.values.dim().1
    }

    pub fn width(&self) -> usize {
        self.values.dim().2
    }

    pub fn layer(&self, k: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(ndarray::Axis(0), k)
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    /// Binary stack with one layer per pixel set, in the order given.
    pub fn from_instances(
        height: usize,
        width: usize,
        sets: &[InstancePixelSet],
    ) -> Result<Self> {
        let mut values = Array3::zeros((sets.len(), height, width));
        for (k, set) in sets.iter().enumerate() {
            for &(x, y) in set.pixels() {
                if x as usize >= width || y as usize >= height {
                    return Err(Error::Config(format!(
                        "pixel ({x}, {y}) lies outside the {width}x{height} grid"
                    )));
                }
                values[(k, y as usize, x as usize)] = 1.0;
            }
        }
        SoftMaskStack::new(values)
    }

    /// Binary stack of the map's instances in ascending id order.
    pub fn from_labelmap(map: &LabelMap) -> Self {
        let sets = map.instances();
        SoftMaskStack::from_instances(map.height(), map.width(), &sets)
            .expect("instances lie within their own map")
    }

    /// Thresholds each layer at `threshold` and returns the resulting pixel
    /// sets numbered 1..; layers that threshold to nothing are skipped.
    pub fn to_instance_sets(&self, threshold: f64) -> Vec<InstancePixelSet> {
        let mut sets = Vec::new();
        let mut next_id = 1u32;
        for k in 0..self.n() {
            let layer = self.layer(k);
            let mut pixels = Vec::new();
            for ((y, x), &v) in layer.indexed_iter() {
                if v >= threshold {
                    pixels.push((x as u32, y as u32));
                }
            }
            if !pixels.is_empty() {
                sets.push(InstancePixelSet::new(next_id, pixels).expect("non-empty, unique"));
                next_id += 1;
            }
        }
        sets
    }

    /// Flattens the stack to a hard label map: layers are painted in order
    /// (threshold 0.5, later layers overwrite), then ids are compacted to
    /// 1..n over the layers that kept at least one pixel.
    ///
    /// Lossy when layers overlap; intended for writing prediction fixtures in
    /// the label-map file format.
    pub fn to_labelmap(&self) -> Result<LabelMap> {
        let (n, h, w) = self.values.dim();
        let mut ids = vec![0u32; w * h];
        for k in 0..n {
            for ((y, x), &v) in self.layer(k).indexed_iter() {
                if v >= 0.5 {
                    ids[y * w + x] = k as u32 + 1;
                }
            }
        }
        // compact surviving ids to 1..m preserving order
        let mut remap = BTreeMap::new();
        for &id in ids.iter().filter(|&&id| id != 0) {
            let next = remap.len() as u32 + 1;
            remap.entry(id).or_insert(next);
        }
        for id in ids.iter_mut() {
            if *id != 0 {
                *id = remap[id];
            }
        }
        LabelMap::new(w, h, ids)
    }

    /// Stack with every value thresholded to exactly 0.0 or 1.0.
    pub fn binarize(&self, threshold: f64) -> Self {
        let values = self.values.mapv(|v| if v >= threshold { 1.0 } else { 0.0 });
        SoftMaskStack { values }
    }
}
