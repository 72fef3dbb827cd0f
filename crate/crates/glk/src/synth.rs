//! Procedural rosette plants: elliptical leaves placed at successive
//! phyllotaxis angles, growing outward, with draw-order occlusion. Also a
//! controlled mask perturber for producing imperfect "predictions".
//!
//! Everything is a pure function of (config, seed); dataset generation
//! derives one substream per plant so parallel generation cannot change the
//! output.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::label::{InstancePixelSet, LabelMap, SoftMaskStack};
use crate::manifest::{Manifest, ManifestEntry};
use crate::pgm;
use crate::rng::{derive_seed, Rng};

/// Golden angle in radians; successive leaves step by this by default.
pub const GOLDEN_ANGLE: f64 = 2.399963229728653;

/// Rosette generation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RosetteConfig {
    pub width: usize,
    pub height: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Uniform jitter (pixels) of the plant center around the image center.
    pub center_jitter: f64,
    /// Leaf length multiplier per emergence step; > 1 makes outer leaves
    /// larger.
    pub growth: f64,
    /// Semi-minor/semi-major axis ratio range, drawn per leaf.
    pub aspect_min: f64,
    pub aspect_max: f64,
    /// Angle between successive leaves, radians.
    pub phyllotaxis: f64,
    /// When set, later (outer) leaves overwrite earlier ones where they
    /// overlap; otherwise leaves never overlap (first painter keeps the
    /// pixel).
    pub occlusion: bool,
    /// Length of the innermost leaf in pixels.
    pub base_length: f64,
    /// Dataset-level seed; per-plant streams derive from (seed, index).
    pub seed: u64,
}

impl RosetteConfig {
    /// Sensible defaults scaled to the given image size.
    pub fn for_size(width: usize, height: usize) -> Self {
        RosetteConfig {
            width,
            height,
            n_min: 3,
            n_max: 6,
            center_jitter: width.min(height) as f64 * 0.03,
            growth: 1.18,
            aspect_min: 0.35,
            aspect_max: 0.55,
            phyllotaxis: GOLDEN_ANGLE,
            occlusion: true,
            base_length: width.min(height) as f64 * 0.13,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 32 || self.height < 32 {
            return Err(Error::Config(format!(
                "image must be at least 32x32, got {}x{}",
                self.width, self.height
            )));
        }
        if self.n_min < 1 || self.n_min > self.n_max {
            return Err(Error::Config(format!(
                "leaf count range [{}, {}] is invalid",
                self.n_min, self.n_max
            )));
        }
        if !self.growth.is_finite() || self.growth <= 0.0 {
            return Err(Error::Config("growth factor must be positive and finite".into()));
        }
        if !(self.aspect_min > 0.0 && self.aspect_min <= self.aspect_max && self.aspect_max <= 1.0)
        {
            return Err(Error::Config(format!(
                "aspect ratio range [{}, {}] must satisfy 0 < min <= max <= 1",
                self.aspect_min, self.aspect_max
            )));
        }
        if !self.base_length.is_finite() || self.base_length <= 0.0 {
            return Err(Error::Config("base leaf length must be positive and finite".into()));
        }
        if self.center_jitter < 0.0 || !self.phyllotaxis.is_finite() {
            return Err(Error::Config("jitter must be >= 0 and angles finite".into()));
        }
        Ok(())
    }
}

impl Default for RosetteConfig {
    fn default() -> Self {
        RosetteConfig::for_size(128, 128)
    }
}

/// A generated plant plus bookkeeping the label map alone cannot carry.
#[derive(Debug, Clone)]
pub struct PlantSample {
    pub map: LabelMap,
    /// Emergence (whorl) index of each surviving instance, ascending by
    /// instance id. Index 0 is the innermost, youngest leaf.
    pub whorls: Vec<usize>,
    /// Whether any surviving leaf lost pixels to a later-drawn one.
    pub occluded: bool,
}

const MIN_VISIBLE_PIXELS: usize = 8;
const MAX_ATTEMPTS: u64 = 32;

/// Generates one plant. Deterministic in `(cfg, seed)`; retries internally
/// (bounded) when occlusion eats too many leaves, and errors once the config
/// cannot yield `n_min` leaves of at least 8 visible pixels.
pub fn generate_plant(cfg: &RosetteConfig, seed: u64) -> Result<LabelMap> {
    generate_plant_detailed(cfg, seed).map(|s| s.map)
}

/// [`generate_plant`] with whorl indices and occlusion bookkeeping.
pub fn generate_plant_detailed(cfg: &RosetteConfig, seed: u64) -> Result<PlantSample> {
    cfg.validate()?;
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = Rng::derive(seed, attempt);
        if let Some(sample) = try_generate(cfg, &mut rng) {
            return Ok(sample);
        }
    }
    Err(Error::Generation(format!(
        "could not place {} leaves of >= {MIN_VISIBLE_PIXELS} visible pixels in {MAX_ATTEMPTS} attempts",
        cfg.n_min
    )))
}

fn try_generate(cfg: &RosetteConfig, rng: &mut Rng) -> Option<PlantSample> {
    let (w, h) = (cfg.width, cfg.height);
    let n = rng.range_inclusive(cfg.n_min as u64, cfg.n_max as u64) as usize;
    let cx = w as f64 / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter);
    let cy = h as f64 / 2.0 + rng.uniform(-cfg.center_jitter, cfg.center_jitter);
    let base_angle = rng.uniform(0.0, TAU);

    // raster of provisional ids (k + 1), later compacted
    let mut ids = vec![0u32; w * h];
    let mut painted = vec![0usize; n]; // pixels each leaf claimed when drawn

    for (k, claimed) in painted.iter_mut().enumerate() {
        let aspect = rng.uniform(cfg.aspect_min, cfg.aspect_max);
        let angle = base_angle + cfg.phyllotaxis * k as f64;
        let a = cfg.base_length * cfg.growth.powi(k as i32) / 2.0;
        let b = a * aspect;
        // ellipse center sits slightly inside the leaf length so every leaf
        // overlaps the plant center region
        let r = a * 0.95;
        let (ex, ey) = (cx + r * angle.cos(), cy + r * angle.sin());
        let (sin_t, cos_t) = angle.sin_cos();

        let x0 = ((ex - a).floor().max(0.0)) as usize;
        let x1 = ((ex + a).ceil().min(w as f64 - 1.0)) as usize;
        let y0 = ((ey - a).floor().max(0.0)) as usize;
        let y1 = ((ey + a).ceil().min(h as f64 - 1.0)) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dx = x as f64 - ex;
                let dy = y as f64 - ey;
                let u = dx * cos_t + dy * sin_t;
                let v = -dx * sin_t + dy * cos_t;
                if (u / a).powi(2) + (v / b).powi(2) > 1.0 {
                    continue;
                }
                let cell = &mut ids[y * w + x];
                if *cell == 0 || cfg.occlusion {
                    *cell = k as u32 + 1;
                    *claimed += 1;
                }
            }
        }
    }

    let mut visible = vec![0usize; n];
    for &id in &ids {
        if id > 0 {
            visible[id as usize - 1] += 1;
        }
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&k| visible[k] >= MIN_VISIBLE_PIXELS)
        .collect();
    if keep.len() < cfg.n_min {
        return None;
    }

    // compact surviving provisional ids to 1..m in emergence order
    let mut remap = vec![0u32; n + 1];
    for (new_id, &k) in keep.iter().enumerate() {
        remap[k + 1] = new_id as u32 + 1;
    }
    for id in ids.iter_mut() {
        *id = remap[*id as usize];
    }

    let occluded = cfg.occlusion && keep.iter().any(|&k| visible[k] < painted[k]);
    Some(PlantSample {
        map: LabelMap::new(w, h, ids).expect("dimensions fixed above"),
        whorls: keep,
        occluded,
    })
}

/// Generates `count` plants under `out_dir` as zero-padded PGM files plus a
/// manifest. Returns the manifest path. Re-running with the same config
/// produces byte-identical files.
pub fn generate_dataset(cfg: &RosetteConfig, count: usize, out_dir: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let maps: Vec<LabelMap> = (0..count)
        .into_par_iter()
        .map(|i| generate_plant(cfg, derive_seed(cfg.seed, i as u64)))
        .collect::<Result<_>>()?;

    let mut entries = Vec::with_capacity(count);
    for (i, map) in maps.iter().enumerate() {
        let stem = format!("plant_{:04}", i + 1);
        let file = format!("{stem}.pgm");
        pgm::write_labelmap(&out_dir.join(&file), map)?;
        entries.push(ManifestEntry {
            label: PathBuf::from(file),
            plant_id: stem,
        });
    }
    let manifest_path = out_dir.join("manifest.json");
    Manifest { images: entries }.write(&manifest_path)?;
    Ok(manifest_path)
}

/// Mask corruption settings for metric testing.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbSpec {
    /// Probability of deleting each (possibly merged) mask.
    pub drop_prob: f64,
    /// Probability of merging each adjacent instance pair.
    pub merge_prob: f64,
    /// Chebyshev radius of boundary erosion/dilation; 0 disables.
    pub boundary_radius: usize,
    pub seed: u64,
}

impl PerturbSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.drop_prob) || !(0.0..=1.0).contains(&self.merge_prob) {
            return Err(Error::Config("perturbation probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Unordered pairs of instance ids that touch (Chebyshev distance 1),
/// ascending.
fn adjacent_pairs(map: &LabelMap) -> Vec<(u32, u32)> {
    let (w, h) = (map.width(), map.height());
    let mut pairs = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            let a = map.id_at(x, y);
            if a == 0 {
                continue;
            }
            // forward neighbors only; each unordered pair still seen once
            let neighbors: [(isize, isize); 4] = [(1, 0), (-1, 1), (0, 1), (1, 1)];
            for (dx, dy) in neighbors {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let b = map.id_at(nx as usize, ny as usize);
                if b != 0 && b != a {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    pairs.into_iter().collect()
}

/// Corrupts ground truth into a prediction-like binary mask stack by merging
/// adjacent instances, dropping masks, and eroding or dilating boundaries.
/// Deterministic in `(map, spec)`.
pub fn perturb(map: &LabelMap, spec: &PerturbSpec) -> Result<SoftMaskStack> {
    spec.validate()?;
    let (w, h) = (map.width(), map.height());
    let instances = map.instances();
    let mut rng = Rng::seeded(spec.seed);

    // merge pass: union-find over instance indices
    let index_of = |id: u32, instances: &[InstancePixelSet]| {
        instances
            .binary_search_by_key(&id, |s| s.id)
            .expect("pair ids come from the same map")
    };
    let mut parent: Vec<usize> = (0..instances.len()).collect();
    fn root(parent: &mut [usize], k: usize) -> usize {
        let mut k = k;
        while parent[k] != k {
            parent[k] = parent[parent[k]];
            k = parent[k];
        }
        k
    }
    for (a, b) in adjacent_pairs(map) {
        let merge = rng.chance(spec.merge_prob);
        if merge {
            let (ra, rb) = (
                root(&mut parent, index_of(a, &instances)),
                root(&mut parent, index_of(b, &instances)),
            );
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: Vec<Vec<(u32, u32)>> = Vec::new();
    let mut group_of_root: Vec<Option<usize>> = vec![None; instances.len()];
    for (k, inst) in instances.iter().enumerate() {
        let r = root(&mut parent, k);
        let g = *group_of_root[r].get_or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].extend_from_slice(inst.pixels());
    }

    // drop pass
    let mut kept: Vec<Vec<(u32, u32)>> = Vec::new();
    for g in groups {
        let dropped = rng.chance(spec.drop_prob);
        if !dropped {
            kept.push(g);
        }
    }

    // boundary pass: each mask independently erodes or dilates
    let masks: Vec<Vec<(u32, u32)>> = kept
        .into_iter()
        .map(|pixels| {
            if spec.boundary_radius == 0 {
                return pixels;
            }
            let erode = rng.chance(0.5);
            morph(&pixels, w, h, spec.boundary_radius, erode)
        })
        .filter(|pixels| !pixels.is_empty())
        .collect();

    let sets: Vec<InstancePixelSet> = masks
        .into_iter()
        .enumerate()
        .map(|(k, pixels)| InstancePixelSet::new(k as u32 + 1, pixels))
        .collect::<Result<_>>()?;
    SoftMaskStack::from_instances(h, w, &sets)
}

/// Morphological erosion (shrink) or dilation (grow) by a Chebyshev radius.
/// Outside-image counts as background, so erosion trims image borders too.
fn morph(pixels: &[(u32, u32)], w: usize, h: usize, radius: usize, erode: bool) -> Vec<(u32, u32)> {
    let member: std::collections::HashSet<(u32, u32)> = pixels.iter().copied().collect();
    let r = radius as isize;
    if erode {
        pixels
            .iter()
            .copied()
            .filter(|&(x, y)| {
                for dy in -r..=r {
                    for dx in -r..=r {
                        let nx = x as isize + dx;
                        let ny = y as isize + dy;
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            return false;
                        }
                        if !member.contains(&(nx as u32, ny as u32)) {
                            return false;
                        }
                    }
                }
                true
            })
            .collect()
    } else {
        let mut grown = BTreeSet::new();
        for &(x, y) in pixels {
            for dy in -r..=r {
                for dx in -r..=r {
                    let nx = x as isize + dx;
                    let ny = y as isize + dy;
                    if nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize {
                        grown.insert((ny as u32, nx as u32));
                    }
                }
            }
        }
        grown.into_iter().map(|(y, x)| (x, y)).collect()
    }
}
