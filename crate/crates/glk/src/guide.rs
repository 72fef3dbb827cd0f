//! Harmonic guide functions, guided embeddings, and the separation loss.
//!
//! A guide function is a planar sinusoid over normalized pixel coordinates,
//!
//! ```text
//! f(x, y; ψ) = sin(ψ₁·x/W + ψ₂·y/H + ψ₃)
//! ```
//!
//! and an instance's guided embedding stacks the mean of each guide over the
//! instance's pixels. Training pushes embeddings of distinct instances in the
//! same image at least `epsilon` apart (L1) via a hinge loss with analytic
//! gradients.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{InstancePixelSet, LabelMap};
use crate::optim::AdamW;
use crate::rng::Rng;

/// One harmonic guide: x-frequency, y-frequency (both in radians across the
/// normalized image span) and a phase offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuideParams {
    pub freq_x: f64,
    pub freq_y: f64,
    pub phase: f64,
}

impl GuideParams {
    pub fn new(freq_x: f64, freq_y: f64, phase: f64) -> Self {
        GuideParams {
            freq_x,
            freq_y,
            phase,
        }
    }
}

/// A trained (or initialized) set of guides plus the reference image
/// dimensions they normalize against and the separation margin.
#[derive(Debug, Clone, PartialEq)]
pub struct GuideBank {
    params: Vec<GuideParams>,
    w: usize,
    h: usize,
    epsilon: f64,
}

/// On-disk form: `{"d_g":…, "W":…, "H":…, "epsilon":…, "params":[[fx,fy,phase],…]}`.
#[derive(Serialize, Deserialize)]
struct BankFile {
    d_g: usize,
    #[serde(rename = "W")]
    w: usize,
    #[serde(rename = "H")]
    h: usize,
    epsilon: f64,
    params: Vec<[f64; 3]>,
}

impl GuideBank {
    pub fn new(params: Vec<GuideParams>, w: usize, h: usize, epsilon: f64) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::Config("guide bank must hold at least one guide".into()));
        }
        if w == 0 || h == 0 {
            return Err(Error::Config(format!(
                "reference dimensions must be positive, got {w}x{h}"
            )));
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::Config(format!(
                "separation margin must be positive and finite, got {epsilon}"
            )));
        }
        if params
            .iter()
            .any(|p| !(p.freq_x.is_finite() && p.freq_y.is_finite() && p.phase.is_finite()))
        {
            return Err(Error::Config("guide parameters must be finite".into()));
        }
        Ok(GuideBank {
            params,
            w,
            h,
            epsilon,
        })
    }

    pub fn d_g(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[GuideParams] {
        &self.params
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Parameters flattened as `[fx₀, fy₀, phase₀, fx₁, …]`.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(3 * self.params.len());
        for p in &self.params {
            out.extend_from_slice(&[p.freq_x, p.freq_y, p.phase]);
        }
        out
    }

    /// Rebuilds a bank from a flat parameter vector (inverse of
    /// [`flat_params`](Self::flat_params)).
    pub fn from_flat(flat: &[f64], w: usize, h: usize, epsilon: f64) -> Result<Self> {
        if !flat.len().is_multiple_of(3) || flat.is_empty() {
            return Err(Error::Config(format!(
                "flat parameter vector length {} is not a positive multiple of 3",
                flat.len()
            )));
        }
        let params = flat
            .chunks_exact(3)
            .map(|c| GuideParams::new(c[0], c[1], c[2]))
            .collect();
        GuideBank::new(params, w, h, epsilon)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = BankFile {
            d_g: self.d_g(),
            w: self.w,
            h: self.h,
            epsilon: self.epsilon,
            params: self
                .params
                .iter()
                .map(|p| [p.freq_x, p.freq_y, p.phase])
                .collect(),
        };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: BankFile = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if file.d_g != file.params.len() {
            return Err(Error::Json {
                path: path.to_path_buf(),
                message: format!(
                    "d_g = {} but params holds {} entries",
                    file.d_g,
                    file.params.len()
                ),
            });
        }
        GuideBank::new(
            file.params
                .into_iter()
                .map(|[fx, fy, ph]| GuideParams::new(fx, fy, ph))
                .collect(),
            file.w,
            file.h,
            file.epsilon,
        )
    }
}

/// Length-`d_g` vector of guide expectations for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedEmbedding {
    pub values: Vec<f64>,
}

impl GuidedEmbedding {
    pub fn l1_distance(&self, other: &GuidedEmbedding) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

/// Evaluates one guide at pixel `(x, y)` of a `w`×`h` image.
pub fn eval_guide(p: &GuideParams, x: f64, y: f64, w: f64, h: f64) -> f64 {
    debug_assert!(w >= 1.0 && h >= 1.0);
    (p.freq_x * x / w + p.freq_y * y / h + p.phase).sin()
}

/// Mean of one guide over an instance's pixels.
pub fn instance_expectation(p: &GuideParams, s: &InstancePixelSet, w: f64, h: f64) -> f64 {
    let sum: f64 = s
        .pixels()
        .iter()
        .map(|&(x, y)| eval_guide(p, f64::from(x), f64::from(y), w, h))
        .sum();
    sum / s.len() as f64
}

/// Mass-weighted mean of one guide under a soft mask; 0 when the mask is
/// (numerically) empty.
pub fn soft_instance_expectation(p: &GuideParams, mask: ArrayView2<'_, f64>, w: f64, h: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for ((y, x), &m) in mask.indexed_iter() {
        if m != 0.0 {
            num += m * eval_guide(p, x as f64, y as f64, w, h);
            den += m;
        }
    }
    if den < 1e-6 {
        0.0
    } else {
        num / den
    }
}

/// Guided embedding of an instance under every guide in the bank, normalized
/// by the bank's reference dimensions.
pub fn guided_embedding(bank: &GuideBank, s: &InstancePixelSet) -> GuidedEmbedding {
    let (w, h) = (bank.w as f64, bank.h as f64);
    GuidedEmbedding {
        values: bank
            .params
            .iter()
            .map(|p| instance_expectation(p, s, w, h))
            .collect(),
    }
}

/// An instance reduced to normalized pixel coordinates, the only thing the
/// loss needs per pixel.
struct PreparedInstance {
    u: Vec<f64>, // x/W
    v: Vec<f64>, // y/H
}

struct PreparedImage {
    instances: Vec<PreparedInstance>,
}

fn prepare(images: &[LabelMap], w: f64, h: f64) -> Vec<PreparedImage> {
    images
        .iter()
        .map(|map| PreparedImage {
            instances: map
                .instances()
                .iter()
                .map(|s| PreparedInstance {
                    u: s.pixels().iter().map(|&(x, _)| f64::from(x) / w).collect(),
                    v: s.pixels().iter().map(|&(_, y)| f64::from(y) / h).collect(),
                })
                .collect(),
        })
        .collect()
}

/// Per-instance guide statistics: the embedding plus the cosine means the
/// chain rule needs.
struct InstanceStats {
    e: Vec<f64>,       // mean sin(arg)  per guide
    cos_u: Vec<f64>,   // mean cos(arg)·u
    cos_v: Vec<f64>,   // mean cos(arg)·v
    cos_one: Vec<f64>, // mean cos(arg)
}

fn instance_stats(params: &[GuideParams], inst: &PreparedInstance, with_grad: bool) -> InstanceStats {
    let d_g = params.len();
    let n = inst.u.len() as f64;
    let mut st = InstanceStats {
        e: vec![0.0; d_g],
        cos_u: vec![0.0; d_g],
        cos_v: vec![0.0; d_g],
        cos_one: vec![0.0; d_g],
    };
    for (i, p) in params.iter().enumerate() {
        let mut s_sum = 0.0;
        let mut cu = 0.0;
        let mut cv = 0.0;
        let mut c1 = 0.0;
        for (&u, &v) in inst.u.iter().zip(&inst.v) {
            let arg = p.freq_x * u + p.freq_y * v + p.phase;
            if with_grad {
                let (s, c) = arg.sin_cos();
                s_sum += s;
                cu += c * u;
                cv += c * v;
                c1 += c;
            } else {
                s_sum += arg.sin();
            }
        }
        st.e[i] = s_sum / n;
        st.cos_u[i] = cu / n;
        st.cos_v[i] = cv / n;
        st.cos_one[i] = c1 / n;
    }
    st
}

/// Hinge loss of one image plus (optionally) its gradient contribution.
fn image_loss_grad(
    params: &[GuideParams],
    epsilon: f64,
    img: &PreparedImage,
    with_grad: bool,
) -> (f64, Vec<f64>) {
    let d_g = params.len();
    let n_inst = img.instances.len();
    let mut grad = vec![0.0; if with_grad { 3 * d_g } else { 0 }];
    if n_inst < 2 {
        return (0.0, grad);
    }
    let stats: Vec<InstanceStats> = img
        .instances
        .iter()
        .map(|inst| instance_stats(params, inst, with_grad))
        .collect();
    let n_pairs = (n_inst * (n_inst - 1) / 2) as f64;
    let pair_weight = 1.0 / n_pairs;

    let mut loss = 0.0;
    for a in 0..n_inst {
        for b in (a + 1)..n_inst {
            let d: f64 = (0..d_g).map(|i| (stats[a].e[i] - stats[b].e[i]).abs()).sum();
            let margin = epsilon - d;
            if margin <= 0.0 {
                continue; // hinge inactive; subgradient 0 at the kink
            }
            loss += pair_weight * margin;
            if !with_grad {
                continue;
            }
            for i in 0..d_g {
                let delta = stats[a].e[i] - stats[b].e[i];
                // sign(0) = 0 for the L1 subgradient
                let sign = if delta > 0.0 {
                    1.0
                } else if delta < 0.0 {
                    -1.0
                } else {
                    continue;
                };
                let scale = -pair_weight * sign;
                grad[3 * i] += scale * (stats[a].cos_u[i] - stats[b].cos_u[i]);
                grad[3 * i + 1] += scale * (stats[a].cos_v[i] - stats[b].cos_v[i]);
                grad[3 * i + 2] += scale * (stats[a].cos_one[i] - stats[b].cos_one[i]);
            }
        }
    }
    (loss, grad)
}

/// Sums per-image results in ascending image order regardless of how they
/// were computed, keeping the reduction bitwise deterministic.
fn reduce_images(
    params: &[GuideParams],
    epsilon: f64,
    prepared: &[PreparedImage],
    with_grad: bool,
) -> (f64, Vec<f64>) {
    let partials: Vec<(f64, Vec<f64>)> = prepared
        .par_iter()
        .map(|img| image_loss_grad(params, epsilon, img, with_grad))
        .collect();
    let mut loss = 0.0;
    let mut grad = vec![0.0; if with_grad { 3 * params.len() } else { 0 }];
    for (l, g) in partials {
        loss += l;
        for (acc, x) in grad.iter_mut().zip(&g) {
            *acc += x;
        }
    }
    (loss, grad)
}

/// Hinge separation loss over a dataset: per image, the mean over unordered
/// instance pairs of `max(0, ε − ‖e(S) − e(S′)‖₁)`, summed across images.
/// Images with fewer than two instances contribute 0.
pub fn separation_loss(bank: &GuideBank, images: &[LabelMap]) -> f64 {
    let prepared = prepare(images, bank.w as f64, bank.h as f64);
    reduce_images(&bank.params, bank.epsilon, &prepared, false).0
}

/// Analytic gradient of [`separation_loss`] over the flat parameter layout
/// `[fx₀, fy₀, phase₀, fx₁, …]`. Subgradient 0 at the hinge kink and at L1
/// sign kinks.
pub fn separation_loss_grad(bank: &GuideBank, images: &[LabelMap]) -> Vec<f64> {
    let prepared = prepare(images, bank.w as f64, bank.h as f64);
    reduce_images(&bank.params, bank.epsilon, &prepared, true).1
}

/// L1 embedding distance of every unordered instance pair, image by image in
/// input order. Diagnostic companion to [`separation_loss`].
pub fn pair_l1_distances(bank: &GuideBank, images: &[LabelMap]) -> Vec<f64> {
    let mut out = Vec::new();
    for map in images {
        let embeddings: Vec<GuidedEmbedding> = map
            .instances()
            .iter()
            .map(|s| guided_embedding(bank, s))
            .collect();
        for a in 0..embeddings.len() {
            for b in (a + 1)..embeddings.len() {
                out.push(embeddings[a].l1_distance(&embeddings[b]));
            }
        }
    }
    out
}

/// Draws a fresh bank: the first half of the guides varies along x only, the
/// second half along y only, phases uniform over a full turn.
pub fn init_guides(d_g: usize, w: usize, h: usize, epsilon: f64, seed: u64) -> Result<GuideBank> {
    if d_g == 0 || !d_g.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "guide count must be a positive even number, got {d_g}"
        )));
    }
    let mut rng = Rng::seeded(seed);
    let mut params = Vec::with_capacity(d_g);
    for i in 0..d_g {
        let freq = rng.uniform(0.0, 50.0);
        let phase = rng.uniform(0.0, TAU);
        if i < d_g / 2 {
            params.push(GuideParams::new(freq, 0.0, phase));
        } else {
            params.push(GuideParams::new(0.0, freq, phase));
        }
    }
    GuideBank::new(params, w, h, epsilon)
}

/// Training-loop settings. Defaults mirror the regime the bank shape expects:
/// 1000 epochs at learning rate 0.01 with (β1, β2) = (0.9, 0.999) and no
/// weight decay.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GuideTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Reserved for stochastic variants; the full-batch loop is deterministic
    /// and never draws from it.
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
}

impl Default for GuideTrainConfig {
    fn default() -> Self {
        GuideTrainConfig {
            epochs: 1000,
            learning_rate: 0.01,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            weight_decay: 0.0,
        }
    }
}

/// Output of [`train_guides`]: the minimum-loss snapshot and one loss value
/// per epoch (measured at the parameters entering that epoch).
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub bank: GuideBank,
    pub history: Vec<f64>,
}

/// Full-batch training of the separation loss. Returns the parameter snapshot
/// with the minimum recorded loss (first occurrence on ties).
pub fn train_guides(
    images: &[LabelMap],
    cfg: &GuideTrainConfig,
    init: GuideBank,
) -> Result<TrainResult> {
    if cfg.epochs == 0 {
        return Err(Error::Config("epochs must be >= 1".into()));
    }
    if !cfg.learning_rate.is_finite() || cfg.learning_rate <= 0.0 {
        return Err(Error::Config(format!(
            "learning rate must be positive and finite, got {}",
            cfg.learning_rate
        )));
    }
    let prepared = prepare(images, init.w as f64, init.h as f64);
    if !prepared.iter().any(|img| img.instances.len() >= 2) {
        return Err(Error::DegenerateDataset(
            "no image provides an instance pair; nothing to separate".into(),
        ));
    }

    let (w, h, epsilon) = (init.w, init.h, init.epsilon);
    let mut flat = init.flat_params();
    let mut opt = AdamW::with_hyper(
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.weight_decay,
        flat.len(),
    );
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_loss = f64::INFINITY;
    let mut best_flat = flat.clone();

    for _ in 0..cfg.epochs {
        let params: Vec<GuideParams> = flat
            .chunks_exact(3)
            .map(|c| GuideParams::new(c[0], c[1], c[2]))
            .collect();
        let (loss, grad) = reduce_images(&params, epsilon, &prepared, true);
        history.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best_flat.copy_from_slice(&flat);
        }
        opt.step(&mut flat, &grad);
    }

    Ok(TrainResult {
        bank: GuideBank::from_flat(&best_flat, w, h, epsilon)?,
        history,
    })
}

/// Writes a loss history as `epoch,loss` CSV (epochs numbered from 0).
pub fn write_history_csv(path: &Path, history: &[f64]) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        out.push_str(&format!("{epoch},{loss}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
