//! Guided-feature supervision and fusion: per-pixel projections, ground-truth
//! guided-embedding targets with edge-weighted L1, the mask losses, and the
//! composite objective.

use ndarray::{Array1, Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::guide::{guided_embedding, GuideBank};
use crate::label::LabelMap;

/// Dense per-pixel feature tensor, indexed `(y, x, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    values: Array3<f64>,
}

impl FeatureGrid {
    pub fn new(values: Array3<f64>) -> Result<Self> {
        let (h, w, d) = values.dim();
        if h == 0 || w == 0 || d == 0 {
            return Err(Error::Config(format!(
                "feature grid dimensions must be positive, got {h}x{w}x{d}"
            )));
        }
        Ok(FeatureGrid { values })
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

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn value(&self, y: usize, x: usize, c: usize) -> f64 {
        self.values[(y, x, c)]
    }
}

/// Per-pixel affine map (a 1×1 convolution): `weight` is `d_in × d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionParams {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl ProjectionParams {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weight.ncols() != bias.len() {
            return Err(Error::Shape(format!(
                "weight has {} output channels but bias has {}",
                weight.ncols(),
                bias.len()
            )));
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("projection parameters must be finite".into()));
        }
        Ok(ProjectionParams { weight, bias })
    }

    pub fn identity(d: usize) -> Self {
        ProjectionParams {
            weight: Array2::eye(d),
            bias: Array1::zeros(d),
        }
    }
}

/// Applies the projection at every pixel; spatial dims are preserved.
pub fn project_features(x: &FeatureGrid, p: &ProjectionParams) -> Result<FeatureGrid> {
    if p.weight.nrows() != x.depth() {
        return Err(Error::Shape(format!(
            "projection expects {} input channels, grid has {}",
            p.weight.nrows(),
            x.depth()
        )));
    }
    let (h, w, _) = x.values.dim();
    let d_out = p.weight.ncols();
    let flat = x
        .values
        .to_shape((h * w, x.depth()))
        .expect("contiguous by construction");
    let projected = flat.dot(&p.weight) + &p.bias;
    FeatureGrid::new(
        projected
            .into_shape_with_order((h, w, d_out))
            .expect("dims agree"),
    )
}

pub const DEFAULT_EDGE_RADIUS: usize = 2;
pub const DEFAULT_EDGE_WEIGHT: f64 = 3.0;

/// Ground-truth guided-embedding target plus its supervision weights with the
/// default edge band (radius 2, weight 3).
pub fn gt_guided_target(map: &LabelMap, bank: &GuideBank) -> (FeatureGrid, Array2<f64>) {
    gt_guided_target_with(map, bank, DEFAULT_EDGE_RADIUS, DEFAULT_EDGE_WEIGHT)
}

/// Ground-truth guided-embedding target with explicit edge-band settings.
///
/// Every pixel of instance `k` carries the guided embedding of instance `k`;
/// background pixels carry zeros and zero weight, so they never enter the
/// loss. Instance pixels weigh 1, except those within `edge_radius`
/// (Chebyshev) of a differing id, which weigh `edge_weight`. `edge_radius` 0
/// disables edge emphasis.
pub fn gt_guided_target_with(
    map: &LabelMap,
    bank: &GuideBank,
    edge_radius: usize,
    edge_weight: f64,
) -> (FeatureGrid, Array2<f64>) {
    let (w, h, d_g) = (map.width(), map.height(), bank.d_g());
    let mut target = Array3::zeros((h, w, d_g));
    let mut weights = Array2::zeros((h, w));
    for inst in map.instances() {
        let e = guided_embedding(bank, &inst);
        for &(x, y) in inst.pixels() {
            let (x, y) = (x as usize, y as usize);
            weights[(y, x)] = 1.0;
            for (c, &v) in e.values.iter().enumerate() {
                target[(y, x, c)] = v;
            }
        }
        if edge_radius > 0 {
            let band = map
                .edge_band(inst.id, edge_radius)
                .expect("instance ids come from this map");
            for (x, y) in band {
                weights[(y as usize, x as usize)] = edge_weight;
            }
        }
    }
    (
        FeatureGrid::new(target).expect("dims positive by LabelMap invariant"),
        weights,
    )
}

/// Weighted per-pixel L1: `Σ w(x,y)·‖pred−target‖₁ / Σ w(x,y)`, 0 when the
/// weights vanish entirely.
pub fn guided_l1_loss(
    pred: &FeatureGrid,
    target: &FeatureGrid,
    weights: &Array2<f64>,
) -> Result<f64> {
    if pred.values.dim() != target.values.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.values.dim(),
            target.values.dim()
        )));
    }
    if weights.dim() != (pred.height(), pred.width()) {
        return Err(Error::Shape(format!(
            "weight grid {:?} does not cover a {}x{} image",
            weights.dim(),
            pred.height(),
            pred.width()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for ((y, x), &w) in weights.indexed_iter() {
        if w == 0.0 {
            continue;
        }
        let mut l1 = 0.0;
        for c in 0..pred.depth() {
            l1 += (pred.values[(y, x, c)] - target.values[(y, x, c)]).abs();
        }
        num += w * l1;
        den += w;
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// Fuses mask features with guided features: a per-pixel linear map over the
/// channel concatenation `[mask ‖ guided]`, back to the mask width.
pub fn fuse_features(
    mask_feats: &FeatureGrid,
    guided_feats: &FeatureGrid,
    p: &ProjectionParams,
) -> Result<FeatureGrid> {
    if (mask_feats.height(), mask_feats.width()) != (guided_feats.height(), guided_feats.width())
    {
        return Err(Error::Shape(format!(
            "mask features {}x{} vs guided features {}x{}",
            mask_feats.height(),
            mask_feats.width(),
            guided_feats.height(),
            guided_feats.width()
        )));
    }
    let (d_m, d_g) = (mask_feats.depth(), guided_feats.depth());
    if p.weight.nrows() != d_m + d_g {
        return Err(Error::Shape(format!(
            "fusion expects {} input channels, projection takes {}",
            d_m + d_g,
            p.weight.nrows()
        )));
    }
    if p.weight.ncols() != d_m {
        return Err(Error::Shape(format!(
            "fusion must map back to {} mask channels, projection yields {}",
            d_m,
            p.weight.ncols()
        )));
    }
    let (h, w) = (mask_feats.height(), mask_feats.width());
    let mut concat = Array3::zeros((h, w, d_m + d_g));
    for y in 0..h {
        for x in 0..w {
            for c in 0..d_m {
                concat[(y, x, c)] = mask_feats.values[(y, x, c)];
            }
            for c in 0..d_g {
                concat[(y, x, d_m + c)] = guided_feats.values[(y, x, c)];
            }
        }
    }
    project_features(&FeatureGrid::new(concat)?, p)
}

/// Soft Dice loss with smoothing constant 1: `1 − (2Σp·g + 1)/(Σp + Σg + 1)`.
pub fn dice_loss(pred: ArrayView2<'_, f64>, gt: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    let inter: f64 = pred.iter().zip(gt.iter()).map(|(p, g)| p * g).sum();
    let total = pred.sum() + gt.sum();
    Ok(1.0 - (2.0 * inter + 1.0) / (total + 1.0))
}

/// Mean binary cross-entropy with predictions clamped to `[1e−7, 1−1e−7]`.
pub fn bce_loss(pred: ArrayView2<'_, f64>, gt: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs ground truth {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    let n = pred.len() as f64;
    let sum: f64 = pred
        .iter()
        .zip(gt.iter())
        .map(|(&p, &g)| {
            let p = p.clamp(1e-7, 1.0 - 1e-7);
            -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / n)
}

/// Mean cross-entropy over rows of logits against integer class labels,
/// computed via a stabilized log-sum-exp.
pub fn cls_cross_entropy(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    if logits.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} logit rows but {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    if logits.ncols() == 0 {
        return Err(Error::Shape("logits need at least one class".into()));
    }
    let mut sum = 0.0;
    for (row, &label) in logits.rows().into_iter().zip(labels) {
        if label >= row.len() {
            return Err(Error::Config(format!(
                "label {label} out of range for {} classes",
                row.len()
            )));
        }
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        sum += lse - row[label];
    }
    Ok(sum / labels.len() as f64)
}

/// Scalar loss terms entering the composite objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossComponents {
    pub guide_l1: f64,
    pub ce: f64,
    pub dice: f64,
    pub cls: f64,
}

/// Weights of the composite objective. Defaults: λ_ce=2, λ_dice=5, λ_cls=2,
/// λ_guide=5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_ce: f64,
    pub lambda_dice: f64,
    pub lambda_cls: f64,
    pub lambda_guide: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_ce: 2.0,
            lambda_dice: 5.0,
            lambda_cls: 2.0,
            lambda_guide: 5.0,
        }
    }
}

impl LossWeights {
    pub fn new(
        lambda_ce: f64,
        lambda_dice: f64,
        lambda_cls: f64,
        lambda_guide: f64,
    ) -> Result<Self> {
        let w = LossWeights {
            lambda_ce,
            lambda_dice,
            lambda_cls,
            lambda_guide,
        };
        if [lambda_ce, lambda_dice, lambda_cls, lambda_guide]
            .iter()
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(Error::Config(
                "loss weights must be finite and non-negative".into(),
            ));
        }
        Ok(w)
    }
}

/// Composite objective:
/// `λ_guide·L1 + λ_ce·L_ce + λ_dice·L_dice + λ_cls·L_cls`.
pub fn total_loss(c: &LossComponents, w: &LossWeights) -> f64 {
    w.lambda_guide * c.guide_l1 + w.lambda_ce * c.ce + w.lambda_dice * c.dice + w.lambda_cls * c.cls
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guide::{init_guides, train_guides, GuideTrainConfig};
    use crate::rng::Rng;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn random_grid(h: usize, w: usize, d: usize, seed: u64) -> FeatureGrid {
        let mut rng = Rng::seeded(seed);
        FeatureGrid::new(Array3::from_shape_fn((h, w, d), |_| rng.uniform(-2.0, 2.0))).unwrap()
    }

    #[test]
    fn identity_projection_is_noop() {
        let x = random_grid(3, 4, 5, 1);
        let y = project_features(&x, &ProjectionParams::identity(5)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_weight_projection_yields_bias() {
        let x = random_grid(2, 2, 3, 2);
        let p = ProjectionParams::new(
            Array2::zeros((3, 4)),
            Array1::from_vec(vec![0.5, -1.0, 0.0, 2.0]),
        )
        .unwrap();
        let y = project_features(&x, &p).unwrap();
        assert_eq!(y.depth(), 4);
        for yx in 0..2 {
            for xx in 0..2 {
                assert_eq!(y.value(yx, xx, 0), 0.5);
                assert_eq!(y.value(yx, xx, 1), -1.0);
                assert_eq!(y.value(yx, xx, 2), 0.0);
                assert_eq!(y.value(yx, xx, 3), 2.0);
            }
        }
    }

    #[test]
    fn projection_matches_per_pixel_matvec() {
        let x = random_grid(3, 3, 4, 3);
        let mut rng = Rng::seeded(4);
        let p = ProjectionParams::new(
            Array2::from_shape_fn((4, 2), |_| rng.uniform(-1.0, 1.0)),
            Array1::from_shape_fn(2, |_| rng.uniform(-1.0, 1.0)),
        )
        .unwrap();
        let y = project_features(&x, &p).unwrap();
        for yy in 0..3 {
            for xx in 0..3 {
                for c in 0..2 {
                    let mut acc = p.bias[c];
                    for k in 0..4 {
                        acc += x.value(yy, xx, k) * p.weight[(k, c)];
                    }
                    assert_relative_eq!(y.value(yy, xx, c), acc, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn projection_rejects_channel_mismatch() {
        let x = random_grid(2, 2, 3, 5);
        let p = ProjectionParams::identity(4);
        assert!(matches!(project_features(&x, &p), Err(Error::Shape(_))));
    }

    #[test]
    fn target_is_constant_within_instance() {
        let mut ids = vec![0u32; 64];
        for y in 2..6 {
            for x in 1..7 {
                ids[y * 8 + x] = 1;
            }
        }
        let map = LabelMap::new(8, 8, ids).unwrap();
        let bank = init_guides(4, 8, 8, 2.0, 6).unwrap();
        let (target, weights) = gt_guided_target(&map, &bank);
        let e = guided_embedding(&bank, &map.instances()[0]);
        for &(x, y) in map.instances()[0].pixels() {
            for c in 0..4 {
                assert_eq!(target.value(y as usize, x as usize, c), e.values[c]);
            }
            assert!(weights[(y as usize, x as usize)] >= 1.0);
        }
        // background stays zero in both tensors
        for y in 0..8 {
            for x in 0..8 {
                if map.id_at(x, y) == 0 {
                    assert_eq!(weights[(y, x)], 0.0);
                    for c in 0..4 {
                        assert_eq!(target.value(y, x, c), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn all_background_target_is_zero() {
        let map = LabelMap::new(4, 4, vec![0; 16]).unwrap();
        let bank = init_guides(4, 4, 4, 2.0, 0).unwrap();
        let (target, weights) = gt_guided_target(&map, &bank);
        assert!(target.values().iter().all(|&v| v == 0.0));
        assert!(weights.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn edge_band_pixels_get_heavier_weight() {
        // two adjacent 4x8 instances: every pixel within radius 2 of the
        // shared boundary gets the edge weight
        let mut ids = vec![0u32; 64];
        for y in 0..8 {
            for x in 0..8 {
                ids[y * 8 + x] = if y < 4 { 1 } else { 2 };
            }
        }
        let map = LabelMap::new(8, 8, ids).unwrap();
        let bank = init_guides(4, 8, 8, 2.0, 3).unwrap();
        let (_, weights) = gt_guided_target_with(&map, &bank, 2, 3.0);
        for y in 0..8 {
            for x in 0..8 {
                // rows 2..6 lie within Chebyshev distance 2 of the other id
                let expected = if (2..6).contains(&y) { 3.0 } else { 1.0 };
                assert_eq!(weights[(y, x)], expected, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn converged_bank_separates_target_vectors() {
        let mut ids = vec![0u32; 256];
        for y in 2..8 {
            for x in 2..8 {
                ids[y * 16 + x] = 1;
            }
        }
        for y in 9..14 {
            for x in 9..15 {
                ids[y * 16 + x] = 2;
            }
        }
        let map = LabelMap::new(16, 16, ids).unwrap();
        let init = init_guides(4, 16, 16, 1.0, 8).unwrap();
        let cfg = GuideTrainConfig {
            epochs: 300,
            learning_rate: 0.05,
            ..GuideTrainConfig::default()
        };
        let trained = train_guides(std::slice::from_ref(&map), &cfg, init).unwrap();
        let insts = map.instances();
        let d = guided_embedding(&trained.bank, &insts[0])
            .l1_distance(&guided_embedding(&trained.bank, &insts[1]));
        assert!(d >= 1.0, "pair distance {d} below margin after training");
    }

    #[test]
    fn l1_loss_trivial_values() {
        let a = random_grid(3, 3, 4, 9);
        let w = Array2::from_elem((3, 3), 1.0);
        assert_eq!(guided_l1_loss(&a, &a, &w).unwrap(), 0.0);

        let shifted = FeatureGrid::new(a.values() + 1.0).unwrap();
        assert_relative_eq!(guided_l1_loss(&shifted, &a, &w).unwrap(), 4.0, epsilon = 1e-12);

        let zero_w = Array2::zeros((3, 3));
        assert_eq!(guided_l1_loss(&shifted, &a, &zero_w).unwrap(), 0.0);
    }

    #[test]
    fn l1_loss_matches_triple_loop_oracle() {
        let pred = random_grid(4, 5, 3, 10);
        let target = random_grid(4, 5, 3, 11);
        let mut rng = Rng::seeded(12);
        let weights = Array2::from_shape_fn((4, 5), |_| rng.uniform(0.0, 2.0));

        let mut num = 0.0;
        let mut den = 0.0;
        for y in 0..4 {
            for x in 0..5 {
                let mut l1 = 0.0;
                for c in 0..3 {
                    l1 += (pred.value(y, x, c) - target.value(y, x, c)).abs();
                }
                num += weights[(y, x)] * l1;
                den += weights[(y, x)];
            }
        }
        assert_relative_eq!(
            guided_l1_loss(&pred, &target, &weights).unwrap(),
            num / den,
            epsilon = 1e-12
        );
    }

    #[test]
    fn fusion_passthrough_under_identity_parameterization() {
        let mask = random_grid(3, 3, 4, 13);
        let guided = random_grid(3, 3, 2, 14);
        // top block identity over mask channels, zero over guided channels
        let mut weight = Array2::zeros((6, 4));
        for i in 0..4 {
            weight[(i, i)] = 1.0;
        }
        let p = ProjectionParams::new(weight, Array1::zeros(4)).unwrap();
        let fused = fuse_features(&mask, &guided, &p).unwrap();
        assert_eq!(fused, mask);
    }

    #[test]
    fn fusion_zero_params_zero_output() {
        let mask = random_grid(2, 2, 3, 15);
        let guided = random_grid(2, 2, 2, 16);
        let p = ProjectionParams::new(Array2::zeros((5, 3)), Array1::zeros(3)).unwrap();
        let fused = fuse_features(&mask, &guided, &p).unwrap();
        assert!(fused.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fusion_matches_concat_matvec_oracle() {
        let mask = random_grid(2, 3, 2, 17);
        let guided = random_grid(2, 3, 3, 18);
        let mut rng = Rng::seeded(19);
        let p = ProjectionParams::new(
            Array2::from_shape_fn((5, 2), |_| rng.uniform(-1.0, 1.0)),
            Array1::from_shape_fn(2, |_| rng.uniform(-1.0, 1.0)),
        )
        .unwrap();
        let fused = fuse_features(&mask, &guided, &p).unwrap();
        for y in 0..2 {
            for x in 0..3 {
                let cat = [
                    mask.value(y, x, 0),
                    mask.value(y, x, 1),
                    guided.value(y, x, 0),
                    guided.value(y, x, 1),
                    guided.value(y, x, 2),
                ];
                for c in 0..2 {
                    let mut acc = p.bias[c];
                    for (k, &v) in cat.iter().enumerate() {
                        acc += v * p.weight[(k, c)];
                    }
                    assert_relative_eq!(fused.value(y, x, c), acc, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn fusion_rejects_wrong_output_width() {
        let mask = random_grid(2, 2, 3, 20);
        let guided = random_grid(2, 2, 2, 21);
        let p = ProjectionParams::new(Array2::zeros((5, 4)), Array1::zeros(4)).unwrap();
        assert!(matches!(
            fuse_features(&mask, &guided, &p),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn dice_trivial_cases() {
        // 40x40 non-empty mask: smoothing skews by ~1/(2·area)
        let mut gt = Array2::zeros((40, 40));
        for y in 0..40 {
            for x in 0..20 {
                gt[(y, x)] = 1.0;
            }
        }
        let loss = dice_loss(gt.view(), gt.view()).unwrap();
        assert!(loss.abs() < 1e-3, "self-dice {loss}");

        let inv = gt.mapv(|v| 1.0 - v);
        let disjoint = dice_loss(inv.view(), gt.view()).unwrap();
        assert!((disjoint - 1.0).abs() < 1e-3, "disjoint dice {disjoint}");
    }

    #[test]
    fn dice_matches_formula_oracle() {
        let mut rng = Rng::seeded(22);
        let pred = Array2::from_shape_fn((6, 6), |_| rng.next_f64());
        let gt = Array2::from_shape_fn((6, 6), |_| f64::from(rng.chance(0.5)));
        let inter: f64 = pred.iter().zip(gt.iter()).map(|(p, g)| p * g).sum();
        let expected = 1.0 - (2.0 * inter + 1.0) / (pred.sum() + gt.sum() + 1.0);
        assert_relative_eq!(
            dice_loss(pred.view(), gt.view()).unwrap(),
            expected,
            epsilon = 1e-12
        );
    }

    #[test]
    fn bce_trivial_cases() {
        let gt = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(bce_loss(gt.view(), gt.view()).unwrap() <= 1e-6);

        let half = Array2::from_elem((2, 2), 0.5);
        assert_relative_eq!(
            bce_loss(half.view(), gt.view()).unwrap(),
            2f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn bce_matches_oracle_and_clamps() {
        let mut rng = Rng::seeded(23);
        let pred = Array2::from_shape_fn((5, 5), |_| rng.next_f64());
        let gt = Array2::from_shape_fn((5, 5), |_| f64::from(rng.chance(0.5)));
        let expected: f64 = pred
            .iter()
            .zip(gt.iter())
            .map(|(&p, &g)| {
                let p = p.clamp(1e-7, 1.0 - 1e-7);
                -(g * p.ln() + (1.0 - g) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 25.0;
        assert_relative_eq!(bce_loss(pred.view(), gt.view()).unwrap(), expected, epsilon = 1e-12);

        // exact-zero prediction against positive label survives via clamping
        let zero = Array2::zeros((1, 1));
        let one = Array2::from_elem((1, 1), 1.0);
        assert!(bce_loss(zero.view(), one.view()).unwrap().is_finite());
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = Array2::zeros((4, 2));
        let labels = [0usize, 1, 0, 1];
        assert_relative_eq!(
            cls_cross_entropy(logits.view(), &labels).unwrap(),
            2f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn cross_entropy_confident_correct_is_small() {
        let logits = array![[20.0, 0.0], [0.0, 20.0]];
        let loss = cls_cross_entropy(logits.view(), &[0, 1]).unwrap();
        assert!(loss < 1e-8);
        assert!(cls_cross_entropy(logits.view(), &[0, 5]).is_err());
    }

    #[test]
    fn total_loss_assembly() {
        let w = LossWeights::default();
        let zero = LossComponents {
            guide_l1: 0.0,
            ce: 0.0,
            dice: 0.0,
            cls: 0.0,
        };
        assert_eq!(total_loss(&zero, &w), 0.0);

        let unit = LossComponents {
            guide_l1: 1.0,
            ce: 1.0,
            dice: 1.0,
            cls: 1.0,
        };
        assert_eq!(total_loss(&unit, &w), 14.0);

        let c = LossComponents {
            guide_l1: 0.25,
            ce: 1.5,
            dice: 0.1,
            cls: 2.0,
        };
        let expected = 5.0 * 0.25 + 2.0 * 1.5 + 5.0 * 0.1 + 2.0 * 2.0;
        assert_relative_eq!(total_loss(&c, &w), expected, epsilon = 1e-15);
    }

    #[test]
    fn loss_weights_reject_negative() {
        assert!(LossWeights::new(-1.0, 5.0, 2.0, 5.0).is_err());
        assert!(LossWeights::new(2.0, 5.0, 2.0, f64::NAN).is_err());
    }
}
