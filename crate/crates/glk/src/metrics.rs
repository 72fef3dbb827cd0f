//! Instance-segmentation evaluation: Dice, Best Dice, Symmetric Best Dice,
//! instance-count error, and size-stratified reporting.
//!
//! Scores are on a 0..100 scale. Images whose prediction or ground-truth set
//! is empty yield an explicit per-image "undefined" outcome instead of a
//! silent zero, and aggregates average the defined images only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{InstancePixelSet, LabelMap, SoftMaskStack};

/// Dice overlap of two pixel sets: `2|a∩b| / (|a| + |b|)`.
///
/// Pixel sets are non-empty by construction, so the 0/0 case (defined as 0)
/// cannot arise through this type.
pub fn dice(a: &InstancePixelSet, b: &InstancePixelSet) -> f64 {
    // both pixel lists are sorted row-major; count the intersection by merge
    let (pa, pb) = (a.pixels(), b.pixels());
    let mut i = 0;
    let mut j = 0;
    let mut inter = 0usize;
    while i < pa.len() && j < pb.len() {
        let ka = (pa[i].1, pa[i].0);
        let kb = (pb[j].1, pb[j].0);
        match ka.cmp(&kb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    2.0 * inter as f64 / (pa.len() + pb.len()) as f64
}

/// Best Dice from `ya` onto `yb`: mean over `ya` of the best Dice match in
/// `yb`, scaled to percent. An empty `yb` scores 0; an empty `ya` leaves the
/// mean undefined and errors.
pub fn best_dice(ya: &[InstancePixelSet], yb: &[InstancePixelSet]) -> Result<f64> {
    if ya.is_empty() {
        return Err(Error::UndefinedMetric(
            "best dice over an empty source set divides by zero".into(),
        ));
    }
    let sum: f64 = ya
        .iter()
        .map(|a| {
            yb.iter()
                .map(|b| dice(a, b))
                .fold(0.0f64, f64::max)
        })
        .sum();
    Ok(100.0 * (sum / ya.len() as f64))
}

/// Symmetric Best Dice: the worse of the two directional Best Dice scores.
pub fn sbd(pred: &[InstancePixelSet], gt: &[InstancePixelSet]) -> Result<f64> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::UndefinedMetric(
            "symmetric best dice needs non-empty prediction and ground-truth sets".into(),
        ));
    }
    let forward = best_dice(pred, gt)?;
    let backward = best_dice(gt, pred)?;
    Ok(forward.min(backward))
}

/// Absolute difference in instance counts.
pub fn dic(pred: &[InstancePixelSet], gt: &[InstancePixelSet]) -> usize {
    pred.len().abs_diff(gt.len())
}

/// Leaf-size category bounds in pixels; both upper bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeThresholds {
    pub small_max: usize,
    pub medium_max: usize,
}

impl SizeThresholds {
    pub fn new(small_max: usize, medium_max: usize) -> Result<Self> {
        if small_max == 0 || small_max >= medium_max {
            return Err(Error::Config(format!(
                "size thresholds need 0 < small_max < medium_max, got {small_max}/{medium_max}"
            )));
        }
        Ok(SizeThresholds {
            small_max,
            medium_max,
        })
    }

    /// MSU-PID bounds: small ≤ 12², medium ≤ 24².
    pub fn msu() -> Self {
        SizeThresholds {
            small_max: 144,
            medium_max: 576,
        }
    }

    /// KOMATSUNA bounds: small ≤ 35², medium ≤ 56².
    pub fn komatsuna() -> Self {
        SizeThresholds {
            small_max: 1225,
            medium_max: 3136,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeCategory {
    Small,
    Medium,
    Large,
}

impl SizeCategory {
    pub const ALL: [SizeCategory; 3] =
        [SizeCategory::Small, SizeCategory::Medium, SizeCategory::Large];

    pub fn of_area(area: usize, t: &SizeThresholds) -> Self {
        if area <= t.small_max {
            SizeCategory::Small
        } else if area <= t.medium_max {
            SizeCategory::Medium
        } else {
            SizeCategory::Large
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SizeCategory::Small => "small",
            SizeCategory::Medium => "medium",
            SizeCategory::Large => "large",
        }
    }
}

/// Splits a mask set by visible area into (small, medium, large).
pub fn size_partition(
    gt: &[InstancePixelSet],
    t: &SizeThresholds,
) -> (
    Vec<InstancePixelSet>,
    Vec<InstancePixelSet>,
    Vec<InstancePixelSet>,
) {
    let mut small = Vec::new();
    let mut medium = Vec::new();
    let mut large = Vec::new();
    for s in gt {
        match SizeCategory::of_area(s.len(), t) {
            SizeCategory::Small => small.push(s.clone()),
            SizeCategory::Medium => medium.push(s.clone()),
            SizeCategory::Large => large.push(s.clone()),
        }
    }
    (small, medium, large)
}

/// One evaluation unit: a named image with its predicted and reference masks.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub name: String,
    pub predictions: Vec<InstancePixelSet>,
    pub ground_truth: Vec<InstancePixelSet>,
}

impl EvalCase {
    /// Builds a case from label maps (predictions flattened to hard masks).
    pub fn from_maps(name: impl Into<String>, pred: &LabelMap, gt: &LabelMap) -> Self {
        EvalCase {
            name: name.into(),
            predictions: pred.instances(),
            ground_truth: gt.instances(),
        }
    }

    /// Builds a case from a soft prediction stack thresholded at 0.5.
    pub fn from_stack(name: impl Into<String>, pred: &SoftMaskStack, gt: &LabelMap) -> Self {
        EvalCase {
            name: name.into(),
            predictions: pred.to_instance_sets(0.5),
            ground_truth: gt.instances(),
        }
    }
}

/// Per-image scores, or the reason they are undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome {
    Scores { bd: f64, sbd: f64, dic: usize },
    Undefined { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub image: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

/// Means over the images whose metrics are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_bd: Option<f64>,
    pub mean_sbd: Option<f64>,
    pub mean_dic: Option<f64>,
    pub scored: usize,
    pub undefined: usize,
}

impl Aggregate {
    fn from_results(results: &[ImageResult]) -> Self {
        let mut bd_sum = 0.0;
        let mut sbd_sum = 0.0;
        let mut dic_sum = 0.0;
        let mut scored = 0usize;
        for r in results {
            if let Outcome::Scores { bd, sbd, dic } = r.outcome {
                bd_sum += bd;
                sbd_sum += sbd;
                dic_sum += dic as f64;
                scored += 1;
            }
        }
        let mean = |sum: f64| (scored > 0).then(|| sum / scored as f64);
        Aggregate {
            mean_bd: mean(bd_sum),
            mean_sbd: mean(sbd_sum),
            mean_dic: mean(dic_sum),
            scored,
            undefined: results.len() - scored,
        }
    }

    /// The one-line summary the CLI prints ("-" for undefined means).
    pub fn summary_line(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.2}"),
            None => "-".into(),
        };
        format!(
            "BD={} SBD={} DiC={}",
            fmt(self.mean_bd),
            fmt(self.mean_sbd),
            fmt(self.mean_dic)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryReport {
    pub category: String,
    pub per_image: Vec<ImageResult>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_image: Vec<ImageResult>,
    pub aggregate: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<CategoryReport>>,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: "<report>".into(),
            message: e.to_string(),
        })
    }

    /// Renders `image,bd,sbd,dic[,category]` rows; the category column only
    /// appears for stratified reports ("all" marks the unrestricted rows).
    /// Undefined images keep their row with empty score fields.
    pub fn to_csv(&self) -> String {
        let with_category = self.categories.is_some();
        let mut out = String::from(if with_category {
            "image,bd,sbd,dic,category\n"
        } else {
            "image,bd,sbd,dic\n"
        });
        let mut push_row = |image: &str, outcome: &Outcome, category: Option<&str>| {
            let (bd, sbd, dic) = match outcome {
                Outcome::Scores { bd, sbd, dic } => {
                    (format!("{bd}"), format!("{sbd}"), format!("{dic}"))
                }
                Outcome::Undefined { .. } => (String::new(), String::new(), String::new()),
            };
            match category {
                Some(c) => out.push_str(&format!("{image},{bd},{sbd},{dic},{c}\n")),
                None => out.push_str(&format!("{image},{bd},{sbd},{dic}\n")),
            }
        };
        for r in &self.per_image {
            push_row(&r.image, &r.outcome, with_category.then_some("all"));
        }
        if let Some(cats) = &self.categories {
            for cat in cats {
                for r in &cat.per_image {
                    push_row(&r.image, &r.outcome, Some(&cat.category));
                }
            }
        }
        out
    }
}

fn score_pair(pred: &[InstancePixelSet], gt: &[InstancePixelSet]) -> Outcome {
    if gt.is_empty() {
        return Outcome::Undefined {
            reason: "empty ground-truth set".into(),
        };
    }
    if pred.is_empty() {
        return Outcome::Undefined {
            reason: "empty prediction set".into(),
        };
    }
    let bd = best_dice(pred, gt).expect("both sets non-empty");
    let sbd_score = sbd(pred, gt).expect("both sets non-empty");
    Outcome::Scores {
        bd,
        sbd: sbd_score,
        dic: dic(pred, gt),
    }
}

/// Index of the ground-truth mask each prediction matches best (highest
/// Dice, ties to the lowest index). `None` only when `gt` is empty.
fn best_match_index(pred: &InstancePixelSet, gt: &[InstancePixelSet]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, g) in gt.iter().enumerate() {
        let d = dice(pred, g);
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((j, d));
        }
    }
    best.map(|(j, _)| j)
}

/// Evaluates every case, optionally stratified by ground-truth leaf size.
///
/// Stratification restricts the ground truth to one category at a time and
/// matches each prediction against the category of its best-matching GT leaf
/// (ties to the lowest GT index). Per-image undefined outcomes never abort
/// the batch.
pub fn evaluate_dataset(
    cases: &[EvalCase],
    thresholds: Option<&SizeThresholds>,
) -> MetricsReport {
    struct CaseEval {
        overall: ImageResult,
        per_cat: Option<[ImageResult; 3]>,
    }

    let evals: Vec<CaseEval> = cases
        .par_iter()
        .map(|case| {
            let overall = ImageResult {
                image: case.name.clone(),
                outcome: score_pair(&case.predictions, &case.ground_truth),
            };
            let per_cat = thresholds.map(|t| {
                let mut gt_by_cat: [Vec<InstancePixelSet>; 3] = Default::default();
                for g in &case.ground_truth {
                    let c = SizeCategory::of_area(g.len(), t);
                    gt_by_cat[c as usize].push(g.clone());
                }
                let mut pred_by_cat: [Vec<InstancePixelSet>; 3] = Default::default();
                for p in &case.predictions {
                    if let Some(j) = best_match_index(p, &case.ground_truth) {
                        let c = SizeCategory::of_area(case.ground_truth[j].len(), t);
                        pred_by_cat[c as usize].push(p.clone());
                    }
                }
                SizeCategory::ALL.map(|c| ImageResult {
                    image: case.name.clone(),
                    outcome: score_pair(&pred_by_cat[c as usize], &gt_by_cat[c as usize]),
                })
            });
            CaseEval { overall, per_cat }
        })
        .collect();

    let per_image: Vec<ImageResult> = evals.iter().map(|e| e.overall.clone()).collect();
    let aggregate = Aggregate::from_results(&per_image);
    let categories = thresholds.map(|_| {
        SizeCategory::ALL
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let rows: Vec<ImageResult> = evals
                    .iter()
                    .map(|e| e.per_cat.as_ref().expect("thresholds given")[k].clone())
                    .collect();
                let aggregate = Aggregate::from_results(&rows);
                CategoryReport {
                    category: c.label().into(),
                    per_image: rows,
                    aggregate,
                }
            })
            .collect()
    });

    MetricsReport {
        per_image,
        aggregate,
        categories,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn set(id: u32, pixels: &[(u32, u32)]) -> InstancePixelSet {
        InstancePixelSet::new(id, pixels.to_vec()).unwrap()
    }

    #[test]
    fn dice_trivial_cases() {
        let a = set(1, &[(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert_eq!(dice(&a, &a), 1.0);

        let b = set(2, &[(5, 5), (6, 5)]);
        assert_eq!(dice(&a, &b), 0.0);

        let c = set(3, &[(0, 0), (1, 0), (9, 9), (8, 9)]);
        assert_eq!(dice(&a, &c), 0.5);
    }

    #[test]
    fn best_dice_self_match_is_perfect() {
        let masks = vec![
            set(1, &[(0, 0), (1, 0)]),
            set(2, &[(3, 3)]),
            set(3, &[(5, 5), (5, 6), (6, 6)]),
        ];
        assert_eq!(best_dice(&masks, &masks).unwrap(), 100.0);
    }

    #[test]
    fn best_dice_direction_hides_undersegmentation() {
        // one perfect predicted mask vs three ground-truth leaves
        let gt = vec![
            set(1, &[(0, 0), (1, 0)]),
            set(2, &[(4, 0), (5, 0)]),
            set(3, &[(8, 0), (9, 0)]),
        ];
        let pred = vec![gt[0].clone()];
        assert_eq!(best_dice(&pred, &gt).unwrap(), 100.0);
        let back = best_dice(&gt, &pred).unwrap();
        assert_relative_eq!(back, 100.0 / 3.0, epsilon = 1e-9);
        let s = sbd(&pred, &gt).unwrap();
        assert!((s - 33.33).abs() < 0.01);
    }

    #[test]
    fn best_dice_empty_conventions() {
        let masks = vec![set(1, &[(0, 0)])];
        assert_eq!(best_dice(&masks, &[]).unwrap(), 0.0);
        assert!(matches!(
            best_dice(&[], &masks),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(sbd(&[], &masks).is_err());
        assert!(sbd(&masks, &[]).is_err());
    }

    fn random_mask_sets(seed: u64) -> (Vec<InstancePixelSet>, Vec<InstancePixelSet>) {
        let mut rng = Rng::seeded(seed);
        let mut make = |count: usize, id0: u32| -> Vec<InstancePixelSet> {
            (0..count)
                .map(|k| {
                    let n = rng.range_inclusive(1, 12) as usize;
                    let mut pixels = HashSet::new();
                    while pixels.len() < n {
                        pixels.insert((rng.below(16) as u32, rng.below(16) as u32));
                    }
                    InstancePixelSet::new(id0 + k as u32, pixels.into_iter().collect()).unwrap()
                })
                .collect()
        };
        (make(3, 1), make(4, 10))
    }

    #[test]
    fn best_dice_matches_exhaustive_oracle() {
        for seed in 0..20 {
            let (ya, yb) = random_mask_sets(seed);
            let oracle = {
                let mut sum = 0.0;
                for a in &ya {
                    let sa: HashSet<_> = a.pixels().iter().copied().collect();
                    let mut best = 0.0f64;
                    for b in &yb {
                        let sb: HashSet<_> = b.pixels().iter().copied().collect();
                        let inter = sa.intersection(&sb).count();
                        best = best.max(2.0 * inter as f64 / (sa.len() + sb.len()) as f64);
                    }
                    sum += best;
                }
                100.0 * (sum / ya.len() as f64)
            };
            assert_eq!(best_dice(&ya, &yb).unwrap(), oracle, "seed {seed}");
        }
    }

    #[test]
    fn dic_counts() {
        let (ya, yb) = random_mask_sets(1);
        assert_eq!(dic(&ya, &ya), 0);
        assert_eq!(dic(&ya, &yb), 1);
    }

    #[test]
    fn size_partition_presets_and_bounds() {
        let t = SizeThresholds::msu();
        assert_eq!((t.small_max, t.medium_max), (144, 576));
        let tk = SizeThresholds::komatsuna();
        assert_eq!((tk.small_max, tk.medium_max), (1225, 3136));

        // exactly 144 pixels: still small (closed upper bound)
        let exact: Vec<(u32, u32)> = (0..144).map(|k| (k % 16, k / 16)).collect();
        let leaf = InstancePixelSet::new(1, exact).unwrap();
        assert_eq!(SizeCategory::of_area(leaf.len(), &t), SizeCategory::Small);
        assert_eq!(SizeCategory::of_area(145, &t), SizeCategory::Medium);
        assert_eq!(SizeCategory::of_area(576, &t), SizeCategory::Medium);
        assert_eq!(SizeCategory::of_area(577, &t), SizeCategory::Large);

        let medium: Vec<(u32, u32)> = (0..200).map(|k| (k % 20, k / 20)).collect();
        let large: Vec<(u32, u32)> = (0..600).map(|k| (k % 30, k / 30)).collect();
        let sets = vec![
            leaf,
            InstancePixelSet::new(2, medium).unwrap(),
            InstancePixelSet::new(3, large).unwrap(),
        ];
        let (s, m, l) = size_partition(&sets, &t);
        assert_eq!((s.len(), m.len(), l.len()), (1, 1, 1));
    }

    #[test]
    fn thresholds_validate() {
        assert!(SizeThresholds::new(0, 5).is_err());
        assert!(SizeThresholds::new(5, 5).is_err());
        assert!(SizeThresholds::new(5, 6).is_ok());
    }

    #[test]
    fn perfect_dataset_aggregates_to_perfect_scores() {
        let mut cases = Vec::new();
        for seed in 0..4 {
            let (gt, _) = random_mask_sets(seed);
            cases.push(EvalCase {
                name: format!("img{seed}"),
                predictions: gt.clone(),
                ground_truth: gt,
            });
        }
        let report = evaluate_dataset(&cases, None);
        assert_eq!(report.aggregate.mean_bd, Some(100.0));
        assert_eq!(report.aggregate.mean_sbd, Some(100.0));
        assert_eq!(report.aggregate.mean_dic, Some(0.0));
        assert_eq!(report.aggregate.summary_line(), "BD=100.00 SBD=100.00 DiC=0.00");
    }

    #[test]
    fn empty_prediction_is_flagged_not_scored() {
        let (gt, _) = random_mask_sets(5);
        let cases = vec![
            EvalCase {
                name: "good".into(),
                predictions: gt.clone(),
                ground_truth: gt.clone(),
            },
            EvalCase {
                name: "empty".into(),
                predictions: vec![],
                ground_truth: gt,
            },
        ];
        let report = evaluate_dataset(&cases, None);
        assert_eq!(report.aggregate.scored, 1);
        assert_eq!(report.aggregate.undefined, 1);
        assert_eq!(report.aggregate.mean_bd, Some(100.0));
        assert!(matches!(
            report.per_image[1].outcome,
            Outcome::Undefined { .. }
        ));
    }

    #[test]
    fn aggregates_equal_mean_of_per_image_oracles() {
        let mut cases = Vec::new();
        for seed in 10..20 {
            let (pred, gt) = random_mask_sets(seed);
            cases.push(EvalCase {
                name: format!("img{seed}"),
                predictions: pred,
                ground_truth: gt,
            });
        }
        let report = evaluate_dataset(&cases, None);
        let mut bd_sum = 0.0;
        let mut sbd_sum = 0.0;
        let mut dic_sum = 0.0;
        for c in &cases {
            bd_sum += best_dice(&c.predictions, &c.ground_truth).unwrap();
            sbd_sum += sbd(&c.predictions, &c.ground_truth).unwrap();
            dic_sum += dic(&c.predictions, &c.ground_truth) as f64;
        }
        assert_relative_eq!(report.aggregate.mean_bd.unwrap(), bd_sum / 10.0, epsilon = 1e-12);
        assert_relative_eq!(report.aggregate.mean_sbd.unwrap(), sbd_sum / 10.0, epsilon = 1e-12);
        assert_relative_eq!(report.aggregate.mean_dic.unwrap(), dic_sum / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn stratified_report_assigns_predictions_by_best_match() {
        let t = SizeThresholds::new(4, 16).unwrap();
        // gt: one small leaf (3 px), one large leaf (25 px)
        let small: Vec<(u32, u32)> = vec![(0, 0), (1, 0), (0, 1)];
        let large: Vec<(u32, u32)> = (0..25).map(|k| (10 + k % 5, 10 + k / 5)).collect();
        let gt = vec![
            InstancePixelSet::new(1, small.clone()).unwrap(),
            InstancePixelSet::new(2, large.clone()).unwrap(),
        ];
        // predictions overlap each gt leaf but with off-category sizes, so
        // assignment must follow the match, not the prediction's own area
        let pred = vec![
            InstancePixelSet::new(1, vec![(0, 0), (1, 0)]).unwrap(),
            InstancePixelSet::new(2, large[..20].to_vec()).unwrap(),
        ];
        let report = evaluate_dataset(
            &[EvalCase {
                name: "img".into(),
                predictions: pred,
                ground_truth: gt,
            }],
            Some(&t),
        );
        let cats = report.categories.as_ref().unwrap();
        assert_eq!(cats.len(), 3);
        assert_eq!(cats[0].category, "small");
        assert_eq!(cats[0].aggregate.scored, 1);
        assert_eq!(cats[1].aggregate.scored, 0); // no medium leaves anywhere
        assert_eq!(cats[2].aggregate.scored, 1);
        match cats[2].per_image[0].outcome {
            Outcome::Scores { dic, .. } => assert_eq!(dic, 0),
            ref other => panic!("unexpected outcome {other:?}"),
        }
    }

    #[test]
    fn csv_shape_with_and_without_categories() {
        let (gt, _) = random_mask_sets(30);
        let case = EvalCase {
            name: "img0".into(),
            predictions: gt.clone(),
            ground_truth: gt,
        };
        let plain = evaluate_dataset(std::slice::from_ref(&case), None);
        let csv = plain.to_csv();
        assert!(csv.starts_with("image,bd,sbd,dic\n"));
        assert!(csv.contains("img0,100,100,0\n"));

        let t = SizeThresholds::msu();
        let strat = evaluate_dataset(&[case], Some(&t));
        let csv = strat.to_csv();
        assert!(csv.starts_with("image,bd,sbd,dic,category\n"));
        assert!(csv.contains("img0,100,100,0,all\n"));
        assert!(csv.contains(",small\n") || csv.contains(",medium\n") || csv.contains(",large\n"));
    }

    #[test]
    fn report_json_roundtrip() {
        let (pred, gt) = random_mask_sets(31);
        let report = evaluate_dataset(
            &[EvalCase {
                name: "x".into(),
                predictions: pred,
                ground_truth: gt,
            }],
            Some(&SizeThresholds::msu()),
        );
        let json = report.to_json().unwrap();
        let back: MetricsReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    proptest! {
        #[test]
        fn sbd_is_symmetric(seed in 0u64..200) {
            let (a, b) = random_mask_sets(seed);
            prop_assert_eq!(sbd(&a, &b).unwrap(), sbd(&b, &a).unwrap());
        }

        #[test]
        fn metrics_ignore_mask_order_and_ids(seed in 0u64..100) {
            // reversal permutes summand order, so equality only holds to
            // rounding (f64 addition is not associative)
            let (pred, gt) = random_mask_sets(seed);
            let mut shuffled: Vec<InstancePixelSet> = pred
                .iter()
                .map(|s| InstancePixelSet::new(s.id + 100, s.pixels().to_vec()).unwrap())
                .collect();
            shuffled.reverse();
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
            prop_assert!(close(
                best_dice(&pred, &gt).unwrap(),
                best_dice(&shuffled, &gt).unwrap()
            ));
            prop_assert!(close(sbd(&pred, &gt).unwrap(), sbd(&shuffled, &gt).unwrap()));
        }

        #[test]
        fn removing_matched_mask_never_raises_sbd(seed in 0u64..100, drop in 0usize..3) {
            let (gt, _) = random_mask_sets(seed);
            let full = sbd(&gt, &gt).unwrap();
            let mut pred = gt.clone();
            pred.remove(drop.min(pred.len() - 1));
            if !pred.is_empty() {
                prop_assert!(sbd(&pred, &gt).unwrap() <= full);
            }
        }

        #[test]
        fn sbd_never_exceeds_directional_bds(seed in 100u64..200) {
            let (pred, gt) = random_mask_sets(seed);
            let s = sbd(&pred, &gt).unwrap();
            prop_assert!(s <= best_dice(&pred, &gt).unwrap());
            prop_assert!(s <= best_dice(&gt, &pred).unwrap());
        }
    }
}
