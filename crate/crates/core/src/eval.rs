//! Rotated-box detection scoring: greedy matching, precision/recall,
//! VOC07 (11-point) and VOC12 (all-point) average precision, and mAP.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::format::sig6;
use crate::geometry::{rotated_iou, OrientedBox};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("IoU threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("no IoU thresholds given")]
    NoThresholds,
    #[error("records from different classes passed to a single-class match: {0} and {1}")]
    MixedClasses(String, String),
    #[error("{0} true positives reported against zero ground truths")]
    InconsistentCounts(usize),
    #[error("no classes to average over")]
    NoClasses,
    #[error("empty {0} identifier")]
    EmptyIdentifier(&'static str),
    #[error("detection score {0} is not a number")]
    InvalidScore(f64),
    #[error("unknown metric `{0}` (expected voc07 or voc12)")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub image_id: String,
    pub class_id: String,
    pub bbox: OrientedBox,
    pub difficult: bool,
}

impl GroundTruthRecord {
    pub fn new(
        image_id: impl Into<String>,
        class_id: impl Into<String>,
        bbox: OrientedBox,
        difficult: bool,
    ) -> Result<Self, EvalError> {
        let (image_id, class_id) = (image_id.into(), class_id.into());
        check_ids(&image_id, &class_id)?;
        Ok(Self {
            image_id,
            class_id,
            bbox,
            difficult,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class_id: String,
    pub bbox: OrientedBox,
    score: f64,
}

impl DetectionRecord {
    /// Scores outside `[0, 1]` are clamped; NaN is rejected.
    pub fn new(
        image_id: impl Into<String>,
        class_id: impl Into<String>,
        bbox: OrientedBox,
        score: f64,
    ) -> Result<Self, EvalError> {
        let (image_id, class_id) = (image_id.into(), class_id.into());
        check_ids(&image_id, &class_id)?;
        if score.is_nan() {
            return Err(EvalError::InvalidScore(score));
        }
        Ok(Self {
            image_id,
            class_id,
            bbox,
            score: score.clamp(0.0, 1.0),
        })
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

fn check_ids(image_id: &str, class_id: &str) -> Result<(), EvalError> {
    if image_id.is_empty() {
        return Err(EvalError::EmptyIdentifier("image"));
    }
    if class_id.is_empty() {
        return Err(EvalError::EmptyIdentifier("class"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchOutcome {
    TruePositive,
    FalsePositive,
    /// Matched a difficult ground truth; counts as neither TP nor FP.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedMatch {
    /// Index into the detection slice passed to [`match_detections`].
    pub detection: usize,
    pub outcome: MatchOutcome,
}

/// Detection indices by descending score; ties keep input order.
pub fn rank_detections(dets: &[DetectionRecord]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

fn check_threshold(t: f64) -> Result<(), EvalError> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(EvalError::InvalidThreshold(t))
    }
}

/// Greedy single-class matching in descending score order.
///
/// Each detection takes the highest-IoU candidate among the still unmatched
/// non-difficult ground truths and all difficult ones in its image. It is a
/// TP when that IoU reaches `iou_threshold` and the candidate is not
/// difficult, `Ignored` when the candidate is difficult, and FP otherwise.
/// Equal IoUs resolve to the earlier ground truth.
pub fn match_detections(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    iou_threshold: f64,
) -> Result<Vec<RankedMatch>, EvalError> {
    check_threshold(iou_threshold)?;
    let class = dets
        .first()
        .map(|d| &d.class_id)
        .or_else(|| gts.first().map(|g| &g.class_id));
    if let Some(class) = class {
        let stray = dets
            .iter()
            .map(|d| &d.class_id)
            .chain(gts.iter().map(|g| &g.class_id))
            .find(|c| *c != class);
        if let Some(other) = stray {
            return Err(EvalError::MixedClasses(class.clone(), other.clone()));
        }
    }

    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, gt) in gts.iter().enumerate() {
        by_image.entry(gt.image_id.as_str()).or_default().push(i);
    }
    let mut matched = vec![false; gts.len()];

    let mut out = Vec::with_capacity(dets.len());
    for det_idx in rank_detections(dets) {
        let det = &dets[det_idx];
        let mut best: Option<(usize, f64)> = None;
        for &gi in by_image.get(det.image_id.as_str()).map_or(&[][..], Vec::as_slice) {
            let gt = &gts[gi];
            if matched[gi] && !gt.difficult {
                continue;
            }
            let iou = rotated_iou(&det.bbox, &gt.bbox);
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        let outcome = match best {
            Some((gi, iou)) if iou >= iou_threshold => {
                if gts[gi].difficult {
                    MatchOutcome::Ignored
                } else {
                    matched[gi] = true;
                    MatchOutcome::TruePositive
                }
            }
            _ => MatchOutcome::FalsePositive,
        };
        out.push(RankedMatch {
            detection: det_idx,
            outcome,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Cumulative (recall, precision) after each ranked TP/FP decision.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecisionRecallCurve {
    points: Vec<PrPoint>,
}

impl PrecisionRecallCurve {
    /// Accepts points with non-decreasing recall, all coordinates in `[0, 1]`.
    pub fn from_points(points: Vec<PrPoint>) -> Option<Self> {
        let in_range = |v: f64| (0.0..=1.0).contains(&v);
        let valid = points.iter().all(|p| in_range(p.recall) && in_range(p.precision))
            && points.windows(2).all(|w| w[0].recall <= w[1].recall);
        valid.then_some(Self { points })
    }

    pub fn points(&self) -> &[PrPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ignored decisions are skipped. With `num_gt == 0` recall is reported as 0.
pub fn pr_curve(flags: &[MatchOutcome], num_gt: usize) -> Result<PrecisionRecallCurve, EvalError> {
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = Vec::with_capacity(flags.len());
    for flag in flags {
        match flag {
            MatchOutcome::TruePositive => tp += 1,
            MatchOutcome::FalsePositive => fp += 1,
            MatchOutcome::Ignored => continue,
        }
        let recall = if num_gt == 0 { 0.0 } else { tp as f64 / num_gt as f64 };
        points.push(PrPoint {
            recall,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    if num_gt == 0 && tp > 0 {
        return Err(EvalError::InconsistentCounts(tp));
    }
    if tp > num_gt {
        return Err(EvalError::InconsistentCounts(tp));
    }
    Ok(PrecisionRecallCurve { points })
}

/// Eleven-point interpolated AP over recall levels `0.0, 0.1, …, 1.0`.
pub fn ap_voc07(curve: &PrecisionRecallCurve) -> f64 {
    let mut total = 0.0;
    for step in 0..=10 {
        let r = step as f64 / 10.0;
        let best = curve
            .points
            .iter()
            .filter(|p| p.recall >= r)
            .map(|p| p.precision)
            .fold(0.0, f64::max);
        total += best;
    }
    total / 11.0
}

/// Area under the monotone precision envelope (all-point interpolation).
pub fn ap_voc12(curve: &PrecisionRecallCurve) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    let mut recall = Vec::with_capacity(curve.points.len() + 2);
    let mut precision = Vec::with_capacity(curve.points.len() + 2);
    recall.push(0.0);
    precision.push(0.0);
    for p in &curve.points {
        recall.push(p.recall);
        precision.push(p.precision);
    }
    recall.push(1.0);
    precision.push(0.0);

    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    for i in 1..recall.len() {
        ap += (recall[i] - recall[i - 1]) * precision[i];
    }
    ap.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Voc07,
    Voc12,
}

impl Metric {
    pub fn average_precision(self, curve: &PrecisionRecallCurve) -> f64 {
        match self {
            Metric::Voc07 => ap_voc07(curve),
            Metric::Voc12 => ap_voc12(curve),
        }
    }
}

impl FromStr for Metric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "voc07" => Ok(Metric::Voc07),
            "voc12" => Ok(Metric::Voc12),
            _ => Err(EvalError::UnknownMetric(s.to_string())),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Voc07 => "voc07",
            Metric::Voc12 => "voc12",
        })
    }
}

pub fn mean_ap(per_class: &BTreeMap<String, f64>) -> Result<f64, EvalError> {
    if per_class.is_empty() {
        return Err(EvalError::NoClasses);
    }
    Ok(per_class.values().sum::<f64>() / per_class.len() as f64)
}

/// `0.50, 0.55, …, 0.95`.
pub fn iou_range_50_95() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub class_id: String,
    /// Non-difficult ground truths.
    pub num_gt: usize,
    pub num_detections: usize,
    /// AP at each threshold of [`EvalReport::thresholds`].
    pub ap: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: Metric,
    pub thresholds: Vec<f64>,
    pub classes: Vec<ClassReport>,
    /// mAP at each threshold.
    pub map: Vec<f64>,
    /// mAP averaged over all thresholds.
    pub map_mean: f64,
}

/// Scores detections against ground truth for every class that has at least
/// one non-difficult ground truth. Detections of other classes are ignored.
pub fn evaluate(
    dets: &[DetectionRecord],
    gts: &[GroundTruthRecord],
    iou_thresholds: &[f64],
    metric: Metric,
) -> Result<EvalReport, EvalError> {
    if iou_thresholds.is_empty() {
        return Err(EvalError::NoThresholds);
    }
    for &t in iou_thresholds {
        check_threshold(t)?;
    }

    let classes: BTreeSet<&str> = gts
        .iter()
        .filter(|g| !g.difficult)
        .map(|g| g.class_id.as_str())
        .collect();
    if classes.is_empty() {
        return Err(EvalError::NoClasses);
    }

    let mut class_dets: BTreeMap<&str, Vec<DetectionRecord>> = BTreeMap::new();
    let mut class_gts: BTreeMap<&str, Vec<GroundTruthRecord>> = BTreeMap::new();
    for d in dets.iter().filter(|d| classes.contains(d.class_id.as_str())) {
        class_dets.entry(d.class_id.as_str()).or_default().push(d.clone());
    }
    for g in gts.iter().filter(|g| classes.contains(g.class_id.as_str())) {
        class_gts.entry(g.class_id.as_str()).or_default().push(g.clone());
    }

    let jobs: Vec<(&str, usize)> = classes
        .iter()
        .flat_map(|&c| (0..iou_thresholds.len()).map(move |t| (c, t)))
        .collect();
    let empty: Vec<DetectionRecord> = Vec::new();
    let aps: Vec<f64> = jobs
        .par_iter()
        .map(|&(class, ti)| {
            let d = class_dets.get(class).unwrap_or(&empty);
            let g = &class_gts[class];
            let num_gt = g.iter().filter(|r| !r.difficult).count();
            let matches = match_detections(d, g, iou_thresholds[ti])?;
            let flags: Vec<MatchOutcome> = matches.iter().map(|m| m.outcome).collect();
            Ok(metric.average_precision(&pr_curve(&flags, num_gt)?))
        })
        .collect::<Result<_, EvalError>>()?;

    let n_t = iou_thresholds.len();
    let class_reports: Vec<ClassReport> = classes
        .iter()
        .enumerate()
        .map(|(ci, &c)| ClassReport {
            class_id: c.to_string(),
            num_gt: class_gts[c].iter().filter(|r| !r.difficult).count(),
            num_detections: class_dets.get(c).map_or(0, Vec::len),
            ap: aps[ci * n_t..(ci + 1) * n_t].to_vec(),
        })
        .collect();

    let map: Vec<f64> = (0..n_t)
        .map(|ti| {
            let per_class: BTreeMap<String, f64> =
                class_reports.iter().map(|c| (c.class_id.clone(), c.ap[ti])).collect();
            mean_ap(&per_class)
        })
        .collect::<Result<_, _>>()?;
    let map_mean = map.iter().sum::<f64>() / n_t as f64;

    Ok(EvalReport {
        metric,
        thresholds: iou_thresholds.to_vec(),
        classes: class_reports,
        map,
        map_mean,
    })
}

impl EvalReport {
    /// Human-readable table: one row per threshold, one column per class.
    pub fn to_text(&self) -> String {
        let width = self.classes.iter().map(|c| c.class_id.len()).max().unwrap_or(0).max(6);
        let mut out = format!("metric: {}\n", self.metric);
        out.push_str(&format!("{:<8} {:>w$}", "IoU", "mAP", w = width));
        for c in &self.classes {
            out.push_str(&format!(" {:>w$}", c.class_id, w = width));
        }
        out.push('\n');
        for (ti, t) in self.thresholds.iter().enumerate() {
            out.push_str(&format!("{:<8} {:>w$.4}", format!("{t:.2}"), self.map[ti], w = width));
            for c in &self.classes {
                out.push_str(&format!(" {:>w$.4}", c.ap[ti], w = width));
            }
            out.push('\n');
        }
        if self.thresholds.len() > 1 {
            out.push_str(&format!("mAP over thresholds: {:.4}\n", self.map_mean));
        }
        out
    }

    /// `key=value` lines with six significant digits.
    pub fn to_key_value(&self) -> String {
        let mut out = format!("metric={}\n", self.metric);
        let thresholds: Vec<String> = self.thresholds.iter().map(|t| sig6(*t)).collect();
        out.push_str(&format!("thresholds={}\n", thresholds.join(",")));
        for c in &self.classes {
            out.push_str(&format!("num_gt.{}={}\n", c.class_id, c.num_gt));
            out.push_str(&format!("num_det.{}={}\n", c.class_id, c.num_detections));
            for (ti, t) in thresholds.iter().enumerate() {
                out.push_str(&format!("ap.{}@{}={}\n", c.class_id, t, sig6(c.ap[ti])));
            }
        }
        for (ti, t) in thresholds.iter().enumerate() {
            out.push_str(&format!("map@{}={}\n", t, sig6(self.map[ti])));
        }
        out.push_str(&format!("map_mean={}\n", sig6(self.map_mean)));
        out
    }
}
