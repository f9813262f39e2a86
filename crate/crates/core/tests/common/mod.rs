//! Independent oracles and random generators shared by the integration
//! suites. Nothing here goes through the code path it is used to check.

#![allow(dead_code)]

use std::f64::consts::TAU;

use apn_core::eval::{DetectionRecord, GroundTruthRecord};
use apn_core::geometry::{BoxParams, OrientedBox, Point2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_params(rng: &mut ChaCha8Rng, side: (f64, f64)) -> BoxParams {
    BoxParams::new(
        rng.gen_range(-100.0..100.0),
        rng.gen_range(-100.0..100.0),
        rng.gen_range(side.0..side.1),
        rng.gen_range(side.0..side.1),
        rng.gen_range(0.0..TAU),
    )
    .unwrap()
}

/// Coordinates of `p` in the rectangle's own frame (center origin, x along w).
pub fn to_local(p: Point2, b: &BoxParams) -> (f64, f64) {
    let (s, c) = b.theta.sin_cos();
    let (dx, dy) = (p.x - b.cx, p.y - b.cy);
    (c * dx + s * dy, -s * dx + c * dy)
}

pub fn from_local(lx: f64, ly: f64, b: &BoxParams) -> Point2 {
    let (s, c) = b.theta.sin_cos();
    Point2::new(b.cx + c * lx - s * ly, b.cy + s * lx + c * ly)
}

/// Four half-plane tests in the rectangle frame.
pub fn inside_rect(p: Point2, b: &BoxParams) -> bool {
    let (lx, ly) = to_local(p, b);
    lx.abs() <= b.w / 2.0 && ly.abs() <= b.h / 2.0
}

/// `(Σ triangle areas − area) / area` for a rectangle: each edge the point
/// lies beyond adds `edge length × distance` to the triangle sum.
pub fn rect_relative_excess(p: Point2, b: &BoxParams) -> f64 {
    let (lx, ly) = to_local(p, b);
    let dx = (lx.abs() - b.w / 2.0).max(0.0);
    let dy = (ly.abs() - b.h / 2.0).max(0.0);
    (b.h * dx + b.w * dy) / (b.w * b.h)
}

/// Distance from `p` to the nearest of the four supporting edge lines.
pub fn rect_edge_line_distance(p: Point2, b: &BoxParams) -> f64 {
    let (lx, ly) = to_local(p, b);
    (lx.abs() - b.w / 2.0).abs().min((ly.abs() - b.h / 2.0).abs())
}

pub fn kernel_closed_form(excess: f64, k: f64) -> f64 {
    2.0 / (1.0 + (k * excess).exp())
}

/// Cumulative precision/recall from TP flags in rank order.
pub fn oracle_pr(tp_flags: &[bool], num_gt: usize) -> Vec<(f64, f64)> {
    let mut tp = 0;
    tp_flags
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            if t {
                tp += 1;
            }
            (tp as f64 / num_gt as f64, tp as f64 / (i + 1) as f64)
        })
        .collect()
}

pub fn oracle_ap07(pr: &[(f64, f64)]) -> f64 {
    (0..=10)
        .map(|i| {
            let r = i as f64 * 0.1;
            pr.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

/// Integral of `max precision at recall ≥ r` over `r ∈ [0, 1]`, evaluated
/// piecewise between consecutive distinct recalls.
pub fn oracle_ap12(pr: &[(f64, f64)]) -> f64 {
    let mut recalls: Vec<f64> = pr.iter().map(|p| p.0).collect();
    recalls.push(0.0);
    recalls.sort_by(f64::total_cmp);
    recalls.dedup();
    let mut ap = 0.0;
    for w in recalls.windows(2) {
        let best = pr.iter().filter(|p| p.0 >= w[1]).map(|p| p.1).fold(0.0, f64::max);
        ap += (w[1] - w[0]) * best;
    }
    ap
}

/// Every partial one-to-one assignment of ranked detections to ground truths
/// they overlap at `iou ≥ threshold` (same image). Returns the TP pattern of
/// the best one: highest VOC12 AP, then lexicographically greatest pattern.
pub fn brute_force_best_flags(
    ranked: &[&DetectionRecord],
    gts: &[&GroundTruthRecord],
    threshold: f64,
    iou: impl Fn(&OrientedBox, &OrientedBox) -> f64,
) -> Vec<bool> {
    let num_gt = gts.len();
    let eligible: Vec<Vec<usize>> = ranked
        .iter()
        .map(|d| {
            (0..gts.len())
                .filter(|&g| gts[g].image_id == d.image_id && iou(&d.bbox, &gts[g].bbox) >= threshold)
                .collect()
        })
        .collect();

    let mut best: Option<(f64, Vec<bool>)> = None;
    let mut used = vec![false; gts.len()];
    let mut flags = vec![false; ranked.len()];

    fn recurse(
        i: usize,
        eligible: &[Vec<usize>],
        used: &mut [bool],
        flags: &mut [bool],
        num_gt: usize,
        best: &mut Option<(f64, Vec<bool>)>,
    ) {
        if i == flags.len() {
            let ap = if num_gt == 0 {
                0.0
            } else {
                oracle_ap12(&oracle_pr(flags, num_gt))
            };
            let better = match best {
                None => true,
                Some((b_ap, b_flags)) => {
                    ap > *b_ap + 1e-15 || ((ap - *b_ap).abs() <= 1e-15 && flags.iter().gt(b_flags.iter()))
                }
            };
            if better {
                *best = Some((ap, flags.to_vec()));
            }
            return;
        }
        flags[i] = false;
        recurse(i + 1, eligible, used, flags, num_gt, best);
        for &g in &eligible[i] {
            if !used[g] {
                used[g] = true;
                flags[i] = true;
                recurse(i + 1, eligible, used, flags, num_gt, best);
                flags[i] = false;
                used[g] = false;
            }
        }
    }

    recurse(0, &eligible, &mut used, &mut flags, num_gt, &mut best);
    best.map(|b| b.1).unwrap_or_default()
}

/// Up to 3 images and 2 classes, ground truths spaced 100 px apart so that
/// a detection can overlap at most one of them, and at most 4 detections.
pub fn micro_dataset(rng: &mut ChaCha8Rng) -> (Vec<GroundTruthRecord>, Vec<DetectionRecord>) {
    const CLASSES: [&str; 2] = ["plane", "ship"];
    let n_images = rng.gen_range(1..=3);
    let mut gts = Vec::new();
    let mut slot = 0;
    for img in 0..n_images {
        for class in CLASSES {
            for _ in 0..rng.gen_range(0..=2) {
                let params = BoxParams::new(
                    100.0 * slot as f64,
                    0.0,
                    rng.gen_range(5.0..20.0),
                    rng.gen_range(5.0..20.0),
                    rng.gen_range(0.0..TAU),
                )
                .unwrap();
                slot += 1;
                let b = OrientedBox::from_params(params).unwrap();
                gts.push(GroundTruthRecord::new(format!("img{img}"), class, b, false).unwrap());
            }
        }
    }
    if gts.is_empty() {
        let b = OrientedBox::axis_aligned(0.0, 0.0, 10.0, 10.0).unwrap();
        gts.push(GroundTruthRecord::new("img0", "plane", b, false).unwrap());
    }

    let n_dets = rng.gen_range(0..=4);
    let mut dets = Vec::new();
    for _ in 0..n_dets {
        let score = rng.gen_range(0.0..1.0);
        let (image, class, b) = if rng.gen_bool(0.75) {
            let g = &gts[rng.gen_range(0..gts.len())];
            let class = if rng.gen_bool(0.8) {
                g.class_id.clone()
            } else {
                CLASSES[rng.gen_range(0..2)].to_string()
            };
            let jitter = rng.gen_range(0.0..6.0);
            let angle = rng.gen_range(0.0..TAU);
            let b = g.bbox.translated(jitter * angle.cos(), jitter * angle.sin());
            (g.image_id.clone(), class, b)
        } else {
            let params = BoxParams::new(
                rng.gen_range(0.0..500.0),
                rng.gen_range(-50.0..50.0),
                rng.gen_range(5.0..20.0),
                rng.gen_range(5.0..20.0),
                rng.gen_range(0.0..TAU),
            )
            .unwrap();
            (
                format!("img{}", rng.gen_range(0..n_images)),
                CLASSES[rng.gen_range(0..2)].to_string(),
                OrientedBox::from_params(params).unwrap(),
            )
        };
        dets.push(DetectionRecord::new(image, class, b, score).unwrap());
    }
    (gts, dets)
}
