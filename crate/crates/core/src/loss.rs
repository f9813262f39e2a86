//! Box-point loss with its sigmoid containment kernel, the guided-attention
//! BCE loss, and the smooth-L1 / IoU reference losses.

use thiserror::Error;

use crate::attention::FeatureGrid;
use crate::geometry::{contains_exact, edge_triangle_areas, rotated_iou, OrientedBox, Point2};

/// Clamp applied to attention features before taking logs.
pub const BCE_EPS: f64 = 1e-7;

pub const DEFAULT_K: f64 = 10.0;

pub const DEFAULT_POINTS_PER_BOX: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("kernel sharpness k must be finite and positive, got {0}")]
    InvalidSharpness(f64),
    #[error("box-point set is empty")]
    EmptyPointSet,
    #[error("box-point {0} has a non-finite coordinate")]
    NonFinitePoint(usize),
    #[error("feature grid is {features:?} but mask is {mask:?}")]
    ShapeMismatch {
        features: (usize, usize),
        mask: (usize, usize),
    },
    #[error("mask cell {0} is {1}, expected 0 or 1")]
    NonBinaryMask(usize, f64),
    #[error("feature cell {0} is not finite")]
    NonFiniteFeature(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    k: f64,
}

impl KernelConfig {
    pub fn new(k: f64) -> Result<Self, LossError> {
        if !k.is_finite() || k <= 0.0 {
            return Err(LossError::InvalidSharpness(k));
        }
        Ok(Self { k })
    }

    pub fn k(&self) -> f64 {
        self.k
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K }
    }
}

/// The predicted points scored against one target box.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxPointSet {
    points: Vec<Point2>,
}

impl BoxPointSet {
    pub fn new(points: Vec<Point2>) -> Result<Self, LossError> {
        if points.is_empty() {
            return Err(LossError::EmptyPointSet);
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(LossError::NonFinitePoint(i));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point2> {
        self.points
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Exponent `(Σ triangle areas − area) / area`, pinned to 0 on the closed box.
fn kernel_exponent(p: Point2, target: &OrientedBox) -> f64 {
    if contains_exact(p, target) {
        return 0.0;
    }
    let sum: f64 = edge_triangle_areas(p, target).iter().sum();
    ((sum - target.area()) / target.area()).max(0.0)
}

/// Smooth containment score `2 / (1 + exp(k·excess))`.
///
/// Exactly 1 on the closed box and decays towards 0 with the relative
/// triangle-area excess outside it.
pub fn soft_contains(p: Point2, target: &OrientedBox, cfg: KernelConfig) -> f64 {
    let e = kernel_exponent(p, target);
    if e == 0.0 {
        return 1.0;
    }
    2.0 * logistic(-cfg.k * e)
}

/// Analytic gradient of [`soft_contains`] with respect to `p`.
///
/// Zero on the closed box. An edge whose supporting line passes exactly
/// through `p` contributes nothing (the subgradient of `|cross|` at 0).
pub fn soft_contains_grad(p: Point2, target: &OrientedBox, cfg: KernelConfig) -> Point2 {
    let e = kernel_exponent(p, target);
    if e == 0.0 {
        return Point2::default();
    }
    let ke = cfg.k * e;
    let dsoft_de = -2.0 * cfg.k * logistic(ke) * logistic(-ke);

    // dΣ/dp = ½ Σ sign(cross_i) · (−dy_i, dx_i)
    let mut dsum = Point2::default();
    for (a, b) in target.edges() {
        let d = b - a;
        let cross = d.cross(p - a);
        let sign = if cross > 0.0 {
            1.0
        } else if cross < 0.0 {
            -1.0
        } else {
            0.0
        };
        dsum = dsum + Point2::new(-d.y, d.x).scale(0.5 * sign);
    }
    dsum.scale(dsoft_de / target.area())
}

/// `1 − mean(soft_contains)` over the point set.
pub fn bp_loss(points: &BoxPointSet, target: &OrientedBox, cfg: KernelConfig) -> f64 {
    let total: f64 = points.points().iter().map(|&p| soft_contains(p, target, cfg)).sum();
    1.0 - total / points.len() as f64
}

/// Per-point gradient of [`bp_loss`].
pub fn bp_loss_grad(points: &BoxPointSet, target: &OrientedBox, cfg: KernelConfig) -> Vec<Point2> {
    let scale = -1.0 / points.len() as f64;
    points
        .points()
        .iter()
        .map(|&p| soft_contains_grad(p, target, cfg).scale(scale))
        .collect()
}

/// Mean binary cross-entropy between attention features and a binary mask.
///
/// Features are clamped to `[BCE_EPS, 1 − BCE_EPS]` before the logs.
pub fn ga_loss(features: &FeatureGrid, mask: &FeatureGrid) -> Result<f64, LossError> {
    if features.shape() != mask.shape() {
        return Err(LossError::ShapeMismatch {
            features: features.shape(),
            mask: mask.shape(),
        });
    }
    let mut acc = 0.0;
    for (i, (&x, &y)) in features.data().iter().zip(mask.data()).enumerate() {
        if !x.is_finite() {
            return Err(LossError::NonFiniteFeature(i));
        }
        if y != 0.0 && y != 1.0 {
            return Err(LossError::NonBinaryMask(i, y));
        }
        let x = x.clamp(BCE_EPS, 1.0 - BCE_EPS);
        acc += y * x.ln() + (1.0 - y) * (1.0 - x).ln();
    }
    Ok(-acc / features.len() as f64)
}

pub fn smooth_l1(x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    if d < 1.0 {
        0.5 * d * d
    } else {
        d - 0.5
    }
}

pub fn iou_loss(a: &OrientedBox, b: &OrientedBox) -> f64 {
    1.0 - rotated_iou(a, b)
}
