//! Gradient-descent demo: free box-points pulled into a target box by the
//! box-point loss alone.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::format::sig6;
use crate::geometry::{contains_exact, OrientedBox, Point2};
use crate::loss::{bp_loss, bp_loss_grad, BoxPointSet, KernelConfig, LossError, DEFAULT_K, DEFAULT_POINTS_PER_BOX};

/// Multiplicative step decay applied after every iteration.
pub const STEP_DECAY: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// How the loss gradient is turned into a point update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// Every point moves `step` along its own descent direction. Points with
    /// zero gradient (already inside) stay put.
    #[default]
    PerPointNormalized,
    /// `p ← p − step · ∇loss`.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub n_points: usize,
    pub k: f64,
    /// Initial step length; `None` means a tenth of the target diagonal.
    pub step_size: Option<f64>,
    pub max_iters: usize,
    pub seed: u64,
    /// Loss at or below which (with every point inside) the fit stops.
    pub tolerance: f64,
    pub step_rule: StepRule,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_POINTS_PER_BOX,
            k: DEFAULT_K,
            step_size: None,
            max_iters: 2000,
            seed: 42,
            tolerance: 0.05,
            step_rule: StepRule::default(),
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<(), FitError> {
        if self.n_points == 0 {
            return Err(FitError::InvalidConfig("n_points must be at least 1".into()));
        }
        if let Some(s) = self.step_size {
            if !s.is_finite() || s < 0.0 {
                return Err(FitError::InvalidConfig(format!(
                    "step size {s} must be finite and >= 0"
                )));
            }
        }
        if !self.tolerance.is_finite() || self.tolerance < 0.0 {
            return Err(FitError::InvalidConfig(format!(
                "tolerance {} must be finite and >= 0",
                self.tolerance
            )));
        }
        KernelConfig::new(self.k)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Loss at the start of each iteration.
    pub losses: Vec<f64>,
    pub initial_points: Vec<Point2>,
    pub final_points: Vec<Point2>,
    pub final_loss: f64,
    pub converged: bool,
}

impl FitTrace {
    /// `iteration,loss` CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            let _ = writeln!(out, "{i},{}", sig6(*l));
        }
        out
    }
}

/// Seeded points spread uniformly by area over the annulus between one and
/// three circumradii around the target center.
pub fn initial_points(target: &OrientedBox, n: usize, seed: u64) -> Vec<Point2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = target.center();
    let r = target.circumradius();
    let (inner2, outer2) = (r * r, 9.0 * r * r);
    (0..n)
        .map(|_| {
            let radius = (inner2 + rng.gen::<f64>() * (outer2 - inner2)).sqrt();
            let angle = rng.gen::<f64>() * TAU;
            center + Point2::new(radius * angle.cos(), radius * angle.sin())
        })
        .collect()
}

fn all_inside(points: &[Point2], target: &OrientedBox) -> bool {
    points.iter().all(|&p| contains_exact(p, target))
}

pub fn fit_points(target: &OrientedBox, cfg: &FitConfig) -> Result<FitTrace, FitError> {
    cfg.validate()?;
    let kernel = KernelConfig::new(cfg.k)?;
    let init = initial_points(target, cfg.n_points, cfg.seed);
    fit_from(target, init, kernel, cfg)
}

/// Runs the descent from caller-supplied starting points.
pub fn fit_from(
    target: &OrientedBox,
    start: Vec<Point2>,
    kernel: KernelConfig,
    cfg: &FitConfig,
) -> Result<FitTrace, FitError> {
    cfg.validate()?;
    let mut set = BoxPointSet::new(start.clone())?;
    let mut step = cfg.step_size.unwrap_or(0.1 * target.diagonal());
    let mut losses = Vec::with_capacity(cfg.max_iters.min(4096));
    let mut converged = false;

    for _ in 0..cfg.max_iters {
        let loss = bp_loss(&set, target, kernel);
        losses.push(loss);
        if loss <= cfg.tolerance && all_inside(set.points(), target) {
            converged = true;
            break;
        }
        let grads = bp_loss_grad(&set, target, kernel);
        let moved: Vec<Point2> = set
            .points()
            .iter()
            .zip(&grads)
            .map(|(&p, &g)| match cfg.step_rule {
                StepRule::Raw => p - g.scale(step),
                StepRule::PerPointNormalized => {
                    let norm = g.norm();
                    if norm > 0.0 {
                        p - g.scale(step / norm)
                    } else {
                        p
                    }
                }
            })
            .collect();
        set = BoxPointSet::new(moved)?;
        step *= STEP_DECAY;
    }

    let final_loss = bp_loss(&set, target, kernel);
    Ok(FitTrace {
        losses,
        initial_points: start,
        final_points: set.into_points(),
        final_loss,
        converged,
    })
}
