//! Coarse binary masks from box geometry.
//!
//! A cell is set when its center point lies in the ground-truth box
//! according to [`contains_exact`]. No area coverage is computed.

use thiserror::Error;

use crate::attention::{FeatureGrid, ROI_GRID};
use crate::geometry::{contains_exact, OrientedBox, Point2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaskError {
    #[error("mask grid must be at least 1x1, got {0}x{1}")]
    EmptyGrid(usize, usize),
    #[error("window must have positive finite extent")]
    BadWindow,
}

/// Axis-aligned region `[x0, x1] × [y0, y1]` in image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, MaskError> {
        let ok = [x0, y0, x1, y1].iter().all(|v| v.is_finite()) && x1 > x0 && y1 > y0;
        if !ok {
            return Err(MaskError::BadWindow);
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn to_box(&self) -> OrientedBox {
        OrientedBox::axis_aligned(self.x0, self.y0, self.x1, self.y1)
            .expect("validated window is a non-degenerate rectangle")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    grid_h: usize,
    grid_w: usize,
    window: Window,
}

impl MaskSpec {
    pub fn new(grid_h: usize, grid_w: usize, window: Window) -> Result<Self, MaskError> {
        if grid_h == 0 || grid_w == 0 {
            return Err(MaskError::EmptyGrid(grid_h, grid_w));
        }
        Ok(Self { grid_h, grid_w, window })
    }

    /// Default 7×7 grid over `window`.
    pub fn coarse(window: Window) -> Self {
        Self {
            grid_h: ROI_GRID,
            grid_w: ROI_GRID,
            window,
        }
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.grid_h, self.grid_w)
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Center of cell `(row, col)`; rows run along `+y`.
    pub fn cell_center(&self, row: usize, col: usize) -> Point2 {
        let w = &self.window;
        Point2::new(
            w.x0 + (col as f64 + 0.5) * w.width() / self.grid_w as f64,
            w.y0 + (row as f64 + 0.5) * w.height() / self.grid_h as f64,
        )
    }
}

pub fn rasterize_box(b: &OrientedBox, spec: &MaskSpec) -> FeatureGrid {
    let (h, w) = spec.grid();
    let mut grid = FeatureGrid::filled(h, w, 0.0);
    for row in 0..h {
        for col in 0..w {
            if contains_exact(spec.cell_center(row, col), b) {
                grid.set(row, col, 1.0);
            }
        }
    }
    grid
}

/// Mask of `gt` sampled on an `h × w` grid laid out in `roi`'s own frame.
///
/// Columns run from `roi` vertex 0 towards vertex 1 and rows from vertex 0
/// towards vertex 3; sample points are bilinear in the four vertices, which
/// is the rotated rectangle frame when `roi` is a rectangle.
pub fn mask_for_roi(gt: &OrientedBox, roi: &OrientedBox, (h, w): (usize, usize)) -> Result<FeatureGrid, MaskError> {
    if h == 0 || w == 0 {
        return Err(MaskError::EmptyGrid(h, w));
    }
    let [v0, v1, v2, v3] = *roi.vertices();
    let mut grid = FeatureGrid::filled(h, w, 0.0);
    for row in 0..h {
        let t = (row as f64 + 0.5) / h as f64;
        for col in 0..w {
            let s = (col as f64 + 0.5) / w as f64;
            let p =
                v0.scale((1.0 - s) * (1.0 - t)) + v1.scale(s * (1.0 - t)) + v2.scale(s * t) + v3.scale((1.0 - s) * t);
            if contains_exact(p, gt) {
                grid.set(row, col, 1.0);
            }
        }
    }
    Ok(grid)
}

/// One line per row, `1` for set cells and `0` otherwise.
pub fn render_mask(mask: &FeatureGrid) -> String {
    let mut out = String::with_capacity(mask.height() * (mask.width() + 1));
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            out.push(if mask.get(row, col) >= 0.5 { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxParams;
    use std::f64::consts::FRAC_PI_4;

    fn window7() -> Window {
        Window::new(0.0, 0.0, 7.0, 7.0).unwrap()
    }

    #[test]
    fn full_and_empty_coverage() {
        let spec = MaskSpec::coarse(window7());
        let cover = OrientedBox::axis_aligned(-1.0, -1.0, 8.0, 8.0).unwrap();
        assert!(rasterize_box(&cover, &spec).data().iter().all(|&v| v == 1.0));
        let away = OrientedBox::axis_aligned(20.0, 20.0, 30.0, 30.0).unwrap();
        assert!(rasterize_box(&away, &spec).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn left_half_box() {
        let spec = MaskSpec::coarse(window7());
        let left = OrientedBox::axis_aligned(0.0, 0.0, 3.5, 7.0).unwrap();
        let mask = rasterize_box(&left, &spec);
        // column 3's centers sit on x = 3.5, the box edge, and count as inside
        let expected = "1111000\n".repeat(7);
        assert_eq!(render_mask(&mask), expected);

        let narrower = OrientedBox::axis_aligned(0.0, 0.0, 3.4, 7.0).unwrap();
        assert_eq!(render_mask(&rasterize_box(&narrower, &spec)), "1110000\n".repeat(7));
    }

    #[test]
    fn roi_masks() {
        let roi = OrientedBox::axis_aligned(0.0, 0.0, 7.0, 7.0).unwrap();
        let same = mask_for_roi(&roi, &roi, (7, 7)).unwrap();
        assert!(same.data().iter().all(|&v| v == 1.0));

        let far = roi.translated(100.0, 0.0);
        let none = mask_for_roi(&far, &roi, (7, 7)).unwrap();
        assert!(none.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diamond_in_axis_aligned_roi() {
        // 45° square with its vertices on the roi edge midpoints
        let side = 7.0 / 2f64.sqrt();
        let gt = OrientedBox::from_params(BoxParams::new(3.5, 3.5, side, side, FRAC_PI_4).unwrap()).unwrap();
        let roi = OrientedBox::axis_aligned(0.0, 0.0, 7.0, 7.0).unwrap();
        let mask = mask_for_roi(&gt, &roi, (7, 7)).unwrap();
        // |x − 3.5| + |y − 3.5| ≤ 3.5 at centers (c + 0.5)
        let expected = "\
0001000
0011100
0111110
1111111
0111110
0011100
0001000
";
        assert_eq!(render_mask(&mask), expected);
    }

    #[test]
    fn rotated_roi_frame_follows_edges() {
        let roi = OrientedBox::from_params(BoxParams::new(0.0, 0.0, 4.0, 2.0, 0.3).unwrap()).unwrap();
        // gt covering the half of the roi at positive local x
        let gt = OrientedBox::from_params(BoxParams::new(0.3f64.cos(), 0.3f64.sin(), 2.0, 2.0, 0.3).unwrap()).unwrap();
        let mask = mask_for_roi(&gt, &roi, (2, 4)).unwrap();
        assert_eq!(render_mask(&mask), "0011\n0011\n");
    }

    #[test]
    fn invalid_specs() {
        assert_eq!(MaskSpec::new(0, 3, window7()), Err(MaskError::EmptyGrid(0, 3)));
        assert_eq!(Window::new(0.0, 0.0, 0.0, 1.0), Err(MaskError::BadWindow));
        let roi = OrientedBox::axis_aligned(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(mask_for_roi(&roi, &roi, (3, 0)).is_err());
    }
}
