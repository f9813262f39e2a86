//! Geometry and loss functions for small oriented object detection.
//!
//! * [`geometry`]: oriented boxes, triangle-partition containment, convex
//!   clipping and rotated IoU.
//! * [`loss`]: the sigmoid containment kernel, box-point loss and its
//!   analytic gradient, guided-attention BCE, smooth-L1 and IoU loss.
//! * [`attention`]: reference scaled dot-product and efficient attention,
//!   and the RoI attention head.
//! * [`mask`]: coarse binary masks rasterized from boxes.
//! * [`eval`]: VOC07/VOC12 average precision and mAP for rotated boxes.
//! * [`ingest`]: DOTA text formats and sliding-window tiling.
//! * [`fit`]: a gradient-descent demo driving points into a box.
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled and run as doc-tests of this crate.

pub mod attention;
pub mod eval;
pub mod fit;
pub mod format;
pub mod geometry;
pub mod ingest;
pub mod loss;
pub mod mask;

pub use attention::{FeatureGrid, Matrix};
pub use geometry::{BoxParams, OrientedBox, Point2};
pub use loss::{BoxPointSet, KernelConfig};

// `cargo test --doc` runs the guide's listings through rustdoc.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/box-points.md")]
    mod box_points {}
    #[doc = include_str!("../../../book/src/attention.md")]
    mod attention {}
    #[doc = include_str!("../../../book/src/masks.md")]
    mod masks {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/fitting.md")]
    mod fitting {}
}
