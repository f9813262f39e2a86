//! DOTA-style text annotations and detection results, and sliding-window
//! tiling of large images.
//!
//! Annotation lines are `x1 y1 x2 y2 x3 y3 x4 y4 class difficulty`.
//! Detection files hold one class each, with lines
//! `image_id score x1 y1 x2 y2 x3 y3 x4 y4`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::eval::{DetectionRecord, EvalError, GroundTruthRecord};
use crate::geometry::{convex_intersection, GeometryError, OrientedBox, Point2};

pub const DEFAULT_WINDOW: u32 = 1024;
pub const DEFAULT_STRIDE: u32 = 524;

/// Fraction of a box that must survive clipping for it to be kept.
pub const DEFAULT_MIN_RETENTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: degenerate box: {source}")]
    Degenerate {
        line: usize,
        #[source]
        source: GeometryError,
    },
    #[error("line {line}: {source}")]
    Record {
        line: usize,
        #[source]
        source: EvalError,
    },
    #[error("invalid tiling: {0}")]
    Tiling(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationFile {
    pub image_id: String,
    pub records: Vec<GroundTruthRecord>,
}

/// Metadata lines such as `imagesource:GoogleEarth` or `gsd:0.146`.
fn is_header(line: &str) -> bool {
    line.split_whitespace().next().is_some_and(|t| t.contains(':'))
}

fn parse_f64(token: &str, line: usize, what: &str) -> Result<f64, IngestError> {
    let v: f64 = token
        .parse()
        .map_err(|_| parse_err(line, format!("{what} `{token}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what} `{token}` is not finite")));
    }
    Ok(v)
}

fn parse_quad(tokens: &[&str], line: usize) -> Result<OrientedBox, IngestError> {
    let mut coords = [0.0; 8];
    for (slot, tok) in coords.iter_mut().zip(tokens) {
        *slot = parse_f64(tok, line, "coordinate")?;
    }
    let vertices = std::array::from_fn(|i| Point2::new(coords[2 * i], coords[2 * i + 1]));
    OrientedBox::from_vertices(vertices).map_err(|source| IngestError::Degenerate { line, source })
}

fn write_quad(out: &mut String, b: &OrientedBox) {
    for (i, v) in b.vertices().iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{} {}", v.x, v.y);
    }
}

pub fn parse_annotation(text: &str, image_id: &str) -> Result<AnnotationFile, IngestError> {
    let mut records = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || is_header(trimmed) {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 10 {
            return Err(parse_err(
                line,
                format!(
                    "expected 10 fields (8 coordinates, class, difficulty), found {}",
                    tokens.len()
                ),
            ));
        }
        let bbox = parse_quad(&tokens[..8], line)?;
        let difficult = match tokens[9] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(line, format!("difficulty `{other}` is not 0 or 1"))),
        };
        let record = GroundTruthRecord::new(image_id, tokens[8], bbox, difficult)
            .map_err(|source| IngestError::Record { line, source })?;
        records.push(record);
    }
    Ok(AnnotationFile {
        image_id: image_id.to_string(),
        records,
    })
}

pub fn serialize_annotation(file: &AnnotationFile) -> String {
    let mut out = String::new();
    for r in &file.records {
        write_quad(&mut out, &r.bbox);
        let _ = writeln!(out, " {} {}", r.class_id, u8::from(r.difficult));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFile {
    pub class_id: String,
    pub records: Vec<DetectionRecord>,
    /// Non-fatal issues such as clamped scores, one message per occurrence.
    pub warnings: Vec<String>,
}

pub fn parse_detections(text: &str, class_id: &str) -> Result<DetectionFile, IngestError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 10 {
            return Err(parse_err(
                line,
                format!(
                    "expected 10 fields (image, score, 8 coordinates), found {}",
                    tokens.len()
                ),
            ));
        }
        let score = parse_f64(tokens[1], line, "score")?;
        if !(0.0..=1.0).contains(&score) {
            warnings.push(format!("line {line}: score {score} clamped to [0, 1]"));
        }
        let bbox = parse_quad(&tokens[2..], line)?;
        let record = DetectionRecord::new(tokens[0], class_id, bbox, score)
            .map_err(|source| IngestError::Record { line, source })?;
        records.push(record);
    }
    Ok(DetectionFile {
        class_id: class_id.to_string(),
        records,
        warnings,
    })
}

pub fn serialize_detections(records: &[DetectionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = write!(out, "{} {} ", r.image_id, r.score());
        write_quad(&mut out, &r.bbox);
        out.push('\n');
    }
    out
}

/// Axis-aligned crop window in integer pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tile {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Tile {
    pub fn to_box(&self) -> OrientedBox {
        OrientedBox::axis_aligned(
            self.x as f64,
            self.y as f64,
            (self.x + self.w) as f64,
            (self.y + self.h) as f64,
        )
        .expect("tiles have positive size")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilePlan {
    pub image_w: u32,
    pub image_h: u32,
    pub window: u32,
    pub stride: u32,
    /// Row-major: all tiles of the first row band, then the next.
    pub tiles: Vec<Tile>,
}

impl TilePlan {
    /// `image_id x y w h`, one tile per line.
    pub fn to_text(&self, image_id: &str) -> String {
        let mut out = String::new();
        for t in &self.tiles {
            let _ = writeln!(out, "{image_id} {} {} {} {}", t.x, t.y, t.w, t.h);
        }
        out
    }
}

/// Offsets `0, stride, 2·stride, …` with the last window pulled back to end
/// at the image edge.
fn axis_offsets(size: u32, window: u32, stride: u32) -> Vec<u32> {
    if size <= window {
        return vec![0];
    }
    let mut offsets = Vec::new();
    let mut off = 0u32;
    while off + window < size {
        offsets.push(off);
        off += stride;
    }
    let last = size - window;
    if offsets.last() != Some(&last) {
        offsets.push(last);
    }
    offsets
}

/// Sliding-window crop plan. Images smaller than `window` along an axis get
/// a single window clamped to the image along that axis.
pub fn plan_tiles(image_w: u32, image_h: u32, window: u32, stride: u32) -> Result<TilePlan, IngestError> {
    if image_w == 0 || image_h == 0 {
        return Err(IngestError::Tiling(format!("image size {image_w}x{image_h} is empty")));
    }
    if window == 0 {
        return Err(IngestError::Tiling("window must be at least 1".into()));
    }
    if stride == 0 || stride > window {
        return Err(IngestError::Tiling(format!(
            "stride must be in [1, {window}], got {stride}"
        )));
    }
    let xs = axis_offsets(image_w, window, stride);
    let ys = axis_offsets(image_h, window, stride);
    let (tw, th) = (window.min(image_w), window.min(image_h));
    let tiles = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Tile { x, y, w: tw, h: th }))
        .collect();
    Ok(TilePlan {
        image_w,
        image_h,
        window,
        stride,
        tiles,
    })
}

/// Moves a ground truth into `tile`'s coordinate frame.
///
/// Returns `None` when less than `min_retention` of the box area lies inside
/// the tile. Boxes that are only partly inside are marked difficult. The box
/// itself is translated, not cut.
pub fn clip_record_to_tile(record: &GroundTruthRecord, tile: &Tile, min_retention: f64) -> Option<GroundTruthRecord> {
    let inside = convex_intersection(&record.bbox, &tile.to_box()).area();
    let fraction = inside / record.bbox.area();
    if fraction < min_retention || inside == 0.0 {
        return None;
    }
    let partial = fraction < 1.0 - 1e-9;
    Some(GroundTruthRecord {
        image_id: record.image_id.clone(),
        class_id: record.class_id.clone(),
        bbox: record.bbox.translated(-(tile.x as f64), -(tile.y as f64)),
        difficult: record.difficult || partial,
    })
}
