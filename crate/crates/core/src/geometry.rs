//! Exact geometry of oriented boxes.
//!
//! An [`OrientedBox`] is a convex quadrilateral stored as four vertices in
//! counter-clockwise order (positive shoelace area). Containment is decided
//! by the triangle partition: a point lies in the box exactly when the four
//! triangles it forms with the box edges add up to the box area.

use std::ops::{Add, Sub};

use thiserror::Error;

/// Relative slack on the `Σ triangles ≤ area` comparison.
pub const CONTAINMENT_REL_TOL: f64 = 1e-9;

/// Vertices closer than this (scaled by the polygon extent) are merged.
pub const VERTEX_MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-finite coordinate in box vertex {0}")]
    NonFinite(usize),
    #[error("box has fewer than 4 distinct vertices")]
    DuplicateVertices,
    #[error("box is not convex or is self-intersecting")]
    NotConvex,
    #[error("box area {0} is not positive")]
    Degenerate(f64),
    #[error("invalid box parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }
}

impl Add for Point2 {
    type Output = Point2;

    fn add(self, other: Point2) -> Point2 {
        Point2::new(self.x + other.x, self.y + other.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;

    fn sub(self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

/// Center/size/angle description of a rectangle.
///
/// `theta` is the rotation (radians) of the `w` axis away from `+x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxParams {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl BoxParams {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self, GeometryError> {
        let p = Self { cx, cy, w, h, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if ![self.cx, self.cy, self.w, self.h, self.theta]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(GeometryError::InvalidParams("non-finite value".into()));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(GeometryError::InvalidParams(format!(
                "side lengths must be positive, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.cx, self.cy)
    }
}

/// Twice the signed area of triangle `abc`; positive when counter-clockwise.
#[inline]
pub fn signed_double_area(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

pub fn triangle_area(a: Point2, b: Point2, c: Point2) -> f64 {
    signed_double_area(a, b, c).abs() / 2.0
}

/// Signed shoelace area of a closed polygon.
pub fn signed_polygon_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a.cross(b);
    }
    acc / 2.0
}

/// A convex quadrilateral with counter-clockwise vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    vertices: [Point2; 4],
    area: f64,
}

impl OrientedBox {
    /// Validates a quadrilateral. Clockwise input is reversed in place,
    /// keeping the first vertex first.
    pub fn from_vertices(vertices: [Point2; 4]) -> Result<Self, GeometryError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(GeometryError::NonFinite(i));
            }
        }
        let scale = extent(&vertices).max(1.0);
        for i in 0..4 {
            for j in (i + 1)..4 {
                if vertices[i].distance(vertices[j]) <= VERTEX_MERGE_TOL * scale {
                    return Err(GeometryError::DuplicateVertices);
                }
            }
        }

        // All turns must bend the same way (collinear allowed within noise).
        let turn_tol = CONTAINMENT_REL_TOL * scale * scale;
        let turns: [f64; 4] =
            std::array::from_fn(|i| signed_double_area(vertices[i], vertices[(i + 1) % 4], vertices[(i + 2) % 4]));
        let left = turns.iter().any(|&t| t > turn_tol);
        let right = turns.iter().any(|&t| t < -turn_tol);
        if left && right {
            return Err(GeometryError::NotConvex);
        }

        let signed = signed_polygon_area(&vertices);
        let area = signed.abs();
        if area <= VERTEX_MERGE_TOL * scale * scale {
            return Err(GeometryError::Degenerate(area));
        }
        let vertices = if signed < 0.0 {
            [vertices[0], vertices[3], vertices[2], vertices[1]]
        } else {
            vertices
        };

        Ok(Self { vertices, area })
    }

    pub fn from_params(params: BoxParams) -> Result<Self, GeometryError> {
        params.validate()?;
        let (s, c) = params.theta.sin_cos();
        let u = Point2::new(c * params.w / 2.0, s * params.w / 2.0);
        let v = Point2::new(-s * params.h / 2.0, c * params.h / 2.0);
        let center = params.center();
        Self::from_vertices([center - u - v, center + u - v, center + u + v, center - u + v])
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn axis_aligned(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        Self::from_vertices([
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    pub fn vertices(&self) -> &[Point2; 4] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    /// Vertex centroid. Equals the geometric center for parallelograms.
    pub fn center(&self) -> Point2 {
        let sum = self.vertices.iter().fold(Point2::default(), |acc, &v| acc + v);
        sum.scale(0.25)
    }

    /// Largest distance from [`center`](Self::center) to a vertex.
    pub fn circumradius(&self) -> f64 {
        let c = self.center();
        self.vertices.iter().map(|v| v.distance(c)).fold(0.0, f64::max)
    }

    /// Longer of the two vertex diagonals.
    pub fn diagonal(&self) -> f64 {
        let [a, b, c, d] = self.vertices;
        a.distance(c).max(b.distance(d))
    }

    /// `(min, max)` corners of the axis-aligned bounding rectangle.
    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }

    /// Edges `(v[i], v[i+1])` in vertex order.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        (0..4).map(move |i| (self.vertices[i], self.vertices[(i + 1) % 4]))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let d = Point2::new(dx, dy);
        Self {
            vertices: self.vertices.map(|v| v + d),
            area: self.area,
        }
    }

    /// Rotation by `angle` about the origin followed by a translation.
    pub fn rigid_transform(&self, angle: f64, dx: f64, dy: f64) -> Self {
        let (s, c) = angle.sin_cos();
        let vertices = self
            .vertices
            .map(|v| Point2::new(c * v.x - s * v.y + dx, s * v.x + c * v.y + dy));
        Self {
            vertices,
            area: signed_polygon_area(&vertices),
        }
    }
}

pub fn box_area(b: &OrientedBox) -> f64 {
    b.area()
}

/// Areas of the triangles `p` forms with each box edge, in edge order.
pub fn edge_triangle_areas(p: Point2, b: &OrientedBox) -> [f64; 4] {
    let v = b.vertices();
    std::array::from_fn(|i| triangle_area(v[i], v[(i + 1) % 4], p))
}

/// Relative excess `(Σ triangle areas − area) / area`; exactly zero for
/// every point [`contains_exact`] accepts, so rounding inside never leaks.
pub fn relative_area_excess(p: Point2, b: &OrientedBox) -> f64 {
    let sum: f64 = edge_triangle_areas(p, b).iter().sum();
    if sum <= b.area() * (1.0 + CONTAINMENT_REL_TOL) {
        0.0
    } else {
        (sum - b.area()) / b.area()
    }
}

/// Hard inside/outside indicator from the triangle partition. Boundary
/// points count as inside.
pub fn contains_exact(p: Point2, b: &OrientedBox) -> bool {
    let sum: f64 = edge_triangle_areas(p, b).iter().sum();
    sum <= b.area() * (1.0 + CONTAINMENT_REL_TOL)
}

/// A convex polygon with counter-clockwise vertices; possibly empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
}

impl ConvexPolygon {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            signed_polygon_area(&self.vertices).abs()
        }
    }
}

/// Intersection of two boxes by clipping `a` against every edge of `b`.
pub fn convex_intersection(a: &OrientedBox, b: &OrientedBox) -> ConvexPolygon {
    let scale = extent(a.vertices()).max(extent(b.vertices())).max(1.0);
    let merge_tol = VERTEX_MERGE_TOL * scale;

    let mut poly: Vec<Point2> = a.vertices().to_vec();
    for (start, end) in b.edges() {
        if poly.is_empty() {
            break;
        }
        poly = clip_half_plane(&poly, start, end);
    }

    let mut merged: Vec<Point2> = Vec::with_capacity(poly.len());
    for p in poly {
        if merged.last().is_none_or(|q| q.distance(p) > merge_tol) {
            merged.push(p);
        }
    }
    while merged.len() > 1 && merged[0].distance(*merged.last().unwrap()) <= merge_tol {
        merged.pop();
    }

    if merged.len() < 3 || signed_polygon_area(&merged).abs() <= merge_tol * merge_tol {
        return ConvexPolygon::empty();
    }
    ConvexPolygon { vertices: merged }
}

/// Keeps the part of `poly` left of (or on) the directed line `start → end`.
fn clip_half_plane(poly: &[Point2], start: Point2, end: Point2) -> Vec<Point2> {
    let dir = end - start;
    let side = |p: Point2| dir.cross(p - start);
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let cur = poly[i];
        let next = poly[(i + 1) % poly.len()];
        let (sc, sn) = (side(cur), side(next));
        if sc >= 0.0 {
            out.push(cur);
        }
        if (sc >= 0.0) != (sn >= 0.0) {
            let t = sc / (sc - sn);
            out.push(cur + (next - cur).scale(t));
        }
    }
    out
}

pub fn rotated_iou(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let inter = convex_intersection(a, b).area();
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

fn extent(vertices: &[Point2]) -> f64 {
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
        hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
    }
    (hi.x - lo.x).max(hi.y - lo.y)
}
