//! 2D geometric primitives and distance predicates.
//!
//! Shapes are closed sets: a point on the boundary is inside.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A position (or displacement) in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

/// Displacements, velocities and forces share the point representation.
pub type Vec2 = Point2;

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn from_polar(radius: f64, angle: f64) -> Self {
        let (sin, cos) = angle.sin_cos();
        Point2::new(radius * cos, radius * sin)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Point2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn distance(self, other: Point2) -> f64 {
        euclidean_distance(self, other)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Point2 {
    fn add_assign(&mut self, rhs: Point2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Point2 {
    fn sub_assign(&mut self, rhs: Point2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Point2> for f64 {
    type Output = Point2;
    fn mul(self, rhs: Point2) -> Point2 {
        rhs * self
    }
}

impl Div<f64> for Point2 {
    type Output = Point2;
    fn div(self, rhs: f64) -> Point2 {
        Point2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

pub fn euclidean_distance(a: Point2, b: Point2) -> f64 {
    (a - b).norm()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapeError {
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("{what} must be strictly positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon has zero area")]
    Degenerate,
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb {
    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.min.x <= other.min.x
            && self.min.y <= other.min.y
            && other.max.x <= self.max.x
            && other.max.y <= self.max.y
    }
}

/// A closed region of the plane.
///
/// Construct through [`Shape::rectangle`], [`Shape::circle`] or
/// [`Shape::polygon`]; the constructors enforce the shape invariants and
/// deserialization goes through the same checks. Polygons are stored
/// counter-clockwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", try_from = "RawShape")]
pub enum Shape {
    Rectangle {
        origin: Point2,
        width: f64,
        height: f64,
    },
    Circle {
        center: Point2,
        radius: f64,
    },
    Polygon {
        vertices: Vec<Point2>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
enum RawShape {
    Rectangle {
        origin: Point2,
        width: f64,
        height: f64,
    },
    Circle {
        center: Point2,
        radius: f64,
    },
    Polygon {
        vertices: Vec<Point2>,
    },
}

impl TryFrom<RawShape> for Shape {
    type Error = ShapeError;

    fn try_from(raw: RawShape) -> Result<Self, Self::Error> {
        match raw {
            RawShape::Rectangle {
                origin,
                width,
                height,
            } => Shape::rectangle(origin, width, height),
            RawShape::Circle { center, radius } => Shape::circle(center, radius),
            RawShape::Polygon { vertices } => Shape::polygon(vertices),
        }
    }
}

fn positive(what: &'static str, value: f64) -> Result<(), ShapeError> {
    if !value.is_finite() {
        return Err(ShapeError::NonFinite);
    }
    if value <= 0.0 {
        return Err(ShapeError::NonPositive { what, value });
    }
    Ok(())
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    (0..n)
        .map(|i| vertices[i].cross(vertices[(i + 1) % n]))
        .sum::<f64>()
        / 2.0
}

fn orientation(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = orientation(a, b, c);
    let o2 = orientation(a, b, d);
    let o3 = orientation(c, d, a);
    let o4 = orientation(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Closest point to `p` on the segment `a`-`b`.
pub fn closest_point_on_segment(p: Point2, a: Point2, b: Point2) -> Point2 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return a;
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    euclidean_distance(p, closest_point_on_segment(p, a, b))
}

pub fn segment_segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

impl Shape {
    pub fn rectangle(origin: Point2, width: f64, height: f64) -> Result<Shape, ShapeError> {
        if !origin.is_finite() {
            return Err(ShapeError::NonFinite);
        }
        positive("rectangle width", width)?;
        positive("rectangle height", height)?;
        Ok(Shape::Rectangle {
            origin,
            width,
            height,
        })
    }

    pub fn circle(center: Point2, radius: f64) -> Result<Shape, ShapeError> {
        if !center.is_finite() {
            return Err(ShapeError::NonFinite);
        }
        positive("circle radius", radius)?;
        Ok(Shape::Circle { center, radius })
    }

    /// Builds a simple polygon, reordering the vertices counter-clockwise.
    pub fn polygon(mut vertices: Vec<Point2>) -> Result<Shape, ShapeError> {
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(ShapeError::NonFinite);
        }
        let n = vertices.len();
        if n < 3 {
            return Err(ShapeError::TooFewVertices(n));
        }
        let area = signed_area(&vertices);
        if area == 0.0 {
            return Err(ShapeError::Degenerate);
        }
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            if a == b {
                return Err(ShapeError::Degenerate);
            }
            for j in (i + 1)..n {
                // adjacent edges share a vertex by construction
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (c, d) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a, b, c, d) {
                    return Err(ShapeError::SelfIntersecting(i, j));
                }
            }
        }
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Shape::Polygon { vertices })
    }

    /// Axis-aligned box `[x0, x1] x [y0, y1]`.
    pub fn aabb_rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Shape, ShapeError> {
        Shape::rectangle(Point2::new(x0, y0), x1 - x0, y1 - y0)
    }

    pub fn bounding_box(&self) -> Aabb {
        match self {
            Shape::Rectangle {
                origin,
                width,
                height,
            } => Aabb {
                min: *origin,
                max: Point2::new(origin.x + width, origin.y + height),
            },
            Shape::Circle { center, radius } => Aabb {
                min: Point2::new(center.x - radius, center.y - radius),
                max: Point2::new(center.x + radius, center.y + radius),
            },
            Shape::Polygon { vertices } => {
                let mut min = vertices[0];
                let mut max = vertices[0];
                for v in &vertices[1..] {
                    min.x = min.x.min(v.x);
                    min.y = min.y.min(v.y);
                    max.x = max.x.max(v.x);
                    max.y = max.y.max(v.y);
                }
                Aabb { min, max }
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Rectangle { width, height, .. } => width * height,
            Shape::Circle { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Polygon { vertices } => signed_area(vertices).abs(),
        }
    }

    /// Boundary edges of polygonal shapes (rectangles included), CCW.
    fn edges(&self) -> Vec<(Point2, Point2)> {
        let corners = match self {
            Shape::Rectangle {
                origin,
                width,
                height,
            } => vec![
                *origin,
                Point2::new(origin.x + width, origin.y),
                Point2::new(origin.x + width, origin.y + height),
                Point2::new(origin.x, origin.y + height),
            ],
            Shape::Polygon { vertices } => vertices.clone(),
            Shape::Circle { .. } => return Vec::new(),
        };
        let n = corners.len();
        (0..n).map(|i| (corners[i], corners[(i + 1) % n])).collect()
    }

    pub fn contains_point(&self, p: Point2) -> bool {
        match self {
            Shape::Rectangle {
                origin,
                width,
                height,
            } => {
                p.x >= origin.x
                    && p.x <= origin.x + width
                    && p.y >= origin.y
                    && p.y <= origin.y + height
            }
            Shape::Circle { center, radius } => (p - *center).norm_squared() <= radius * radius,
            Shape::Polygon { vertices } => polygon_contains(vertices, p),
        }
    }

    /// Closest point on the boundary.
    pub fn closest_boundary_point(&self, p: Point2) -> Point2 {
        match self {
            Shape::Circle { center, radius } => match (p - *center).normalized() {
                Some(dir) => *center + dir * *radius,
                None => *center + Point2::new(*radius, 0.0),
            },
            _ => {
                let mut best = p;
                let mut best_d = f64::INFINITY;
                for (a, b) in self.edges() {
                    let q = closest_point_on_segment(p, a, b);
                    let d = (q - p).norm_squared();
                    if d < best_d {
                        best_d = d;
                        best = q;
                    }
                }
                best
            }
        }
    }

    /// Zero inside (boundary included), otherwise the distance to the boundary.
    pub fn distance_to(&self, p: Point2) -> f64 {
        if self.contains_point(p) {
            return 0.0;
        }
        match self {
            Shape::Rectangle {
                origin,
                width,
                height,
            } => {
                let dx = (origin.x - p.x).max(p.x - (origin.x + width)).max(0.0);
                let dy = (origin.y - p.y).max(p.y - (origin.y + height)).max(0.0);
                dx.hypot(dy)
            }
            Shape::Circle { center, radius } => (euclidean_distance(p, *center) - radius).max(0.0),
            Shape::Polygon { .. } => euclidean_distance(p, self.closest_boundary_point(p)),
        }
    }

    /// Distance between the closed segment `a`-`b` and the shape; zero when
    /// they touch or the segment runs through the interior.
    pub fn segment_distance(&self, a: Point2, b: Point2) -> f64 {
        match self {
            Shape::Circle { center, radius } => {
                (point_segment_distance(*center, a, b) - radius).max(0.0)
            }
            _ => {
                if self.contains_point(a) || self.contains_point(b) {
                    return 0.0;
                }
                self.edges()
                    .into_iter()
                    .map(|(c, d)| segment_segment_distance(a, b, c, d))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

impl Shape {
    /// Corner points of polygonal shapes.
    fn corners(&self) -> Vec<Point2> {
        self.edges().into_iter().map(|(a, _)| a).collect()
    }

    /// True when the two closed shapes share at least one point.
    pub fn intersects(&self, other: &Shape) -> bool {
        if !self.bounding_box().intersects(&other.bounding_box()) {
            return false;
        }
        match (self, other) {
            (Shape::Circle { center: c1, radius: r1 }, Shape::Circle { center: c2, radius: r2 }) => {
                euclidean_distance(*c1, *c2) <= r1 + r2
            }
            (Shape::Circle { center, radius }, poly) | (poly, Shape::Circle { center, radius }) => {
                poly.distance_to(*center) <= *radius
            }
            _ => {
                self.corners().iter().any(|&p| other.contains_point(p))
                    || other.corners().iter().any(|&p| self.contains_point(p))
                    || self.edges().iter().any(|&(a, b)| {
                        other
                            .edges()
                            .iter()
                            .any(|&(c, d)| segments_intersect(a, b, c, d))
                    })
            }
        }
    }
}

fn polygon_contains(vertices: &[Point2], p: Point2) -> bool {
    let n = vertices.len();
    let mut inside = false;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        if orientation(a, b, p) == 0.0 && on_segment(a, b, p) {
            return true;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Free function form of [`Shape::contains_point`].
pub fn contains_point(shape: &Shape, p: Point2) -> bool {
    shape.contains_point(p)
}

/// Free function form of [`Shape::distance_to`].
pub fn distance_to_shape(p: Point2, shape: &Shape) -> f64 {
    shape.distance_to(p)
}
