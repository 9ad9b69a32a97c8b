//! Small 2D vector and polygon primitives shared by the mesh and quadrature
//! layers.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the cross product `self x other`.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }

    /// Unit vector in the same direction; the caller guarantees a nonzero input.
    pub fn normalized(self) -> Point2 {
        let n = self.norm();
        Point2::new(self.x / n, self.y / n)
    }

    /// Rotate by -90 degrees: the outward normal of a CCW-traversed edge.
    pub fn rotated_cw(self) -> Point2 {
        Point2::new(self.y, -self.x)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        self.scale(rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Signed area of a polygon given as a vertex loop (positive for CCW).
pub fn signed_area(loop_pts: &[Point2]) -> f64 {
    let n = loop_pts.len();
    let mut sum = 0.0;
    for i in 0..n {
        let a = loop_pts[i];
        let b = loop_pts[(i + 1) % n];
        sum += a.cross(b);
    }
    0.5 * sum
}

/// Area centroid of a simple polygon (shoelace first moments).
pub fn centroid(loop_pts: &[Point2]) -> Point2 {
    let n = loop_pts.len();
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut area = 0.0;
    for i in 0..n {
        let a = loop_pts[i];
        let b = loop_pts[(i + 1) % n];
        let w = a.cross(b);
        area += w;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
    }
    area *= 0.5;
    Point2::new(cx / (6.0 * area), cy / (6.0 * area))
}

/// First moments (integral of x, integral of y) over a simple polygon.
pub fn first_moments(loop_pts: &[Point2]) -> (f64, f64) {
    let c = centroid(loop_pts);
    let a = signed_area(loop_pts);
    (c.x * a, c.y * a)
}

/// Polygon diameter: the largest pairwise vertex distance. For a simple
/// polygon the diameter is attained at vertices of the convex hull, which are
/// a subset of the loop vertices.
pub fn diameter(loop_pts: &[Point2]) -> f64 {
    let mut d = 0.0_f64;
    for i in 0..loop_pts.len() {
        for j in (i + 1)..loop_pts.len() {
            d = d.max(loop_pts[i].dist(loop_pts[j]));
        }
    }
    d
}

/// Test whether point `p` lies strictly inside triangle `(a, b, c)` (CCW),
/// with points within `eps` of an edge treated as outside.
pub fn strictly_inside_triangle(p: Point2, a: Point2, b: Point2, c: Point2, eps: f64) -> bool {
    let d1 = (b - a).cross(p - a);
    let d2 = (c - b).cross(p - b);
    let d3 = (a - c).cross(p - c);
    d1 > eps && d2 > eps && d3 > eps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shoelace_unit_square() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert!((signed_area(&sq) - 1.0).abs() < 1e-15);
        let c = centroid(&sq);
        assert!((c.x - 0.5).abs() < 1e-15 && (c.y - 0.5).abs() < 1e-15);
        assert!((diameter(&sq) - 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cw_loop_has_negative_area() {
        let sq = [
            Point2::new(0.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
        ];
        assert!(signed_area(&sq) < 0.0);
    }
}
