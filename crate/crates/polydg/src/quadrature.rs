//! Quadrature over arbitrary simple polygons (via ear-clipping
//! sub-triangulation) and over straight edges.
//!
//! Volume rules are composite collapsed-Gauss (Duffy) rules on the
//! sub-triangles, exact for all bivariate polynomials up to the declared
//! degree. Edge rules are mapped Gauss-Legendre rules.

use crate::error::{Error, Result};
use crate::geometry::{self, Point2};

/// A quadrature rule over a cell or an edge, in physical coordinates.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, mut f: impl FnMut(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], computed by Newton iteration
/// on the Legendre recurrence. Exact for polynomials of degree 2n-1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Ear-clipping triangulation of a simple CCW polygon. Collinear (straight)
/// vertices, e.g. hanging nodes baked into a cell loop, are removed without
/// emitting a degenerate triangle. Works for non-convex polygons.
pub fn triangulate_polygon(polygon: &[Point2]) -> Result<Vec<[Point2; 3]>> {
    if polygon.len() < 3 {
        return Err(Error::geometry(format!(
            "polygon with {} vertices cannot be triangulated",
            polygon.len()
        )));
    }
    let scale = geometry::diameter(polygon);
    if !(scale > 0.0) {
        return Err(Error::geometry("degenerate polygon (zero diameter)"));
    }
    let eps = 1e-12 * scale * scale;
    let area = geometry::signed_area(polygon);
    if area <= eps {
        return Err(Error::geometry(format!(
            "polygon is not CCW or has non-positive area {area:.3e}"
        )));
    }

    let mut idx: Vec<usize> = (0..polygon.len()).collect();
    let mut tris = Vec::with_capacity(polygon.len() - 2);
    let mut guard = 0usize;
    while idx.len() > 3 {
        let n = idx.len();
        let mut clipped = false;
        for i in 0..n {
            let ip = idx[(i + n - 1) % n];
            let iv = idx[i];
            let inx = idx[(i + 1) % n];
            let (p, v, q) = (polygon[ip], polygon[iv], polygon[inx]);
            let cross = (v - p).cross(q - v);
            if cross.abs() <= eps {
                // Straight vertex: drop it if q continues past v.
                if (v - p).dot(q - v) > 0.0 {
                    idx.remove(i);
                    clipped = true;
                    break;
                }
                continue;
            }
            if cross < 0.0 {
                continue; // reflex vertex
            }
            // Convex vertex: an ear if no other vertex lies inside (p, v, q).
            let blocked = idx.iter().any(|&j| {
                j != ip
                    && j != iv
                    && j != inx
                    && geometry::strictly_inside_triangle(polygon[j], p, v, q, eps)
            });
            if !blocked {
                tris.push([p, v, q]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(Error::geometry(
                "ear clipping failed: polygon is likely self-intersecting",
            ));
        }
        guard += 1;
        if guard > 4 * polygon.len() {
            return Err(Error::geometry("ear clipping did not terminate"));
        }
    }
    let (a, b, c) = (polygon[idx[0]], polygon[idx[1]], polygon[idx[2]]);
    if (b - a).cross(c - b).abs() > eps {
        tris.push([a, b, c]);
    }
    Ok(tris)
}

/// Collapsed-Gauss (Duffy) rule on one physical triangle, exact for total
/// degree <= d. The Duffy map x = u(1-v), y = uv carries a Jacobian factor u,
/// so the u-direction needs one extra degree.
fn duffy_triangle_rule(tri: &[Point2; 3], d: usize) -> (Vec<Point2>, Vec<f64>) {
    let nu = (d + 2).div_ceil(2).max(1);
    let nv = (d + 1).div_ceil(2).max(1);
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let jac = 2.0 * geometry::signed_area(&tri.to_vec());
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (iu, &gu) in xu.iter().enumerate() {
        let u = 0.5 * (gu + 1.0);
        for (iv, &gv) in xv.iter().enumerate() {
            let v = 0.5 * (gv + 1.0);
            let r = u * (1.0 - v);
            let s = u * v;
            let p = tri[0] + (tri[1] - tri[0]) * r + (tri[2] - tri[0]) * s;
            points.push(p);
            weights.push(0.25 * wu[iu] * wv[iv] * u * jac);
        }
    }
    (points, weights)
}

/// Composite volume rule over a polygonal cell, exact for all bivariate
/// polynomials of total degree <= d.
pub fn volume_rule(polygon: &[Point2], d: usize) -> Result<QuadratureRule> {
    let tris = triangulate_polygon(polygon)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for tri in &tris {
        let (mut p, mut w) = duffy_triangle_rule(tri, d);
        points.append(&mut p);
        weights.append(&mut w);
    }
    Ok(QuadratureRule {
        points,
        weights,
        exact_degree: d,
    })
}

/// Default volume degree for a broken space of degree `k`: integrates the
/// cubic-nonlinearity weight |u|^2 (degree 2k) against trial x test (degree
/// 2k) exactly.
pub fn default_volume_degree(k: usize) -> usize {
    (2 * k + 2).max(4 * k)
}

/// Default edge degree for a broken space of degree `k`.
pub fn default_edge_degree(k: usize) -> usize {
    2 * k + 2
}

/// Gauss rule mapped onto the segment [a, b], exact for degree <= d along the
/// segment. Weights sum to the segment length.
pub fn edge_rule(a: Point2, b: Point2, d: usize) -> QuadratureRule {
    let n = (d + 2).div_ceil(2).max(1);
    let (x, w) = gauss_legendre(n);
    let len = a.dist(b);
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let points = x.iter().map(|&t| mid + half * t).collect();
    let weights = w.iter().map(|&wi| 0.5 * len * wi).collect();
    QuadratureRule {
        points,
        weights,
        exact_degree: d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    /// L-shaped hexagon: the unit square minus its SE quadrant corner square.
    fn l_hexagon() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(0.5, 0.5),
            Point2::new(1.0, 0.5),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn gauss_legendre_degrees() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            // Exact for all monomials t^j, j <= 2n-1.
            for j in 0..=(2 * n - 1) {
                let num: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(j as i32)).sum();
                let exact = if j % 2 == 1 { 0.0 } else { 2.0 / (j as f64 + 1.0) };
                assert!(
                    (num - exact).abs() < 1e-14,
                    "n={n} j={j}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn triangulate_convex_quad_gives_two_triangles() {
        let tris = triangulate_polygon(&unit_square()).unwrap();
        assert_eq!(tris.len(), 2);
        let sum: f64 = tris.iter().map(|t| geometry::signed_area(&t.to_vec())).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangulate_triangle_is_identity() {
        let tri = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        let tris = triangulate_polygon(&tri).unwrap();
        assert_eq!(tris.len(), 1);
        assert!((geometry::signed_area(&tris[0].to_vec()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangulate_l_hexagon_matches_shoelace_area() {
        let poly = l_hexagon();
        let tris = triangulate_polygon(&poly).unwrap();
        assert_eq!(tris.len(), 4);
        let sum: f64 = tris.iter().map(|t| geometry::signed_area(&t.to_vec())).sum();
        assert!((sum - geometry::signed_area(&poly)).abs() < 1e-12);
    }

    #[test]
    fn triangulate_handles_collinear_hanging_vertex() {
        // Unit square with an extra straight vertex on the bottom side.
        let poly = vec![
            Point2::new(0.0, 0.0),
            Point2::new(0.5, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let tris = triangulate_polygon(&poly).unwrap();
        let sum: f64 = tris.iter().map(|t| geometry::signed_area(&t.to_vec())).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangulate_rejects_cw_polygon() {
        let mut poly = unit_square();
        poly.reverse();
        assert!(triangulate_polygon(&poly).is_err());
    }

    #[test]
    fn volume_rule_x2y2_on_unit_square() {
        let rule = volume_rule(&unit_square(), 4).unwrap();
        let val = rule.integrate(|p| p.x * p.x * p.y * p.y);
        assert!((val - 1.0 / 9.0).abs() < 1e-13, "got {val}");
    }

    #[test]
    fn volume_rule_weight_sum_is_area() {
        for d in [0, 2, 4, 8, 12] {
            let rule = volume_rule(&l_hexagon(), d).unwrap();
            let area = geometry::signed_area(&l_hexagon());
            assert!((rule.weight_sum() - area).abs() < 1e-12 * area.max(1.0));
            assert!(rule.weights.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn volume_rule_first_moments_match_shoelace() {
        let poly = l_hexagon();
        let rule = volume_rule(&poly, 4).unwrap();
        let (mx, my) = geometry::first_moments(&poly);
        let qx = rule.integrate(|p| p.x);
        let qy = rule.integrate(|p| p.y);
        assert!((qx - mx).abs() < 1e-13);
        assert!((qy - my).abs() < 1e-13);
    }

    #[test]
    fn triangulation_independence_of_integrals() {
        // Same polygon, rotated starting vertex -> different triangulations.
        let poly = l_hexagon();
        let mut rotated = poly.clone();
        rotated.rotate_left(2);
        let r1 = volume_rule(&poly, 6).unwrap();
        let r2 = volume_rule(&rotated, 6).unwrap();
        let f = |p: Point2| (1.0 + p.x).powi(3) * (2.0 - p.y).powi(3);
        let v1 = r1.integrate(f);
        let v2 = r2.integrate(f);
        assert!((v1 - v2).abs() < 1e-12 * v1.abs());
    }

    #[test]
    fn edge_rule_cubic() {
        let rule = edge_rule(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), 3);
        let val = rule.integrate(|p| p.x.powi(3));
        assert!((val - 0.25).abs() < 1e-14);
    }

    #[test]
    fn edge_rule_weight_sum_is_length() {
        let a = Point2::new(0.25, -1.0);
        let b = Point2::new(1.5, 2.0);
        let rule = edge_rule(a, b, 6);
        assert!((rule.weight_sum() - a.dist(b)).abs() < 1e-14);
    }

    #[test]
    fn edge_rule_antisymmetric_integrand_vanishes() {
        let a = Point2::new(-1.0, 0.5);
        let b = Point2::new(1.0, 0.5);
        let mid = (a + b) * 0.5;
        let rule = edge_rule(a, b, 5);
        let val = rule.integrate(|p| (p.x - mid.x).powi(3) + (p.x - mid.x));
        assert!(val.abs() < 1e-14);
    }
}
