//! Quadrature rules on segments, triangles and polygons.

use thiserror::Error;

use crate::mesh::{is_simple, signed_area, Point};

#[derive(Debug, Error, PartialEq)]
pub enum QuadratureError {
    #[error("polygon is not simple")]
    NonSimple,
    #[error("polygon has non-positive area {0:e}")]
    Degenerate(f64),
    #[error("zero-length edge")]
    ZeroLengthEdge,
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of Gauss points integrating polynomials of the given degree exactly on a segment.
pub fn points_for_exactness(exactness: usize) -> usize {
    (exactness + 2) / 2
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Rule on a segment: physical points plus the reference parameter `s ∈ [-1, 1]` of each point.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<Point>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl EdgeRule {
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Gauss–Legendre rule with `ceil((exactness + 1) / 2)` points mapped onto the segment `a -> b`.
pub fn edge_quadrature(a: Point, b: Point, exactness: usize) -> Result<EdgeRule, QuadratureError> {
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if !(len > 0.0) {
        return Err(QuadratureError::ZeroLengthEdge);
    }
    let (s, w) = gauss_legendre(points_for_exactness(exactness));
    let points = s
        .iter()
        .map(|&t| {
            let l = 0.5 * (1.0 + t);
            [a[0] + l * (b[0] - a[0]), a[1] + l * (b[1] - a[1])]
        })
        .collect();
    let weights = w.iter().map(|&wi| 0.5 * len * wi).collect();
    Ok(EdgeRule { points, params: s, weights, exactness })
}

/// Collapsed (Duffy) Gauss product rule on a triangle, exact for polynomials of degree `exactness`.
pub fn triangle_quadrature(a: Point, b: Point, c: Point, exactness: usize) -> QuadratureRule {
    let mut rule = QuadratureRule { points: Vec::new(), weights: Vec::new(), exactness };
    push_triangle(&mut rule, a, b, c, exactness);
    rule
}

fn push_triangle(rule: &mut QuadratureRule, a: Point, b: Point, c: Point, exactness: usize) {
    // x = a + u (b - a) + u v (c - b), u, v in [0, 1], jacobian 2|T| u
    let (su, wu) = gauss_legendre(points_for_exactness(exactness + 1));
    let (sv, wv) = gauss_legendre(points_for_exactness(exactness));
    let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
    for (i, &s) in su.iter().enumerate() {
        let u = 0.5 * (1.0 + s);
        for (j, &t) in sv.iter().enumerate() {
            let v = 0.5 * (1.0 + t);
            let p = [
                a[0] + u * (b[0] - a[0]) + u * v * (c[0] - b[0]),
                a[1] + u * (b[1] - a[1]) + u * v * (c[1] - b[1]),
            ];
            rule.points.push(p);
            rule.weights.push(0.5 * area * wu[i] * wv[j] * u);
        }
    }
}

/// Polygon rule: fan triangulation from the centroid, or ear clipping when the polygon is not
/// star-shaped with respect to its centroid.
pub fn cell_quadrature(poly: &[Point], exactness: usize) -> Result<QuadratureRule, QuadratureError> {
    let area = signed_area(poly);
    if !(area > 0.0) {
        return Err(QuadratureError::Degenerate(area));
    }
    if !is_simple(poly) {
        return Err(QuadratureError::NonSimple);
    }
    let n = poly.len();
    let mut rule = QuadratureRule { points: Vec::new(), weights: Vec::new(), exactness };
    if n == 3 {
        push_triangle(&mut rule, poly[0], poly[1], poly[2], exactness);
        return Ok(rule);
    }
    let centroid = {
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..n {
            let p = poly[i];
            let q = poly[(i + 1) % n];
            let w = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * w;
            cy += (p[1] + q[1]) * w;
        }
        [cx / (6.0 * area), cy / (6.0 * area)]
    };
    let fan_ok = (0..n).all(|i| signed_area(&[centroid, poly[i], poly[(i + 1) % n]]) > 1e-14 * area);
    if fan_ok {
        for i in 0..n {
            push_triangle(&mut rule, centroid, poly[i], poly[(i + 1) % n], exactness);
        }
    } else {
        for [a, b, c] in ear_clip(poly)? {
            push_triangle(&mut rule, poly[a], poly[b], poly[c], exactness);
        }
    }
    Ok(rule)
}

/// Ear-clipping triangulation of a simple counter-clockwise polygon.
pub fn ear_clip(poly: &[Point]) -> Result<Vec<[usize; 3]>, QuadratureError> {
    let mut idx: Vec<usize> = (0..poly.len()).collect();
    let mut tris = Vec::with_capacity(poly.len().saturating_sub(2));
    let cross = |a: Point, b: Point, c: Point| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (poly[ia], poly[ib], poly[ic]);
            if cross(a, b, c) <= 0.0 {
                continue;
            }
            let contains = idx.iter().any(|&j| {
                if j == ia || j == ib || j == ic {
                    return false;
                }
                let p = poly[j];
                cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
            });
            if !contains {
                tris.push([ia, ib, ic]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(QuadratureError::NonSimple);
        }
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Ok(tris)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_monomials() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for d in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(d as i32)).sum();
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} d={d}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn unit_square_second_moment() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let r = cell_quadrature(&sq, 2).unwrap();
        assert!((r.integrate(|p| p[0] * p[0] + p[1] * p[1]) - 2.0 / 3.0).abs() < 1e-14);
        assert!(r.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn hexagon_area() {
        let s = 0.7;
        let hex: Vec<Point> = (0..6)
            .map(|i| {
                let t = std::f64::consts::PI / 3.0 * i as f64;
                [s * t.cos(), s * t.sin()]
            })
            .collect();
        let r = cell_quadrature(&hex, 0).unwrap();
        assert!((r.measure() - 1.5 * 3f64.sqrt() * s * s).abs() < 1e-13);
    }

    #[test]
    fn edge_rules() {
        let r = edge_quadrature([0.0, 0.0], [3.0, 4.0], 0).unwrap();
        assert!((r.weights.iter().sum::<f64>() - 5.0).abs() < 1e-14);
        let r = edge_quadrature([0.0, 0.0], [1.0, 0.0], 3).unwrap();
        assert_eq!(r.points.len(), 2);
        assert!((r.integrate(|p| p[0].powi(3)) - 0.25).abs() < 1e-15);
        // degree-5 polynomial along a slanted edge, antiderivative oracle
        let (a, b) = ([0.2, -0.1], [1.1, 0.5]);
        let r = edge_quadrature(a, b, 5).unwrap();
        let f = |t: f64| 3.0 * t.powi(5) - t.powi(4) + 2.0 * t * t - 1.0;
        let big_f = |t: f64| 0.5 * t.powi(6) - t.powi(5) / 5.0 + 2.0 * t.powi(3) / 3.0 - t;
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        // parameterize by x: t = x, ds = len / (bx - ax) dx
        let exact = (big_f(b[0]) - big_f(a[0])) * len / (b[0] - a[0]);
        assert!((r.integrate(|p| f(p[0])) - exact).abs() < 1e-14);
        assert_eq!(edge_quadrature(a, a, 2).unwrap_err(), QuadratureError::ZeroLengthEdge);
    }

    #[test]
    fn polynomial_exactness_on_nonconvex_polygon() {
        // L-shaped hexagon: not star-shaped from its centroid direction everywhere? use ear clipping check too
        let poly = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        for deg in 0..8 {
            let r = cell_quadrature(&poly, deg).unwrap();
            for a in 0..=deg {
                let b = deg - a;
                let q = r.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                // split into [0,2]x[0,1] and [0,1]x[1,2]
                let mono = |lo: f64, hi: f64, e: usize| (hi.powi(e as i32 + 1) - lo.powi(e as i32 + 1)) / (e as f64 + 1.0);
                let exact = mono(0.0, 2.0, a) * mono(0.0, 1.0, b) + mono(0.0, 1.0, a) * mono(1.0, 2.0, b);
                assert!((q - exact).abs() <= 1e-12 * exact.abs().max(1.0), "deg {deg}: {q} vs {exact}");
            }
        }
        let tris = ear_clip(&poly).unwrap();
        assert_eq!(tris.len(), 4);
    }

    #[test]
    fn rejects_bad_polygons() {
        let cw = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert!(matches!(cell_quadrature(&cw, 1), Err(QuadratureError::Degenerate(_))));
        let bow = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0], [-1.0, 0.5]];
        assert!(cell_quadrature(&bow, 1).is_err());
    }
}
