//! Scaled monomial bases on cells and Legendre bases on edges.

use crate::mesh::Point;

/// Number of bivariate monomials of total degree `<= r`.
pub fn poly_dim(r: usize) -> usize {
    (r + 1) * (r + 2) / 2
}

/// Scaled monomials `m_a(x) = ((x - x_K) / h_K)^a`, ordered by total degree, then by
/// increasing power of y.
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub degree: usize,
    pub center: Point,
    pub scale: f64,
    pub exponents: Vec<(u32, u32)>,
}

impl CellBasis {
    pub fn new(degree: usize, center: Point, scale: f64) -> Self {
        let mut exponents = Vec::with_capacity(poly_dim(degree));
        for d in 0..=degree as u32 {
            for j in 0..=d {
                exponents.push((d - j, j));
            }
        }
        Self { degree, center, scale, exponents }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    fn local(&self, p: Point) -> (f64, f64) {
        ((p[0] - self.center[0]) / self.scale, (p[1] - self.center[1]) / self.scale)
    }

    pub fn eval_into(&self, p: Point, out: &mut [f64]) {
        let (x, y) = self.local(p);
        let mut px = [1.0; 16];
        let mut py = [1.0; 16];
        for i in 1..=self.degree {
            px[i] = px[i - 1] * x;
            py[i] = py[i - 1] * y;
        }
        for (o, &(a, b)) in out.iter_mut().zip(&self.exponents) {
            *o = px[a as usize] * py[b as usize];
        }
    }

    pub fn eval(&self, p: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(p, &mut out);
        out
    }

    /// Exact gradients of every member at `p`.
    pub fn grad(&self, p: Point) -> Vec<[f64; 2]> {
        let (x, y) = self.local(p);
        let pow = |v: f64, e: u32| if e == 0 { 1.0 } else { v.powi(e as i32) };
        self.exponents
            .iter()
            .map(|&(a, b)| {
                let dx = if a == 0 { 0.0 } else { a as f64 * pow(x, a - 1) * pow(y, b) / self.scale };
                let dy = if b == 0 { 0.0 } else { b as f64 * pow(x, a) * pow(y, b - 1) / self.scale };
                [dx, dy]
            })
            .collect()
    }

    /// Evaluates `sum_i coeffs[i] m_i(p)`.
    pub fn combine(&self, coeffs: &[f64], p: Point) -> f64 {
        let mut vals = [0.0; 64];
        let vals = &mut vals[..self.dim()];
        self.eval_into(p, vals);
        vals.iter().zip(coeffs).map(|(v, c)| v * c).sum()
    }
}

/// Legendre polynomials `L_0..L_r` evaluated at `s ∈ [-1, 1]`.
pub fn legendre(r: usize, s: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(r + 1);
    out.push(1.0);
    if r >= 1 {
        out.push(s);
    }
    for n in 2..=r {
        let v = ((2 * n - 1) as f64 * s * out[n - 1] - (n - 1) as f64 * out[n - 2]) / n as f64;
        out.push(v);
    }
    out
}

/// Legendre basis on a segment `a -> b`, parameterized by `s ∈ [-1, 1]` along arc length.
#[derive(Debug, Clone)]
pub struct EdgeBasis {
    pub degree: usize,
    pub a: Point,
    pub b: Point,
}

impl EdgeBasis {
    pub fn new(degree: usize, a: Point, b: Point) -> Self {
        Self { degree, a, b }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn length(&self) -> f64 {
        ((self.b[0] - self.a[0]).powi(2) + (self.b[1] - self.a[1]).powi(2)).sqrt()
    }

    /// Reference parameter of a point on the segment.
    pub fn param(&self, p: Point) -> f64 {
        let t = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let l2 = t[0] * t[0] + t[1] * t[1];
        2.0 * ((p[0] - self.a[0]) * t[0] + (p[1] - self.a[1]) * t[1]) / l2 - 1.0
    }

    pub fn eval_param(&self, s: f64) -> Vec<f64> {
        legendre(self.degree, s)
    }

    pub fn eval(&self, p: Point) -> Vec<f64> {
        legendre(self.degree, self.param(p))
    }

    /// `∫_e L_m^2 ds = |e| / (2m + 1)`.
    pub fn norm_sq(&self, m: usize) -> f64 {
        self.length() / (2 * m + 1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{cell_quadrature, edge_quadrature};

    #[test]
    fn constant_and_linear_members() {
        let b = CellBasis::new(2, [0.3, 0.4], 0.5);
        assert_eq!(b.dim(), 6);
        let v = b.eval([0.9, -0.2]);
        assert_eq!(v[0], 1.0);
        for p in [[0.0, 0.0], [1.0, 2.0]] {
            let g = b.grad(p);
            assert_eq!(g[1], [2.0, 0.0]);
            assert_eq!(g[0], [0.0, 0.0]);
        }
        let at_center = b.eval([0.3, 0.4]);
        assert!(at_center[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let b = CellBasis::new(3, [0.5, 0.5], 0.3);
        let step = 1e-6;
        for p in [[0.41, 0.62], [0.7, 0.2], [0.5, 0.5]] {
            let g = b.grad(p);
            let xp = b.eval([p[0] + step, p[1]]);
            let xm = b.eval([p[0] - step, p[1]]);
            let yp = b.eval([p[0], p[1] + step]);
            let ym = b.eval([p[0], p[1] - step]);
            for i in 0..b.dim() {
                let fx = (xp[i] - xm[i]) / (2.0 * step);
                let fy = (yp[i] - ym[i]) / (2.0 * step);
                assert!((fx - g[i][0]).abs() < 1e-6 && (fy - g[i][1]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn edge_gram_is_diagonal() {
        let b = EdgeBasis::new(3, [0.1, 0.2], [0.7, 0.5]);
        let r = edge_quadrature(b.a, b.b, 8).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let g: f64 = r.params.iter().zip(&r.weights).map(|(&s, &w)| w * legendre(3, s)[i] * legendre(3, s)[j]).sum();
                let expected = if i == j { b.norm_sq(i) } else { 0.0 };
                assert!((g - expected).abs() < 1e-12);
            }
        }
        for (p, &s) in r.points.iter().zip(&r.params) {
            assert!((b.param(*p) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn scaled_mass_matrix_is_well_conditioned() {
        let poly = [[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.66, 0.35], [0.33, 0.65], [0.0, 0.5]];
        let area = crate::mesh::signed_area(&poly);
        let r = cell_quadrature(&poly, 8).unwrap();
        let c = r.integrate(|p| p[0]) / area;
        let d = r.integrate(|p| p[1]) / area;
        let b = CellBasis::new(2, [c, d], 1.1);
        let n = b.dim();
        let mut m = faer::Mat::<f64>::zeros(n, n);
        for (p, w) in r.points.iter().zip(&r.weights) {
            let v = b.eval(*p);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += w * v[i] * v[j];
                }
            }
        }
        let eig = m.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        let (lo, hi) = eig.iter().fold((f64::MAX, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        assert!(lo > 0.0 && hi / lo < 1e8);
    }
}
