#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::Rng;
use wgns::basis::poly_dim;
use wgns::mesh::{generate, MeshFamily, MeshKind, Point, PolygonalMesh};
use wgns::quadrature::{cell_quadrature, edge_quadrature};
use wgns::wg_space::{cell_basis, weak_divergence, Tensor, WGTensorField};

pub const KINDS: [MeshKind; 3] = [MeshKind::Triangular, MeshKind::Hexagonal, MeshKind::NonConvex];

/// Coarse member of a family (two subdivisions per side at level 0).
pub fn coarse_mesh(kind: MeshKind, level: usize) -> PolygonalMesh {
    let mut f = MeshFamily::new(kind, level);
    f.base = 2;
    generate(&f).unwrap()
}

/// Polynomial tensor of total degree `k` in plain monomials `x^a y^b`.
#[derive(Debug, Clone)]
pub struct PolyTensor {
    pub exponents: Vec<(i32, i32)>,
    /// `[comp][monomial]`, row-major components.
    pub coeffs: [Vec<f64>; 4],
}

impl PolyTensor {
    pub fn random(rng: &mut StdRng, k: usize) -> Self {
        let mut exponents = Vec::new();
        for d in 0..=k as i32 {
            for j in 0..=d {
                exponents.push((d - j, j));
            }
        }
        let n = exponents.len();
        let coeffs = std::array::from_fn(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        Self { exponents, coeffs }
    }

    fn mono(p: Point, a: i32, b: i32) -> f64 {
        p[0].powi(a) * p[1].powi(b)
    }

    pub fn value(&self, p: Point) -> Tensor {
        let mut t = [[0.0; 2]; 2];
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let v = Self::mono(p, a, b);
            for c in 0..4 {
                t[c / 2][c % 2] += self.coeffs[c][m] * v;
            }
        }
        t
    }

    /// Row-wise divergence.
    pub fn div(&self, p: Point) -> [f64; 2] {
        let mut d = [0.0; 2];
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let dx = if a > 0 { a as f64 * Self::mono(p, a - 1, b) } else { 0.0 };
            let dy = if b > 0 { b as f64 * Self::mono(p, a, b - 1) } else { 0.0 };
            for i in 0..2 {
                d[i] += self.coeffs[2 * i][m] * dx + self.coeffs[2 * i + 1][m] * dy;
            }
        }
        d
    }
}

pub fn random_wg_field(rng: &mut StdRng, mesh: &PolygonalMesh, k: usize) -> WGTensorField {
    let mut f = WGTensorField::zeros(mesh, k);
    f.interior.iter_mut().chain(f.edge.iter_mut()).for_each(|x| *x = rng.gen_range(-1.0..1.0));
    f
}

/// Both sides of `(div_wh τ, v)_K = -(τ_0, ∇v)_K + Σ_e ⟨τ_b (n_e · n_∂K), v⟩_e` for a random
/// `v ∈ P_{k+1}(K)^2`, plus the magnitude of the right-hand terms.
pub fn ibp_sides(rng: &mut StdRng, mesh: &PolygonalMesh, tau: &WGTensorField, cell: usize) -> (f64, f64, f64) {
    let k = tau.k;
    let vb = cell_basis(mesh, cell, k + 1);
    let nv = poly_dim(k + 1);
    let vc: Vec<f64> = (0..2 * nv).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let v = |p: Point| [vb.combine(&vc[..nv], p), vb.combine(&vc[nv..], p)];
    let div = weak_divergence(mesh, tau, cell).unwrap();
    let rule = cell_quadrature(&mesh.cell_polygon(cell), 2 * k + 2).unwrap();
    let lhs = rule.integrate(|p| {
        let vv = v(p);
        vb.combine(&div[..nv], p) * vv[0] + vb.combine(&div[nv..], p) * vv[1]
    });
    let volume = -rule.integrate(|p| {
        let t = tau.interior_value(mesh, cell, p);
        let g = vb.grad(p);
        let mut s = 0.0;
        for i in 0..2 {
            let gi = [
                (0..nv).map(|m| vc[i * nv + m] * g[m][0]).sum::<f64>(),
                (0..nv).map(|m| vc[i * nv + m] * g[m][1]).sum::<f64>(),
            ];
            s += t[i][0] * gi[0] + t[i][1] * gi[1];
        }
        s
    });
    let mut boundary = 0.0;
    let mut scale = volume.abs();
    for ce in mesh.cell_edges(cell) {
        let (a, b) = mesh.edge_endpoints(ce.edge);
        let er = edge_quadrature(a, b, 2 * k + 2).unwrap();
        let term = ce.sign
            * er.integrate(|p| {
                let tb = tau.edge_value(mesh, ce.edge, p);
                let vv = v(p);
                tb[0] * vv[0] + tb[1] * vv[1]
            });
        scale += term.abs();
        boundary += term;
    }
    (lhs, volume + boundary, scale)
}
