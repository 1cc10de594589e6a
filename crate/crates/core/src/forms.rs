//! Element-local matrices and load vectors of the discrete scheme.
//!
//! Local stress unknowns follow [`Element`] ordering, local velocity unknowns are
//! component-major over `P_{k+1}(K)`.

use std::fmt;
use std::sync::Arc;

use faer::Mat;
use thiserror::Error;

use crate::basis::legendre;
use crate::mesh::{Point, PolygonalMesh};
use crate::quadrature::edge_quadrature;
use crate::wg_space::{data_exactness, form_exactness, Element};

pub type VectorFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("viscosity must be positive and finite, got {0}")]
    Viscosity(f64),
    #[error("stabilization weight must be positive and finite, got {0}")]
    Stabilization(f64),
    #[error("{given} stabilization weights for {cells} cells")]
    StabilizationLength { given: usize, cells: usize },
    #[error("polynomial degree {0} is not supported (0..=6)")]
    Degree(usize),
}

/// Stabilization weight `ρ`, piecewise constant.
#[derive(Debug, Clone, PartialEq)]
pub enum Rho {
    Uniform(f64),
    PerCell(Vec<f64>),
}

impl Rho {
    pub fn on(&self, cell: usize) -> f64 {
        match self {
            Rho::Uniform(r) => *r,
            Rho::PerCell(v) => v[cell],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub nu: f64,
    pub rho: Rho,
    pub k: usize,
    /// Include the convective form. `false` gives the Stokes problem.
    pub convection: bool,
    pub form_exactness: Option<usize>,
    pub data_exactness: Option<usize>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self { nu: 0.1, rho: Rho::Uniform(1.0), k: 0, convection: true, form_exactness: None, data_exactness: None }
    }
}

impl ProblemConfig {
    pub fn new(nu: f64, k: usize) -> Self {
        Self { nu, k, ..Self::default() }
    }

    pub fn stokes(mut self) -> Self {
        self.convection = false;
        self
    }

    pub fn form_exactness(&self) -> usize {
        self.form_exactness.unwrap_or_else(|| form_exactness(self.k))
    }

    pub fn data_exactness(&self) -> usize {
        self.data_exactness.unwrap_or_else(|| data_exactness(self.k))
    }

    pub fn validate(&self, n_cells: usize) -> Result<(), ConfigError> {
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return Err(ConfigError::Viscosity(self.nu));
        }
        if self.k > 6 {
            return Err(ConfigError::Degree(self.k));
        }
        let check = |r: f64| if r.is_finite() && r > 0.0 { Ok(()) } else { Err(ConfigError::Stabilization(r)) };
        match &self.rho {
            Rho::Uniform(r) => check(*r),
            Rho::PerCell(v) => {
                if v.len() != n_cells {
                    return Err(ConfigError::StabilizationLength { given: v.len(), cells: n_cells });
                }
                v.iter().try_for_each(|&r| check(r))
            }
        }
    }
}

/// Body force `f` and Dirichlet velocity `g`.
#[derive(Clone)]
pub struct BoundaryData {
    pub f: VectorFn,
    pub g: VectorFn,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("BoundaryData { .. }")
    }
}

impl BoundaryData {
    pub fn new(
        f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
        g: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static,
    ) -> Self {
        Self { f: Arc::new(f), g: Arc::new(g) }
    }

    pub fn zero() -> Self {
        Self::new(|_| [0.0; 2], |_| [0.0; 2])
    }

    /// `∫_∂Ω g·n`, which must vanish for an incompressible flow.
    pub fn boundary_flux(&self, mesh: &PolygonalMesh, exactness: usize) -> f64 {
        mesh.boundary_edges()
            .map(|e| {
                let (a, b) = mesh.edge_endpoints(e);
                let n = mesh.edge_normal(e);
                edge_quadrature(a, b, exactness).map_or(0.0, |r| {
                    r.integrate(|p| {
                        let g = (self.g)(p);
                        g[0] * n[0] + g[1] * n[1]
                    })
                })
            })
            .sum()
    }

    /// Logs a warning when the flux compatibility condition fails; returns whether it holds.
    pub fn check_compatibility(&self, mesh: &PolygonalMesh, exactness: usize) -> bool {
        let flux = self.boundary_flux(mesh, exactness);
        let ok = flux.abs() <= 1e-10;
        if !ok {
            eprintln!("warning: boundary data has net flux {flux:.3e}");
        }
        ok
    }
}

/// `(1/ν)(ζ_0^d, τ_0^d)_K + ρ_K h_K ⟨ζ_0 n - ζ_b, τ_0 n - τ_b⟩_∂K`
pub fn local_a(el: &Element, nu: f64, rho: f64) -> Mat<f64> {
    let mut a = el.deviatoric_mass();
    a *= faer::Scale(1.0 / nu);
    let mut s = el.stabilizer();
    s *= faer::Scale(rho);
    a + s
}

/// `B_h(τ, v) = (div_wh τ, v)_K`, rows indexed by velocity, columns by stress.
pub fn local_b(el: &Element) -> Mat<f64> {
    el.divergence_rhs()
}

/// `(1/ν)((v ⊗ z)^d, τ_0)_K`, rows indexed by stress, columns by velocity. `z` holds the
/// velocity coefficients of the frozen iterate on this cell.
///
/// With row-wise divergence `div(v ⊗ z) = (z·∇)v + v div z`, so `z` is the transporting velocity
/// (an Oseen step).
pub fn local_c(el: &Element, nu: f64, z: &[f64]) -> Mat<f64> {
    let (nk, nv) = (el.nk(), el.nv());
    let mut c = Mat::<f64>::zeros(el.n_local_stress(), 2 * nv);
    if z.iter().all(|&x| x == 0.0) {
        return c;
    }
    for (q, &w) in el.rule.weights.iter().enumerate() {
        let psi = &el.velocity_values()[q];
        let phi = &el.stress_values()[q];
        let zq = [
            (0..nv).map(|m| z[m] * psi[m]).sum::<f64>(),
            (0..nv).map(|m| z[nv + m] * psi[m]).sum::<f64>(),
        ];
        for a in 0..2 {
            for b in 0..2 {
                for comp_v in 0..2 {
                    let mut coef = if comp_v == a { zq[b] } else { 0.0 };
                    if a == b {
                        coef -= 0.5 * zq[comp_v];
                    }
                    if coef == 0.0 {
                        continue;
                    }
                    let coef = coef * w / nu;
                    for n in 0..nk {
                        let row = (2 * a + b) * nk + n;
                        let cn = coef * phi[n];
                        for m in 0..nv {
                            c[(row, comp_v * nv + m)] += cn * psi[m];
                        }
                    }
                }
            }
        }
    }
    c
}

/// `∫_e g · τ_b` on every boundary edge of the element, as a vector on local stress unknowns.
pub fn local_g(el: &Element, g: &VectorFn, exactness: usize) -> Vec<f64> {
    let mut out = vec![0.0; el.n_local_stress()];
    for (le, ed) in el.edges.iter().enumerate() {
        if !ed.boundary {
            continue;
        }
        let rule = match edge_quadrature(ed.basis.a, ed.basis.b, exactness) {
            Ok(r) => r,
            Err(_) => continue,
        };
        for ((p, &s), &w) in rule.points.iter().zip(&rule.params).zip(&rule.weights) {
            let gv = g(*p);
            let l = legendre(el.k, s);
            for i in 0..2 {
                for m in 0..=el.k {
                    out[el.edge_index(le, i, m)] += ed.sign * w * gv[i] * l[m];
                }
            }
        }
    }
    out
}

/// `-(f, v)_K` on local velocity unknowns.
pub fn local_f(el: &Element, f: &VectorFn) -> Vec<f64> {
    let nv = el.nv();
    let mut out = vec![0.0; 2 * nv];
    let mut psi = vec![0.0; nv];
    for (p, &w) in el.data_rule.points.iter().zip(&el.data_rule.weights) {
        el.velocity_basis.eval_into(*p, &mut psi);
        let fv = f(*p);
        for i in 0..2 {
            for m in 0..nv {
                out[i * nv + m] -= w * fv[i] * psi[m];
            }
        }
    }
    out
}

/// `∫_K tr τ_0` on local stress unknowns.
pub fn local_trace(el: &Element) -> Vec<f64> {
    el.trace_moments()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate, MeshFamily, MeshKind};
    use crate::quadrature::cell_quadrature;
    use crate::wg_space::{matvec, project_wg, quad_form};

    fn square() -> PolygonalMesh {
        PolygonalMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![vec![0, 1, 2, 3]]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(ProblemConfig::default().validate(3).is_ok());
        assert_eq!(ProblemConfig::new(0.0, 0).validate(1), Err(ConfigError::Viscosity(0.0)));
        let mut c = ProblemConfig::default();
        c.rho = Rho::PerCell(vec![1.0, -1.0]);
        assert_eq!(c.validate(2), Err(ConfigError::Stabilization(-1.0)));
        assert!(matches!(c.validate(3), Err(ConfigError::StabilizationLength { .. })));
    }

    #[test]
    fn identity_in_kernels_of_a_b_c() {
        let m = generate(&MeshFamily::unit_square(MeshKind::NonConvex, 0)).unwrap();
        for k in 0..3 {
            let t = project_wg(&m, k, 6, |_| [[1.0, 0.0], [0.0, 1.0]]).unwrap();
            for cell in [0, 7] {
                let el = Element::for_degree(&m, cell, k).unwrap();
                let loc = t.local(&m, cell);
                assert!(quad_form(&local_a(&el, 0.1, 1.0), &loc).abs() < 1e-12);
                assert!(matvec(&local_b(&el), &loc).iter().all(|x| x.abs() < 1e-11));
                let z: Vec<f64> = (0..2 * el.nv()).map(|i| (i as f64 * 0.37).sin()).collect();
                let c = local_c(&el, 0.1, &z);
                for col in 0..c.ncols() {
                    let s: f64 = (0..c.nrows()).map(|r| c[(r, col)] * loc[r]).sum();
                    assert!(s.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn a_is_symmetric_psd_and_stabilizer_only_on_edges() {
        let m = generate(&MeshFamily::unit_square(MeshKind::Hexagonal, 0)).unwrap();
        let el = Element::for_degree(&m, 3, 1).unwrap();
        let a = local_a(&el, 0.1, 1.0);
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                assert!((a[(i, j)] - a[(j, i)]).abs() <= 1e-12);
            }
        }
        let eig = a.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(eig.iter().all(|&e| e > -1e-12));
        // τ_0 = 0, τ_b = (1, 0) on the first edge only: ρ h_K |e|
        let mut tau = vec![0.0; el.n_local_stress()];
        tau[el.edge_index(0, 0, 0)] = 1.0;
        let v = quad_form(&a, &tau);
        let len = m.edge_length(el.edges[0].edge);
        assert!((v - el.diameter * len).abs() < 1e-13);
    }

    #[test]
    fn c_single_cell_analytic() {
        // k=0, z = v = (1, 0): (v⊗z)^d = diag(1/2, -1/2), τ_0 basis constant
        let m = square();
        let el = Element::for_degree(&m, 0, 0).unwrap();
        let nv = el.nv();
        let mut z = vec![0.0; 2 * nv];
        z[0] = 1.0;
        let c = local_c(&el, 2.0, &z);
        let col = 0;
        let expected = [0.5 / 2.0, 0.0, 0.0, -0.5 / 2.0];
        for (comp, e) in expected.iter().enumerate() {
            assert!((c[(comp, col)] - e).abs() < 1e-14, "{comp}");
        }
        assert!(local_c(&el, 1.0, &vec![0.0; 2 * nv]).norm_max() == 0.0);
    }

    #[test]
    fn loads_constant_data() {
        let m = square();
        let el = Element::for_degree(&m, 0, 0).unwrap();
        let f: VectorFn = Arc::new(|_| [2.0, -3.0]);
        let lf = local_f(&el, &f);
        assert!((lf[0] + 2.0).abs() < 1e-14 && (lf[el.nv()] - 3.0).abs() < 1e-14);
        let g: VectorFn = Arc::new(|_| [1.0, 0.5]);
        let lg = local_g(&el, &g, 4);
        for (le, ed) in el.edges.iter().enumerate() {
            let len = m.edge_length(ed.edge);
            assert!((lg[el.edge_index(le, 0, 0)] - len).abs() < 1e-14);
            assert!((lg[el.edge_index(le, 1, 0)] - 0.5 * len).abs() < 1e-14);
        }
        let zero: VectorFn = Arc::new(|_| [0.0; 2]);
        assert!(local_g(&el, &zero, 4).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn load_f_quadrature_refinement() {
        let m = generate(&MeshFamily::unit_square(MeshKind::Triangular, 0)).unwrap();
        let f: VectorFn = Arc::new(|p| [(p[0] * 3.0).sin() * p[1].exp(), p[0] * p[0]]);
        let el = Element::new(&m, 5, 1, form_exactness(1), 8).unwrap();
        let lf = local_f(&el, &f);
        let fine = cell_quadrature(&m.cell_polygon(5), 16).unwrap();
        for i in 0..2 {
            for mm in 0..el.nv() {
                let v = -fine.integrate(|p| f(p)[i] * el.velocity_basis.eval(p)[mm]);
                assert!((lf[i * el.nv() + mm] - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn compatibility_flux() {
        let m = generate(&MeshFamily::unit_square(MeshKind::Triangular, 0)).unwrap();
        let d = BoundaryData::new(|_| [0.0; 2], |p| [p[1], 0.0]);
        assert!(d.check_compatibility(&m, 4));
        let bad = BoundaryData::new(|_| [0.0; 2], |p| [p[0], 0.0]);
        assert!((bad.boundary_flux(&m, 4) - 1.0).abs() < 1e-12);
    }
}
