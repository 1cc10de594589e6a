//! Weak Galerkin tensor space, broken velocity space, degree-of-freedom layout, L² projections
//! and the discrete weak divergence.
//!
//! A tensor `τ_h = {τ_0, τ_b}` has an interior part `τ_0 ∈ P_k(K)^{2x2}` on every cell and, on
//! every edge, a vector `τ_b ∈ P_k(e)^2` standing for the rank-one tensor `τ_b ⊗ n_e` (so that
//! `τ_bh n_e = τ_b`). The velocity lives in the fully discontinuous space `P_{k+1}(K)^2`.
//!
//! Tensor components are stored row-major: component `2 i + j` is `τ_ij`, and the divergence
//! acts along rows, `(div τ)_i = Σ_j ∂_j τ_ij`.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rayon::prelude::*;
use thiserror::Error;

use crate::basis::{legendre, poly_dim, CellBasis, EdgeBasis};
use crate::mesh::{Point, PolygonalMesh};
use crate::quadrature::{cell_quadrature, edge_quadrature, EdgeRule, QuadratureError, QuadratureRule};

pub type Tensor = [[f64; 2]; 2];

#[derive(Debug, Error)]
pub enum WgError {
    #[error("singular mass matrix on cell {cell} (degenerate cell?)")]
    SingularMass { cell: usize },
    #[error("quadrature on cell {cell}: {source}")]
    CellQuadrature { cell: usize, source: QuadratureError },
    #[error("quadrature on edge {edge}: {source}")]
    EdgeQuadrature { edge: usize, source: QuadratureError },
}

pub fn cell_basis(mesh: &PolygonalMesh, cell: usize, degree: usize) -> CellBasis {
    CellBasis::new(degree, mesh.cell_centroid(cell), mesh.cell_diameter(cell))
}

pub fn edge_basis(mesh: &PolygonalMesh, edge: usize, degree: usize) -> EdgeBasis {
    let (a, b) = mesh.edge_endpoints(edge);
    EdgeBasis::new(degree, a, b)
}

/// Default quadrature exactness for bilinear and trilinear forms.
pub fn form_exactness(k: usize) -> usize {
    (2 * k + 4).max(3 * k + 2)
}

/// Default quadrature exactness for data terms and error norms.
pub fn data_exactness(k: usize) -> usize {
    2 * k + 6
}

// ---------------------------------------------------------------------------------------------
// dof layout

/// Global numbering: `[stress interior | stress edge | velocity | multiplier]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub k: usize,
    pub n_cells: usize,
    pub n_edges: usize,
    pub stress_edge_offset: usize,
    pub velocity_offset: usize,
    pub multiplier: usize,
    pub total: usize,
}

impl DofMap {
    pub fn new(mesh: &PolygonalMesh, k: usize) -> Self {
        let (n_cells, n_edges) = (mesh.n_cells(), mesh.n_edges());
        let stress_edge_offset = n_cells * 4 * poly_dim(k);
        let velocity_offset = stress_edge_offset + n_edges * 2 * (k + 1);
        let multiplier = velocity_offset + n_cells * 2 * poly_dim(k + 1);
        Self { k, n_cells, n_edges, stress_edge_offset, velocity_offset, multiplier, total: multiplier + 1 }
    }

    pub fn n_stress(&self) -> usize {
        self.velocity_offset
    }

    pub fn n_velocity(&self) -> usize {
        self.multiplier - self.velocity_offset
    }

    pub fn interior(&self, cell: usize, comp: usize, m: usize) -> usize {
        let nk = poly_dim(self.k);
        (cell * 4 + comp) * nk + m
    }

    pub fn edge(&self, edge: usize, comp: usize, m: usize) -> usize {
        self.stress_edge_offset + (edge * 2 + comp) * (self.k + 1) + m
    }

    pub fn velocity(&self, cell: usize, comp: usize, m: usize) -> usize {
        self.velocity_offset + (cell * 2 + comp) * poly_dim(self.k + 1)
            + m
    }

    /// Global indices of the local stress unknowns of `cell` (interior block, then one block
    /// per cell edge in counter-clockwise order).
    pub fn cell_stress_dofs(&self, mesh: &PolygonalMesh, cell: usize) -> Vec<usize> {
        let nk = poly_dim(self.k);
        let mut dofs: Vec<usize> = (0..4 * nk).map(|i| cell * 4 * nk + i).collect();
        for ce in mesh.cell_edges(cell) {
            let start = self.edge(ce.edge, 0, 0);
            dofs.extend(start..start + 2 * (self.k + 1));
        }
        dofs
    }

    pub fn cell_velocity_dofs(&self, cell: usize) -> std::ops::Range<usize> {
        let nv = 2 * poly_dim(self.k + 1);
        let start = self.velocity_offset + cell * nv;
        start..start + nv
    }
}

// ---------------------------------------------------------------------------------------------
// fields

#[derive(Debug, Clone, PartialEq)]
pub struct WGTensorField {
    pub k: usize,
    /// `n_cells * 4 * dim P_k`, cell-major then component-major.
    pub interior: Vec<f64>,
    /// `n_edges * 2 * (k + 1)`, edge-major then component-major.
    pub edge: Vec<f64>,
}

impl WGTensorField {
    pub fn zeros(mesh: &PolygonalMesh, k: usize) -> Self {
        Self { k, interior: vec![0.0; mesh.n_cells() * 4 * poly_dim(k)], edge: vec![0.0; mesh.n_edges() * 2 * (k + 1)] }
    }

    pub fn from_global(dofs: &DofMap, x: &[f64]) -> Self {
        Self {
            k: dofs.k,
            interior: x[..dofs.stress_edge_offset].to_vec(),
            edge: x[dofs.stress_edge_offset..dofs.velocity_offset].to_vec(),
        }
    }

    pub fn to_global(&self, dofs: &DofMap, x: &mut [f64]) {
        x[..dofs.stress_edge_offset].copy_from_slice(&self.interior);
        x[dofs.stress_edge_offset..dofs.velocity_offset].copy_from_slice(&self.edge);
    }

    pub fn interior_coeffs(&self, cell: usize) -> &[f64] {
        let n = 4 * poly_dim(self.k);
        &self.interior[cell * n..(cell + 1) * n]
    }

    pub fn edge_coeffs(&self, edge: usize) -> &[f64] {
        let n = 2 * (self.k + 1);
        &self.edge[edge * n..(edge + 1) * n]
    }

    /// Coefficients in the local ordering of [`Element`].
    pub fn local(&self, mesh: &PolygonalMesh, cell: usize) -> Vec<f64> {
        let mut out = self.interior_coeffs(cell).to_vec();
        for ce in mesh.cell_edges(cell) {
            out.extend_from_slice(self.edge_coeffs(ce.edge));
        }
        out
    }

    pub fn interior_value(&self, mesh: &PolygonalMesh, cell: usize, p: Point) -> Tensor {
        let basis = cell_basis(mesh, cell, self.k);
        let nk = basis.dim();
        let c = self.interior_coeffs(cell);
        let vals = basis.eval(p);
        let mut t = [[0.0; 2]; 2];
        for comp in 0..4 {
            t[comp / 2][comp % 2] = (0..nk).map(|m| c[comp * nk + m] * vals[m]).sum();
        }
        t
    }

    /// The vector `τ_b` on an edge at a point of that edge.
    pub fn edge_value(&self, mesh: &PolygonalMesh, edge: usize, p: Point) -> [f64; 2] {
        let basis = edge_basis(mesh, edge, self.k);
        let l = basis.eval(p);
        let c = self.edge_coeffs(edge);
        let n = self.k + 1;
        [(0..n).map(|m| c[m] * l[m]).sum(), (0..n).map(|m| c[n + m] * l[m]).sum()]
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (x, y) in self.interior.iter_mut().zip(&other.interior) {
            *x += a * y;
        }
        for (x, y) in self.edge.iter_mut().zip(&other.edge) {
            *x += a * y;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DGVectorField {
    pub degree: usize,
    /// `n_cells * 2 * dim P_degree`, cell-major then component-major.
    pub coeffs: Vec<f64>,
}

impl DGVectorField {
    pub fn zeros(mesh: &PolygonalMesh, degree: usize) -> Self {
        Self { degree, coeffs: vec![0.0; mesh.n_cells() * 2 * poly_dim(degree)] }
    }

    pub fn from_global(dofs: &DofMap, x: &[f64]) -> Self {
        Self { degree: dofs.k + 1, coeffs: x[dofs.velocity_offset..dofs.multiplier].to_vec() }
    }

    pub fn cell_coeffs(&self, cell: usize) -> &[f64] {
        let n = 2 * poly_dim(self.degree);
        &self.coeffs[cell * n..(cell + 1) * n]
    }

    pub fn value(&self, mesh: &PolygonalMesh, cell: usize, p: Point) -> [f64; 2] {
        let basis = cell_basis(mesh, cell, self.degree);
        let c = self.cell_coeffs(cell);
        let n = basis.dim();
        [basis.combine(&c[..n], p), basis.combine(&c[n..], p)]
    }

    /// `g[i][j] = ∂_j v_i`.
    pub fn gradient(&self, mesh: &PolygonalMesh, cell: usize, p: Point) -> Tensor {
        let basis = cell_basis(mesh, cell, self.degree);
        let c = self.cell_coeffs(cell);
        let n = basis.dim();
        let g = basis.grad(p);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for m in 0..n {
                out[i][0] += c[i * n + m] * g[m][0];
                out[i][1] += c[i * n + m] * g[m][1];
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------------------------
// element

#[derive(Debug, Clone)]
pub struct ElementEdge {
    pub edge: usize,
    /// `n_e · n_∂K`
    pub sign: f64,
    pub normal: Point,
    pub boundary: bool,
    pub basis: EdgeBasis,
    pub rule: EdgeRule,
    /// Stress basis values at `rule` points, `[point][m]`.
    stress_vals: Vec<Vec<f64>>,
    /// Velocity basis values at `rule` points.
    velocity_vals: Vec<Vec<f64>>,
    /// Legendre values at `rule` points.
    edge_vals: Vec<Vec<f64>>,
}

/// Per-cell bases, quadrature and tabulations.
#[derive(Debug, Clone)]
pub struct Element {
    pub cell: usize,
    pub k: usize,
    pub diameter: f64,
    pub area: f64,
    pub stress_basis: CellBasis,
    pub velocity_basis: CellBasis,
    pub rule: QuadratureRule,
    pub data_rule: QuadratureRule,
    pub edges: Vec<ElementEdge>,
    stress_vals: Vec<Vec<f64>>,
    velocity_vals: Vec<Vec<f64>>,
    velocity_grads: Vec<Vec<[f64; 2]>>,
    mass_stress: Mat<f64>,
    mass_velocity: Mat<f64>,
}

fn mass_matrix(basis: &CellBasis, rule: &QuadratureRule) -> Mat<f64> {
    let n = basis.dim();
    let mut m = Mat::<f64>::zeros(n, n);
    let mut v = vec![0.0; n];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_into(*p, &mut v);
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] += w * v[i] * v[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
    m
}

fn chol_solve(m: &Mat<f64>, rhs: &Mat<f64>, cell: usize) -> Result<Mat<f64>, WgError> {
    let llt = m.llt(Side::Lower).map_err(|_| WgError::SingularMass { cell })?;
    Ok(llt.solve(rhs))
}

impl Element {
    pub fn new(
        mesh: &PolygonalMesh,
        cell: usize,
        k: usize,
        form_exactness: usize,
        data_exactness: usize,
    ) -> Result<Self, WgError> {
        let poly = mesh.cell_polygon(cell);
        let rule = cell_quadrature(&poly, form_exactness).map_err(|source| WgError::CellQuadrature { cell, source })?;
        let data_rule =
            cell_quadrature(&poly, data_exactness).map_err(|source| WgError::CellQuadrature { cell, source })?;
        let stress_basis = cell_basis(mesh, cell, k);
        let velocity_basis = cell_basis(mesh, cell, k + 1);
        let stress_vals = rule.points.iter().map(|&p| stress_basis.eval(p)).collect();
        let velocity_vals = rule.points.iter().map(|&p| velocity_basis.eval(p)).collect();
        let velocity_grads = rule.points.iter().map(|&p| velocity_basis.grad(p)).collect();
        let mut edges = Vec::with_capacity(mesh.cell_edges(cell).len());
        for ce in mesh.cell_edges(cell) {
            let (a, b) = mesh.edge_endpoints(ce.edge);
            let rule =
                edge_quadrature(a, b, form_exactness).map_err(|source| WgError::EdgeQuadrature { edge: ce.edge, source })?;
            edges.push(ElementEdge {
                edge: ce.edge,
                sign: ce.sign,
                normal: mesh.edge_normal(ce.edge),
                boundary: mesh.edge(ce.edge).is_boundary(),
                basis: EdgeBasis::new(k, a, b),
                stress_vals: rule.points.iter().map(|&p| stress_basis.eval(p)).collect(),
                velocity_vals: rule.points.iter().map(|&p| velocity_basis.eval(p)).collect(),
                edge_vals: rule.params.iter().map(|&s| legendre(k, s)).collect(),
                rule,
            });
        }
        let mass_stress = mass_matrix(&stress_basis, &rule);
        let mass_velocity = mass_matrix(&velocity_basis, &rule);
        Ok(Self {
            cell,
            k,
            diameter: mesh.cell_diameter(cell),
            area: mesh.cell_area(cell),
            stress_basis,
            velocity_basis,
            rule,
            data_rule,
            edges,
            stress_vals,
            velocity_vals,
            velocity_grads,
            mass_stress,
            mass_velocity,
        })
    }

    pub fn for_degree(mesh: &PolygonalMesh, cell: usize, k: usize) -> Result<Self, WgError> {
        Self::new(mesh, cell, k, form_exactness(k), data_exactness(k))
    }

    /// `dim P_k(K)`
    pub fn nk(&self) -> usize {
        self.stress_basis.dim()
    }

    /// `dim P_{k+1}(K)`
    pub fn nv(&self) -> usize {
        self.velocity_basis.dim()
    }

    pub fn n_local_stress(&self) -> usize {
        4 * self.nk() + self.edges.len() * 2 * (self.k + 1)
    }

    pub fn n_local_velocity(&self) -> usize {
        2 * self.nv()
    }

    pub fn interior_index(&self, comp: usize, m: usize) -> usize {
        comp * self.nk() + m
    }

    pub fn edge_index(&self, local_edge: usize, comp: usize, m: usize) -> usize {
        4 * self.nk() + (local_edge * 2 + comp) * (self.k + 1) + m
    }

    pub fn mass_stress(&self) -> &Mat<f64> {
        &self.mass_stress
    }

    pub fn mass_velocity(&self) -> &Mat<f64> {
        &self.mass_velocity
    }

    /// Tabulated velocity basis at `rule` points.
    pub fn velocity_values(&self) -> &[Vec<f64>] {
        &self.velocity_vals
    }

    pub fn velocity_gradients(&self) -> &[Vec<[f64; 2]>] {
        &self.velocity_grads
    }

    pub fn stress_values(&self) -> &[Vec<f64>] {
        &self.stress_vals
    }

    /// Right-hand side of the weak divergence system: row `(i, m)` holds
    /// `-(τ_0, ∇(ψ_m e_i))_K + Σ_e ⟨τ_b (n_e · n_∂K), ψ_m e_i⟩_e` as a linear functional of the
    /// local stress unknowns. This is also the local matrix of `B_h`.
    pub fn divergence_rhs(&self) -> Mat<f64> {
        let (nk, nv, k) = (self.nk(), self.nv(), self.k);
        let mut r = Mat::<f64>::zeros(2 * nv, self.n_local_stress());
        for (q, w) in self.rule.weights.iter().enumerate() {
            let phi = &self.stress_vals[q];
            let grad = &self.velocity_grads[q];
            for i in 0..2 {
                for j in 0..2 {
                    let comp = 2 * i + j;
                    for m in 0..nv {
                        let g = w * grad[m][j];
                        for n in 0..nk {
                            r[(i * nv + m, comp * nk + n)] -= g * phi[n];
                        }
                    }
                }
            }
        }
        for (le, ed) in self.edges.iter().enumerate() {
            for (q, w) in ed.rule.weights.iter().enumerate() {
                let psi = &ed.velocity_vals[q];
                let leg = &ed.edge_vals[q];
                for i in 0..2 {
                    for m in 0..nv {
                        for n in 0..=k {
                            r[(i * nv + m, self.edge_index(le, i, n))] += ed.sign * w * psi[m] * leg[n];
                        }
                    }
                }
            }
        }
        r
    }

    /// Matrix mapping local stress unknowns to the coefficients of `div_wh τ` in `P_{k+1}(K)^2`.
    pub fn divergence_operator(&self) -> Result<Mat<f64>, WgError> {
        let r = self.divergence_rhs();
        let nv = self.nv();
        let mut out = Mat::<f64>::zeros(2 * nv, r.ncols());
        for i in 0..2 {
            let block = r.subrows(i * nv, nv).to_owned();
            let sol = chol_solve(&self.mass_velocity, &block, self.cell)?;
            out.subrows_mut(i * nv, nv).copy_from(&sol);
        }
        Ok(out)
    }

    pub fn weak_divergence(&self, tau_local: &[f64]) -> Result<Vec<f64>, WgError> {
        let d = self.divergence_operator()?;
        Ok(matvec(&d, tau_local))
    }

    /// Block-diagonal `∫_K τ_0 : ζ_0` on the local stress unknowns.
    pub fn interior_mass(&self) -> Mat<f64> {
        let nk = self.nk();
        let mut m = Mat::<f64>::zeros(self.n_local_stress(), self.n_local_stress());
        for comp in 0..4 {
            m.submatrix_mut(comp * nk, comp * nk, nk, nk).copy_from(&self.mass_stress);
        }
        m
    }

    /// `∫_K τ_0^d : ζ_0^d`
    pub fn deviatoric_mass(&self) -> Mat<f64> {
        let nk = self.nk();
        let mut m = Mat::<f64>::zeros(self.n_local_stress(), self.n_local_stress());
        for a in 0..4 {
            for b in 0..4 {
                // (e_a)^d : (e_b)^d = δ_ab - ½ δ_{a diag} δ_{b diag}
                let diag = |c: usize| c == 0 || c == 3;
                let coef = if a == b { 1.0 } else { 0.0 } - if diag(a) && diag(b) { 0.5 } else { 0.0 };
                if coef == 0.0 {
                    continue;
                }
                for i in 0..nk {
                    for j in 0..nk {
                        m[(a * nk + i, b * nk + j)] += coef * self.mass_stress[(i, j)];
                    }
                }
            }
        }
        m
    }

    /// Rows of `(τ_0 n_e - τ_b)` at point `q` of local edge `le`, shape `2 x n_local_stress`.
    fn jump_rows(&self, le: usize, q: usize) -> [Vec<f64>; 2] {
        let ed = &self.edges[le];
        let nk = self.nk();
        let n = ed.normal;
        let phi = &ed.stress_vals[q];
        let leg = &ed.edge_vals[q];
        let mut rows = [vec![0.0; self.n_local_stress()], vec![0.0; self.n_local_stress()]];
        for (i, row) in rows.iter_mut().enumerate() {
            for j in 0..2 {
                for m in 0..nk {
                    row[(2 * i + j) * nk + m] = phi[m] * n[j];
                }
            }
            for m in 0..=self.k {
                row[self.edge_index(le, i, m)] = -leg[m];
            }
        }
        rows
    }

    /// `h_K ⟨τ_0 n - τ_b n, ζ_0 n - ζ_b n⟩_∂K`
    pub fn stabilizer(&self) -> Mat<f64> {
        let n = self.n_local_stress();
        let mut s = Mat::<f64>::zeros(n, n);
        for (le, ed) in self.edges.iter().enumerate() {
            for (q, &w) in ed.rule.weights.iter().enumerate() {
                let rows = self.jump_rows(le, q);
                let ww = w * self.diameter;
                for row in &rows {
                    let nz: Vec<usize> = (0..n).filter(|&i| row[i] != 0.0).collect();
                    for &i in &nz {
                        for &j in &nz {
                            s[(i, j)] += ww * row[i] * row[j];
                        }
                    }
                }
            }
        }
        s
    }

    /// `∫_K tr τ_0` for each local stress unknown.
    pub fn trace_moments(&self) -> Vec<f64> {
        let nk = self.nk();
        let mut t = vec![0.0; self.n_local_stress()];
        for (q, w) in self.rule.weights.iter().enumerate() {
            for m in 0..nk {
                let v = w * self.stress_vals[q][m];
                t[m] += v;
                t[3 * nk + m] += v;
            }
        }
        t
    }

    /// `Σ_i (∇v_i, ∇w_i)_K` over the local velocity unknowns.
    pub fn velocity_stiffness(&self) -> Mat<f64> {
        let nv = self.nv();
        let mut g = Mat::<f64>::zeros(2 * nv, 2 * nv);
        for (q, w) in self.rule.weights.iter().enumerate() {
            let d = &self.velocity_grads[q];
            for a in 0..nv {
                for b in 0..nv {
                    let v = w * (d[a][0] * d[b][0] + d[a][1] * d[b][1]);
                    g[(a, b)] += v;
                    g[(nv + a, nv + b)] += v;
                }
            }
        }
        g
    }

    /// `⟨v_i, L_m⟩_e` for local edge `le`: rows `(i, m)`, columns the local velocity unknowns.
    pub fn edge_velocity_moments(&self, le: usize) -> Mat<f64> {
        let (nv, k) = (self.nv(), self.k);
        let ed = &self.edges[le];
        let mut r = Mat::<f64>::zeros(2 * (k + 1), 2 * nv);
        for (q, w) in ed.rule.weights.iter().enumerate() {
            for m in 0..=k {
                for a in 0..nv {
                    let v = w * ed.edge_vals[q][m] * ed.velocity_vals[q][a];
                    r[(m, a)] += v;
                    r[(k + 1 + m, nv + a)] += v;
                }
            }
        }
        r
    }
}

pub(crate) fn matvec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

pub(crate) fn quad_form(m: &Mat<f64>, x: &[f64]) -> f64 {
    let mx = matvec(m, x);
    mx.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Builds the elements of every cell in parallel (order preserved).
pub fn build_elements(
    mesh: &PolygonalMesh,
    k: usize,
    form_exactness: usize,
    data_exactness: usize,
) -> Result<Vec<Element>, WgError> {
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| Element::new(mesh, c, k, form_exactness, data_exactness))
        .collect()
}

// ---------------------------------------------------------------------------------------------
// projections

/// L² projection of a vector/tensor-valued function onto `P_r(K)^N`, component-major.
pub fn project_interior<const N: usize>(
    mesh: &PolygonalMesh,
    cell: usize,
    r: usize,
    exactness: usize,
    f: impl Fn(Point) -> [f64; N],
) -> Result<Vec<f64>, WgError> {
    let basis = cell_basis(mesh, cell, r);
    let rule = cell_quadrature(&mesh.cell_polygon(cell), exactness.max(2 * r))
        .map_err(|source| WgError::CellQuadrature { cell, source })?;
    project_with(&basis, &rule, cell, f)
}

pub(crate) fn project_with<const N: usize>(
    basis: &CellBasis,
    rule: &QuadratureRule,
    cell: usize,
    f: impl Fn(Point) -> [f64; N],
) -> Result<Vec<f64>, WgError> {
    let n = basis.dim();
    let mass = mass_matrix(basis, rule);
    let mut rhs = Mat::<f64>::zeros(n, N);
    let mut v = vec![0.0; n];
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        basis.eval_into(*p, &mut v);
        let fv = f(*p);
        for c in 0..N {
            for m in 0..n {
                rhs[(m, c)] += w * fv[c] * v[m];
            }
        }
    }
    let sol = chol_solve(&mass, &rhs, cell)?;
    let mut out = Vec::with_capacity(N * n);
    for c in 0..N {
        out.extend((0..n).map(|m| sol[(m, c)]));
    }
    Ok(out)
}

/// L² projection of a vector function onto `P_r(e)^2` in the Legendre basis, component-major.
pub fn project_edge(
    mesh: &PolygonalMesh,
    edge: usize,
    r: usize,
    exactness: usize,
    g: impl Fn(Point) -> [f64; 2],
) -> Result<Vec<f64>, WgError> {
    let (a, b) = mesh.edge_endpoints(edge);
    let basis = EdgeBasis::new(r, a, b);
    let rule = edge_quadrature(a, b, exactness.max(2 * r)).map_err(|source| WgError::EdgeQuadrature { edge, source })?;
    let mut out = vec![0.0; 2 * (r + 1)];
    for ((p, &s), &w) in rule.points.iter().zip(&rule.params).zip(&rule.weights) {
        let gv = g(*p);
        let l = legendre(r, s);
        for c in 0..2 {
            for m in 0..=r {
                out[c * (r + 1) + m] += w * gv[c] * l[m];
            }
        }
    }
    for c in 0..2 {
        for m in 0..=r {
            out[c * (r + 1) + m] /= basis.norm_sq(m);
        }
    }
    Ok(out)
}

fn flatten(t: Tensor) -> [f64; 4] {
    [t[0][0], t[0][1], t[1][0], t[1][1]]
}

/// Projection of a smooth tensor field into the weak Galerkin space: interior parts are L²
/// projections onto `P_k(K)`, edge parts L² projections of `σ n_e` onto `P_k(e)`.
pub fn project_wg(
    mesh: &PolygonalMesh,
    k: usize,
    exactness: usize,
    sigma: impl Fn(Point) -> Tensor + Sync,
) -> Result<WGTensorField, WgError> {
    let interior: Vec<Vec<f64>> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| project_interior(mesh, c, k, exactness, |p| flatten(sigma(p))))
        .collect::<Result<_, _>>()?;
    let edge: Vec<Vec<f64>> = (0..mesh.n_edges())
        .into_par_iter()
        .map(|e| {
            let n = mesh.edge_normal(e);
            project_edge(mesh, e, k, exactness, |p| {
                let s = sigma(p);
                [s[0][0] * n[0] + s[0][1] * n[1], s[1][0] * n[0] + s[1][1] * n[1]]
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(WGTensorField { k, interior: interior.concat(), edge: edge.concat() })
}

/// L² projection of a vector field onto the broken space `P_degree(K)^2`.
pub fn project_velocity(
    mesh: &PolygonalMesh,
    degree: usize,
    exactness: usize,
    u: impl Fn(Point) -> [f64; 2] + Sync,
) -> Result<DGVectorField, WgError> {
    let coeffs: Vec<Vec<f64>> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| project_interior(mesh, c, degree, exactness, &u))
        .collect::<Result<_, _>>()?;
    Ok(DGVectorField { degree, coeffs: coeffs.concat() })
}

/// Discrete weak divergence of `tau` on `cell`, as coefficients in `P_{k+1}(K)^2`.
pub fn weak_divergence(mesh: &PolygonalMesh, tau: &WGTensorField, cell: usize) -> Result<Vec<f64>, WgError> {
    let el = Element::for_degree(mesh, cell, tau.k)?;
    el.weak_divergence(&tau.local(mesh, cell))
}

// ---------------------------------------------------------------------------------------------
// discrete norms

/// `‖τ_0‖_0` over the mesh.
pub fn stress_l2_norm(elements: &[Element], tau: &WGTensorField) -> f64 {
    let s: f64 = elements
        .iter()
        .map(|el| {
            let c = tau.interior_coeffs(el.cell);
            let nk = el.nk();
            (0..4).map(|comp| quad_form(&el.mass_stress, &c[comp * nk..(comp + 1) * nk])).sum::<f64>()
        })
        .sum();
    s.max(0.0).sqrt()
}

/// `‖τ‖_{H,h}² = Σ_K ‖τ_0‖²_K + S^K(τ, τ)`
pub fn stress_h_norm(mesh: &PolygonalMesh, elements: &[Element], tau: &WGTensorField) -> f64 {
    let s: f64 = elements
        .par_iter()
        .map(|el| {
            let loc = tau.local(mesh, el.cell);
            let mut g = el.interior_mass();
            g += el.stabilizer();
            quad_form(&g, &loc)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    s.max(0.0).sqrt()
}

/// `‖v‖_{1,h}² = Σ_K |v|²_{1,K} + Σ_e h_e⁻¹ ‖P_{b,k} [[v]]‖²_e`
pub fn velocity_1h_norm(mesh: &PolygonalMesh, elements: &[Element], v: &DGVectorField) -> f64 {
    let k = elements.first().map(|e| e.k).unwrap_or(0);
    let mut s = 0.0;
    for el in elements {
        let c = v.cell_coeffs(el.cell);
        let nv = el.nv();
        for (q, w) in el.rule.weights.iter().enumerate() {
            let g = &el.velocity_grads[q];
            for i in 0..2 {
                let (mut dx, mut dy) = (0.0, 0.0);
                for m in 0..nv {
                    dx += c[i * nv + m] * g[m][0];
                    dy += c[i * nv + m] * g[m][1];
                }
                s += w * (dx * dx + dy * dy);
            }
        }
    }
    for jt in mesh.jump_trace_data() {
        let coeffs = match project_edge(mesh, jt.edge, k, form_exactness(k), |p| {
            jt.jump(|c, x| v.value(mesh, c, x), p)
        }) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let basis = edge_basis(mesh, jt.edge, k);
        let mut e2 = 0.0;
        for c in 0..2 {
            for m in 0..=k {
                e2 += coeffs[c * (k + 1) + m].powi(2) * basis.norm_sq(m);
            }
        }
        s += e2 / mesh.edge_length(jt.edge);
    }
    s.max(0.0).sqrt()
}
