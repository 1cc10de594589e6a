//! Global assembly of the augmented saddle-point system, sparse direct solves and the Picard
//! fixed-point driver.
//!
//! Unknowns are ordered as in [`DofMap`]: `[σ interior | σ edge | u | λ]`. The matrix is
//!
//! ```text
//! [ A     Bᵀ + C_z   t ]
//! [ B     0          0 ]
//! [ tᵀ    0          0 ]
//! ```
//!
//! The sparsity pattern is fixed at construction (convective entries are stored explicitly even
//! when zero) so the symbolic factorization is computed once and reused across Picard steps.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Mat, Par};
use rayon::prelude::*;
use thiserror::Error;

use crate::forms::{local_a, local_b, local_c, local_f, local_g, local_trace, BoundaryData, ConfigError, ProblemConfig};
use crate::mesh::PolygonalMesh;
use crate::wg_space::{build_elements, stress_l2_norm, DGVectorField, DofMap, Element, WGTensorField, WgError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("singular factorization at the {block} block (pivot {index})")]
    Singular { block: &'static str, index: usize },
    #[error("non-finite solution in the {block} block (unknown {index})")]
    NonFinite { block: &'static str, index: usize },
    #[error("residual {residual:.3e} exceeds {bound:.3e} after refinement")]
    Residual { residual: f64, bound: f64 },
    #[error("factorization failed: {0}")]
    Factorization(String),
}

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Space(#[from] WgError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("Picard tolerance must be positive, got {0}")]
    Tolerance(f64),
}

/// Name of the block an unknown belongs to.
pub fn block_name(dofs: &DofMap, index: usize) -> &'static str {
    if index < dofs.stress_edge_offset {
        "stress-interior"
    } else if index < dofs.velocity_offset {
        "stress-edge"
    } else if index < dofs.multiplier {
        "velocity"
    } else {
        "multiplier"
    }
}

#[derive(Debug, Clone, Copy)]
struct Triplet {
    row: u32,
    col: u32,
    val: f64,
}

/// Square sparse matrix in compressed-column form plus right-hand side.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub dofs: DofMap,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Null vector of the block without the multiplier, if known.
    pub kernel: Option<Vec<f64>>,
}

impl SaddleSystem {
    fn from_triplets(dofs: DofMap, mut triplets: Vec<Triplet>, rhs: Vec<f64>) -> Self {
        // a total order makes duplicate summation independent of insertion order
        triplets.par_sort_unstable_by(|a, b| (a.col, a.row).cmp(&(b.col, b.row)).then(a.val.total_cmp(&b.val)));
        let n = dofs.total;
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(triplets.len() / 2);
        let mut values = Vec::with_capacity(triplets.len() / 2);
        let mut last: Option<(u32, u32)> = None;
        for t in &triplets {
            if last == Some((t.col, t.row)) {
                *values.last_mut().unwrap() += t.val;
            } else {
                row_idx.push(t.row as usize);
                values.push(t.val);
                col_ptr[t.col as usize + 1] += 1;
                last = Some((t.col, t.row));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Self { dofs, col_ptr, row_idx, values, rhs, kernel: None }
    }

    pub fn dim(&self) -> usize {
        self.dofs.total
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Storage slot of entry `(row, col)`, if it is in the pattern.
    pub fn slot(&self, row: usize, col: usize) -> Option<usize> {
        let (s, e) = (self.col_ptr[col], self.col_ptr[col + 1]);
        self.row_idx[s..e].binary_search(&row).ok().map(|i| s + i)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.slot(row, col).map_or(0.0, |s| self.values[s])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for c in 0..self.dim() {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for s in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[s]] += self.values[s] * xc;
            }
        }
        y
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        let n = self.dim();
        SparseColMatRef::new(SymbolicSparseColMatRef::new_checked(n, n, &self.col_ptr, None, &self.row_idx), &self.values)
    }

    /// Dense copy, for small diagnostic problems.
    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.dim();
        let mut m = Mat::<f64>::zeros(n, n);
        for c in 0..n {
            for s in self.col_ptr[c]..self.col_ptr[c + 1] {
                m[(self.row_idx[s], c)] += self.values[s];
            }
        }
        m
    }
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn lu_error(dofs: &DofMap, e: LuError) -> SolveError {
    match e {
        LuError::SymbolicSingular { index } => {
            SolveError::Singular { block: block_name(dofs, index.min(dofs.total - 1)), index }
        }
        LuError::Generic(g) => SolveError::Factorization(format!("{g:?}")),
    }
}

fn lu_apply(lu: &Lu<usize, f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
    lu.solve_in_place(rhs.as_mut());
    (0..n).map(|i| rhs[(i, 0)]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves with `solve` and applies up to three steps of iterative refinement against the full
/// system.
fn refine(sys: &SaddleSystem, solve: impl Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>, SolveError> {
    let mut x = solve(&sys.rhs);
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(SolveError::NonFinite { block: block_name(&sys.dofs, i), index: i });
    }
    let bound = 1e-9 * (1.0 + norm_inf(&sys.rhs));
    let mut residual = f64::INFINITY;
    for step in 0..=3 {
        let ax = sys.matvec(&x);
        let r: Vec<f64> = sys.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        residual = norm_inf(&r);
        if residual <= bound || step == 3 {
            break;
        }
        let dx = solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
    }
    if residual > bound {
        return Err(SolveError::Residual { residual, bound });
    }
    Ok(x)
}

/// Pattern of the system without the multiplier row and column, with unknown `0` pinned.
struct Reduced {
    key: (usize, usize),
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    /// Full-system slot of every reduced slot.
    src: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl Reduced {
    fn new(sys: &SaddleSystem) -> Result<Self, SolveError> {
        let m = sys.dofs.multiplier;
        let mut col_ptr = vec![0usize; m + 1];
        let (mut row_idx, mut src) = (Vec::new(), Vec::new());
        for c in 0..m {
            for s in sys.col_ptr[c]..sys.col_ptr[c + 1] {
                let r = sys.row_idx[s];
                // row and column 0 keep only the diagonal
                if r < m && ((r != 0 && c != 0) || r == c) {
                    row_idx.push(r);
                    src.push(s);
                }
            }
            col_ptr[c + 1] = row_idx.len();
        }
        if sys.slot(0, 0).is_none() {
            return Err(SolveError::Factorization("pinned unknown has no diagonal entry".into()));
        }
        let symbolic = SymbolicLu::try_new(SymbolicSparseColMatRef::new_checked(m, m, &col_ptr, None, &row_idx))
            .map_err(|e| SolveError::Factorization(format!("{e:?}")))?;
        Ok(Self { key: (sys.dim(), sys.nnz()), col_ptr, row_idx, src, symbolic })
    }
}

/// Direct solver with cached symbolic factorizations.
///
/// When the system carries the null vector `w` of its unbordered block (which is also a null
/// vector of the transpose), the dense multiplier row and column are eliminated analytically:
/// `λ = wᵀb / wᵀt`, the singular block is solved with unknown `0` pinned, and a multiple of `w`
/// restores the trace constraint. Otherwise, or if that path fails, the bordered matrix is
/// factorized as is.
#[derive(Default)]
pub struct LinearSolver {
    full: Option<SymbolicLu<usize>>,
    reduced: Option<Reduced>,
}

impl LinearSolver {
    pub fn solve(&mut self, sys: &SaddleSystem) -> Result<Vec<f64>, SolveError> {
        // sequential kernels keep the factorization bitwise reproducible
        faer::set_global_parallelism(Par::Seq);
        if sys.kernel.is_some() && sys.dofs.multiplier + 1 == sys.dim() {
            if let Ok(x) = self.solve_reduced(sys) {
                return Ok(x);
            }
        }
        self.solve_full(sys)
    }

    fn solve_full(&mut self, sys: &SaddleSystem) -> Result<Vec<f64>, SolveError> {
        let mat = sys.as_faer();
        if self.full.is_none() {
            self.full = Some(SymbolicLu::try_new(mat.symbolic()).map_err(|e| SolveError::Factorization(format!("{e:?}")))?);
        }
        let symbolic = self.full.clone().unwrap();
        let lu = Lu::try_new_with_symbolic(symbolic, mat).map_err(|e| lu_error(&sys.dofs, e))?;
        refine(sys, |b| lu_apply(&lu, b))
    }

    fn solve_reduced(&mut self, sys: &SaddleSystem) -> Result<Vec<f64>, SolveError> {
        let w = sys.kernel.as_deref().unwrap();
        if self.reduced.as_ref().map(|r| r.key) != Some((sys.dim(), sys.nnz())) {
            self.reduced = Some(Reduced::new(sys)?);
        }
        let red = self.reduced.as_ref().unwrap();
        let m = sys.dofs.multiplier;
        let mut values: Vec<f64> = red.src.iter().map(|&s| sys.values[s]).collect();
        values[red.col_ptr[0]] = 1.0;
        let mat = SparseColMatRef::new(SymbolicSparseColMatRef::new_checked(m, m, &red.col_ptr, None, &red.row_idx), &values);
        let lu = Lu::try_new_with_symbolic(red.symbolic.clone(), mat).map_err(|e| lu_error(&sys.dofs, e))?;
        let mut t = vec![0.0; m];
        for s in sys.col_ptr[m]..sys.col_ptr[m + 1] {
            if sys.row_idx[s] < m {
                t[sys.row_idx[s]] = sys.values[s];
            }
        }
        let wt = dot(w, &t);
        if wt == 0.0 {
            return Err(SolveError::Factorization("kernel vector orthogonal to the constraint".into()));
        }
        refine(sys, |b| {
            let lambda = dot(w, &b[..m]) / wt;
            let mut r: Vec<f64> = b[..m].iter().zip(&t).map(|(bi, ti)| bi - ti * lambda).collect();
            r[0] = 0.0;
            let mut x = lu_apply(&lu, &r);
            let alpha = (b[m] - dot(&t, &x)) / wt;
            for (xi, wi) in x.iter_mut().zip(w) {
                *xi += alpha * wi;
            }
            x.push(lambda);
            x
        })
    }
}

/// Fixed part of the system for a given mesh, configuration and data. Only the convective
/// block changes between Picard steps.
pub struct Assembler<'m> {
    pub mesh: &'m PolygonalMesh,
    pub config: ProblemConfig,
    pub dofs: DofMap,
    pub elements: Vec<Element>,
    base: SaddleSystem,
    /// Per cell, the storage slot of each local `C` entry (interior stress rows, row-major).
    c_slots: Vec<Vec<usize>>,
}

struct LocalBlocks {
    a: Mat<f64>,
    b: Mat<f64>,
    g: Vec<f64>,
    f: Vec<f64>,
    t: Vec<f64>,
}

impl<'m> Assembler<'m> {
    pub fn new(mesh: &'m PolygonalMesh, config: &ProblemConfig, data: &BoundaryData) -> Result<Self, SystemError> {
        config.validate(mesh.n_cells())?;
        data.check_compatibility(mesh, config.data_exactness());
        let k = config.k;
        let dofs = DofMap::new(mesh, k);
        let elements = build_elements(mesh, k, config.form_exactness(), config.data_exactness())?;
        let data_ex = config.data_exactness();
        let locals: Vec<LocalBlocks> = elements
            .par_iter()
            .map(|el| LocalBlocks {
                a: local_a(el, config.nu, config.rho.on(el.cell)),
                b: local_b(el),
                g: local_g(el, &data.g, data_ex),
                f: local_f(el, &data.f),
                t: local_trace(el),
            })
            .collect();

        let mut triplets = Vec::new();
        let mut rhs = vec![0.0; dofs.total];
        let push = |v: &mut Vec<Triplet>, row: usize, col: usize, val: f64| {
            v.push(Triplet { row: row as u32, col: col as u32, val })
        };
        for (el, loc) in elements.iter().zip(&locals) {
            let sd = dofs.cell_stress_dofs(mesh, el.cell);
            let vd: Vec<usize> = dofs.cell_velocity_dofs(el.cell).collect();
            for (j, &gj) in sd.iter().enumerate() {
                for (i, &gi) in sd.iter().enumerate() {
                    push(&mut triplets, gi, gj, loc.a[(i, j)]);
                }
            }
            for (j, &gj) in sd.iter().enumerate() {
                for (i, &gi) in vd.iter().enumerate() {
                    let b = loc.b[(i, j)];
                    push(&mut triplets, gi, gj, b);
                    push(&mut triplets, gj, gi, b);
                }
            }
            for (j, &gj) in sd.iter().enumerate() {
                if loc.t[j] != 0.0 {
                    push(&mut triplets, gj, dofs.multiplier, loc.t[j]);
                    push(&mut triplets, dofs.multiplier, gj, loc.t[j]);
                }
                rhs[gj] += loc.g[j];
            }
            for (i, &gi) in vd.iter().enumerate() {
                rhs[gi] += loc.f[i];
            }
        }
        let mut base = SaddleSystem::from_triplets(dofs.clone(), triplets, rhs);
        base.kernel = Some(identity_kernel(mesh, &dofs));
        let c_slots = elements
            .iter()
            .map(|el| {
                let sd = dofs.cell_stress_dofs(mesh, el.cell);
                let vd: Vec<usize> = dofs.cell_velocity_dofs(el.cell).collect();
                let mut slots = Vec::with_capacity(4 * el.nk() * vd.len());
                for &gi in &sd[..4 * el.nk()] {
                    for &gj in &vd {
                        slots.push(base.slot(gi, gj).expect("convective entry outside the pattern"));
                    }
                }
                slots
            })
            .collect();
        Ok(Self { mesh, config: config.clone(), dofs, elements, base, c_slots })
    }

    /// The system with the convective block frozen at `z` (ignored in Stokes mode).
    pub fn system(&self, z: &DGVectorField) -> SaddleSystem {
        let mut sys = self.base.clone();
        if !self.config.convection || z.coeffs.iter().all(|&v| v == 0.0) {
            return sys;
        }
        let nu = self.config.nu;
        let blocks: Vec<Mat<f64>> =
            self.elements.par_iter().map(|el| local_c(el, nu, z.cell_coeffs(el.cell))).collect();
        for ((el, c), slots) in self.elements.iter().zip(&blocks).zip(&self.c_slots) {
            let ncol = c.ncols();
            for i in 0..4 * el.nk() {
                for j in 0..ncol {
                    sys.values[slots[i * ncol + j]] += c[(i, j)];
                }
            }
        }
        sys
    }

    pub fn split(&self, x: &[f64]) -> (WGTensorField, DGVectorField, f64) {
        (WGTensorField::from_global(&self.dofs, x), DGVectorField::from_global(&self.dofs, x), x[self.dofs.multiplier])
    }
}

/// Coefficients of the constant identity tensor (`τ_0 = I`, `τ_b = n_e`): annihilated by `A_h`,
/// `B_h` and every convective block.
pub fn identity_kernel(mesh: &PolygonalMesh, dofs: &DofMap) -> Vec<f64> {
    let mut w = vec![0.0; dofs.multiplier];
    for c in 0..dofs.n_cells {
        w[dofs.interior(c, 0, 0)] = 1.0;
        w[dofs.interior(c, 3, 0)] = 1.0;
    }
    for e in 0..dofs.n_edges {
        let n = mesh.edge_normal(e);
        w[dofs.edge(e, 0, 0)] = n[0];
        w[dofs.edge(e, 1, 0)] = n[1];
    }
    w
}

/// Assembles the linearized system at `z`.
pub fn assemble(
    mesh: &PolygonalMesh,
    config: &ProblemConfig,
    data: &BoundaryData,
    z: &DGVectorField,
) -> Result<SaddleSystem, SystemError> {
    Ok(Assembler::new(mesh, config, data)?.system(z))
}

/// One-off direct solve, returning the stress, velocity and multiplier.
pub fn solve_linear(sys: &SaddleSystem) -> Result<(WGTensorField, DGVectorField, f64), SolveError> {
    let x = LinearSolver::default().solve(sys)?;
    Ok((WGTensorField::from_global(&sys.dofs, &x), DGVectorField::from_global(&sys.dofs, &x), x[sys.dofs.multiplier]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PicardStatus {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolverState {
    pub stress: WGTensorField,
    pub velocity: DGVectorField,
    pub lambda: f64,
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub status: PicardStatus,
    pub dofs: DofMap,
}

impl SolverState {
    pub fn converged(&self) -> bool {
        self.status == PicardStatus::Converged
    }
}

/// `‖v‖_{0,4}` with the Euclidean norm of the vector values.
pub fn velocity_l4_norm(elements: &[Element], v: &DGVectorField) -> f64 {
    let mut s = 0.0;
    for el in elements {
        let c = v.cell_coeffs(el.cell);
        let nv = el.nv();
        let mut psi = vec![0.0; nv];
        for (p, &w) in el.data_rule.points.iter().zip(&el.data_rule.weights) {
            el.velocity_basis.eval_into(*p, &mut psi);
            let u0: f64 = (0..nv).map(|m| c[m] * psi[m]).sum();
            let u1: f64 = (0..nv).map(|m| c[nv + m] * psi[m]).sum();
            s += w * (u0 * u0 + u1 * u1).powi(2);
        }
    }
    s.sqrt().sqrt()
}

/// Growth of the increment over its running minimum that aborts the iteration.
pub const DIVERGENCE_FACTOR: f64 = 1e3;

/// Picard iteration from the zero state, stopping when
/// `‖σ_0^m - σ_0^{m-1}‖_0 + ‖u^m - u^{m-1}‖_{0,4} ≤ tol`.
pub fn picard_solve(
    mesh: &PolygonalMesh,
    config: &ProblemConfig,
    data: &BoundaryData,
    tol: f64,
    max_iter: usize,
) -> Result<SolverState, SystemError> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(SystemError::Tolerance(tol));
    }
    let asm = Assembler::new(mesh, config, data)?;
    let mut solver = LinearSolver::default();
    let mut stress = WGTensorField::zeros(mesh, config.k);
    let mut velocity = DGVectorField::zeros(mesh, config.k + 1);
    let mut lambda = 0.0;
    let mut increments = Vec::new();
    let mut status = PicardStatus::MaxIterations;
    let mut min_inc = f64::INFINITY;
    let max_iter = if config.convection { max_iter } else { max_iter.min(1) };
    for _ in 0..max_iter {
        let x = solver.solve(&asm.system(&velocity))?;
        let (s, u, l) = asm.split(&x);
        let mut ds = s.clone();
        ds.axpy(-1.0, &stress);
        let mut du = u.clone();
        for (a, b) in du.coeffs.iter_mut().zip(&velocity.coeffs) {
            *a -= b;
        }
        let inc = stress_l2_norm(&asm.elements, &ds) + velocity_l4_norm(&asm.elements, &du);
        increments.push(inc);
        (stress, velocity, lambda) = (s, u, l);
        if !config.convection || inc <= tol {
            status = PicardStatus::Converged;
            break;
        }
        if inc > DIVERGENCE_FACTOR * min_inc || !inc.is_finite() {
            status = PicardStatus::Diverged;
            break;
        }
        min_inc = min_inc.min(inc);
    }
    Ok(SolverState { stress, velocity, lambda, iterations: increments.len(), increments, status, dofs: asm.dofs })
}
