//! Dense numerical probes of the discrete stability constants on small meshes.
//!
//! * `β_h`: smallest generalized singular value of `B_h` with respect to the Gram matrices of
//!   `‖·‖_{H,h}` on `X_h` and `‖·‖_{1,h}` on `Y_h`.
//! * `α_h`: smallest generalized eigenvalue of `A_h` against `‖·‖²_{H,h}` on the kernel of `B_h`
//!   intersected with `X_{0,h}` (the constant identity lies in the kernel of both forms).
//! * lower-bound ratio `(‖τ_0^d‖² + ‖div_wh τ‖²_{0,4/3}) / ‖τ_0‖²` minimized over random
//!   zero-trace fields.

use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use thiserror::Error;

use crate::forms::{local_a, ProblemConfig};
use crate::mesh::{generate, MeshError, MeshFamily, PolygonalMesh};
use crate::system::identity_kernel;
use crate::wg_space::{build_elements, DofMap, Element, WgError};

pub const MAX_PROBE_DOFS: usize = 4000;
pub const PROBE_SAMPLES: usize = 100;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("probe refused: {dofs} unknowns exceed the dense limit of {limit}")]
    Guard { dofs: usize, limit: usize },
    #[error("dense factorization failed: {0}")]
    Linalg(&'static str),
    #[error(transparent)]
    Space(#[from] WgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Dense global operators of the discrete problem.
pub struct DenseOperators {
    pub dofs: DofMap,
    /// `A_h` on `X_h`.
    pub a: Mat<f64>,
    /// `B_h`: rows velocity, columns stress.
    pub b: Mat<f64>,
    /// Gram matrix of `‖·‖_{H,h}`.
    pub h_gram: Mat<f64>,
    /// Gram matrix of `‖·‖_{1,h}`.
    pub v_gram: Mat<f64>,
    /// `∫ tr τ_0` per stress unknown.
    pub trace: Vec<f64>,
}

pub fn check_guard(dofs: &DofMap) -> Result<(), ProbeError> {
    if dofs.total > MAX_PROBE_DOFS {
        return Err(ProbeError::Guard { dofs: dofs.total, limit: MAX_PROBE_DOFS });
    }
    Ok(())
}

impl DenseOperators {
    pub fn assemble(mesh: &PolygonalMesh, config: &ProblemConfig) -> Result<Self, ProbeError> {
        let dofs = DofMap::new(mesh, config.k);
        check_guard(&dofs)?;
        let elements = build_elements(mesh, config.k, config.form_exactness(), config.data_exactness())?;
        let (ns, nv) = (dofs.n_stress(), dofs.n_velocity());
        let mut a = Mat::<f64>::zeros(ns, ns);
        let mut b = Mat::<f64>::zeros(nv, ns);
        let mut h_gram = Mat::<f64>::zeros(ns, ns);
        let mut v_gram = Mat::<f64>::zeros(nv, nv);
        let mut trace = vec![0.0; ns];
        for el in &elements {
            let sd = dofs.cell_stress_dofs(mesh, el.cell);
            let vd: Vec<usize> = dofs.cell_velocity_dofs(el.cell).map(|i| i - dofs.velocity_offset).collect();
            let la = local_a(el, config.nu, config.rho.on(el.cell));
            let lb = el.divergence_rhs();
            let lh = el.interior_mass() + el.stabilizer();
            let lv = el.velocity_stiffness();
            let lt = el.trace_moments();
            for (i, &gi) in sd.iter().enumerate() {
                trace[gi] += lt[i];
                for (j, &gj) in sd.iter().enumerate() {
                    a[(gi, gj)] += la[(i, j)];
                    h_gram[(gi, gj)] += lh[(i, j)];
                }
            }
            for (i, &gi) in vd.iter().enumerate() {
                for (j, &gj) in sd.iter().enumerate() {
                    b[(gi, gj)] += lb[(i, j)];
                }
                for (j, &gj) in vd.iter().enumerate() {
                    v_gram[(gi, gj)] += lv[(i, j)];
                }
            }
        }
        add_jump_penalty(mesh, &dofs, &elements, &mut v_gram);
        Ok(Self { dofs, a, b, h_gram, v_gram, trace })
    }
}

/// Adds `Σ_e h_e⁻¹ ⟨P_b[[v]], P_b[[w]]⟩_e` over all edges (the jump is the trace on the boundary).
fn add_jump_penalty(mesh: &PolygonalMesh, dofs: &DofMap, elements: &[Element], v_gram: &mut Mat<f64>) {
    let k = dofs.k;
    let nm = 2 * (k + 1);
    for jt in mesh.jump_trace_data() {
        let mut cols: Vec<Mat<f64>> = Vec::new();
        let mut owners: Vec<Vec<usize>> = Vec::new();
        for (cell, sign) in [(Some(jt.plus), 1.0), (jt.minus, -1.0)] {
            let Some(cell) = cell else { continue };
            let el = &elements[cell];
            let le = el.edges.iter().position(|ed| ed.edge == jt.edge).expect("edge belongs to its cells");
            let mut mom = el.edge_velocity_moments(le);
            mom *= faer::Scale(sign);
            cols.push(mom);
            owners.push(dofs.cell_velocity_dofs(cell).map(|i| i - dofs.velocity_offset).collect());
        }
        let basis = crate::wg_space::edge_basis(mesh, jt.edge, k);
        let inv_h = 1.0 / mesh.edge_length(jt.edge);
        let weights: Vec<f64> = (0..nm).map(|r| inv_h / basis.norm_sq(r % (k + 1))).collect();
        for (ma, da) in cols.iter().zip(&owners) {
            for (mb, db) in cols.iter().zip(&owners) {
                for (i, &gi) in da.iter().enumerate() {
                    for (j, &gj) in db.iter().enumerate() {
                        let s: f64 = (0..nm).map(|r| weights[r] * ma[(r, i)] * mb[(r, j)]).sum();
                        v_gram[(gi, gj)] += s;
                    }
                }
            }
        }
    }
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Smallest eigenvalue of the symmetric pencil `(M, G)` with `G` positive definite.
pub fn min_generalized_eigenvalue(m: &Mat<f64>, g: &Mat<f64>) -> Result<f64, ProbeError> {
    if m.nrows() == 0 {
        return Ok(f64::NAN);
    }
    let llt = g.llt(Side::Lower).map_err(|_| ProbeError::Linalg("norm Gram matrix is not positive definite"))?;
    let l = llt.L().to_owned();
    let mut x = m.clone();
    solve_lower_triangular_in_place(l.as_ref(), x.as_mut(), Par::Seq);
    let mut y = x.transpose().to_owned();
    solve_lower_triangular_in_place(l.as_ref(), y.as_mut(), Par::Seq);
    symmetrize(&mut y);
    let ev = y.self_adjoint_eigenvalues(Side::Lower).map_err(|_| ProbeError::Linalg("eigenvalue iteration failed"))?;
    Ok(ev.into_iter().fold(f64::INFINITY, f64::min))
}

/// `β_h = inf_v sup_τ B(τ, v) / (‖τ‖_{H,h} ‖v‖_{1,h})`.
pub fn inf_sup_constant(ops: &DenseOperators) -> Result<f64, ProbeError> {
    let llt = ops.h_gram.llt(Side::Lower).map_err(|_| ProbeError::Linalg("stress Gram matrix is not positive definite"))?;
    let hinv_bt = llt.solve(ops.b.transpose().to_owned());
    let mut schur = &ops.b * &hinv_bt;
    symmetrize(&mut schur);
    let mu = min_generalized_eigenvalue(&schur, &ops.v_gram)?;
    Ok(mu.max(0.0).sqrt())
}

/// Orthonormal basis of `{τ : Bτ = 0, tᵀτ = 0}`.
pub fn constrained_kernel(ops: &DenseOperators) -> Result<Mat<f64>, ProbeError> {
    let (nv, ns) = (ops.b.nrows(), ops.b.ncols());
    let mut c = Mat::<f64>::zeros(nv + 1, ns);
    c.subrows_mut(0, nv).copy_from(&ops.b);
    for j in 0..ns {
        c[(nv, j)] = ops.trace[j];
    }
    let svd = c.svd().map_err(|_| ProbeError::Linalg("singular value decomposition failed"))?;
    let s = svd.S().column_vector();
    let smax = (0..s.nrows()).map(|i| s[i]).fold(0.0, f64::max);
    let tol = smax * 1e-10 * (ns as f64);
    let rank = (0..s.nrows()).filter(|&i| s[i] > tol).count();
    Ok(svd.V().subcols(rank, ns - rank).to_owned())
}

/// `α_h = min_{τ ∈ ker B ∩ X_{0,h}} A_h(τ, τ) / ‖τ‖²_{H,h}`; NaN when the kernel is trivial.
pub fn kernel_coercivity(ops: &DenseOperators) -> Result<f64, ProbeError> {
    let z = constrained_kernel(ops)?;
    if z.ncols() == 0 {
        return Ok(f64::NAN);
    }
    let mut za = z.transpose() * &ops.a * &z;
    let mut zh = z.transpose() * &ops.h_gram * &z;
    symmetrize(&mut za);
    symmetrize(&mut zh);
    min_generalized_eigenvalue(&za, &zh)
}

/// `(‖τ_0^d‖² + ‖div_wh τ‖²_{0,4/3}) / ‖τ_0‖²` for a global stress vector.
pub fn lower_bound_ratio(mesh: &PolygonalMesh, elements: &[Element], dofs: &DofMap, tau: &[f64]) -> Result<f64, WgError> {
    let (mut dev, mut full, mut div43) = (0.0, 0.0, 0.0);
    for el in elements {
        let loc: Vec<f64> = dofs.cell_stress_dofs(mesh, el.cell).into_iter().map(|i| tau[i]).collect();
        dev += crate::wg_space::quad_form(&el.deviatoric_mass(), &loc);
        full += crate::wg_space::quad_form(&el.interior_mass(), &loc);
        let d = el.weak_divergence(&loc)?;
        let nv = el.nv();
        for (p, w) in el.data_rule.points.iter().zip(&el.data_rule.weights) {
            let phi = el.velocity_basis.eval(*p);
            let dx: f64 = (0..nv).map(|m| d[m] * phi[m]).sum();
            let dy: f64 = (0..nv).map(|m| d[nv + m] * phi[m]).sum();
            div43 += w * (dx * dx + dy * dy).sqrt().powf(4.0 / 3.0);
        }
    }
    Ok((dev + div43.powf(1.5)) / full)
}

/// Minimum of [`lower_bound_ratio`] over `samples` random zero-trace fields of unit `‖τ_0‖`.
pub fn lower_bound_probe(mesh: &PolygonalMesh, k: usize, samples: usize, seed: u64) -> Result<f64, ProbeError> {
    let cfg = ProblemConfig::new(1.0, k);
    let dofs = DofMap::new(mesh, k);
    let elements = build_elements(mesh, k, cfg.form_exactness(), cfg.data_exactness())?;
    let w = identity_kernel(mesh, &dofs);
    let mut t = vec![0.0; dofs.n_stress()];
    for el in &elements {
        for (i, gi) in dofs.cell_stress_dofs(mesh, el.cell).into_iter().enumerate() {
            t[gi] += el.trace_moments()[i];
        }
    }
    let tw: f64 = t.iter().zip(&w).map(|(a, b)| a * b).sum();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let mut tau: Vec<f64> = (0..dofs.n_stress()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = t.iter().zip(&tau).map(|(a, b)| a * b).sum::<f64>() / tw;
        for (x, wi) in tau.iter_mut().zip(&w) {
            *x -= s * wi;
        }
        best = best.min(lower_bound_ratio(mesh, &elements, &dofs, &tau)?);
    }
    Ok(best)
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeLevel {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub beta: f64,
    pub alpha: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub family: String,
    pub k: usize,
    pub levels: Vec<ProbeLevel>,
}

pub const PROBE_CSV_HEADER: &str = "level,h,dofs,beta,alpha,lower_bound";

impl StabilityReport {
    /// `β_h(last) / β_h(first)`
    pub fn beta_ratio(&self) -> f64 {
        match (self.levels.first(), self.levels.last()) {
            (Some(a), Some(b)) if self.levels.len() > 1 => b.beta / a.beta,
            _ => f64::NAN,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("{PROBE_CSV_HEADER}\n");
        for l in &self.levels {
            s += &format!(
                "{},{:.5e},{},{:.6e},{:.6e},{:.6e}\n",
                l.level, l.h, l.dofs, l.beta, l.alpha, l.lower_bound
            );
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("### Stability probes: {} family, k = {}\n\n", self.family, self.k);
        s += "| level | h | dofs | beta_h | alpha_h | lower bound |\n|---|---|---|---|---|---|\n";
        for l in &self.levels {
            s += &format!(
                "| {} | {:.4e} | {} | {:.4e} | {:.4e} | {:.4e} |\n",
                l.level, l.h, l.dofs, l.beta, l.alpha, l.lower_bound
            );
        }
        s += &format!("\nbeta ratio: {:.4}\n", self.beta_ratio());
        s
    }
}

/// Probes a single mesh.
pub fn probe_mesh(mesh: &PolygonalMesh, level: usize, config: &ProblemConfig, seed: u64) -> Result<ProbeLevel, ProbeError> {
    let ops = DenseOperators::assemble(mesh, config)?;
    Ok(ProbeLevel {
        level,
        h: mesh.mesh_size(),
        dofs: ops.dofs.total,
        beta: inf_sup_constant(&ops)?,
        alpha: kernel_coercivity(&ops)?,
        lower_bound: lower_bound_probe(mesh, config.k, PROBE_SAMPLES, seed)?,
    })
}

/// Probes `levels` of `family`; every mesh is checked against the size guard before any work.
pub fn run_probe(
    family: &MeshFamily,
    levels: std::ops::Range<usize>,
    config: &ProblemConfig,
    seed: u64,
) -> Result<StabilityReport, ProbeError> {
    let mut meshes = Vec::new();
    for level in levels {
        let mesh = generate(&family.at_level(level))?;
        check_guard(&DofMap::new(&mesh, config.k))?;
        meshes.push((level, mesh));
    }
    let levels = meshes
        .iter()
        .map(|(level, mesh)| probe_mesh(mesh, *level, config, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StabilityReport { family: family.kind.to_string(), k: config.k, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshKind;
    use crate::wg_space::{velocity_1h_norm, DGVectorField};

    fn coarse(kind: MeshKind, level: usize) -> PolygonalMesh {
        let mut f = MeshFamily::new(kind, level);
        f.base = 2;
        generate(&f).unwrap()
    }

    #[test]
    fn velocity_gram_matches_norm() {
        let mesh = coarse(MeshKind::NonConvex, 0);
        for k in 0..2 {
            let ops = DenseOperators::assemble(&mesh, &ProblemConfig::new(1.0, k)).unwrap();
            let elements = build_elements(&mesh, k, 2 * k + 4, 2 * k + 6).unwrap();
            let nv = ops.dofs.n_velocity();
            let x: Vec<f64> = (0..nv).map(|i| ((i * 37 % 11) as f64 - 5.0) / 3.0).collect();
            let mut g = vec![0.0; ops.dofs.total];
            g[ops.dofs.velocity_offset..ops.dofs.multiplier].copy_from_slice(&x);
            let v = DGVectorField::from_global(&ops.dofs, &g);
            let n = velocity_1h_norm(&mesh, &elements, &v);
            let q = crate::wg_space::quad_form(&ops.v_gram, &x);
            assert!((n * n - q).abs() <= 1e-10 * q, "{} vs {}", n * n, q);
        }
    }

    #[test]
    fn guard_refuses_large_meshes() {
        let mesh = generate(&MeshFamily::new(MeshKind::Triangular, 2)).unwrap();
        match DenseOperators::assemble(&mesh, &ProblemConfig::new(1.0, 0)) {
            Err(ProbeError::Guard { dofs, limit }) => assert!(dofs > limit),
            _ => panic!("guard not triggered"),
        }
    }

    #[test]
    fn kernel_is_orthogonal_to_constraints() {
        let mesh = coarse(MeshKind::Triangular, 0);
        let ops = DenseOperators::assemble(&mesh, &ProblemConfig::new(1.0, 0)).unwrap();
        let z = constrained_kernel(&ops).unwrap();
        assert!(z.ncols() > 0);
        let bz = &ops.b * &z;
        let m = (0..bz.nrows()).flat_map(|i| (0..bz.ncols()).map(move |j| (i, j))).map(|(i, j)| bz[(i, j)].abs());
        assert!(m.fold(0.0, f64::max) < 1e-10);
        for j in 0..z.ncols() {
            let s: f64 = (0..z.nrows()).map(|i| ops.trace[i] * z[(i, j)]).sum();
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn constants_positive_on_coarse_meshes() {
        let mesh = coarse(MeshKind::Triangular, 0);
        let lvl = probe_mesh(&mesh, 0, &ProblemConfig::new(1.0, 0), 7).unwrap();
        assert!(lvl.beta > 0.0 && lvl.alpha > 0.0 && lvl.lower_bound > 0.0, "{lvl:?}");
    }

    #[test]
    fn identity_has_zero_lower_bound_ratio() {
        let mesh = coarse(MeshKind::Hexagonal, 0);
        let dofs = DofMap::new(&mesh, 0);
        let elements = build_elements(&mesh, 0, 4, 6).unwrap();
        let w = identity_kernel(&mesh, &dofs);
        let r = lower_bound_ratio(&mesh, &elements, &dofs, &w).unwrap();
        assert!(r.abs() < 1e-12, "{r}");
    }
}
