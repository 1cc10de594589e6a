//! Manufactured solutions, pressure recovery, error norms and convergence tables.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::forms::{BoundaryData, ProblemConfig, VectorFn};
use crate::mesh::{generate, MeshError, MeshFamily, Point, PolygonalMesh};
use crate::quadrature::gauss_legendre;
use crate::system::{picard_solve, PicardStatus, SystemError};
use crate::wg_space::{
    build_elements, cell_basis, data_exactness, form_exactness, project_interior, project_velocity, project_wg,
    stress_h_norm, velocity_1h_norm, DGVectorField, Element, Tensor, WGTensorField, WgError,
};

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(Point) -> Tensor + Send + Sync>;

/// Analytic velocity/pressure pair with the data and pseudostress it induces.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub nu: f64,
    pub convection: bool,
    pub u: VectorFn,
    /// `[i][j] = ∂_j u_i`
    pub grad_u: TensorFn,
    pub p: ScalarFn,
    pub f: VectorFn,
    pub sigma: TensorFn,
    pub r_u: f64,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase").field("nu", &self.nu).field("convection", &self.convection).finish()
    }
}

impl ManufacturedCase {
    pub fn data(&self) -> BoundaryData {
        BoundaryData { f: self.f.clone(), g: self.u.clone() }
    }

    pub fn config(&self, k: usize) -> ProblemConfig {
        let cfg = ProblemConfig::new(self.nu, k);
        if self.convection {
            cfg
        } else {
            cfg.stokes()
        }
    }

    /// `div σ = -f`
    pub fn div_sigma(&self, p: Point) -> [f64; 2] {
        let f = (self.f)(p);
        [-f[0], -f[1]]
    }
}

// φ(x) = x² e^{-x}, b(y) = s² sin s with s = 1 + y; u = (φ b', -φ' b)
fn phi(x: f64) -> [f64; 4] {
    let e = (-x).exp();
    [x * x * e, (2.0 * x - x * x) * e, (2.0 - 4.0 * x + x * x) * e, (-6.0 + 6.0 * x - x * x) * e]
}

fn bfun(y: f64) -> [f64; 4] {
    let s = 1.0 + y;
    let (sn, cs) = s.sin_cos();
    [
        s * s * sn,
        2.0 * s * sn + s * s * cs,
        2.0 * sn + 4.0 * s * cs - s * s * sn,
        6.0 * cs - 6.0 * s * sn - s * s * cs,
    ]
}

fn ex1_u(p: Point) -> [f64; 2] {
    let (a, b) = (phi(p[0]), bfun(p[1]));
    [a[0] * b[1], -a[1] * b[0]]
}

fn ex1_grad(p: Point) -> Tensor {
    let (a, b) = (phi(p[0]), bfun(p[1]));
    [[a[1] * b[1], a[0] * b[2]], [-a[2] * b[0], -a[1] * b[1]]]
}

fn ex1_laplacian(p: Point) -> [f64; 2] {
    let (a, b) = (phi(p[0]), bfun(p[1]));
    [a[2] * b[1] + a[0] * b[3], -a[3] * b[0] - a[1] * b[2]]
}

fn ex1_p(p: Point) -> f64 {
    let tp = 2.0 * std::f64::consts::PI;
    (tp * p[0]).sin() * (tp * p[1]).sin()
}

fn ex1_grad_p(p: Point) -> [f64; 2] {
    let tp = 2.0 * std::f64::consts::PI;
    let (sx, cx) = (tp * p[0]).sin_cos();
    let (sy, cy) = (tp * p[1]).sin_cos();
    [tp * cx * sy, tp * sx * cy]
}

/// Tensor Gauss rule on the unit square.
fn unit_square_integral(f: impl Fn(Point) -> f64) -> f64 {
    let (x, w) = gauss_legendre(24);
    let mut s = 0.0;
    for (xi, wi) in x.iter().zip(&w) {
        for (yj, wj) in x.iter().zip(&w) {
            s += 0.25 * wi * wj * f([0.5 * (xi + 1.0), 0.5 * (yj + 1.0)]);
        }
    }
    s
}

/// The smooth test case on `(0,1)²` with `p = sin(2πx) sin(2πy)`.
pub fn example1_case(nu: f64) -> ManufacturedCase {
    let r_u = -0.5 * unit_square_integral(|p| {
        let u = ex1_u(p);
        u[0] * u[0] + u[1] * u[1]
    });
    ManufacturedCase {
        nu,
        convection: true,
        u: Arc::new(ex1_u),
        grad_u: Arc::new(ex1_grad),
        p: Arc::new(ex1_p),
        f: Arc::new(move |p| {
            let (u, g, l, gp) = (ex1_u(p), ex1_grad(p), ex1_laplacian(p), ex1_grad_p(p));
            [
                -nu * l[0] + g[0][0] * u[0] + g[0][1] * u[1] + gp[0],
                -nu * l[1] + g[1][0] * u[0] + g[1][1] * u[1] + gp[1],
            ]
        }),
        sigma: Arc::new(move |p| {
            let (u, g) = (ex1_u(p), ex1_grad(p));
            let q = ex1_p(p) + r_u;
            [[nu * g[0][0] - u[0] * u[0] - q, nu * g[0][1] - u[0] * u[1]], [
                nu * g[1][0] - u[1] * u[0],
                nu * g[1][1] - u[1] * u[1] - q,
            ]]
        }),
        r_u,
    }
}

/// Same velocity and pressure for the Stokes problem (`σ = ν∇u - pI`).
pub fn example1_stokes_case(nu: f64) -> ManufacturedCase {
    ManufacturedCase {
        nu,
        convection: false,
        u: Arc::new(ex1_u),
        grad_u: Arc::new(ex1_grad),
        p: Arc::new(ex1_p),
        f: Arc::new(move |p| {
            let (l, gp) = (ex1_laplacian(p), ex1_grad_p(p));
            [-nu * l[0] + gp[0], -nu * l[1] + gp[1]]
        }),
        sigma: Arc::new(move |p| {
            let (g, q) = (ex1_grad(p), ex1_p(p));
            [[nu * g[0][0] - q, nu * g[0][1]], [nu * g[1][0], nu * g[1][1] - q]]
        }),
        r_u: 0.0,
    }
}

// ---------------------------------------------------------------------------------------------
// pressure

/// Cellwise polynomial pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureField {
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

impl PressureField {
    pub fn cell_coeffs(&self, cell: usize) -> &[f64] {
        let n = crate::basis::poly_dim(self.degree);
        &self.coeffs[cell * n..(cell + 1) * n]
    }

    pub fn value(&self, mesh: &PolygonalMesh, cell: usize, p: Point) -> f64 {
        cell_basis(mesh, cell, self.degree).combine(self.cell_coeffs(cell), p)
    }

    fn per_cell(&self, mesh: &PolygonalMesh, f: impl Fn(f64) -> f64 + Sync) -> f64 {
        let ex = 2 * self.degree + 2;
        let parts: Vec<f64> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let basis = cell_basis(mesh, c, self.degree);
                crate::quadrature::cell_quadrature(&mesh.cell_polygon(c), ex)
                    .map_or(f64::NAN, |r| r.integrate(|p| f(basis.combine(self.cell_coeffs(c), p))))
            })
            .collect();
        parts.iter().sum()
    }

    pub fn integral(&self, mesh: &PolygonalMesh) -> f64 {
        self.per_cell(mesh, |v| v)
    }

    pub fn l2_norm(&self, mesh: &PolygonalMesh) -> f64 {
        self.per_cell(mesh, |v| v * v).max(0.0).sqrt()
    }
}

/// `p_h = -½(tr σ_0h + |u_h|²) - r_{u_h}` with `r_{u_h} = -(1/(2|Ω|)) ∫ |u_h|²`, projected
/// exactly onto `P_{2k+2}(K)`.
pub fn postprocess_pressure(
    mesh: &PolygonalMesh,
    stress: &WGTensorField,
    velocity: &DGVectorField,
) -> Result<PressureField, WgError> {
    let k = stress.k;
    let degree = 2 * k + 2;
    let ex = (2 * k + 6).max(4 * k + 4);
    let usq: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            crate::quadrature::cell_quadrature(&mesh.cell_polygon(c), ex).map_or(f64::NAN, |r| {
                r.integrate(|p| {
                    let u = velocity.value(mesh, c, p);
                    u[0] * u[0] + u[1] * u[1]
                })
            })
        })
        .collect();
    let r_uh = -usq.iter().sum::<f64>() / (2.0 * mesh.area());
    let coeffs: Vec<Vec<f64>> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            project_interior(mesh, c, degree, ex, |p| {
                let s = stress.interior_value(mesh, c, p);
                let u = velocity.value(mesh, c, p);
                [-0.5 * (s[0][0] + s[1][1] + u[0] * u[0] + u[1] * u[1]) - r_uh]
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(PressureField { degree, coeffs: coeffs.concat() })
}

// ---------------------------------------------------------------------------------------------
// errors

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// `‖σ - σ_0h‖_0 + ‖div σ - div_wh σ_h‖_{0,4/3}`
    pub e_sigma: f64,
    pub stress_l2: f64,
    pub div_l43: f64,
    /// `‖u - u_h‖_{0,4}`
    pub e_u: f64,
    /// `‖p - p_h‖_0`
    pub e_p: f64,
}

/// Errors against `case`, integrated with a rule of the given exactness on every cell.
pub fn error_norms(
    mesh: &PolygonalMesh,
    case: &ManufacturedCase,
    stress: &WGTensorField,
    velocity: &DGVectorField,
    pressure: &PressureField,
    exactness: usize,
) -> Result<ErrorNorms, WgError> {
    let k = stress.k;
    let parts: Vec<[f64; 4]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| -> Result<[f64; 4], WgError> {
            let el = Element::new(mesh, c, k, form_exactness(k), exactness)?;
            let div = el.weak_divergence(&stress.local(mesh, c))?;
            let nv = el.nv();
            let mut acc = [0.0; 4];
            for (p, &w) in el.data_rule.points.iter().zip(&el.data_rule.weights) {
                let p = *p;
                let s = (case.sigma)(p);
                let sh = stress.interior_value(mesh, c, p);
                let ds: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (s[i][j] - sh[i][j]).powi(2)).sum();
                let dv = case.div_sigma(p);
                let dh = [el.velocity_basis.combine(&div[..nv], p), el.velocity_basis.combine(&div[nv..], p)];
                let dd = ((dv[0] - dh[0]).powi(2) + (dv[1] - dh[1]).powi(2)).sqrt();
                let u = (case.u)(p);
                let uh = velocity.value(mesh, c, p);
                let du = (u[0] - uh[0]).powi(2) + (u[1] - uh[1]).powi(2);
                let dp = (case.p)(p) - pressure.value(mesh, c, p);
                acc[0] += w * ds;
                acc[1] += w * dd.powf(4.0 / 3.0);
                acc[2] += w * du * du;
                acc[3] += w * dp * dp;
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;
    let mut tot = [0.0; 4];
    for a in &parts {
        for i in 0..4 {
            tot[i] += a[i];
        }
    }
    let stress_l2 = tot[0].sqrt();
    let div_l43 = tot[1].powf(0.75);
    Ok(ErrorNorms { e_sigma: stress_l2 + div_l43, stress_l2, div_l43, e_u: tot[2].powf(0.25), e_p: tot[3].sqrt() })
}

/// `‖σ - 𝒫_0 σ‖_0` for the interior L² projection onto `P_k`.
pub fn projection_error(
    mesh: &PolygonalMesh,
    k: usize,
    sigma: &(dyn Fn(Point) -> Tensor + Sync),
    exactness: usize,
) -> Result<f64, WgError> {
    let proj = project_wg(mesh, k, exactness, sigma)?;
    let parts: Vec<f64> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| -> Result<f64, WgError> {
            let rule = crate::quadrature::cell_quadrature(&mesh.cell_polygon(c), exactness)
                .map_err(|source| WgError::CellQuadrature { cell: c, source })?;
            Ok(rule.integrate(|p| {
                let s = sigma(p);
                let sh = proj.interior_value(mesh, c, p);
                (0..4).map(|i| (s[i / 2][i % 2] - sh[i / 2][i % 2]).powi(2)).sum()
            }))
        })
        .collect::<Result<_, _>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

/// `(‖𝒫σ - σ_h‖_{H,h}, ‖𝒫u - u_h‖_{1,h})`
pub fn discrete_diagnostics(
    mesh: &PolygonalMesh,
    case: &ManufacturedCase,
    stress: &WGTensorField,
    velocity: &DGVectorField,
) -> Result<(f64, f64), WgError> {
    let k = stress.k;
    let ex = data_exactness(k);
    let elements = build_elements(mesh, k, form_exactness(k), ex)?;
    let mut ds = project_wg(mesh, k, ex, &*case.sigma)?;
    ds.axpy(-1.0, stress);
    let mut du = project_velocity(mesh, k + 1, ex, &*case.u)?;
    for (a, b) in du.coeffs.iter_mut().zip(&velocity.coeffs) {
        *a -= b;
    }
    Ok((stress_h_norm(mesh, &elements, &ds), velocity_1h_norm(mesh, &elements, &du)))
}

// ---------------------------------------------------------------------------------------------
// convergence reports

/// `log(e/e') / log(h/h')`, NaN when undefined.
pub fn rate(e: f64, e_next: f64, h: f64, h_next: f64) -> f64 {
    if !(e > 0.0 && e_next > 0.0 && h > 0.0 && h_next > 0.0) || h == h_next {
        return f64::NAN;
    }
    (e / e_next).ln() / (h / h_next).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelResult {
    pub level: usize,
    pub h: f64,
    pub errors: ErrorNorms,
    pub iterations: usize,
    pub dofs: usize,
    pub status: PicardStatus,
    pub pressure_mean: f64,
    pub pressure_l2: f64,
    /// `‖𝒫σ - σ_h‖_{H,h}` and `‖𝒫u - u_h‖_{1,h}`
    pub diagnostics: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub result: LevelResult,
    pub r_sigma: f64,
    pub r_u: f64,
    pub r_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub title: String,
    pub k: usize,
    pub rows: Vec<ReportRow>,
    /// Set when a level failed and the report is partial.
    pub failure: Option<String>,
}

pub fn compute_rates(title: &str, k: usize, levels: Vec<LevelResult>) -> ConvergenceReport {
    let mut rows: Vec<ReportRow> = Vec::with_capacity(levels.len());
    for (i, r) in levels.iter().enumerate() {
        let (rs, ru, rp) = match i.checked_sub(1).map(|j| &levels[j]) {
            Some(prev) => (
                rate(prev.errors.e_sigma, r.errors.e_sigma, prev.h, r.h),
                rate(prev.errors.e_u, r.errors.e_u, prev.h, r.h),
                rate(prev.errors.e_p, r.errors.e_p, prev.h, r.h),
            ),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        rows.push(ReportRow { result: r.clone(), r_sigma: rs, r_u: ru, r_p: rp });
    }
    ConvergenceReport { title: title.to_string(), k, rows, failure: None }
}

fn sci(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.5e}")
    }
}

fn fixed(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.4}")
    }
}

pub const CSV_HEADER: &str = "level,h,e_sigma,r_sigma,e_u,r_u,e_p,r_p,iters,dofs";

impl ConvergenceReport {
    pub fn last(&self) -> Option<&ReportRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let e = &r.result.errors;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.result.level,
                sci(r.result.h),
                sci(e.e_sigma),
                fixed(r.r_sigma),
                sci(e.e_u),
                fixed(r.r_u),
                sci(e.e_p),
                fixed(r.r_p),
                r.result.iterations,
                r.result.dofs
            );
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("### {}\n\n", self.title);
        s.push_str("| k | h | e(σ) | r(σ) | e(u) | r(u) | e(p) | r(p) | iters | dofs |\n");
        s.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
        for (i, r) in self.rows.iter().enumerate() {
            let e = &r.result.errors;
            let dash = |v: f64| if i == 0 { "-".to_string() } else { fixed(v) };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                if i == 0 { self.k.to_string() } else { String::new() },
                format!("{:.3e}", r.result.h),
                sci(e.e_sigma),
                dash(r.r_sigma),
                sci(e.e_u),
                dash(r.r_u),
                sci(e.e_p),
                dash(r.r_p),
                r.result.iterations,
                r.result.dofs
            );
        }
        if self.rows.iter().any(|r| r.result.diagnostics.is_some()) {
            s.push_str("\n| h | ‖𝒫σ−σ_h‖_{H,h} | ‖𝒫u−u_h‖_{1,h} |\n|---|---|---|\n");
            for r in &self.rows {
                if let Some((a, b)) = r.result.diagnostics {
                    let _ = writeln!(s, "| {:.3e} | {} | {} |", r.result.h, sci(a), sci(b));
                }
            }
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(s, "\n**incomplete:** {f}");
        }
        s
    }

    /// Python script plotting the emitted CSV on log-log axes.
    pub fn plot_script(&self, csv_name: &str) -> String {
        format!(
            "import csv\nimport matplotlib.pyplot as plt\n\n\
             rows = list(csv.DictReader(open({csv_name:?})))\n\
             h = [float(r['h']) for r in rows]\n\
             for key, label in [('e_sigma', 'e(sigma)'), ('e_u', 'e(u)'), ('e_p', 'e(p)')]:\n    \
             plt.loglog(h, [float(r[key]) for r in rows], 'o-', label=label)\n\
             plt.xlabel('h')\nplt.ylabel('error')\nplt.title({title:?})\nplt.legend()\nplt.grid(True, which='both')\n\
             plt.savefig({png:?}, dpi=150)\n",
            title = self.title,
            png = csv_name.trim_end_matches(".csv").to_string() + ".png",
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Space(#[from] WgError),
}

/// Options for one manufactured-solution solve.
#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub config: ProblemConfig,
    pub tol: f64,
    pub max_iter: usize,
    pub diagnostics: bool,
}

/// Solves `case` on one mesh and measures the errors.
pub fn run_level(
    mesh: &PolygonalMesh,
    level: usize,
    case: &ManufacturedCase,
    opts: &StudyOptions,
) -> Result<LevelResult, StudyError> {
    let state = picard_solve(mesh, &opts.config, &case.data(), opts.tol, opts.max_iter)?;
    let pressure = postprocess_pressure(mesh, &state.stress, &state.velocity)?;
    let errors = error_norms(mesh, case, &state.stress, &state.velocity, &pressure, opts.config.data_exactness())?;
    let diagnostics =
        if opts.diagnostics { Some(discrete_diagnostics(mesh, case, &state.stress, &state.velocity)?) } else { None };
    Ok(LevelResult {
        level,
        h: mesh.mesh_size(),
        errors,
        iterations: state.iterations,
        dofs: state.dofs.total,
        status: state.status,
        pressure_mean: pressure.integral(mesh),
        pressure_l2: pressure.l2_norm(mesh),
        diagnostics,
    })
}

/// Runs `case` over `levels` of `family`. A level that fails to converge ends the study with a
/// partial report.
pub fn convergence_study(
    family: &MeshFamily,
    levels: std::ops::Range<usize>,
    case: &ManufacturedCase,
    opts: &StudyOptions,
    title: &str,
) -> Result<ConvergenceReport, StudyError> {
    convergence_study_with(family, levels, case, opts, title, |_, _| {})
}

/// [`convergence_study`] with a callback receiving each level's result and wall time.
pub fn convergence_study_with(
    family: &MeshFamily,
    levels: std::ops::Range<usize>,
    case: &ManufacturedCase,
    opts: &StudyOptions,
    title: &str,
    mut on_level: impl FnMut(&LevelResult, std::time::Duration),
) -> Result<ConvergenceReport, StudyError> {
    let mut results = Vec::new();
    let mut failure = None;
    for level in levels {
        let start = std::time::Instant::now();
        let mesh = generate(&family.at_level(level))?;
        let r = run_level(&mesh, level, case, opts)?;
        on_level(&r, start.elapsed());
        let status = r.status;
        results.push(r);
        if status != PicardStatus::Converged {
            failure = Some(format!("level {level}: Picard iteration ended with {status:?}"));
            break;
        }
    }
    let mut report = compute_rates(title, opts.config.k, results);
    report.failure = failure;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshKind;

    fn fd_grad(f: impl Fn(Point) -> [f64; 2], p: Point, h: f64) -> Tensor {
        let xp = f([p[0] + h, p[1]]);
        let xm = f([p[0] - h, p[1]]);
        let yp = f([p[0], p[1] + h]);
        let ym = f([p[0], p[1] - h]);
        [
            [(xp[0] - xm[0]) / (2.0 * h), (yp[0] - ym[0]) / (2.0 * h)],
            [(xp[1] - xm[1]) / (2.0 * h), (yp[1] - ym[1]) / (2.0 * h)],
        ]
    }

    #[test]
    fn example1_is_divergence_free_and_vanishes_at_left_edge() {
        let g = ex1_grad([0.3, 0.7]);
        assert!((g[0][0] + g[1][1]).abs() < 1e-12);
        for y in [0.0, 0.3, 1.0] {
            assert_eq!(ex1_u([0.0, y]), [0.0, 0.0]);
        }
    }

    #[test]
    fn example1_matches_closed_form() {
        for p in [[0.2f64, 0.9], [0.77, 0.13]] {
            let (x, y) = (p[0], p[1]);
            let s = 1.0 + y;
            let u1 = x * x * (-x).exp() * s * (2.0 * s.sin() + s * s.cos());
            let u2 = x * (x - 2.0) * (-x).exp() * s * s * s.sin();
            let u = ex1_u(p);
            assert!((u[0] - u1).abs() < 1e-15 && (u[1] - u2).abs() < 1e-15);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut seed = 12345u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let case = example1_case(0.1);
        for _ in 0..20 {
            let p = [0.05 + 0.9 * rnd(), 0.05 + 0.9 * rnd()];
            let g = fd_grad(ex1_u, p, 1e-5);
            let ga = ex1_grad(p);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((g[i][j] - ga[i][j]).abs() < 1e-8);
                }
            }
            // PDE residual: div σ + f = 0 with div σ by differences of σ rows
            let h = 1e-4;
            let sx = |q: Point| {
                let s = (case.sigma)(q);
                [s[0][0], s[1][0]]
            };
            let sy = |q: Point| {
                let s = (case.sigma)(q);
                [s[0][1], s[1][1]]
            };
            let dx = fd_grad(sx, p, h);
            let dy = fd_grad(sy, p, h);
            let div = [dx[0][0] + dy[0][1], dx[1][0] + dy[1][1]];
            let f = (case.f)(p);
            assert!((div[0] + f[0]).abs() < 1e-6 && (div[1] + f[1]).abs() < 1e-6, "{div:?} {f:?}");
        }
    }

    #[test]
    fn exact_stress_has_zero_mean_trace() {
        for case in [example1_case(0.1), example1_stokes_case(1.0)] {
            let t = unit_square_integral(|p| {
                let s = (case.sigma)(p);
                s[0][0] + s[1][1]
            });
            assert!(t.abs() < 1e-12, "{t}");
        }
    }

    #[test]
    fn rates() {
        assert!((rate(1.27585, 0.688337, 0.2, 0.1111) - 1.04985).abs() < 5e-4);
        assert_eq!(rate(1.0, 1.0, 0.2, 0.1), 0.0);
        assert!((rate(1.0, 0.25, 0.2, 0.1) - 2.0).abs() < 1e-15);
        assert!(rate(0.0, 1.0, 0.2, 0.1).is_nan());
        assert!(rate(1.0, 0.5, 0.1, 0.1).is_nan());
    }

    #[test]
    fn zero_fields_give_zero_pressure_and_mean_zero_pressure() {
        let m = generate(&MeshFamily::unit_square(MeshKind::Hexagonal, 0)).unwrap();
        let s = WGTensorField::zeros(&m, 1);
        let u = DGVectorField::zeros(&m, 2);
        let p = postprocess_pressure(&m, &s, &u).unwrap();
        assert!(p.coeffs.iter().all(|&c| c == 0.0));
        // nonzero velocity, zero stress: ∫ p_h = -½∫|u|² - r|Ω| = 0
        let u = project_velocity(&m, 2, 6, |q| [q[0].sin() + 1.0, q[1] * q[0]]).unwrap();
        let p = postprocess_pressure(&m, &s, &u).unwrap();
        assert!(p.integral(&m).abs() <= 1e-12 * p.l2_norm(&m));
    }

    #[test]
    fn csv_layout_and_nan_rates() {
        let e = ErrorNorms { e_sigma: 1.0, stress_l2: 0.5, div_l43: 0.5, e_u: 0.1, e_p: 0.2 };
        let lr = |level, h| LevelResult {
            level,
            h,
            errors: e,
            iterations: 3,
            dofs: 10,
            status: PicardStatus::Converged,
            pressure_mean: 0.0,
            pressure_l2: 1.0,
            diagnostics: None,
        };
        let rep = compute_rates("t", 0, vec![lr(0, 0.2)]);
        let csv = rep.to_csv();
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().nth(1).unwrap(), "0,2.00000e-1,1.00000e0,NaN,1.00000e-1,NaN,2.00000e-1,NaN,3,10");
        let rep = compute_rates("t", 0, vec![lr(0, 0.2), lr(1, 0.1)]);
        assert_eq!(rep.rows[1].r_u, 0.0);
        assert!(rep.to_markdown().contains("| 0 | 2.000e-1 |"));
        assert!(rep.plot_script("a.csv").contains("'a.csv'") || rep.plot_script("a.csv").contains("\"a.csv\""));
    }
}
