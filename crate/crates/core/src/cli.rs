//! Command-line driver: convergence studies, single solves, the lid-driven cavity and the
//! stability probes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::analysis::{
    compute_rates, convergence_study_with, error_norms, example1_case, example1_stokes_case, postprocess_pressure,
    ConvergenceReport, LevelResult, PressureField, StudyError, StudyOptions,
};
use crate::forms::{BoundaryData, ProblemConfig, Rho, VectorFn};
use crate::mesh::{generate, MeshError, MeshFamily, MeshKind, PolygonalMesh};
use crate::quadrature::edge_quadrature;
use crate::stability::{run_probe, ProbeError};
use crate::system::{picard_solve, PicardStatus, SolverState, SystemError};
use crate::wg_space::{DGVectorField, WgError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_GUARD: i32 = 4;

const PROBE_SEED: u64 = 42;
const PROBE_BASE: usize = 4;
const LID_TOLERANCE: f64 = 0.25;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    NonConvergence(String),
    #[error("{0}")]
    Guard(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Space(#[from] WgError),
    #[error("{0}")]
    Probe(ProbeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::NonConvergence(_) => EXIT_NONCONVERGENCE,
            CliError::Guard(_) => EXIT_GUARD,
            _ => EXIT_FAILURE,
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Study(StudyError::Mesh(e))
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Config(c) => CliError::Config(c.to_string()),
            SystemError::Tolerance(t) => CliError::Config(format!("invalid tolerance {t}")),
            other => CliError::Study(StudyError::System(other)),
        }
    }
}

impl From<ProbeError> for CliError {
    fn from(e: ProbeError) -> Self {
        match e {
            ProbeError::Guard { .. } => CliError::Guard(e.to_string()),
            other => CliError::Probe(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Convergence,
    Solve,
    Cavity,
    ProbeStability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Md,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub family: MeshKind,
    pub levels: usize,
    /// Level-0 subdivisions for the triangular and non-convex families.
    pub base: Option<usize>,
    pub k: usize,
    pub nu: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub stokes: bool,
}

#[derive(Debug, Parser)]
#[command(name = "wgns", version, about = "Weak Galerkin mixed solver for the stationary Navier-Stokes equations")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Manufactured-solution convergence study over mesh levels.
    Convergence(Flags),
    /// Single manufactured-solution solve on the finest requested level.
    Solve(Flags),
    /// Lid-driven cavity flow.
    Cavity(Flags),
    /// Dense inf-sup and coercivity probes on small meshes.
    ProbeStability(Flags),
}

#[derive(Debug, Default, Args)]
struct Flags {
    /// triangular | hexagonal | nonconvex | file:<path>
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    levels: Option<String>,
    /// Level-0 subdivisions (triangular and non-convex families)
    #[arg(long)]
    base: Option<String>,
    #[arg(short = 'k', long = "degree")]
    k: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    nu: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    rho: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<String>,
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Comma-separated list of csv, md
    #[arg(long)]
    format: Option<String>,
    /// Drop the convective term
    #[arg(long)]
    stokes: bool,
    /// key = value configuration file; command-line flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Parses a `key = value` file. `#` starts a comment; `-` and `_` in keys are interchangeable.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with('[') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        const KEYS: [&str; 11] =
            ["family", "levels", "base", "k", "nu", "rho", "tol", "max-iter", "out", "format", "stokes"];
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("line {}: unknown key {key:?}", n + 1)));
        }
        map.insert(key, value);
    }
    Ok(map)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.parse().map_err(|_| CliError::Config(format!("invalid value {v:?} for {key}")))
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            family: MeshKind::Triangular,
            levels: if command == Command::ProbeStability { 2 } else { 4 },
            base: None,
            k: 0,
            nu: if command == Command::Cavity { 1.0 } else { 0.1 },
            rho: 1.0,
            tol: 1e-6,
            max_iter: 100,
            out: PathBuf::from("."),
            formats: vec![Format::Csv, Format::Md],
            stokes: false,
        }
    }

    /// Parses command-line arguments (including the program name).
    pub fn from_args<I, T>(args: I) -> Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args)?;
        let (command, flags) = match cli.command {
            Sub::Convergence(f) => (Command::Convergence, f),
            Sub::Solve(f) => (Command::Solve, f),
            Sub::Cavity(f) => (Command::Cavity, f),
            Sub::ProbeStability(f) => (Command::ProbeStability, f),
        };
        Self::from_flags(command, flags).map_err(|e| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{e}\n")))
    }

    fn from_flags(command: Command, flags: Flags) -> Result<Self, CliError> {
        let mut values = match &flags.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        let given = [
            ("family", &flags.family),
            ("levels", &flags.levels),
            ("base", &flags.base),
            ("k", &flags.k),
            ("nu", &flags.nu),
            ("rho", &flags.rho),
            ("tol", &flags.tol),
            ("max-iter", &flags.max_iter),
            ("out", &flags.out),
            ("format", &flags.format),
        ];
        for (key, v) in given {
            if let Some(v) = v {
                values.insert(key.to_string(), v.clone());
            }
        }
        if flags.stokes {
            values.insert("stokes".into(), "true".into());
        }
        Self::from_values(command, &values)
    }

    /// Builds and validates a configuration from `key -> value` pairs over the defaults.
    pub fn from_values(command: Command, values: &BTreeMap<String, String>) -> Result<Self, CliError> {
        let mut c = Self::defaults(command);
        for (key, v) in values {
            match key.as_str() {
                "family" => c.family = v.parse().map_err(|e: MeshError| CliError::Config(e.to_string()))?,
                "levels" => c.levels = parse_value(key, v)?,
                "base" => c.base = Some(parse_value(key, v)?),
                "k" => c.k = parse_value(key, v)?,
                "nu" => c.nu = parse_value(key, v)?,
                "rho" => c.rho = parse_value(key, v)?,
                "tol" => c.tol = parse_value(key, v)?,
                "max-iter" => c.max_iter = parse_value(key, v)?,
                "out" => c.out = PathBuf::from(v),
                "stokes" => c.stokes = parse_value(key, v)?,
                "format" => {
                    let mut f = Vec::new();
                    for tok in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                        f.push(match tok {
                            "csv" => Format::Csv,
                            "md" => Format::Md,
                            _ => return Err(CliError::Config(format!("unknown format {tok:?}"))),
                        });
                    }
                    f.sort();
                    f.dedup();
                    c.formats = f;
                }
                _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.levels == 0 {
            return bad("levels must be at least 1".into());
        }
        if self.command == Command::ProbeStability && self.levels > 2 {
            return bad(format!("stability probes run on at most 2 levels, got {}", self.levels));
        }
        if self.k > 2 {
            return bad(format!("degree k must be 0, 1 or 2, got {}", self.k));
        }
        if !(self.nu.is_finite() && self.nu > 0.0) {
            return bad(format!("viscosity must be positive and finite, got {}", self.nu));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return bad(format!("stabilization weight must be positive and finite, got {}", self.rho));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max-iter must be at least 1".into());
        }
        if self.base == Some(0) {
            return bad("base must be at least 1".into());
        }
        if self.formats.is_empty() {
            return bad("no output format selected".into());
        }
        Ok(())
    }

    pub fn family(&self) -> MeshFamily {
        let mut f = MeshFamily::new(self.family.clone(), 0);
        if let Some(b) = self.base {
            f.base = b;
        } else if self.command == Command::ProbeStability {
            f.base = PROBE_BASE;
        }
        f
    }

    pub fn problem(&self) -> ProblemConfig {
        let mut cfg = ProblemConfig::new(self.nu, self.k);
        cfg.rho = Rho::Uniform(self.rho);
        if self.stokes {
            cfg.stokes()
        } else {
            cfg
        }
    }

    fn tag(&self) -> String {
        let family = match &self.family {
            MeshKind::File(_) => "file".to_string(),
            other => other.to_string(),
        };
        format!("{family}_k{}", self.k)
    }

    fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Files written and a human-readable summary.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn write_file(out: &Path, name: &str, content: &str, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    let path = out.join(name);
    fs::write(&path, content).map_err(|source| CliError::Io { path: path.clone(), source })?;
    files.push(path);
    Ok(())
}

fn write_report(cfg: &RunConfig, stem: &str, report: &ConvergenceReport, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if cfg.wants(Format::Csv) {
        let csv = format!("{stem}.csv");
        write_file(&cfg.out, &csv, &report.to_csv(), files)?;
        write_file(&cfg.out, &format!("plot_{stem}.py"), &report.plot_script(&csv), files)?;
    }
    if cfg.wants(Format::Md) {
        write_file(&cfg.out, &format!("{stem}.md"), &report.to_markdown(), files)?;
    }
    Ok(())
}

fn study_options(cfg: &RunConfig) -> StudyOptions {
    StudyOptions { config: cfg.problem(), tol: cfg.tol, max_iter: cfg.max_iter, diagnostics: false }
}

fn manufactured(cfg: &RunConfig) -> crate::analysis::ManufacturedCase {
    if cfg.stokes {
        example1_stokes_case(cfg.nu)
    } else {
        example1_case(cfg.nu)
    }
}

fn title(cfg: &RunConfig) -> String {
    format!("manufactured solution, {} family, k = {}, nu = {}", cfg.family, cfg.k, cfg.nu)
}

pub fn run_convergence(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let report = convergence_study_with(
        &cfg.family(),
        0..cfg.levels,
        &manufactured(cfg),
        &study_options(cfg),
        &title(cfg),
        |r, t| eprintln!("level {}: h = {:.4e}, {} iterations, {:.2?}", r.level, r.h, r.iterations, t),
    )?;
    write_report(cfg, &format!("convergence_{}", cfg.tag()), &report, &mut out.files)?;
    out.summary = report.to_markdown();
    match &report.failure {
        Some(f) => {
            print!("{}", out.summary);
            Err(CliError::NonConvergence(f.clone()))
        }
        None => Ok(out),
    }
}

/// One CSV row per cell: centroid, velocity and pressure.
pub fn field_csv(mesh: &PolygonalMesh, velocity: &DGVectorField, pressure: &PressureField) -> String {
    let mut s = String::from("cell,x,y,u1,u2,p\n");
    for c in 0..mesh.n_cells() {
        let x = mesh.cell_centroid(c);
        let u = velocity.value(mesh, c, x);
        let p = pressure.value(mesh, c, x);
        s += &format!("{c},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}\n", x[0], x[1], u[0], u[1], p);
    }
    s
}

fn status_error(state: &SolverState) -> Option<CliError> {
    (state.status != PicardStatus::Converged).then(|| {
        CliError::NonConvergence(format!(
            "Picard iteration ended with {:?} after {} iterations",
            state.status, state.iterations
        ))
    })
}

pub fn run_solve(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let level = cfg.levels - 1;
    let mesh = generate(&cfg.family().at_level(level))?;
    let case = manufactured(cfg);
    let opts = study_options(cfg);
    let state = picard_solve(&mesh, &opts.config, &case.data(), cfg.tol, cfg.max_iter)?;
    if let Some(e) = status_error(&state) {
        return Err(e);
    }
    let pressure = postprocess_pressure(&mesh, &state.stress, &state.velocity)?;
    let errors = error_norms(&mesh, &case, &state.stress, &state.velocity, &pressure, opts.config.data_exactness())?;
    let result = LevelResult {
        level,
        h: mesh.mesh_size(),
        errors,
        iterations: state.iterations,
        dofs: state.dofs.total,
        status: state.status,
        pressure_mean: pressure.integral(&mesh),
        pressure_l2: pressure.l2_norm(&mesh),
        diagnostics: None,
    };
    let report = compute_rates(&title(cfg), cfg.k, vec![result]);
    let stem = format!("solve_{}", cfg.tag());
    write_report(cfg, &stem, &report, &mut out.files)?;
    write_file(&cfg.out, &format!("{stem}_fields.csv"), &field_csv(&mesh, &state.velocity, &pressure), &mut out.files)?;
    out.summary = report.to_markdown();
    Ok(out)
}

/// Lid-driven cavity data on `[0,1]²`: `f = 0`, `g = (1, 0)` on `y = 1` and zero elsewhere.
pub fn cavity_data() -> BoundaryData {
    let g: VectorFn = Arc::new(|p: [f64; 2]| if p[1] >= 1.0 - 1e-12 { [1.0, 0.0] } else { [0.0, 0.0] });
    BoundaryData { f: Arc::new(|_| [0.0, 0.0]), g }
}

/// Velocity trace on the lid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidTrace {
    /// Largest `|u_1|` at lid quadrature points.
    pub max_u1: f64,
    /// `‖u_h - g‖_{0,lid} / |lid|^{1/2}`
    pub rms_error: f64,
}

impl LidTrace {
    pub fn consistent(&self) -> bool {
        self.rms_error <= LID_TOLERANCE
    }
}

pub fn lid_trace(mesh: &PolygonalMesh, velocity: &DGVectorField) -> Result<LidTrace, CliError> {
    let (mut max_u1, mut err, mut len) = (0.0f64, 0.0, 0.0);
    let ex = 2 * velocity.degree + 2;
    for e in mesh.boundary_edges() {
        let (a, b) = mesh.edge_endpoints(e);
        if a[1] < 1.0 - 1e-12 || b[1] < 1.0 - 1e-12 {
            continue;
        }
        let cell = mesh.edge(e).left;
        let rule = edge_quadrature(a, b, ex).map_err(|source| CliError::Space(WgError::EdgeQuadrature { edge: e, source }))?;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let u = velocity.value(mesh, cell, *p);
            max_u1 = max_u1.max(u[0].abs());
            err += w * ((u[0] - 1.0).powi(2) + u[1] * u[1]);
        }
        len += mesh.edge_length(e);
    }
    Ok(LidTrace { max_u1, rms_error: (err / len).sqrt() })
}

pub fn run_cavity(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let mut family = cfg.family();
    family.domain = [0.0, 1.0, 0.0, 1.0];
    let mesh = generate(&family.at_level(cfg.levels - 1))?;
    let state = picard_solve(&mesh, &cfg.problem(), &cavity_data(), cfg.tol, cfg.max_iter)?;
    if let Some(e) = status_error(&state) {
        return Err(e);
    }
    let pressure = postprocess_pressure(&mesh, &state.stress, &state.velocity)?;
    let lid = lid_trace(&mesh, &state.velocity)?;
    let stem = format!("cavity_{}_nu{}", cfg.tag(), cfg.nu);
    write_file(&cfg.out, &format!("{stem}_fields.csv"), &field_csv(&mesh, &state.velocity, &pressure), &mut out.files)?;
    out.summary = format!(
        "cavity: {} cells, {} Picard iterations, max |u1| on lid = {:.4}, lid rms error = {:.4} ({})\n",
        mesh.n_cells(),
        state.iterations,
        lid.max_u1,
        lid.rms_error,
        if lid.consistent() { "consistent with g" } else { "INCONSISTENT with g" }
    );
    Ok(out)
}

pub fn run_probe_stability(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    let report = run_probe(&cfg.family(), 0..cfg.levels, &cfg.problem(), PROBE_SEED)?;
    let stem = format!("stability_{}", cfg.tag());
    if cfg.wants(Format::Csv) {
        write_file(&cfg.out, &format!("{stem}.csv"), &report.to_csv(), &mut out.files)?;
    }
    if cfg.wants(Format::Md) {
        write_file(&cfg.out, &format!("{stem}.md"), &report.to_markdown(), &mut out.files)?;
    }
    out.summary = report.to_markdown();
    Ok(out)
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Convergence => run_convergence(cfg),
        Command::Solve => run_solve(cfg),
        Command::Cavity => run_cavity(cfg),
        Command::ProbeStability => run_probe_stability(cfg),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match RunConfig::from_args(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cfg) {
        Ok(out) => {
            print!("{}", out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
