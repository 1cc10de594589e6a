use std::collections::BTreeMap;
use std::path::PathBuf;

use wgns::cli::{
    cavity_data, lid_trace, main_with_args, parse_config_file, run, Command, Format, RunConfig, EXIT_CONFIG, EXIT_GUARD,
    EXIT_NONCONVERGENCE, EXIT_OK,
};
use wgns::forms::{BoundaryData, ProblemConfig};
use wgns::mesh::{generate, MeshFamily, MeshKind};
use wgns::system::{picard_solve, PicardStatus};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wgns-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn code(args: &[&str]) -> i32 {
    main_with_args(std::iter::once("wgns").chain(args.iter().copied()))
}

#[test]
fn defaults() {
    let c = RunConfig::from_args(["wgns", "convergence"]).unwrap();
    assert_eq!((c.k, c.nu, c.rho, c.tol, c.levels, c.max_iter), (0, 0.1, 1.0, 1e-6, 4, 100));
    assert_eq!(c.family, MeshKind::Triangular);
    assert_eq!(c.formats, vec![Format::Csv, Format::Md]);
    let p = RunConfig::from_args(["wgns", "probe-stability"]).unwrap();
    assert_eq!((p.command, p.levels), (Command::ProbeStability, 2));
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = scratch("config");
    let path = dir.join("run.conf");
    std::fs::write(&path, "# study\nfamily = hexagonal\nnu = 0.5\nmax_iter = 7\nformat = md\n").unwrap();
    let c = RunConfig::from_args(["wgns", "solve", "--config", path.to_str().unwrap(), "--nu", "0.25"]).unwrap();
    assert_eq!(c.family, MeshKind::Hexagonal);
    assert_eq!((c.nu, c.max_iter), (0.25, 7));
    assert_eq!(c.formats, vec![Format::Md]);
    assert!(parse_config_file("colour = red\n").is_err());
    assert!(parse_config_file("nu 0.1\n").is_err());
}

#[test]
fn invalid_configuration_exits_with_code_2() {
    for args in [
        &["convergence", "--nu", "-1"][..],
        &["convergence", "--nu", "abc"],
        &["convergence", "-k", "3"],
        &["convergence", "--levels", "0"],
        &["convergence", "--tol", "0"],
        &["convergence", "--family", "square"],
        &["convergence", "--format", "pdf"],
        &["probe-stability", "--levels", "3"],
        &["frobnicate"],
    ] {
        assert_eq!(code(args), EXIT_CONFIG, "{args:?}");
    }
    let mut v = BTreeMap::new();
    v.insert("rho".to_string(), "0".to_string());
    assert!(RunConfig::from_values(Command::Solve, &v).is_err());
}

#[test]
fn probe_guard_exits_with_code_4() {
    let dir = scratch("guard");
    assert_eq!(code(&["probe-stability", "--base", "16", "--out", dir.to_str().unwrap()]), EXIT_GUARD);
}

#[test]
fn nonconvergence_exits_with_code_3_and_keeps_partial_report() {
    let dir = scratch("partial");
    let out = dir.to_str().unwrap();
    assert_eq!(code(&["convergence", "--levels", "2", "--max-iter", "2", "--out", out]), EXIT_NONCONVERGENCE);
    let md = std::fs::read_to_string(dir.join("convergence_triangular_k0.md")).unwrap();
    assert!(md.contains("incomplete"));
}

#[test]
fn single_level_report_has_nan_rates_and_plot_script() {
    let dir = scratch("single");
    assert_eq!(code(&["convergence", "--levels", "1", "--out", dir.to_str().unwrap()]), EXIT_OK);
    let csv = std::fs::read_to_string(dir.join("convergence_triangular_k0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "level,h,e_sigma,r_sigma,e_u,r_u,e_p,r_p,iters,dofs");
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!((fields[3], fields[5], fields[7]), ("NaN", "NaN", "NaN"));
    let script = std::fs::read_to_string(dir.join("plot_convergence_triangular_k0.py")).unwrap();
    assert!(script.contains("convergence_triangular_k0.csv"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = scratch("determinism");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        assert_eq!(code(&["convergence", "--levels", "2", "--family", "nonconvex", "--out", out.to_str().unwrap()]), 0);
        outputs.push((
            std::fs::read(out.join("convergence_nonconvex_k0.csv")).unwrap(),
            std::fs::read(out.join("convergence_nonconvex_k0.md")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn solve_writes_report_and_fields() {
    let dir = scratch("solve");
    let c = RunConfig::from_args(["wgns", "solve", "--levels", "1", "--family", "hexagonal", "--out", dir.to_str().unwrap()])
        .unwrap();
    let out = run(&c).unwrap();
    assert_eq!(out.files.len(), 4);
    let fields = std::fs::read_to_string(dir.join("solve_hexagonal_k0_fields.csv")).unwrap();
    let mesh = generate(&MeshFamily::new(MeshKind::Hexagonal, 0)).unwrap();
    assert_eq!(fields.lines().count(), mesh.n_cells() + 1);
}

#[test]
fn cavity_lid_matches_boundary_data() {
    let dir = scratch("cavity");
    let mut iterations = Vec::new();
    for nu in ["1", "0.01"] {
        let c = RunConfig::from_args(["wgns", "cavity", "--family", "hexagonal", "--levels", "2", "--nu", nu, "--out", dir.to_str().unwrap()])
            .unwrap();
        let mesh = generate(&c.family().at_level(1)).unwrap();
        let st = picard_solve(&mesh, &c.problem(), &cavity_data(), c.tol, c.max_iter).unwrap();
        assert_eq!(st.status, PicardStatus::Converged);
        let lid = lid_trace(&mesh, &st.velocity).unwrap();
        assert!(lid.consistent(), "nu = {nu}: {lid:?}");
        assert!((lid.max_u1 - 1.0).abs() < 0.3, "{lid:?}");
        iterations.push(st.iterations);
        run(&c).unwrap();
    }
    println!("cavity Picard iterations (nu = 1, 0.01): {iterations:?}");
    assert!(iterations[1] > iterations[0]);
    assert!(dir.join("cavity_hexagonal_k0_nu1_fields.csv").exists());
}

#[test]
fn homogeneous_cavity_data_gives_zero_fields() {
    let mesh = generate(&MeshFamily::new(MeshKind::Hexagonal, 0)).unwrap();
    let st = picard_solve(&mesh, &ProblemConfig::new(1.0, 0), &BoundaryData::zero(), 1e-8, 10).unwrap();
    assert!(st.velocity.coeffs.iter().chain(&st.stress.interior).all(|v| v.abs() < 1e-12));
}
