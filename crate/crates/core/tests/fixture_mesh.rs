use std::path::PathBuf;

use wgns::analysis::example1_stokes_case;
use wgns::cli::main_with_args;
use wgns::mesh::{generate, load_mesh, MeshFamily, MeshKind};
use wgns::system::{picard_solve, PicardStatus};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn has_reflex_vertex(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    (0..n).any(|i| {
        let (a, b, c) = (poly[(i + n - 1) % n], poly[i], poly[(i + 1) % n]);
        (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]) < -1e-14
    })
}

#[test]
fn fixture_meshes_are_valid_and_nonconvex() {
    for level in 0..2 {
        let mesh = load_mesh(&fixture(&format!("nonconvex_{level}.json"))).unwrap();
        mesh.check_invariants().unwrap();
        assert!((mesh.area() - 1.0).abs() < 1e-12);
        assert!((0..mesh.n_cells()).all(|c| has_reflex_vertex(&mesh.cell_polygon(c))));
        let mut fam = MeshFamily::new(MeshKind::NonConvex, level);
        fam.base = 2;
        let generated = generate(&fam).unwrap();
        assert_eq!(mesh.vertices(), generated.vertices());
        assert_eq!(mesh.cells(), generated.cells());
    }
}

#[test]
fn file_family_substitutes_level() {
    let pattern = fixture("nonconvex_{level}.json");
    let fam = MeshFamily::new(MeshKind::File(pattern), 0);
    let coarse = generate(&fam).unwrap();
    let fine = generate(&fam.at_level(1)).unwrap();
    assert_eq!(fine.n_cells(), 4 * coarse.n_cells());
    let case = example1_stokes_case(0.1);
    let st = picard_solve(&fine, &case.config(0), &case.data(), 1e-6, 10).unwrap();
    assert_eq!((st.status, st.iterations), (PicardStatus::Converged, 1));
}

#[test]
fn cli_accepts_file_family() {
    let out = std::env::temp_dir().join(format!("wgns-fixture-{}", std::process::id()));
    let family = format!("file:{}", fixture("nonconvex_{level}.json").display());
    let code = main_with_args(["wgns", "convergence", "--family", &family, "--levels", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.join("convergence_file_k0.csv").exists());
    let _ = std::fs::remove_dir_all(out);
}
