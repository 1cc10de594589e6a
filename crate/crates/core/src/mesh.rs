//! Polygonal meshes: connectivity, geometric measures, built-in families and JSON IO.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("cell {cell} has {count} vertices, at least 3 are required")]
    TooFewVertices { cell: usize, count: usize },
    #[error("cell {cell} references vertex {vertex}, but the mesh has {n_vertices} vertices")]
    DanglingVertex { cell: usize, vertex: usize, n_vertices: usize },
    #[error("cell {cell} repeats vertex {vertex}")]
    RepeatedVertex { cell: usize, vertex: usize },
    #[error("cell {cell} is not counter-clockwise (signed area {area:e})")]
    NotCounterClockwise { cell: usize, area: f64 },
    #[error("cell {cell} is not a simple polygon")]
    NotSimple { cell: usize },
    #[error("edge ({0}, {1}) is shared by more than two cells or with inconsistent orientation")]
    NonManifoldEdge(usize, usize),
    #[error("mesh has no cells")]
    Empty,
    #[error("unsupported mesh family `{0}`")]
    UnsupportedFamily(String),
    #[error("invalid domain rectangle {0:?}")]
    BadDomain([f64; 4]),
    #[error("mesh family level {level} with base {base} produces no cells")]
    NoCells { level: usize, base: usize },
    #[error("unsupported mesh file version {0}")]
    Version(u32),
    #[error("mesh file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("mesh file {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
}

/// An edge of the mesh. `vertices` follows the counter-clockwise traversal of `left`,
/// so the stored normal points out of `left` (and into `right` for interior edges).
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// Reference from a cell to one of its edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEdge {
    pub edge: usize,
    /// `+1.0` when the global edge normal is the outward normal of the cell, `-1.0` otherwise.
    pub sign: f64,
}

#[derive(Debug, Clone)]
pub struct PolygonalMesh {
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
    edges: Vec<Edge>,
    edge_normals: Vec<Point>,
    edge_lengths: Vec<f64>,
    cell_edges: Vec<Vec<CellEdge>>,
    cell_areas: Vec<f64>,
    cell_centroids: Vec<Point>,
    cell_diameters: Vec<f64>,
    mesh_size: f64,
}

pub(crate) fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

fn polygon_centroid(poly: &[Point], area: f64) -> Point {
    let n = poly.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let w = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * w;
        cy += (p[1] + q[1]) * w;
    }
    [cx / (6.0 * area), cy / (6.0 * area)]
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on_segment = |a: Point, b: Point, c: Point| {
        c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

pub(crate) fn is_simple(poly: &[Point]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

impl PolygonalMesh {
    /// Builds a mesh from vertex coordinates and counter-clockwise cell cycles, deriving
    /// edges, normals and measures.
    pub fn new(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        if cells.is_empty() {
            return Err(MeshError::Empty);
        }
        let nv = vertices.len();
        let mut cell_areas = Vec::with_capacity(cells.len());
        let mut cell_centroids = Vec::with_capacity(cells.len());
        let mut cell_diameters = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(MeshError::TooFewVertices { cell: c, count: cell.len() });
            }
            for (i, &v) in cell.iter().enumerate() {
                if v >= nv {
                    return Err(MeshError::DanglingVertex { cell: c, vertex: v, n_vertices: nv });
                }
                if cell[..i].contains(&v) {
                    return Err(MeshError::RepeatedVertex { cell: c, vertex: v });
                }
            }
            let poly: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let area = signed_area(&poly);
            if !(area > 0.0) {
                return Err(MeshError::NotCounterClockwise { cell: c, area });
            }
            if !is_simple(&poly) {
                return Err(MeshError::NotSimple { cell: c });
            }
            let mut diam: f64 = 0.0;
            for i in 0..poly.len() {
                for j in (i + 1)..poly.len() {
                    diam = diam.max(dist(poly[i], poly[j]));
                }
            }
            cell_areas.push(area);
            cell_centroids.push(polygon_centroid(&poly, area));
            cell_diameters.push(diam);
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let n = cell.len();
            let mut local = Vec::with_capacity(n);
            for i in 0..n {
                let a = cell[i];
                let b = cell[(i + 1) % n];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        // the second cell must traverse the edge in the opposite direction
                        if edge.right.is_some() || edge.vertices != [b, a] {
                            return Err(MeshError::NonManifoldEdge(key.0, key.1));
                        }
                        edge.right = Some(c);
                        local.push(CellEdge { edge: e, sign: -1.0 });
                    }
                    None => {
                        lookup.insert(key, edges.len());
                        local.push(CellEdge { edge: edges.len(), sign: 1.0 });
                        edges.push(Edge { vertices: [a, b], left: c, right: None });
                    }
                }
            }
            cell_edges.push(local);
        }

        let mut edge_normals = Vec::with_capacity(edges.len());
        let mut edge_lengths = Vec::with_capacity(edges.len());
        for e in &edges {
            let (n, l) = normal_and_length(vertices[e.vertices[0]], vertices[e.vertices[1]]);
            edge_normals.push(n);
            edge_lengths.push(l);
        }
        let mesh_size = cell_diameters.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            vertices,
            cells,
            edges,
            edge_normals,
            edge_lengths,
            cell_edges,
            cell_areas,
            cell_centroids,
            cell_diameters,
            mesh_size,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn edge_normal(&self, e: usize) -> Point {
        self.edge_normals[e]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.edge_lengths[e]
    }

    pub fn edge_endpoints(&self, e: usize) -> (Point, Point) {
        let [a, b] = self.edges[e].vertices;
        (self.vertices[a], self.vertices[b])
    }

    pub fn cell_edges(&self, c: usize) -> &[CellEdge] {
        &self.cell_edges[c]
    }

    pub fn cell_polygon(&self, c: usize) -> Vec<Point> {
        self.cells[c].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        self.cell_areas[c]
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        self.cell_centroids[c]
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        self.cell_diameters[c]
    }

    /// h = max over cells of the cell diameter.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    pub fn boundary_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().enumerate().filter(|(_, e)| e.is_boundary()).map(|(i, _)| i)
    }

    /// Per-edge adjacency used to evaluate jumps: `jump(v) = v|_plus - v|_minus`, where
    /// the edge normal points from `plus` to `minus`; on boundary edges `jump(v) = v|_plus`.
    pub fn jump_trace_data(&self) -> Vec<JumpTrace> {
        self.edges
            .iter()
            .enumerate()
            .map(|(e, edge)| JumpTrace { edge: e, plus: edge.left, minus: edge.right })
            .collect()
    }

    /// Re-checks the structural invariants of the mesh. Returns a description of the first
    /// violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (c, cell) in self.cells.iter().enumerate() {
            let poly: Vec<Point> = cell.iter().map(|&v| self.vertices[v]).collect();
            if signed_area(&poly) <= 0.0 {
                return Err(format!("cell {c} has non-positive area"));
            }
            if !is_simple(&poly) {
                return Err(format!("cell {c} is not simple"));
            }
        }
        let mut count = vec![0usize; self.edges.len()];
        for ce in self.cell_edges.iter().flatten() {
            count[ce.edge] += 1;
        }
        for (e, edge) in self.edges.iter().enumerate() {
            let expected = if edge.is_boundary() { 1 } else { 2 };
            if count[e] != expected {
                return Err(format!("edge {e} is referenced by {} cells", count[e]));
            }
            let (n, _) = normal_and_length(self.vertices[edge.vertices[0]], self.vertices[edge.vertices[1]]);
            let stored = self.edge_normals[e];
            if (n[0] - stored[0]).abs() > 1e-14 || (n[1] - stored[1]).abs() > 1e-14 {
                return Err(format!("edge {e} normal does not match its vertices"));
            }
            if ((stored[0] * stored[0] + stored[1] * stored[1]).sqrt() - 1.0).abs() > 1e-14 {
                return Err(format!("edge {e} normal is not unit"));
            }
            if let Some(r) = edge.right {
                if r <= edge.left {
                    return Err(format!("interior edge {e} is not oriented from lower to higher cell index"));
                }
            }
        }
        Ok(())
    }

    /// Returns a copy of the mesh with cells reordered so that new cell `i` is old cell `order[i]`.
    pub fn permute_cells(&self, order: &[usize]) -> Result<Self, MeshError> {
        let cells = order.iter().map(|&c| self.cells[c].clone()).collect();
        Self::new(self.vertices.clone(), cells)
    }

    /// Maps every vertex through `f` (e.g. to move a unit-square mesh onto a rectangle).
    pub fn map_vertices(&self, f: impl Fn(Point) -> Point) -> Result<Self, MeshError> {
        Self::new(self.vertices.iter().map(|&p| f(p)).collect(), self.cells.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpTrace {
    pub edge: usize,
    pub plus: usize,
    pub minus: Option<usize>,
}

impl JumpTrace {
    /// Evaluates the jump of a broken field given a per-cell evaluator.
    pub fn jump<F: Fn(usize, Point) -> [f64; 2]>(&self, eval: F, p: Point) -> [f64; 2] {
        let a = eval(self.plus, p);
        match self.minus {
            Some(m) => {
                let b = eval(m, p);
                [a[0] - b[0], a[1] - b[1]]
            }
            None => a,
        }
    }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn normal_and_length(a: Point, b: Point) -> (Point, f64) {
    let t = [b[0] - a[0], b[1] - a[1]];
    let l = (t[0] * t[0] + t[1] * t[1]).sqrt();
    ([t[1] / l, -t[0] / l], l)
}

// ---------------------------------------------------------------------------------------------
// mesh families

#[derive(Debug, Clone, PartialEq)]
pub enum MeshKind {
    Triangular,
    Hexagonal,
    NonConvex,
    /// Path to a JSON mesh; a `{level}` placeholder is replaced with the level number.
    File(PathBuf),
}

impl std::str::FromStr for MeshKind {
    type Err = MeshError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "triangular" => Ok(MeshKind::Triangular),
            "hexagonal" => Ok(MeshKind::Hexagonal),
            "nonconvex" => Ok(MeshKind::NonConvex),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(MeshKind::File(PathBuf::from(p))),
                _ => Err(MeshError::UnsupportedFamily(s.to_string())),
            },
        }
    }
}

impl std::fmt::Display for MeshKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeshKind::Triangular => write!(f, "triangular"),
            MeshKind::Hexagonal => write!(f, "hexagonal"),
            MeshKind::NonConvex => write!(f, "nonconvex"),
            MeshKind::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// A family of successively refined meshes on a rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFamily {
    pub kind: MeshKind,
    pub level: usize,
    /// `[x0, x1, y0, y1]`
    pub domain: [f64; 4],
    /// Number of subdivisions per side at level 0 (triangular and non-convex families).
    pub base: usize,
}

impl MeshFamily {
    pub fn new(kind: MeshKind, level: usize) -> Self {
        let base = if kind == MeshKind::Triangular { 8 } else { 4 };
        Self { kind, level, domain: [0.0, 1.0, 0.0, 1.0], base }
    }

    pub fn unit_square(kind: MeshKind, level: usize) -> Self {
        Self::new(kind, level)
    }

    pub fn at_level(&self, level: usize) -> Self {
        Self { level, ..self.clone() }
    }
}

/// Generates the mesh described by `family`.
///
/// * triangular: `n x n` squares (`n = base * 2^level`) each split by its `/` diagonal.
/// * hexagonal: an affinely scaled honeycomb with `6 * 2^level` rows and `5 * 2^level` columns,
///   clipped through hexagon centers on the boundary so clipped cells are quads and pentagons.
/// * nonconvex: `n x n` squares each cut by a zig-zag polyline into two non-convex hexagons.
pub fn generate(family: &MeshFamily) -> Result<PolygonalMesh, MeshError> {
    let [x0, x1, y0, y1] = family.domain;
    if !(x1 > x0) || !(y1 > y0) || !family.domain.iter().all(|v| v.is_finite()) {
        return Err(MeshError::BadDomain(family.domain));
    }
    let scale = 1usize.checked_shl(family.level as u32).unwrap_or(0);
    let unit = match &family.kind {
        MeshKind::Triangular => {
            let n = family.base * scale;
            if n == 0 {
                return Err(MeshError::NoCells { level: family.level, base: family.base });
            }
            triangles(n)
        }
        MeshKind::NonConvex => {
            let n = family.base * scale;
            if n == 0 {
                return Err(MeshError::NoCells { level: family.level, base: family.base });
            }
            zigzag(n)
        }
        MeshKind::Hexagonal => {
            if scale == 0 {
                return Err(MeshError::NoCells { level: family.level, base: family.base });
            }
            honeycomb(6 * scale, 5 * scale)
        }
        MeshKind::File(path) => {
            let s = path.to_string_lossy().replace("{level}", &family.level.to_string());
            return load_mesh(Path::new(&s));
        }
    }?;
    if family.domain == [0.0, 1.0, 0.0, 1.0] {
        return Ok(unit);
    }
    unit.map_vertices(|p| [x0 + (x1 - x0) * p[0], y0 + (y1 - y0) * p[1]])
}

fn grid_vertices(n: usize) -> Vec<Point> {
    let h = 1.0 / n as f64;
    let mut v = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            v.push([i as f64 * h, j as f64 * h]);
        }
    }
    v
}

fn triangles(n: usize) -> Result<PolygonalMesh, MeshError> {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.push(vec![a, b, c]);
            cells.push(vec![a, c, d]);
        }
    }
    PolygonalMesh::new(grid_vertices(n), cells)
}

fn zigzag(n: usize) -> Result<PolygonalMesh, MeshError> {
    let h = 1.0 / n as f64;
    let amp = 0.15 * h;
    let mut vertices = grid_vertices(n);
    let corner = |i: usize, j: usize| j * (n + 1) + i;
    // mid-height points on vertical grid lines, shared by horizontal neighbours
    let mid_base = vertices.len();
    for j in 0..n {
        for i in 0..=n {
            vertices.push([i as f64 * h, (j as f64 + 0.5) * h]);
        }
    }
    let mid = |i: usize, j: usize| mid_base + j * (n + 1) + i;
    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 * h, (j as f64 + 0.5) * h);
            let up = vertices.len();
            vertices.push([x + h / 3.0, y + amp]);
            let down = vertices.len();
            vertices.push([x + 2.0 * h / 3.0, y - amp]);
            cells.push(vec![corner(i, j), corner(i + 1, j), mid(i + 1, j), down, up, mid(i, j)]);
            cells.push(vec![mid(i, j), up, down, mid(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1)]);
        }
    }
    PolygonalMesh::new(vertices, cells)
}

/// Clips a polygon with integer coordinates to the box `[0, xmax] x [0, ymax]`.
fn clip_to_box(poly: &[[i64; 2]], xmax: i64, ymax: i64) -> Vec<[i64; 2]> {
    // (axis, bound, keep >= bound?)
    let planes = [(0usize, 0i64, true), (0, xmax, false), (1, 0, true), (1, ymax, false)];
    let mut out: Vec<[f64; 2]> = poly.iter().map(|p| [p[0] as f64, p[1] as f64]).collect();
    for &(axis, bound, lower) in &planes {
        let b = bound as f64;
        let inside = |p: &[f64; 2]| if lower { p[axis] >= b } else { p[axis] <= b };
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let (ci, pi) = (inside(&cur), inside(&prev));
            if ci != pi {
                let t = (b - prev[axis]) / (cur[axis] - prev[axis]);
                let mut q = [prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])];
                q[axis] = b;
                out.push(q);
            }
            if ci {
                out.push(cur);
            }
        }
        if out.is_empty() {
            return Vec::new();
        }
    }
    let mut res: Vec<[i64; 2]> = Vec::with_capacity(out.len());
    for p in out {
        let q = [p[0].round() as i64, p[1].round() as i64];
        if res.last() != Some(&q) {
            res.push(q);
        }
    }
    while res.len() > 1 && res.first() == res.last() {
        res.pop();
    }
    res
}

fn honeycomb(rows: usize, cols: usize) -> Result<PolygonalMesh, MeshError> {
    // Lattice units: x in half-columns, y in thirds of a row. Rows are cut through hexagon
    // centers at y = 0 and y = 1 (rows is even), columns at x = 0 and x = 1 on even rows.
    let xmax = 2 * cols as i64;
    let ymax = 3 * rows as i64;
    let mut index: HashMap<[i64; 2], usize> = HashMap::new();
    let mut lattice: Vec<[i64; 2]> = Vec::new();
    let mut cells = Vec::new();
    for j in 0..=rows as i64 {
        let offset = j % 2;
        let ncent = if offset == 0 { cols as i64 + 1 } else { cols as i64 };
        for i in 0..ncent {
            let (cx, cy) = (2 * i + offset, 3 * j);
            let hex = [
                [cx, cy - 2],
                [cx + 1, cy - 1],
                [cx + 1, cy + 1],
                [cx, cy + 2],
                [cx - 1, cy + 1],
                [cx - 1, cy - 1],
            ];
            let clipped = clip_to_box(&hex, xmax, ymax);
            if clipped.len() < 3 {
                continue;
            }
            let area2: i64 = (0..clipped.len())
                .map(|a| {
                    let p = clipped[a];
                    let q = clipped[(a + 1) % clipped.len()];
                    p[0] * q[1] - q[0] * p[1]
                })
                .sum();
            if area2 <= 0 {
                continue;
            }
            let cell = clipped
                .into_iter()
                .map(|p| {
                    *index.entry(p).or_insert_with(|| {
                        lattice.push(p);
                        lattice.len() - 1
                    })
                })
                .collect();
            cells.push(cell);
        }
    }
    let (sx, sy) = (1.0 / xmax as f64, 1.0 / ymax as f64);
    let vertices = lattice.iter().map(|p| [p[0] as f64 * sx, p[1] as f64 * sy]).collect();
    PolygonalMesh::new(vertices, cells)
}

// ---------------------------------------------------------------------------------------------
// JSON IO

#[derive(Serialize, Deserialize)]
struct MeshFile {
    version: u32,
    vertices: Vec<Point>,
    cells: Vec<Vec<usize>>,
}

pub fn mesh_to_json(mesh: &PolygonalMesh) -> String {
    let file = MeshFile { version: 1, vertices: mesh.vertices.clone(), cells: mesh.cells.clone() };
    serde_json::to_string(&file).expect("mesh serialization cannot fail")
}

pub fn mesh_from_json(text: &str) -> Result<PolygonalMesh, MeshError> {
    parse_mesh(text, Path::new("<memory>"))
}

fn parse_mesh(text: &str, path: &Path) -> Result<PolygonalMesh, MeshError> {
    let file: MeshFile =
        serde_json::from_str(text).map_err(|source| MeshError::Parse { path: path.to_path_buf(), source })?;
    if file.version != 1 {
        return Err(MeshError::Version(file.version));
    }
    PolygonalMesh::new(file.vertices, file.cells)
}

pub fn load_mesh(path: &Path) -> Result<PolygonalMesh, MeshError> {
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io { path: path.to_path_buf(), source })?;
    parse_mesh(&text, path)
}

pub fn save_mesh(mesh: &PolygonalMesh, path: &Path) -> Result<(), MeshError> {
    std::fs::write(path, mesh_to_json(mesh)).map_err(|source| MeshError::Io { path: path.to_path_buf(), source })
}
