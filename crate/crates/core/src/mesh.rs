//! Structured triangulations of the unit square and P1 degree-of-freedom maps.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizontal band `y0 < y < y1` carrying subdomain label 1; the rest is label 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandRegion {
    pub y0: f64,
    pub y1: f64,
}

/// How each grid square is split into triangles.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshPattern {
    /// Two triangles along the `(i,j)-(i+1,j+1)` diagonal.
    #[default]
    Diagonal,
    /// Four triangles around an added centre vertex.
    Crossed,
}

impl MeshPattern {
    pub fn name(self) -> &'static str {
        match self {
            MeshPattern::Diagonal => "diagonal",
            MeshPattern::Crossed => "crossed",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub h: f64,
    pub cell_labels: Vec<u8>,
    pub boundary_vertices: Vec<usize>,
    /// Cells per side of the underlying square grid.
    pub n: usize,
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_coords(&self, c: usize) -> [[f64; 2]; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    /// Signed area of cell `c`.
    pub fn cell_area(&self, c: usize) -> f64 {
        let [a, b, d] = self.cell_coords(c);
        0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn cell_centroid(&self, c: usize) -> [f64; 2] {
        let [a, b, d] = self.cell_coords(c);
        [(a[0] + b[0] + d[0]) / 3.0, (a[1] + b[1] + d[1]) / 3.0]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        let [x, y] = self.vertices[v];
        x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0
    }

    /// Writes `vertices.csv` (id, x, y) and `cells.csv` (id, v0, v1, v2, label) into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("vertices.csv"))?);
        writeln!(w, "id,x,y")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(w, "{},{},{}", i, v[0], v[1])?;
        }
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("cells.csv"))?);
        writeln!(w, "id,v0,v1,v2,label")?;
        for (i, (c, l)) in self.cells.iter().zip(&self.cell_labels).enumerate() {
            writeln!(w, "{},{},{},{},{}", i, c[0], c[1], c[2], l)?;
        }
        Ok(())
    }
}

fn grid_aligned(y: f64, n: usize) -> bool {
    let s = y * n as f64;
    (s - s.round()).abs() < 1e-9
}

/// Builds an `n x n` grid of squares on `[0,1]^2`, each split along the
/// `(i,j)-(i+1,j+1)` diagonal.
///
/// Without a region every cell gets label 2. With a band region, cells whose
/// centroid lies inside the band get label 1; the band edges must sit on grid lines.
pub fn build_unit_square_mesh(n: usize, region: Option<BandRegion>) -> Result<Mesh> {
    build_patterned_mesh(n, region, MeshPattern::Diagonal)
}

/// [`build_unit_square_mesh`] with a choice of square splitting. Crossed meshes
/// append the square centres after the `(n+1)^2` grid vertices.
pub fn build_patterned_mesh(n: usize, region: Option<BandRegion>, pattern: MeshPattern) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidMesh("need at least one cell per side".into()));
    }
    if let Some(b) = region {
        if !(0.0..=1.0).contains(&b.y0) || !(0.0..=1.0).contains(&b.y1) || b.y0 >= b.y1 {
            return Err(Error::InvalidMesh(format!(
                "band ({}, {}) is not a sub-interval of [0, 1]",
                b.y0, b.y1
            )));
        }
        if !grid_aligned(b.y0, n) || !grid_aligned(b.y1, n) {
            return Err(Error::InvalidMesh(format!(
                "band edges y = {} and y = {} are not resolved by a {n}x{n} grid",
                b.y0, b.y1
            )));
        }
    }

    let np = n + 1;
    let inv = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            // exact endpoints so boundary detection is exact
            let x = if i == n { 1.0 } else { i as f64 * inv };
            let y = if j == n { 1.0 } else { j as f64 * inv };
            vertices.push([x, y]);
        }
    }

    let mut cells = Vec::with_capacity(4 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * np + i;
            let v10 = v00 + 1;
            let v01 = v00 + np;
            let v11 = v01 + 1;
            match pattern {
                MeshPattern::Diagonal => {
                    cells.push([v00, v10, v11]);
                    cells.push([v00, v11, v01]);
                }
                MeshPattern::Crossed => {
                    let c = vertices.len();
                    vertices.push([(i as f64 + 0.5) * inv, (j as f64 + 0.5) * inv]);
                    cells.extend([[v00, v10, c], [v10, v11, c], [v11, v01, c], [v01, v00, c]]);
                }
            }
        }
    }
    let h = match pattern {
        MeshPattern::Diagonal => std::f64::consts::SQRT_2,
        MeshPattern::Crossed => 1.0,
    } / n as f64;

    let mut mesh = Mesh {
        vertices,
        cells,
        h,
        cell_labels: Vec::new(),
        boundary_vertices: Vec::new(),
        n,
    };
    mesh.boundary_vertices = (0..mesh.n_vertices())
        .filter(|&v| mesh.is_boundary_vertex(v))
        .collect();
    mesh.cell_labels = (0..mesh.n_cells())
        .map(|c| match region {
            Some(b) => {
                let y = mesh.cell_centroid(c)[1];
                if y > b.y0 && y < b.y1 {
                    1
                } else {
                    2
                }
            }
            None => 2,
        })
        .collect();
    Ok(mesh)
}

/// The three unknown fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    #[serde(rename = "u")]
    Displacement,
    #[serde(rename = "p")]
    Pressure,
    #[serde(rename = "theta")]
    Temperature,
}

impl Field {
    pub const ALL: [Field; 3] = [Field::Displacement, Field::Pressure, Field::Temperature];

    pub fn name(self) -> &'static str {
        match self {
            Field::Displacement => "u",
            Field::Pressure => "p",
            Field::Temperature => "theta",
        }
    }

    pub fn components(self) -> usize {
        match self {
            Field::Displacement => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// Boundary condition type per field; Dirichlet data is always homogeneous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BcSpec {
    pub u: BoundaryKind,
    pub p: BoundaryKind,
    pub theta: BoundaryKind,
}

impl BcSpec {
    pub fn all_dirichlet() -> Self {
        BcSpec {
            u: BoundaryKind::Dirichlet,
            p: BoundaryKind::Dirichlet,
            theta: BoundaryKind::Dirichlet,
        }
    }

    /// Clamped displacement, insulated and no-flux pressure/temperature.
    pub fn clamped_insulated() -> Self {
        BcSpec {
            u: BoundaryKind::Dirichlet,
            p: BoundaryKind::Neumann,
            theta: BoundaryKind::Neumann,
        }
    }

    pub fn kind(&self, field: Field) -> BoundaryKind {
        match field {
            Field::Displacement => self.u,
            Field::Pressure => self.p,
            Field::Temperature => self.theta,
        }
    }
}

/// P1 dof map of one field. Global dof of `(vertex, comp)` is `vertex * ncomp + comp`.
#[derive(Clone, Debug)]
pub struct FieldSpace {
    pub field: Field,
    pub n_components: usize,
    pub n_dofs: usize,
    pub constrained: Vec<usize>,
    pub free: Vec<usize>,
    global_to_free: Vec<usize>,
}

pub const NOT_FREE: usize = usize::MAX;

impl FieldSpace {
    fn new(mesh: &Mesh, field: Field, kind: BoundaryKind) -> Self {
        let nc = field.components();
        let n_dofs = nc * mesh.n_vertices();
        let mut global_to_free = vec![NOT_FREE; n_dofs];
        let mut free = Vec::new();
        let mut constrained = Vec::new();
        for v in 0..mesh.n_vertices() {
            let fixed = kind == BoundaryKind::Dirichlet && mesh.is_boundary_vertex(v);
            for c in 0..nc {
                let g = v * nc + c;
                if fixed {
                    constrained.push(g);
                } else {
                    global_to_free[g] = free.len();
                    free.push(g);
                }
            }
        }
        FieldSpace {
            field,
            n_components: nc,
            n_dofs,
            constrained,
            free,
            global_to_free,
        }
    }

    pub fn global_dof(&self, vertex: usize, comp: usize) -> usize {
        vertex * self.n_components + comp
    }

    /// Free index of `(vertex, comp)`, or `None` when constrained.
    pub fn free_index(&self, vertex: usize, comp: usize) -> Option<usize> {
        let f = self.global_to_free[self.global_dof(vertex, comp)];
        (f != NOT_FREE).then_some(f)
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    /// Vertex and component of free dof `i`.
    pub fn free_dof_location(&self, i: usize) -> (usize, usize) {
        let g = self.free[i];
        (g / self.n_components, g % self.n_components)
    }

    /// Expands a free-dof vector to all dofs, with zeros on constrained dofs.
    pub fn expand(&self, free_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_dofs];
        for (i, &g) in self.free.iter().enumerate() {
            out[g] = free_values[i];
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SpaceSet {
    pub mesh: Arc<Mesh>,
    pub u: FieldSpace,
    pub p: FieldSpace,
    pub theta: FieldSpace,
    pub bc: BcSpec,
}

impl SpaceSet {
    pub fn field(&self, field: Field) -> &FieldSpace {
        match field {
            Field::Displacement => &self.u,
            Field::Pressure => &self.p,
            Field::Temperature => &self.theta,
        }
    }

    /// Total dof counts `(n_u, n_p, n_theta)` before restriction.
    pub fn dof_counts(&self) -> (usize, usize, usize) {
        (self.u.n_dofs, self.p.n_dofs, self.theta.n_dofs)
    }

    pub fn free_counts(&self) -> (usize, usize, usize) {
        (self.u.n_free(), self.p.n_free(), self.theta.n_free())
    }
}

pub fn build_spaces(mesh: &Mesh, bc: BcSpec) -> SpaceSet {
    SpaceSet {
        mesh: Arc::new(mesh.clone()),
        u: FieldSpace::new(mesh, Field::Displacement, bc.u),
        p: FieldSpace::new(mesh, Field::Pressure, bc.p),
        theta: FieldSpace::new(mesh, Field::Temperature, bc.theta),
        bc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_square() {
        let m = build_unit_square_mesh(1, None).unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.n_vertices(), 4);
        let area: f64 = (0..m.n_cells()).map(|c| m.cell_area(c)).sum();
        assert!((area - 1.0).abs() < 1e-15);
        assert!(m.cell_labels.iter().all(|&l| l == 2));
    }

    #[test]
    fn coarse_mesh_size() {
        let m = build_unit_square_mesh(4, None).unwrap();
        assert!((m.h - 0.25 * std::f64::consts::SQRT_2).abs() < 1e-15);
        let m8 = build_unit_square_mesh(8, None).unwrap();
        assert_eq!(m.h / m8.h, 2.0);
    }

    #[test]
    fn positive_areas_and_tiling() {
        for n in [1, 3, 7, 16] {
            let m = build_unit_square_mesh(n, None).unwrap();
            let mut total = 0.0;
            for c in 0..m.n_cells() {
                let a = m.cell_area(c);
                assert!(a > 0.0);
                total += a;
            }
            assert!((total - 1.0).abs() < 1e-12);
            assert_eq!(m.boundary_vertices.len(), 4 * n);
        }
    }

    #[test]
    fn band_labels_counted_by_enumeration() {
        let band = BandRegion { y0: 0.35, y1: 0.65 };
        let m = build_unit_square_mesh(100, Some(band)).unwrap();
        assert_eq!(m.n_cells(), 20000);
        // enumerate rows j whose centre (j + 0.5)/100 lies in the band; 2 cells per square
        let rows = (0..100)
            .filter(|&j| {
                let y = (j as f64 + 0.5) / 100.0;
                y > 0.35 && y < 0.65
            })
            .count();
        let expected = rows * 100 * 2;
        assert_eq!(expected, 6000);
        assert_eq!(m.cell_labels.iter().filter(|&&l| l == 1).count(), expected);

        let area1: f64 = (0..m.n_cells())
            .filter(|&c| m.cell_labels[c] == 1)
            .map(|c| m.cell_area(c))
            .sum();
        assert!((area1 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn unresolved_band_is_rejected() {
        let band = BandRegion { y0: 0.35, y1: 0.65 };
        assert!(matches!(
            build_unit_square_mesh(16, Some(band)),
            Err(Error::InvalidMesh(_))
        ));
        assert!(build_unit_square_mesh(20, Some(band)).is_ok());
    }

    #[test]
    fn all_dirichlet_free_counts() {
        let m = build_unit_square_mesh(1, None).unwrap();
        let s = build_spaces(&m, BcSpec::all_dirichlet());
        assert_eq!(s.free_counts(), (0, 0, 0));

        let m = build_unit_square_mesh(4, None).unwrap();
        let s = build_spaces(&m, BcSpec::all_dirichlet());
        let interior = (0..m.n_vertices())
            .filter(|&v| {
                let [x, y] = m.vertices[v];
                x > 0.0 && x < 1.0 && y > 0.0 && y < 1.0
            })
            .count();
        assert_eq!(interior, 9);
        assert_eq!(s.free_counts(), (18, 9, 9));
    }

    #[test]
    fn neumann_fields_have_no_constraints() {
        let m = build_unit_square_mesh(100, None).unwrap();
        let s = build_spaces(&m, BcSpec::clamped_insulated());
        assert_eq!(s.dof_counts(), (20402, 10201, 10201));
        assert!(s.p.constrained.is_empty());
        assert!(s.theta.constrained.is_empty());
        assert_eq!(s.u.constrained.len(), 2 * 400);
    }

    #[test]
    fn dof_map_is_bijective() {
        let m = build_unit_square_mesh(5, None).unwrap();
        let s = build_spaces(&m, BcSpec::all_dirichlet());
        for fs in [&s.u, &s.p] {
            let mut seen = vec![false; fs.n_dofs];
            for &g in fs.free.iter().chain(&fs.constrained) {
                assert!(!seen[g]);
                seen[g] = true;
            }
            assert!(seen.iter().all(|&b| b));
            for i in 0..fs.n_free() {
                let (v, c) = fs.free_dof_location(i);
                assert_eq!(fs.free_index(v, c), Some(i));
            }
        }
    }

    #[test]
    fn crossed_pattern() {
        let m = build_patterned_mesh(4, None, MeshPattern::Crossed).unwrap();
        assert_eq!(m.n_cells(), 64);
        assert_eq!(m.n_vertices(), 25 + 16);
        assert_eq!(m.h, 0.25);
        assert_eq!(m.boundary_vertices.len(), 16);
        let total: f64 = (0..m.n_cells()).map(|c| m.cell_area(c)).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!((0..m.n_cells()).all(|c| (m.cell_area(c) - 1.0 / 64.0).abs() < 1e-15));
        // 9 interior grid vertices plus 16 centres
        let s = build_spaces(&m, BcSpec::all_dirichlet());
        assert_eq!(s.free_counts(), (50, 25, 25));
        let band = BandRegion { y0: 0.35, y1: 0.65 };
        let m = build_patterned_mesh(20, Some(band), MeshPattern::Crossed).unwrap();
        let area1: f64 = (0..m.n_cells()).filter(|&c| m.cell_labels[c] == 1).map(|c| m.cell_area(c)).sum();
        assert!((area1 - 0.3).abs() < 1e-12);
    }
}
