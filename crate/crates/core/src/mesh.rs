//! Structured triangulations of the unit square.
//!
//! The cavity benchmark and the manufactured-solution runs both use the same
//! mesh family: an n x n grid of squares, each split along the bottom-left to
//! top-right diagonal. Boundary edges carry labels so downstream code can
//! attach wall boundary conditions without re-deriving geometry.

use thiserror::Error;

/// Classification of a boundary edge (or boundary node).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryLabel {
    /// x = 0, temperature held at 1.
    HotWall,
    /// x = 1, temperature held at 0.
    ColdWall,
    /// y = 0 and y = 1, zero normal heat flux.
    Adiabatic,
    /// Whole boundary Dirichlet (manufactured-solution problems).
    FullDirichlet,
}

/// Boundary labeling scheme selected at mesh build time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Labeling {
    /// Hot wall at x=0, cold wall at x=1, adiabatic horizontal walls.
    Cavity,
    /// Every boundary edge labeled `FullDirichlet`.
    AllDirichlet,
}

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh resolution must be at least 1")]
    ZeroResolution,
}

/// An oriented boundary edge: vertex pair plus wall label.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub label: BoundaryLabel,
}

/// Triangulation of the unit square.
///
/// `edges` enumerates every unique edge (sorted vertex pairs); `tri_edges[t][k]`
/// is the edge opposite local vertex `k` of triangle `t`. Both are derived data
/// used by the P2 dof map and never mutated after construction.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Maximum over triangles of the longest edge length.
    pub h_max: f64,
    /// Unique mesh edges as sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// Per triangle, the edge index opposite each local vertex.
    pub tri_edges: Vec<[usize; 3]>,
    /// Grid resolution used to build the mesh (cells per side).
    pub n: usize,
    pub labeling: Labeling,
}

/// Build the structured mesh: (n+1)^2 vertices, 2n^2 triangles, every cell
/// diagonal running bottom-left to top-right.
pub fn build_structured_mesh(n: usize, labeling: Labeling) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::ZeroResolution);
    }
    let np = n + 1;
    let h = 1.0 / n as f64;
    let vid = |i: usize, j: usize| j * np + i;

    let mut vertices = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v01 = vid(i, j + 1);
            let v11 = vid(i + 1, j + 1);
            // Both triangles counterclockwise, sharing the v00-v11 diagonal.
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    let mut boundary_edges = Vec::with_capacity(4 * n);
    let label_for = |vertical: bool, hot: bool| match labeling {
        Labeling::AllDirichlet => BoundaryLabel::FullDirichlet,
        Labeling::Cavity => {
            if vertical {
                if hot {
                    BoundaryLabel::HotWall
                } else {
                    BoundaryLabel::ColdWall
                }
            } else {
                BoundaryLabel::Adiabatic
            }
        }
    };
    for i in 0..n {
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(i, 0), vid(i + 1, 0)],
            label: label_for(false, false),
        });
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(i + 1, n), vid(i, n)],
            label: label_for(false, false),
        });
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(0, i + 1), vid(0, i)],
            label: label_for(true, true),
        });
        boundary_edges.push(BoundaryEdge {
            vertices: [vid(n, i), vid(n, i + 1)],
            label: label_for(true, false),
        });
    }

    let (edges, tri_edges) = enumerate_edges(&triangles);
    let h_max = max_edge_length(&vertices, &triangles);

    Ok(Mesh {
        vertices,
        triangles,
        boundary_edges,
        h_max,
        edges,
        tri_edges,
        n,
        labeling,
    })
}

/// Unique edge list (sorted pairs) plus the triangle -> edge map, with edge k
/// of a triangle opposite its local vertex k.
fn enumerate_edges(triangles: &[[usize; 3]]) -> (Vec<[usize; 2]>, Vec<[usize; 3]>) {
    use std::collections::HashMap;
    let mut index: HashMap<[usize; 2], usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut tri_edges = Vec::with_capacity(triangles.len());
    for tri in triangles {
        let mut local = [0usize; 3];
        for k in 0..3 {
            let a = tri[(k + 1) % 3];
            let b = tri[(k + 2) % 3];
            let key = if a < b { [a, b] } else { [b, a] };
            let id = *index.entry(key).or_insert_with(|| {
                edges.push(key);
                edges.len() - 1
            });
            local[k] = id;
        }
        tri_edges.push(local);
    }
    (edges, tri_edges)
}

fn max_edge_length(vertices: &[[f64; 2]], triangles: &[[usize; 3]]) -> f64 {
    let mut h = 0.0f64;
    for tri in triangles {
        for k in 0..3 {
            let a = vertices[tri[k]];
            let b = vertices[tri[(k + 1) % 3]];
            let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            h = h.max(len);
        }
    }
    h
}

/// Maximum triangle diameter of the mesh.
pub fn mesh_size(mesh: &Mesh) -> f64 {
    mesh.h_max
}

/// The unit reference triangle (0,0), (1,0), (0,1) as a one-element mesh.
/// Fixture for assembly oracles; not a valid cavity domain.
pub fn single_reference_triangle() -> Mesh {
    let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let triangles = vec![[0, 1, 2]];
    let (edges, tri_edges) = enumerate_edges(&triangles);
    let boundary_edges = vec![
        BoundaryEdge {
            vertices: [0, 1],
            label: BoundaryLabel::FullDirichlet,
        },
        BoundaryEdge {
            vertices: [1, 2],
            label: BoundaryLabel::FullDirichlet,
        },
        BoundaryEdge {
            vertices: [2, 0],
            label: BoundaryLabel::FullDirichlet,
        },
    ];
    let h_max = max_edge_length(&vertices, &triangles);
    Mesh {
        vertices,
        triangles,
        boundary_edges,
        h_max,
        edges,
        tri_edges,
        n: 1,
        labeling: Labeling::AllDirichlet,
    }
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Twice the signed area of triangle `t` (positive for ccw orientation).
    pub fn double_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        let pc = self.vertices[c];
        (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1])
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * self.double_area(t)
    }

    /// Wall label of a boundary point by coordinate, resolving corners to the
    /// vertical (Dirichlet) walls.
    pub fn point_label(&self, x: f64, y: f64) -> Option<BoundaryLabel> {
        let eps = 1e-12;
        let on_left = x.abs() <= eps;
        let on_right = (x - 1.0).abs() <= eps;
        let on_horiz = y.abs() <= eps || (y - 1.0).abs() <= eps;
        if !(on_left || on_right || on_horiz) {
            return None;
        }
        Some(match self.labeling {
            Labeling::AllDirichlet => BoundaryLabel::FullDirichlet,
            Labeling::Cavity => {
                if on_left {
                    BoundaryLabel::HotWall
                } else if on_right {
                    BoundaryLabel::ColdWall
                } else {
                    BoundaryLabel::Adiabatic
                }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_resolution() {
        assert!(build_structured_mesh(0, Labeling::Cavity).is_err());
    }

    #[test]
    fn single_cell_counts() {
        let m = build_structured_mesh(1, Labeling::Cavity).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert!((m.h_max - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_cell_counts() {
        let m = build_structured_mesh(2, Labeling::Cavity).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_triangles(), 8);
    }

    #[test]
    fn benchmark_mesh_counts() {
        // Counting oracle: (n+1)^2 vertices, 2n^2 triangles, 3n^2+2n edges.
        let n = 64;
        let m = build_structured_mesh(n, Labeling::Cavity).unwrap();
        assert_eq!(m.n_vertices(), (n + 1) * (n + 1));
        assert_eq!(m.n_vertices(), 4225);
        assert_eq!(m.n_triangles(), 2 * n * n);
        assert_eq!(m.n_triangles(), 8192);
        assert_eq!(m.edges.len(), 3 * n * n + 2 * n);
        assert!((m.h_max - 2.0f64.sqrt() / 64.0).abs() < 1e-15);
        assert!((m.h_max - 0.0221).abs() < 5e-4);
    }

    #[test]
    fn mesh_size_scales_uniformly() {
        for n in [1usize, 8, 64] {
            let m = build_structured_mesh(n, Labeling::Cavity).unwrap();
            assert!((mesh_size(&m) - 2.0f64.sqrt() / n as f64).abs() < 1e-14);
        }
    }

    #[test]
    fn areas_positive_and_sum_to_one() {
        for n in [1usize, 2, 3, 7, 16, 33] {
            let m = build_structured_mesh(n, Labeling::Cavity).unwrap();
            let mut total = 0.0;
            for t in 0..m.n_triangles() {
                let a = m.area(t);
                assert!(a > 0.0, "triangle {t} has nonpositive area");
                total += a;
            }
            assert!((total - 1.0).abs() < 1e-12, "n={n}: area sum {total}");
        }
    }

    #[test]
    fn euler_characteristic() {
        // V - E + F = 1 with the outer face excluded, for all n in 1..=64.
        for n in 1..=64usize {
            let m = build_structured_mesh(n, Labeling::Cavity).unwrap();
            let v = m.n_vertices() as i64;
            let e = m.edges.len() as i64;
            let f = m.n_triangles() as i64;
            assert_eq!(v - e + f, 1, "n={n}");
        }
    }

    #[test]
    fn boundary_edges_cover_boundary_once() {
        use std::collections::HashMap;
        for n in [1usize, 2, 5, 16] {
            let m = build_structured_mesh(n, Labeling::Cavity).unwrap();
            assert_eq!(m.boundary_edges.len(), 4 * n);
            // Count triangle adjacency per edge; boundary edges must appear in
            // exactly one triangle, interior edges in exactly two.
            let mut count: HashMap<[usize; 2], usize> = HashMap::new();
            for tri in &m.triangles {
                for k in 0..3 {
                    let a = tri[(k + 1) % 3];
                    let b = tri[(k + 2) % 3];
                    let key = if a < b { [a, b] } else { [b, a] };
                    *count.entry(key).or_insert(0) += 1;
                }
            }
            let mut boundary_len = 0.0;
            for be in &m.boundary_edges {
                let [a, b] = be.vertices;
                let key = if a < b { [a, b] } else { [b, a] };
                assert_eq!(count[&key], 1, "boundary edge in more than one triangle");
                let pa = m.vertices[a];
                let pb = m.vertices[b];
                boundary_len += ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
            }
            assert!((boundary_len - 4.0).abs() < 1e-12);
            let n_boundary = count.values().filter(|&&c| c == 1).count();
            assert_eq!(n_boundary, m.boundary_edges.len());
        }
    }

    #[test]
    fn cavity_wall_labels() {
        let m = build_structured_mesh(8, Labeling::Cavity).unwrap();
        for be in &m.boundary_edges {
            let [a, b] = be.vertices;
            let xa = m.vertices[a][0];
            let xb = m.vertices[b][0];
            match be.label {
                BoundaryLabel::HotWall => assert!(xa == 0.0 && xb == 0.0),
                BoundaryLabel::ColdWall => assert!(xa == 1.0 && xb == 1.0),
                BoundaryLabel::Adiabatic => {
                    let ya = m.vertices[a][1];
                    let yb = m.vertices[b][1];
                    assert!(ya == yb && (ya == 0.0 || ya == 1.0));
                }
                BoundaryLabel::FullDirichlet => panic!("unexpected label"),
            }
        }
        // Corners resolve to the vertical walls.
        assert_eq!(m.point_label(0.0, 0.0), Some(BoundaryLabel::HotWall));
        assert_eq!(m.point_label(0.0, 1.0), Some(BoundaryLabel::HotWall));
        assert_eq!(m.point_label(1.0, 0.0), Some(BoundaryLabel::ColdWall));
        assert_eq!(m.point_label(1.0, 1.0), Some(BoundaryLabel::ColdWall));
        assert_eq!(m.point_label(0.0, 0.5), Some(BoundaryLabel::HotWall));
        assert_eq!(m.point_label(0.5, 1.0), Some(BoundaryLabel::Adiabatic));
        assert_eq!(m.point_label(0.5, 0.5), None);
    }

    #[test]
    fn mms_labels_all_dirichlet() {
        let m = build_structured_mesh(4, Labeling::AllDirichlet).unwrap();
        assert!(m
            .boundary_edges
            .iter()
            .all(|be| be.label == BoundaryLabel::FullDirichlet));
    }
}
