//! Taylor-Hood (P2-P1-P2) spaces on the structured mesh and every operator
//! the timesteppers assemble: mass, stiffness, grad-div, divergence coupling,
//! skew-symmetric convection, loads, buoyancy, and Dirichlet elimination.

pub mod basis;
pub mod eval;
pub mod quad;

use std::sync::Arc;

use crate::linsolve::{Pattern, SparseMatrix};
use crate::mesh::{BoundaryLabel, Mesh};

use basis::{p1_shape, p2_grad_ref, p2_shape};
use quad::QuadPoint;

/// Which problem the Dirichlet sets describe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    /// No-slip walls, hot/cold vertical walls, adiabatic horizontal walls.
    Cavity,
    /// No-slip walls, temperature prescribed on the whole boundary.
    Mms,
}

/// Which space a convection matrix acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvectionSpace {
    Velocity,
    Temperature,
}

/// Per-element geometry: inverse-transpose Jacobian and area.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub inv_jt: [[f64; 2]; 2],
    pub area: f64,
}

/// Precomputed shape values and reference gradients at the points of one
/// quadrature rule.
pub struct BasisTable {
    pub points: Vec<QuadPoint>,
    pub p2: Vec<[f64; 6]>,
    pub p2_grad: Vec<[[f64; 2]; 6]>,
    pub p1: Vec<[f64; 3]>,
}

impl BasisTable {
    pub fn new(points: Vec<QuadPoint>) -> Self {
        let p2 = points.iter().map(|q| p2_shape(q.bary)).collect();
        let p2_grad = points.iter().map(|q| p2_grad_ref(q.bary)).collect();
        let p1 = points.iter().map(|q| p1_shape(q.bary)).collect();
        BasisTable {
            points,
            p2,
            p2_grad,
            p1,
        }
    }
}

/// Degree-of-freedom maps and Dirichlet sets for the P2-P1-P2 system.
///
/// Velocity dofs interleave components: P2 node `i` owns dofs `2i` (x) and
/// `2i+1` (y). Pressure dofs coincide with mesh vertices. Temperature dofs
/// coincide with P2 nodes.
pub struct FeSystem {
    pub mesh: Mesh,
    pub problem: ProblemKind,
    /// Coordinates of P2 nodes: the mesh vertices followed by edge midpoints.
    pub p2_coords: Vec<[f64; 2]>,
    pub n_p2_nodes: usize,
    pub n_vel_dofs: usize,
    pub n_pressure_dofs: usize,
    /// Velocity Dirichlet dofs (both components of every boundary P2 node).
    pub vel_dirichlet: Vec<usize>,
    /// Temperature Dirichlet P2 nodes (walls only for the cavity; the whole
    /// boundary for manufactured-solution problems).
    pub temp_dirichlet: Vec<usize>,
    /// Static temperature Dirichlet values (cavity walls). For MMS problems
    /// these hold the t=0 unperturbed trace; steppers overwrite per step.
    pub temp_dirichlet_values: Vec<f64>,
    /// Per-dof constrained flags, matching `vel_dirichlet` / `temp_dirichlet`.
    pub vel_is_dirichlet: Vec<bool>,
    pub temp_is_dirichlet: Vec<bool>,
    pub geometry: Vec<ElementGeometry>,
    /// Degree-5 rule for system matrices.
    pub vol_table: BasisTable,
    /// Degree-8 rule for load vectors and error norms.
    pub load_table: BasisTable,
}

impl FeSystem {
    /// Global P2 node ids of element `t` in local order (3 vertices, then the
    /// midpoints opposite each vertex).
    pub fn p2_nodes_of(&self, t: usize) -> [usize; 6] {
        let tri = self.mesh.triangles[t];
        let te = self.mesh.tri_edges[t];
        let nv = self.mesh.n_vertices();
        [
            tri[0],
            tri[1],
            tri[2],
            nv + te[0],
            nv + te[1],
            nv + te[2],
        ]
    }

    /// Physical gradient of scalar P2 basis function `k` at a quadrature
    /// point, given the reference gradient.
    #[inline]
    pub fn phys_grad(&self, t: usize, gref: [f64; 2]) -> [f64; 2] {
        let j = &self.geometry[t].inv_jt;
        [
            j[0][0] * gref[0] + j[0][1] * gref[1],
            j[1][0] * gref[0] + j[1][1] * gref[1],
        ]
    }
}

/// Build dof maps, Dirichlet sets, geometry, and quadrature tables.
pub fn build_fe_system(mesh: Mesh, problem: ProblemKind) -> FeSystem {
    let nv = mesh.n_vertices();
    let ne = mesh.edges.len();
    let n_p2 = nv + ne;

    let mut p2_coords = Vec::with_capacity(n_p2);
    p2_coords.extend_from_slice(&mesh.vertices);
    for e in &mesh.edges {
        let a = mesh.vertices[e[0]];
        let b = mesh.vertices[e[1]];
        p2_coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }

    // Boundary P2 nodes from the boundary-edge list: endpoints plus the edge
    // midpoint node.
    let mut edge_index = std::collections::HashMap::new();
    for (i, e) in mesh.edges.iter().enumerate() {
        edge_index.insert(*e, i);
    }
    let mut boundary_nodes: Vec<usize> = Vec::new();
    let mut wall_nodes: Vec<usize> = Vec::new();
    for be in &mesh.boundary_edges {
        let [a, b] = be.vertices;
        let key = if a < b { [a, b] } else { [b, a] };
        let mid = nv + edge_index[&key];
        for node in [a, b, mid] {
            boundary_nodes.push(node);
            match be.label {
                BoundaryLabel::HotWall | BoundaryLabel::ColdWall | BoundaryLabel::FullDirichlet => {
                    wall_nodes.push(node)
                }
                BoundaryLabel::Adiabatic => {}
            }
        }
    }
    boundary_nodes.sort_unstable();
    boundary_nodes.dedup();
    wall_nodes.sort_unstable();
    wall_nodes.dedup();

    let mut vel_dirichlet = Vec::with_capacity(2 * boundary_nodes.len());
    for &node in &boundary_nodes {
        vel_dirichlet.push(2 * node);
        vel_dirichlet.push(2 * node + 1);
    }

    // Corner vertices belong to the vertical walls; `point_label` encodes that
    // resolution, so values come from the node coordinate, not the edge label.
    let temp_dirichlet_values = wall_nodes
        .iter()
        .map(|&node| {
            let [x, _y] = p2_coords[node];
            match problem {
                ProblemKind::Cavity => {
                    if x.abs() <= 1e-12 {
                        1.0
                    } else {
                        0.0
                    }
                }
                ProblemKind::Mms => 0.0,
            }
        })
        .collect();

    let geometry = mesh
        .triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let p0 = mesh.vertices[tri[0]];
            let p1 = mesh.vertices[tri[1]];
            let p2 = mesh.vertices[tri[2]];
            let j = [
                [p1[0] - p0[0], p2[0] - p0[0]],
                [p1[1] - p0[1], p2[1] - p0[1]],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            assert!(det > 0.0, "triangle {t} is not counterclockwise");
            // inv(J)^T = adj(J)^T / det
            let inv_jt = [
                [j[1][1] / det, -j[1][0] / det],
                [-j[0][1] / det, j[0][0] / det],
            ];
            ElementGeometry {
                inv_jt,
                area: 0.5 * det,
            }
        })
        .collect();

    let mut vel_is_dirichlet = vec![false; 2 * n_p2];
    for &d in &vel_dirichlet {
        vel_is_dirichlet[d] = true;
    }
    let mut temp_is_dirichlet = vec![false; n_p2];
    for &d in &wall_nodes {
        temp_is_dirichlet[d] = true;
    }

    FeSystem {
        mesh,
        problem,
        n_p2_nodes: n_p2,
        n_vel_dofs: 2 * n_p2,
        n_pressure_dofs: nv,
        vel_dirichlet,
        temp_dirichlet: wall_nodes,
        temp_dirichlet_values,
        vel_is_dirichlet,
        temp_is_dirichlet,
        p2_coords,
        geometry,
        vol_table: BasisTable::new(quad::triangle_degree5()),
        load_table: BasisTable::new(quad::triangle_degree8()),
    }
}

/// The time-independent operators shared by every step.
pub struct SparseOperatorSet {
    /// Velocity (vector P2) mass matrix.
    pub m_u: SparseMatrix,
    /// Velocity stiffness (no Prandtl factor).
    pub k_u: SparseMatrix,
    /// Grad-div matrix (div phi_j, div phi_i).
    pub grad_div: SparseMatrix,
    /// Pressure-divergence coupling, entries (q_i, div phi_j).
    pub b_div: SparseMatrix,
    /// Pressure (P1) mass matrix.
    pub m_p: SparseMatrix,
    /// Temperature (scalar P2) mass matrix.
    pub m_t: SparseMatrix,
    /// Temperature stiffness.
    pub k_t: SparseMatrix,
    /// Scalar P2 pattern (shared by m_t, k_t, and convection matrices).
    pub scalar_pattern: Arc<Pattern>,
    /// Vector velocity pattern (includes cross-component coupling).
    pub vector_pattern: Arc<Pattern>,
    /// Value-index map from scalar entries to the two component-diagonal slots
    /// of the vector pattern.
    pub scalar_to_vector: Vec<[usize; 2]>,
}

fn scalar_pattern(fe: &FeSystem) -> Arc<Pattern> {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); fe.n_p2_nodes];
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        for &i in &nodes {
            for &j in &nodes {
                rows[i].push(j);
            }
        }
    }
    Arc::new(Pattern::from_rows(fe.n_p2_nodes, rows))
}

fn vector_pattern(fe: &FeSystem) -> Arc<Pattern> {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); fe.n_vel_dofs];
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        for &i in &nodes {
            for &j in &nodes {
                for c in 0..2 {
                    for d in 0..2 {
                        rows[2 * i + c].push(2 * j + d);
                    }
                }
            }
        }
    }
    Arc::new(Pattern::from_rows(fe.n_vel_dofs, rows))
}

fn pressure_pattern(fe: &FeSystem) -> Arc<Pattern> {
    let nv = fe.mesh.n_vertices();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nv];
    for tri in &fe.mesh.triangles {
        for &i in tri {
            for &j in tri {
                rows[i].push(j);
            }
        }
    }
    Arc::new(Pattern::from_rows(nv, rows))
}

fn b_pattern(fe: &FeSystem) -> Arc<Pattern> {
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); fe.n_pressure_dofs];
    for t in 0..fe.mesh.n_triangles() {
        let tri = fe.mesh.triangles[t];
        let nodes = fe.p2_nodes_of(t);
        for &i in &tri {
            for &j in &nodes {
                rows[i].push(2 * j);
                rows[i].push(2 * j + 1);
            }
        }
    }
    Arc::new(Pattern::from_rows(fe.n_vel_dofs, rows))
}

/// Assemble all static operators with the degree-5 volume rule. Dirichlet rows
/// stay untouched here; constraints are applied by the steppers.
pub fn assemble_static_operators(fe: &FeSystem) -> SparseOperatorSet {
    let sp = scalar_pattern(fe);
    let vp = vector_pattern(fe);
    let pp = pressure_pattern(fe);
    let bp = b_pattern(fe);

    let mut m_s = SparseMatrix::zeros(sp.clone());
    let mut k_s = SparseMatrix::zeros(sp.clone());
    let mut m_u = SparseMatrix::zeros(vp.clone());
    let mut k_u = SparseMatrix::zeros(vp.clone());
    let mut grad_div = SparseMatrix::zeros(vp.clone());
    let mut b_div = SparseMatrix::zeros(bp);
    let mut m_p = SparseMatrix::zeros(pp);

    let table = &fe.vol_table;
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        let tri = fe.mesh.triangles[t];
        let area = fe.geometry[t].area;

        let mut local_m = [[0.0f64; 6]; 6];
        let mut local_k = [[0.0f64; 6]; 6];
        let mut local_gd = [[[0.0f64; 2]; 2]; 36]; // flattened (i,j) -> 2x2 block
        let mut local_b = [[[0.0f64; 2]; 6]; 3];
        let mut local_mp = [[0.0f64; 3]; 3];

        for (q, qp) in table.points.iter().enumerate() {
            let w = qp.weight * area;
            let shp = &table.p2[q];
            let p1v = &table.p1[q];
            let mut grads = [[0.0f64; 2]; 6];
            for k in 0..6 {
                grads[k] = fe.phys_grad(t, table.p2_grad[q][k]);
            }
            for i in 0..6 {
                for j in 0..6 {
                    local_m[i][j] += w * shp[i] * shp[j];
                    local_k[i][j] += w * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    let blk = &mut local_gd[6 * i + j];
                    for c in 0..2 {
                        for d in 0..2 {
                            // (div phi_j e_d, div phi_i e_c) = d_c N_i d_d N_j
                            blk[c][d] += w * grads[i][c] * grads[j][d];
                        }
                    }
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    local_mp[i][j] += w * p1v[i] * p1v[j];
                }
                for j in 0..6 {
                    for d in 0..2 {
                        local_b[i][j][d] += w * p1v[i] * grads[j][d];
                    }
                }
            }
        }

        for i in 0..6 {
            for j in 0..6 {
                m_s.add(nodes[i], nodes[j], local_m[i][j]);
                k_s.add(nodes[i], nodes[j], local_k[i][j]);
                for c in 0..2 {
                    m_u.add(2 * nodes[i] + c, 2 * nodes[j] + c, local_m[i][j]);
                    k_u.add(2 * nodes[i] + c, 2 * nodes[j] + c, local_k[i][j]);
                    for d in 0..2 {
                        grad_div.add(
                            2 * nodes[i] + c,
                            2 * nodes[j] + d,
                            local_gd[6 * i + j][c][d],
                        );
                    }
                }
            }
        }
        for i in 0..3 {
            for j in 0..3 {
                m_p.add(tri[i], tri[j], local_mp[i][j]);
            }
            for j in 0..6 {
                for d in 0..2 {
                    b_div.add(tri[i], 2 * nodes[j] + d, local_b[i][j][d]);
                }
            }
        }
    }

    // Map each scalar pattern slot to its two vector component slots.
    let mut scalar_to_vector = Vec::with_capacity(sp.nnz());
    for i in 0..sp.n_rows {
        for k in sp.row_offsets[i]..sp.row_offsets[i + 1] {
            let j = sp.col_indices[k];
            let v0 = vp.find(2 * i, 2 * j).expect("vector pattern covers scalar");
            let v1 = vp
                .find(2 * i + 1, 2 * j + 1)
                .expect("vector pattern covers scalar");
            scalar_to_vector.push([v0, v1]);
        }
    }

    SparseOperatorSet {
        m_u,
        k_u,
        grad_div,
        b_div,
        m_p,
        m_t: m_s,
        k_t: k_s,
        scalar_pattern: sp,
        vector_pattern: vp,
        scalar_to_vector,
    }
}

/// Interpolate a velocity coefficient vector at a volume quadrature point.
#[inline]
fn velocity_at(shp: &[f64; 6], nodes: &[usize; 6], w: &[f64]) -> [f64; 2] {
    let mut u = [0.0f64; 2];
    for k in 0..6 {
        u[0] += shp[k] * w[2 * nodes[k]];
        u[1] += shp[k] * w[2 * nodes[k] + 1];
    }
    u
}

/// Assemble the scalar skew-symmetric convection matrix
/// N(w)_ij = 1/2 (w . grad N_j, N_i) - 1/2 (w . grad N_i, N_j),
/// with convecting velocity field `w`. Both the velocity and temperature
/// convection operators reduce to this scalar matrix.
pub fn assemble_convection_scalar(
    fe: &FeSystem,
    pattern: &Arc<Pattern>,
    w: &[f64],
) -> SparseMatrix {
    assert_eq!(w.len(), fe.n_vel_dofs, "convecting field dimension mismatch");
    let mut n_mat = SparseMatrix::zeros(pattern.clone());
    let table = &fe.vol_table;
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        let area = fe.geometry[t].area;
        let mut local = [[0.0f64; 6]; 6];
        for (q, qp) in table.points.iter().enumerate() {
            let wq = qp.weight * area;
            let shp = &table.p2[q];
            let uq = velocity_at(shp, &nodes, w);
            let mut wdot = [0.0f64; 6];
            for k in 0..6 {
                let g = fe.phys_grad(t, table.p2_grad[q][k]);
                wdot[k] = uq[0] * g[0] + uq[1] * g[1];
            }
            for i in 0..6 {
                for j in 0..6 {
                    local[i][j] += 0.5 * wq * (wdot[j] * shp[i] - wdot[i] * shp[j]);
                }
            }
        }
        for i in 0..6 {
            for j in 0..6 {
                n_mat.add(nodes[i], nodes[j], local[i][j]);
            }
        }
    }
    n_mat
}

/// Expand a scalar P2 matrix into the vector velocity pattern (identical
/// blocks on both components, zero cross-component entries).
pub fn expand_scalar_to_vector(ops: &SparseOperatorSet, scalar: &SparseMatrix) -> SparseMatrix {
    let mut out = SparseMatrix::zeros(ops.vector_pattern.clone());
    let src = scalar.values();
    let dst = out.values_mut();
    for (s, slots) in ops.scalar_to_vector.iter().enumerate() {
        dst[slots[0]] = src[s];
        dst[slots[1]] = src[s];
    }
    out
}

/// Public form of the spec's convection operator: a matrix on the requested
/// space with entries b(w, phi_j, phi_i) (or the b* analog).
pub fn assemble_convection(
    fe: &FeSystem,
    ops: &SparseOperatorSet,
    w: &[f64],
    space: ConvectionSpace,
) -> SparseMatrix {
    let scalar = assemble_convection_scalar(fe, &ops.scalar_pattern, w);
    match space {
        ConvectionSpace::Temperature => scalar,
        ConvectionSpace::Velocity => expand_scalar_to_vector(ops, &scalar),
    }
}

/// y = N_vec(w) x for a scalar convection matrix applied to an interleaved
/// velocity vector, without forming the expanded matrix.
pub fn apply_scalar_to_velocity(scalar: &SparseMatrix, x: &[f64], y: &mut [f64]) {
    let p = scalar.pattern();
    let vals = scalar.values();
    assert_eq!(x.len(), 2 * p.n_cols);
    assert_eq!(y.len(), 2 * p.n_rows);
    for i in 0..p.n_rows {
        let mut acc0 = 0.0;
        let mut acc1 = 0.0;
        for k in p.row_offsets[i]..p.row_offsets[i + 1] {
            let j = p.col_indices[k];
            acc0 += vals[k] * x[2 * j];
            acc1 += vals[k] * x[2 * j + 1];
        }
        y[2 * i] = acc0;
        y[2 * i + 1] = acc1;
    }
}

/// Velocity load vector (f, phi_i) with the degree-8 rule.
pub fn assemble_load(fe: &FeSystem, f: &dyn Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    assemble_load_with_table(fe, &fe.load_table, f)
}

pub(crate) fn assemble_load_with_table(
    fe: &FeSystem,
    table: &BasisTable,
    f: &dyn Fn(f64, f64) -> [f64; 2],
) -> Vec<f64> {
    let mut out = vec![0.0; fe.n_vel_dofs];
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        let area = fe.geometry[t].area;
        let p0 = fe.mesh.vertices[fe.mesh.triangles[t][0]];
        let p1 = fe.mesh.vertices[fe.mesh.triangles[t][1]];
        let p2 = fe.mesh.vertices[fe.mesh.triangles[t][2]];
        for (q, qp) in table.points.iter().enumerate() {
            let l = qp.bary;
            let x = l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0];
            let y = l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1];
            let fv = f(x, y);
            let w = qp.weight * area;
            let shp = &table.p2[q];
            for k in 0..6 {
                out[2 * nodes[k]] += w * fv[0] * shp[k];
                out[2 * nodes[k] + 1] += w * fv[1] * shp[k];
            }
        }
    }
    out
}

/// Temperature load vector (g, N_i) with the degree-8 rule.
pub fn assemble_load_scalar(fe: &FeSystem, g: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    assemble_load_scalar_with_table(fe, &fe.load_table, g)
}

pub(crate) fn assemble_load_scalar_with_table(
    fe: &FeSystem,
    table: &BasisTable,
    g: &dyn Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let mut out = vec![0.0; fe.n_p2_nodes];
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        let area = fe.geometry[t].area;
        let p0 = fe.mesh.vertices[fe.mesh.triangles[t][0]];
        let p1 = fe.mesh.vertices[fe.mesh.triangles[t][1]];
        let p2 = fe.mesh.vertices[fe.mesh.triangles[t][2]];
        for (q, qp) in table.points.iter().enumerate() {
            let l = qp.bary;
            let x = l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0];
            let y = l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1];
            let gv = g(x, y);
            let w = qp.weight * area;
            let shp = &table.p2[q];
            for k in 0..6 {
                out[nodes[k]] += w * gv * shp[k];
            }
        }
    }
    out
}

/// Buoyancy vector with entries (xi T_h, phi_i) for xi = (0,1): only the
/// vertical velocity components receive (T_h, N_i) = (M_T T)_i. The caller
/// scales by Pr Ra.
pub fn assemble_buoyancy(fe: &FeSystem, m_t: &SparseMatrix, t_coeffs: &[f64]) -> Vec<f64> {
    assert_eq!(t_coeffs.len(), fe.n_p2_nodes, "temperature dof mismatch");
    let mt_t = m_t.mul_vec_alloc(t_coeffs);
    let mut out = vec![0.0; fe.n_vel_dofs];
    for (i, v) in mt_t.iter().enumerate() {
        out[2 * i + 1] = *v;
    }
    out
}

/// Precomputed index lists for eliminating one Dirichlet set from a matrix
/// with a fixed sparsity pattern. Rebuilding system matrices every step reuses
/// the same applier.
pub struct DirichletApplier {
    pub constrained: Vec<usize>,
    rank_of: Vec<usize>,
    /// (value index, free row, constrained rank) for every stored entry whose
    /// column is constrained and whose row is free.
    col_slots: Vec<(usize, usize, usize)>,
    /// Per constrained row: value range plus the diagonal slot.
    row_slots: Vec<(usize, usize, usize)>,
}

/// Column couplings removed from an eliminated matrix; moves known boundary
/// values to the right-hand side.
pub struct Coupling {
    entries: Vec<(usize, usize, f64)>,
}

impl Coupling {
    /// rhs_i -= sum_k A_ik g_k over the removed entries, then rhs_k = g_k.
    pub fn apply(&self, applier: &DirichletApplier, rhs: &mut [f64], g: &[f64]) {
        for &(row, rank, v) in &self.entries {
            rhs[row] -= v * g[rank];
        }
        for (rank, &dof) in applier.constrained.iter().enumerate() {
            rhs[dof] = g[rank];
        }
    }
}

impl DirichletApplier {
    pub fn new(pattern: &Pattern, constrained: &[usize]) -> Self {
        let mut constrained = constrained.to_vec();
        constrained.sort_unstable();
        constrained.dedup();
        let mut rank_of = vec![usize::MAX; pattern.n_rows];
        for (r, &dof) in constrained.iter().enumerate() {
            rank_of[dof] = r;
        }
        let mut col_slots = Vec::new();
        let mut row_slots = Vec::with_capacity(constrained.len());
        for i in 0..pattern.n_rows {
            if rank_of[i] != usize::MAX {
                let diag = pattern
                    .find(i, i)
                    .expect("Dirichlet row must store its diagonal");
                row_slots.push((pattern.row_offsets[i], pattern.row_offsets[i + 1], diag));
                continue;
            }
            for k in pattern.row_offsets[i]..pattern.row_offsets[i + 1] {
                let j = pattern.col_indices[k];
                if rank_of[j] != usize::MAX {
                    col_slots.push((k, i, rank_of[j]));
                }
            }
        }
        DirichletApplier {
            constrained,
            rank_of,
            col_slots,
            row_slots,
        }
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.rank_of[dof] != usize::MAX
    }

    /// Replace constrained rows by identity rows, zero constrained columns,
    /// and return the removed column couplings.
    pub fn eliminate(&self, a: &mut SparseMatrix) -> Coupling {
        let mut entries = Vec::with_capacity(self.col_slots.len());
        {
            let vals = a.values_mut();
            for &(k, row, rank) in &self.col_slots {
                if vals[k] != 0.0 {
                    entries.push((row, rank, vals[k]));
                }
                vals[k] = 0.0;
            }
            for &(lo, hi, diag) in &self.row_slots {
                for v in &mut vals[lo..hi] {
                    *v = 0.0;
                }
                vals[diag] = 1.0;
            }
        }
        Coupling { entries }
    }

    /// Zero the constrained entries of a residual-like vector.
    pub fn zero_constrained(&self, v: &mut [f64]) {
        for &dof in &self.constrained {
            v[dof] = 0.0;
        }
    }
}

/// One-shot Dirichlet application: symmetric elimination of `constraints`
/// (dof, value) pairs from `a` and `rhs`.
pub fn apply_dirichlet(a: &mut SparseMatrix, rhs: &mut [f64], constraints: &[(usize, f64)]) {
    let dofs: Vec<usize> = constraints.iter().map(|&(d, _)| d).collect();
    let applier = DirichletApplier::new(a.pattern(), &dofs);
    let mut g = vec![0.0; applier.constrained.len()];
    for &(d, v) in constraints {
        let rank = applier.constrained.binary_search(&d).unwrap();
        g[rank] = v;
    }
    let coupling = applier.eliminate(a);
    coupling.apply(&applier, rhs, &g);
}

#[cfg(test)]
mod tests;
