//! Field evaluation, nodal interpolation, and quadrature L2 norms/errors.
//!
//! Point location exploits the structured mesh: the cell holding (x, y) is a
//! floor computation, and the sub-triangle follows from which side of the
//! bottom-left to top-right diagonal the point falls on.

use super::basis::{p2_grad_ref, p2_shape};
use super::FeSystem;

/// Locate the triangle containing (x, y) and its barycentric coordinates.
pub fn locate(fe: &FeSystem, x: f64, y: f64) -> (usize, [f64; 3]) {
    let n = fe.mesh.n;
    let nf = n as f64;
    let eps = 1e-12;
    assert!(
        (-eps..=1.0 + eps).contains(&x) && (-eps..=1.0 + eps).contains(&y),
        "point ({x},{y}) outside the unit square"
    );
    let i = ((x * nf).floor() as usize).min(n - 1);
    let j = ((y * nf).floor() as usize).min(n - 1);
    let xl = (x * nf - i as f64).clamp(0.0, 1.0);
    let yl = (y * nf - j as f64).clamp(0.0, 1.0);
    let cell = 2 * (j * n + i);
    if xl >= yl {
        // Lower triangle (v00, v10, v11).
        (cell, [1.0 - xl, xl - yl, yl])
    } else {
        // Upper triangle (v00, v11, v01).
        (cell + 1, [1.0 - yl, xl, yl - xl])
    }
}

/// Evaluate a scalar P2 field at a point.
pub fn eval_scalar(fe: &FeSystem, coeffs: &[f64], x: f64, y: f64) -> f64 {
    let (t, l) = locate(fe, x, y);
    let nodes = fe.p2_nodes_of(t);
    let shp = p2_shape(l);
    (0..6).map(|k| shp[k] * coeffs[nodes[k]]).sum()
}

/// Evaluate an interleaved vector P2 field at a point.
pub fn eval_velocity(fe: &FeSystem, coeffs: &[f64], x: f64, y: f64) -> [f64; 2] {
    let (t, l) = locate(fe, x, y);
    let nodes = fe.p2_nodes_of(t);
    let shp = p2_shape(l);
    let mut u = [0.0; 2];
    for k in 0..6 {
        u[0] += shp[k] * coeffs[2 * nodes[k]];
        u[1] += shp[k] * coeffs[2 * nodes[k] + 1];
    }
    u
}

/// Evaluate a P1 field at a point.
pub fn eval_p1(fe: &FeSystem, coeffs: &[f64], x: f64, y: f64) -> f64 {
    let (t, l) = locate(fe, x, y);
    let tri = fe.mesh.triangles[t];
    l[0] * coeffs[tri[0]] + l[1] * coeffs[tri[1]] + l[2] * coeffs[tri[2]]
}

/// Physical gradient of a scalar P2 field inside element `t` at barycentric
/// coordinates `l`.
pub fn element_scalar_gradient(fe: &FeSystem, coeffs: &[f64], t: usize, l: [f64; 3]) -> [f64; 2] {
    let nodes = fe.p2_nodes_of(t);
    let gref = p2_grad_ref(l);
    let mut g = [0.0; 2];
    for k in 0..6 {
        let gp = fe.phys_grad(t, gref[k]);
        g[0] += coeffs[nodes[k]] * gp[0];
        g[1] += coeffs[nodes[k]] * gp[1];
    }
    g
}

/// Nodal interpolation of a scalar function onto P2 dofs.
pub fn interpolate_scalar(fe: &FeSystem, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    fe.p2_coords.iter().map(|&[x, y]| f(x, y)).collect()
}

/// Nodal interpolation of a vector function onto interleaved velocity dofs.
pub fn interpolate_velocity(fe: &FeSystem, f: &dyn Fn(f64, f64) -> [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; fe.n_vel_dofs];
    for (i, &[x, y]) in fe.p2_coords.iter().enumerate() {
        let v = f(x, y);
        out[2 * i] = v[0];
        out[2 * i + 1] = v[1];
    }
    out
}

/// Nodal interpolation of a scalar function onto P1 (vertex) dofs.
pub fn interpolate_p1(fe: &FeSystem, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    fe.mesh.vertices.iter().map(|&[x, y]| f(x, y)).collect()
}

/// L2 norm of a scalar P2 field via the degree-5 rule (exact for P2 squares).
pub fn l2_norm_scalar(fe: &FeSystem, coeffs: &[f64]) -> f64 {
    let table = &fe.vol_table;
    let mut acc = 0.0;
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        let area = fe.geometry[t].area;
        for (q, qp) in table.points.iter().enumerate() {
            let shp = &table.p2[q];
            let v: f64 = (0..6).map(|k| shp[k] * coeffs[nodes[k]]).sum();
            acc += qp.weight * area * v * v;
        }
    }
    acc.sqrt()
}

/// L2 norm of an interleaved velocity field.
pub fn l2_norm_velocity(fe: &FeSystem, coeffs: &[f64]) -> f64 {
    let table = &fe.vol_table;
    let mut acc = 0.0;
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        let area = fe.geometry[t].area;
        for (q, qp) in table.points.iter().enumerate() {
            let shp = &table.p2[q];
            let mut u = [0.0f64; 2];
            for k in 0..6 {
                u[0] += shp[k] * coeffs[2 * nodes[k]];
                u[1] += shp[k] * coeffs[2 * nodes[k] + 1];
            }
            acc += qp.weight * area * (u[0] * u[0] + u[1] * u[1]);
        }
    }
    acc.sqrt()
}

/// L2 norm of a P1 field.
pub fn l2_norm_p1(fe: &FeSystem, coeffs: &[f64]) -> f64 {
    let table = &fe.vol_table;
    let mut acc = 0.0;
    for t in 0..fe.mesh.n_triangles() {
        let tri = fe.mesh.triangles[t];
        let area = fe.geometry[t].area;
        for (q, qp) in table.points.iter().enumerate() {
            let p1v = &table.p1[q];
            let v = p1v[0] * coeffs[tri[0]] + p1v[1] * coeffs[tri[1]] + p1v[2] * coeffs[tri[2]];
            acc += qp.weight * area * v * v;
        }
    }
    acc.sqrt()
}

fn quad_point_coords(fe: &FeSystem, t: usize, bary: [f64; 3]) -> (f64, f64) {
    let tri = fe.mesh.triangles[t];
    let p0 = fe.mesh.vertices[tri[0]];
    let p1 = fe.mesh.vertices[tri[1]];
    let p2 = fe.mesh.vertices[tri[2]];
    (
        bary[0] * p0[0] + bary[1] * p1[0] + bary[2] * p2[0],
        bary[0] * p0[1] + bary[1] * p1[1] + bary[2] * p2[1],
    )
}

/// L2 error of a scalar P2 field against an exact function (degree-8 rule).
pub fn l2_error_scalar(fe: &FeSystem, coeffs: &[f64], exact: &dyn Fn(f64, f64) -> f64) -> f64 {
    let table = &fe.load_table;
    let mut acc = 0.0;
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        let area = fe.geometry[t].area;
        for (q, qp) in table.points.iter().enumerate() {
            let shp = &table.p2[q];
            let v: f64 = (0..6).map(|k| shp[k] * coeffs[nodes[k]]).sum();
            let (x, y) = quad_point_coords(fe, t, qp.bary);
            let d = v - exact(x, y);
            acc += qp.weight * area * d * d;
        }
    }
    acc.sqrt()
}

/// L2 error of a velocity field against an exact vector function.
pub fn l2_error_velocity(
    fe: &FeSystem,
    coeffs: &[f64],
    exact: &dyn Fn(f64, f64) -> [f64; 2],
) -> f64 {
    let table = &fe.load_table;
    let mut acc = 0.0;
    for t in 0..fe.mesh.n_triangles() {
        let nodes = fe.p2_nodes_of(t);
        let area = fe.geometry[t].area;
        for (q, qp) in table.points.iter().enumerate() {
            let shp = &table.p2[q];
            let mut u = [0.0f64; 2];
            for k in 0..6 {
                u[0] += shp[k] * coeffs[2 * nodes[k]];
                u[1] += shp[k] * coeffs[2 * nodes[k] + 1];
            }
            let (x, y) = quad_point_coords(fe, t, qp.bary);
            let e = exact(x, y);
            let d0 = u[0] - e[0];
            let d1 = u[1] - e[1];
            acc += qp.weight * area * (d0 * d0 + d1 * d1);
        }
    }
    acc.sqrt()
}

/// L2 error of a P1 field against an exact function.
pub fn l2_error_p1(fe: &FeSystem, coeffs: &[f64], exact: &dyn Fn(f64, f64) -> f64) -> f64 {
    let table = &fe.load_table;
    let mut acc = 0.0;
    for t in 0..fe.mesh.n_triangles() {
        let tri = fe.mesh.triangles[t];
        let area = fe.geometry[t].area;
        for (q, qp) in table.points.iter().enumerate() {
            let p1v = &table.p1[q];
            let v = p1v[0] * coeffs[tri[0]] + p1v[1] * coeffs[tri[1]] + p1v[2] * coeffs[tri[2]];
            let (x, y) = quad_point_coords(fe, t, qp.bary);
            let d = v - exact(x, y);
            acc += qp.weight * area * d * d;
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_fe_system, ProblemKind};
    use crate::mesh::{build_structured_mesh, Labeling};

    fn fe(n: usize) -> FeSystem {
        let mesh = build_structured_mesh(n, Labeling::Cavity).unwrap();
        build_fe_system(mesh, ProblemKind::Cavity)
    }

    #[test]
    fn locate_finds_containing_triangle() {
        let fe = fe(4);
        for &(x, y) in &[(0.1, 0.05), (0.9, 0.95), (0.5, 0.5), (0.0, 0.0), (1.0, 1.0)] {
            let (t, l) = locate(&fe, x, y);
            assert!(l.iter().all(|&b| (-1e-12..=1.0 + 1e-12).contains(&b)));
            let tri = fe.mesh.triangles[t];
            let px: f64 = (0..3).map(|k| l[k] * fe.mesh.vertices[tri[k]][0]).sum();
            let py: f64 = (0..3).map(|k| l[k] * fe.mesh.vertices[tri[k]][1]).sum();
            assert!((px - x).abs() < 1e-12 && (py - y).abs() < 1e-12);
        }
    }

    #[test]
    fn p2_interpolation_reproduces_quadratics() {
        // P2 interpolation is exact for quadratic functions, so point
        // evaluation must reproduce them everywhere.
        let fe = fe(3);
        let f = |x: f64, y: f64| 1.0 + 2.0 * x - y + 0.5 * x * x + x * y - 2.0 * y * y;
        let coeffs = interpolate_scalar(&fe, &f);
        for &(x, y) in &[(0.33, 0.71), (0.05, 0.99), (0.5, 0.25)] {
            assert!((eval_scalar(&fe, &coeffs, x, y) - f(x, y)).abs() < 1e-13);
        }
        let g = element_scalar_gradient(&fe, &coeffs, locate(&fe, 0.33, 0.71).0, locate(&fe, 0.33, 0.71).1);
        let gx = 2.0 + 0.33 + 0.71; // d/dx = 2 + x + y
        let gy = -1.0 + 0.33 - 4.0 * 0.71;
        assert!((g[0] - gx).abs() < 1e-12);
        assert!((g[1] - gy).abs() < 1e-12);
    }

    #[test]
    fn norms_of_simple_fields() {
        let fe = fe(5);
        let ones = vec![1.0; fe.n_p2_nodes];
        assert!((l2_norm_scalar(&fe, &ones) - 1.0).abs() < 1e-13);
        let mut u = vec![0.0; fe.n_vel_dofs];
        for i in 0..fe.n_p2_nodes {
            u[2 * i] = 1.0;
        }
        assert!((l2_norm_velocity(&fe, &u) - 1.0).abs() < 1e-13);
        // ||x||_{L2([0,1]^2)} = 1/sqrt(3).
        let xfield = interpolate_p1(&fe, &|x, _| x);
        assert!((l2_norm_p1(&fe, &xfield) - (1.0f64 / 3.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn l2_error_detects_interpolation_gap() {
        // Cubic function: P2 interpolation error is O(h^3) and the quadrature
        // error norm must see it shrink by ~8x per refinement.
        let f = |x: f64, y: f64| x * x * x + y * y * y;
        let mut prev = f64::INFINITY;
        for n in [2usize, 4, 8] {
            let fe = fe(n);
            let coeffs = interpolate_scalar(&fe, &f);
            let err = l2_error_scalar(&fe, &coeffs, &f);
            assert!(err < prev / 6.0, "n={n}: {err} vs {prev}");
            prev = err;
        }
    }
}
