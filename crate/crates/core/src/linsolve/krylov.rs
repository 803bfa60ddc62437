//! Restarted GMRES, CG, and the shared-preconditioner multi-RHS driver.

use std::time::Instant;

use rayon::prelude::*;

use super::csr::SparseMatrix;
use super::{axpy, dot, norm2, Preconditioner, SolverError};

/// Outcome of a single linear solve.
#[derive(Clone, Debug)]
pub struct SolverReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub wall_time: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct GmresParams {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresParams {
    fn default() -> Self {
        GmresParams {
            tol: 1e-10,
            restart: 50,
            max_iter: 2000,
        }
    }
}

/// Right-preconditioned restarted GMRES.
///
/// Right preconditioning keeps the Arnoldi residual equal to the true residual
/// of the original system, so the stopping test ||b - Ax|| <= tol * ||b|| needs
/// no back-transformation. All reductions run in a fixed order; identical
/// inputs give bitwise identical outputs.
pub fn gmres_solve(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    params: GmresParams,
    precond: &dyn Preconditioner,
) -> (Vec<f64>, SolverReport) {
    let start = Instant::now();
    let n = a.n_rows();
    assert_eq!(a.n_cols(), n, "GMRES requires a square matrix");
    assert_eq!(b.len(), n, "rhs dimension mismatch");
    assert_eq!(x0.len(), n, "initial guess dimension mismatch");
    assert!(params.tol > 0.0, "tolerance must be positive");

    let b_norm = norm2(b);
    let mut x = x0.to_vec();
    if b_norm == 0.0 {
        return (
            vec![0.0; n],
            SolverReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
                wall_time: start.elapsed().as_secs_f64(),
            },
        );
    }

    let m = params.restart.max(1);
    let mut total_iters = 0usize;
    let mut rel_res;

    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    // Krylov basis (m+1 vectors) and Hessenberg in column-major compact form.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut h = vec![0.0; (m + 1) * m];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];

    loop {
        a.mul_vec(&x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm2(&r);
        rel_res = beta / b_norm;
        if rel_res <= params.tol {
            return (
                x,
                SolverReport {
                    iterations: total_iters,
                    relative_residual: rel_res,
                    converged: true,
                    wall_time: start.elapsed().as_secs_f64(),
                },
            );
        }
        if total_iters >= params.max_iter {
            break;
        }

        basis.clear();
        let mut v0 = r.clone();
        v0.iter_mut().for_each(|v| *v /= beta);
        basis.push(v0);
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;

        let mut k_used = 0;
        let mut breakdown = false;
        for k in 0..m {
            if total_iters >= params.max_iter {
                break;
            }
            total_iters += 1;
            // w = A M^{-1} v_k, modified Gram-Schmidt against the basis.
            precond.apply(&basis[k], &mut z);
            a.mul_vec(&z, &mut w);
            for j in 0..=k {
                let hjk = dot(&w, &basis[j]);
                h[j * m + k] = hjk;
                axpy(-hjk, &basis[j], &mut w);
            }
            let wn = norm2(&w);
            h[(k + 1) * m + k] = wn;

            // Apply accumulated Givens rotations to the new column.
            for j in 0..k {
                let t = cs[j] * h[j * m + k] + sn[j] * h[(j + 1) * m + k];
                h[(j + 1) * m + k] = -sn[j] * h[j * m + k] + cs[j] * h[(j + 1) * m + k];
                h[j * m + k] = t;
            }
            let (c, s) = givens(h[k * m + k], h[(k + 1) * m + k]);
            cs[k] = c;
            sn[k] = s;
            h[k * m + k] = c * h[k * m + k] + s * h[(k + 1) * m + k];
            h[(k + 1) * m + k] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            k_used = k + 1;

            rel_res = g[k + 1].abs() / b_norm;
            if wn == 0.0 {
                // Arnoldi breakdown: the Krylov space is invariant. The small
                // solve below extracts whatever solution it contains.
                breakdown = true;
                break;
            }
            let mut vk = w.clone();
            vk.iter_mut().for_each(|v| *v /= wn);
            basis.push(vk);
            if rel_res <= params.tol {
                break;
            }
        }

        if k_used > 0 {
            // Solve the k x k triangular system and update x = x + M^{-1} V y.
            let mut y = vec![0.0; k_used];
            for i in (0..k_used).rev() {
                let mut acc = g[i];
                for j in i + 1..k_used {
                    acc -= h[i * m + j] * y[j];
                }
                y[i] = acc / h[i * m + i];
            }
            let mut update = vec![0.0; n];
            for (j, yj) in y.iter().enumerate() {
                axpy(*yj, &basis[j], &mut update);
            }
            precond.apply(&update, &mut z);
            for i in 0..n {
                x[i] += z[i];
            }
        }

        if breakdown {
            // Recompute the true residual and report; no further progress is
            // possible in this Krylov space.
            a.mul_vec(&x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            rel_res = norm2(&r) / b_norm;
            return (
                x,
                SolverReport {
                    iterations: total_iters,
                    relative_residual: rel_res,
                    converged: rel_res <= params.tol,
                    wall_time: start.elapsed().as_secs_f64(),
                },
            );
        }
    }

    // Out of iterations: report the true residual.
    a.mul_vec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    rel_res = norm2(&r) / b_norm;
    (
        x,
        SolverReport {
            iterations: total_iters,
            relative_residual: rel_res,
            converged: rel_res <= params.tol,
            wall_time: start.elapsed().as_secs_f64(),
        },
    )
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else if a.abs() < b.abs() {
        let t = a / b;
        let s = 1.0 / (1.0 + t * t).sqrt();
        (s * t, s)
    } else {
        let t = b / a;
        let c = 1.0 / (1.0 + t * t).sqrt();
        (c, c * t)
    }
}

/// Conjugate gradients for symmetric positive definite systems.
pub fn cg_solve(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolverReport), SolverError> {
    let start = Instant::now();
    let n = a.n_rows();
    assert_eq!(a.n_cols(), n, "CG requires a square matrix");
    assert_eq!(b.len(), n, "rhs dimension mismatch");

    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolverReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
                wall_time: start.elapsed().as_secs_f64(),
            },
        ));
    }

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);

    for it in 0..max_iter {
        let rel = rr.sqrt() / b_norm;
        if rel <= tol {
            return Ok((
                x,
                SolverReport {
                    iterations: it,
                    relative_residual: rel,
                    converged: true,
                    wall_time: start.elapsed().as_secs_f64(),
                },
            ));
        }
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(SolverError::NotSpd(it));
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }

    let rel = rr.sqrt() / b_norm;
    if rel <= tol {
        Ok((
            x,
            SolverReport {
                iterations: max_iter,
                relative_residual: rel,
                converged: true,
                wall_time: start.elapsed().as_secs_f64(),
            },
        ))
    } else {
        Err(SolverError::NoConvergence(max_iter, rel))
    }
}

/// Solve A x_j = b_j for every right-hand side with one shared matrix and one
/// shared preconditioner. Solves are independent, so they run in parallel;
/// each individual solve is sequential and deterministic.
pub fn multi_rhs_solve(
    a: &SparseMatrix,
    rhs: &[Vec<f64>],
    precond: &dyn Preconditioner,
    params: GmresParams,
) -> Vec<(Vec<f64>, SolverReport)> {
    let x0 = vec![0.0; a.n_rows()];
    rhs.par_iter()
        .map(|b| gmres_solve(a, b, &x0, params, precond))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{Identity, Ilu0, Jacobi};
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        // Gaussian elimination with partial pivoting; the independent oracle
        // for every Krylov test below.
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a
            .iter()
            .zip(b)
            .map(|(row, &bi)| {
                let mut r = row.clone();
                r.push(bi);
                r
            })
            .collect();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, piv);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..=n {
                    m[i][j] -= f * m[k][j];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = m[i][n];
            for j in i + 1..n {
                acc -= m[i][j] * x[j];
            }
            x[i] = acc / m[i][i];
        }
        x
    }

    #[test]
    fn gmres_identity_single_iteration() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let b = [3.0, -4.0];
        let (x, rep) = gmres_solve(&a, &b, &[0.0, 0.0], GmresParams::default(), &Identity);
        assert!(rep.converged);
        assert!(rep.iterations <= 1);
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn gmres_two_by_two_oracle() {
        // Dense oracle: A = [[4,1],[1,3]], b = [1,2] => x = [1/11, 7/11].
        let a = SparseMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let (x, rep) = gmres_solve(&a, &[1.0, 2.0], &[0.0, 0.0], GmresParams::default(), &Identity);
        assert!(rep.converged);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    fn random_dd_matrix(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            let mut off = 0.0;
            for j in 0..n {
                if i != j && rng.gen::<f64>() < 0.2 {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    a[i][j] = v;
                    off += v.abs();
                }
            }
            a[i][i] = off + 1.0 + rng.gen::<f64>();
        }
        a
    }

    #[test]
    fn gmres_random_dd_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dense = random_dd_matrix(50, &mut rng);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let oracle = dense_solve(&dense, &b);
        let a = SparseMatrix::from_dense(&dense);
        let ilu = Ilu0::new(&a).unwrap();
        let (x, rep) = gmres_solve(&a, &b, &vec![0.0; 50], GmresParams::default(), &ilu);
        assert!(rep.converged, "residual {}", rep.relative_residual);
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-8);
        }
    }

    #[test]
    fn gmres_residual_monotone_across_restarts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dense = random_dd_matrix(40, &mut rng);
        let a = SparseMatrix::from_dense(&dense);
        let b: Vec<f64> = (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // Tiny restart forces several outer cycles; the true residual after
        // each cycle must not increase.
        let params = GmresParams {
            tol: 1e-12,
            restart: 4,
            max_iter: 400,
        };
        let mut prev = f64::INFINITY;
        let mut x = vec![0.0; 40];
        for _ in 0..12 {
            let one_cycle = GmresParams {
                tol: 1e-14,
                restart: 4,
                max_iter: 4,
            };
            let (xn, rep) = gmres_solve(&a, &b, &x, one_cycle, &Identity);
            x = xn;
            assert!(rep.relative_residual <= prev * (1.0 + 1e-12));
            prev = rep.relative_residual;
        }
        let (_, rep) = gmres_solve(&a, &b, &vec![0.0; 40], params, &Identity);
        assert!(rep.converged);
    }

    #[test]
    fn gmres_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dense = random_dd_matrix(30, &mut rng);
        let a = SparseMatrix::from_dense(&dense);
        let b: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let jac = Jacobi::new(&a).unwrap();
        let (x1, _) = gmres_solve(&a, &b, &vec![0.0; 30], GmresParams::default(), &jac);
        let (x2, _) = gmres_solve(&a, &b, &vec![0.0; 30], GmresParams::default(), &jac);
        assert_eq!(x1, x2, "identical inputs must give bitwise identical output");
    }

    #[test]
    fn ilu_on_triangular_gives_one_iteration_solve() {
        let dense = vec![
            vec![2.0, 1.0, -1.0],
            vec![0.0, 4.0, 0.5],
            vec![0.0, 0.0, 3.0],
        ];
        let a = SparseMatrix::from_dense(&dense);
        let ilu = Ilu0::new(&a).unwrap();
        let b = [1.0, 2.0, 3.0];
        let (x, rep) = gmres_solve(&a, &b, &[0.0; 3], GmresParams::default(), &ilu);
        assert!(rep.converged);
        assert!(rep.iterations <= 1, "got {} iterations", rep.iterations);
        let oracle = dense_solve(&dense, &b);
        for (xi, oi) in x.iter().zip(&oracle) {
            assert!((xi - oi).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_scaled_identity() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let (x, rep) = cg_solve(&a, &[1.0, 1.0], 1e-12, 100).unwrap();
        assert!(rep.converged);
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cg_zero_rhs_zero_iterations() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 2.0]]);
        let (x, rep) = cg_solve(&a, &[0.0, 0.0], 1e-12, 100).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(x, vec![0.0, 0.0]);
    }

    #[test]
    fn cg_rejects_indefinite() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert!(matches!(
            cg_solve(&a, &[1.0, 1.0], 1e-12, 100),
            Err(SolverError::NotSpd(_))
        ));
    }

    #[test]
    fn multi_rhs_matches_individual_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dense = random_dd_matrix(60, &mut rng);
        let a = SparseMatrix::from_dense(&dense);
        let ilu = Ilu0::new(&a).unwrap();
        let rhs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let params = GmresParams::default();
        let shared = multi_rhs_solve(&a, &rhs, &ilu, params);
        for (b, (x, rep)) in rhs.iter().zip(&shared) {
            assert!(rep.converged);
            let fresh_ilu = Ilu0::new(&a).unwrap();
            let (xi, _) = gmres_solve(&a, b, &vec![0.0; 60], params, &fresh_ilu);
            for (u, v) in x.iter().zip(&xi) {
                assert!((u - v).abs() < 1e-8);
            }
            let oracle = dense_solve(&dense, b);
            for (u, o) in x.iter().zip(&oracle) {
                assert!((u - o).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn multi_rhs_linearity_and_identical_inputs() {
        let a = SparseMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let rhs = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![1.0, 2.0]];
        let out = multi_rhs_solve(&a, &rhs, &Identity, GmresParams::default());
        // b and 2b give x and 2x.
        for k in 0..2 {
            assert!((out[1].0[k] - 2.0 * out[0].0[k]).abs() < 1e-10);
        }
        // Identical rhs give bitwise identical solutions.
        assert_eq!(out[0].0, out[2].0);
    }
}
