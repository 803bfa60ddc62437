//! Envelope (profile) Cholesky factorization under reverse Cuthill-McKee
//! ordering.
//!
//! The time-independent SPD part of each system matrix — (1/dt) M + Pr K +
//! (dt/eps) GD for velocity, (1/dt) M_T + K_T for temperature — is factored
//! exactly once per run and reused as the GMRES preconditioner for every step
//! and every ensemble member. Fill stays inside the RCM envelope, so no
//! symbolic factorization is needed.

use super::csr::SparseMatrix;
use super::{Preconditioner, SolverError};

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern.
/// Returns perm with perm[new] = old.
fn rcm_order(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let offsets = a.row_offsets();
    let cols = a.col_indices();
    let degree = |i: usize| offsets[i + 1] - offsets[i];

    let mut perm = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut queue = std::collections::VecDeque::new();

    // Peripheral-ish start per component: a minimum-degree node, pushed to the
    // far end of a BFS level structure twice.
    let mut order_component = |start: usize, visited: &mut Vec<bool>, perm: &mut Vec<usize>| {
        let mut root = start;
        for _ in 0..2 {
            let mut level = vec![usize::MAX; n];
            level[root] = 0;
            let mut q = std::collections::VecDeque::from([root]);
            let mut last = root;
            while let Some(u) = q.pop_front() {
                last = u;
                for k in offsets[u]..offsets[u + 1] {
                    let v = cols[k];
                    if level[v] == usize::MAX && !visited[v] {
                        level[v] = level[u] + 1;
                        q.push_back(v);
                    }
                }
            }
            root = last;
        }
        visited[root] = true;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            perm.push(u);
            let mut neigh: Vec<usize> = (offsets[u]..offsets[u + 1])
                .map(|k| cols[k])
                .filter(|&v| !visited[v])
                .collect();
            neigh.sort_by_key(|&v| (degree(v), v));
            for v in neigh {
                if !visited[v] {
                    visited[v] = true;
                    queue.push_back(v);
                }
            }
        }
    };

    loop {
        let Some(start) = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree(i), i))
        else {
            break;
        };
        order_component(start, &mut visited, &mut perm);
    }
    perm.reverse();
    perm
}

/// Exact Cholesky on the RCM envelope of a sparse SPD matrix.
pub struct CholeskyEnvelope {
    n: usize,
    /// perm[new] = old.
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
    /// Row i of L occupies vals[offsets[i]..offsets[i]+(i-first[i]+1)],
    /// covering columns first[i]..=i.
    first: Vec<usize>,
    offsets: Vec<usize>,
    vals: Vec<f64>,
}

impl CholeskyEnvelope {
    pub fn new(a: &SparseMatrix) -> Result<Self, SolverError> {
        let n = a.n_rows();
        assert_eq!(n, a.n_cols(), "Cholesky requires a square matrix");
        let perm = rcm_order(a);
        let mut inv_perm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }

        // Envelope in the new ordering.
        let offsets_a = a.row_offsets();
        let cols_a = a.col_indices();
        let vals_a = a.values();
        let mut first = (0..n).collect::<Vec<usize>>();
        for new_i in 0..n {
            let old_i = perm[new_i];
            for k in offsets_a[old_i]..offsets_a[old_i + 1] {
                let new_j = inv_perm[cols_a[k]];
                if new_j < new_i && new_j < first[new_i] {
                    first[new_i] = new_j;
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0usize);
        for i in 0..n {
            offsets.push(offsets[i] + (i - first[i] + 1));
        }
        let mut vals = vec![0.0f64; offsets[n]];

        // Scatter the permuted lower triangle into the envelope.
        for new_i in 0..n {
            let old_i = perm[new_i];
            for k in offsets_a[old_i]..offsets_a[old_i + 1] {
                let new_j = inv_perm[cols_a[k]];
                if new_j <= new_i {
                    vals[offsets[new_i] + (new_j - first[new_i])] = vals_a[k];
                }
            }
        }

        // Profile Cholesky: fill never leaves the envelope.
        for i in 0..n {
            let fi = first[i];
            let row_i = offsets[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut sum = vals[row_i + (j - fi)];
                let row_j = offsets[j];
                for k in lo..j {
                    sum -= vals[row_i + (k - fi)] * vals[row_j + (k - fj)];
                }
                let djj = vals[row_j + (j - fj)];
                vals[row_i + (j - fi)] = sum / djj;
            }
            let mut diag = vals[row_i + (i - fi)];
            for k in fi..i {
                let l = vals[row_i + (k - fi)];
                diag -= l * l;
            }
            if diag <= 0.0 {
                return Err(SolverError::NotSpd(i));
            }
            vals[row_i + (i - fi)] = diag.sqrt();
        }

        Ok(CholeskyEnvelope {
            n,
            perm,
            inv_perm,
            first,
            offsets,
            vals,
        })
    }

    pub fn envelope_nnz(&self) -> usize {
        self.vals.len()
    }

    fn solve_into(&self, r: &[f64], z: &mut [f64], y: &mut [f64]) {
        let n = self.n;
        // y = P r, forward solve L y' = y in place.
        for i in 0..n {
            y[i] = r[self.perm[i]];
        }
        for i in 0..n {
            let fi = self.first[i];
            let row = self.offsets[i];
            let mut acc = y[i];
            for k in fi..i {
                acc -= self.vals[row + (k - fi)] * y[k];
            }
            y[i] = acc / self.vals[row + (i - fi)];
        }
        // Backward solve L^T z' = y' (column sweep), then z = P^T z'.
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = self.offsets[i];
            let zi = y[i] / self.vals[row + (i - fi)];
            y[i] = zi;
            for k in fi..i {
                y[k] -= self.vals[row + (k - fi)] * zi;
            }
        }
        for i in 0..n {
            z[self.perm[i]] = y[i];
        }
    }
}

impl Preconditioner for CholeskyEnvelope {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut y = vec![0.0; self.n];
        self.solve_into(r, z, &mut y);
    }
}
