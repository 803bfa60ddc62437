//! ILU(0) and Jacobi preconditioners.

use super::csr::SparseMatrix;
use super::{Preconditioner, SolverError};

/// Incomplete LU factorization with zero fill-in.
///
/// L (unit diagonal, stored below the diagonal) and U (including the diagonal)
/// live in one value array on the original sparsity pattern. Rows are
/// processed in order, so the factorization and its application are exactly
/// reproducible.
pub struct Ilu0 {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    lu: Vec<f64>,
    diag_idx: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &SparseMatrix) -> Result<Self, SolverError> {
        Self::with_pivot_floor(a, 0.0)
    }

    /// Like [`Ilu0::new`] but replaces pivots smaller in magnitude than
    /// `floor` by `floor` (with the pivot's sign, or positive when the pivot is
    /// exactly zero). Used for saddle-point systems whose pressure block has a
    /// structurally zero diagonal.
    pub fn with_pivot_floor(a: &SparseMatrix, floor: f64) -> Result<Self, SolverError> {
        let n = a.n_rows();
        assert_eq!(n, a.n_cols(), "ILU(0) requires a square matrix");
        let row_offsets = a.row_offsets().to_vec();
        let col_indices = a.col_indices().to_vec();
        let mut lu = a.values().to_vec();

        let mut diag_idx = vec![usize::MAX; n];
        for i in 0..n {
            for k in row_offsets[i]..row_offsets[i + 1] {
                if col_indices[k] == i {
                    diag_idx[i] = k;
                }
            }
            if diag_idx[i] == usize::MAX {
                return Err(SolverError::ZeroPivot(i));
            }
        }

        // IKJ-ordered factorization restricted to the existing pattern.
        let mut col_pos = vec![usize::MAX; n];
        for i in 0..n {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            for k in lo..hi {
                col_pos[col_indices[k]] = k;
            }
            for k in lo..hi {
                let j = col_indices[k];
                if j >= i {
                    break;
                }
                let pivot = lu[diag_idx[j]];
                let lij = lu[k] / pivot;
                lu[k] = lij;
                for kk in diag_idx[j] + 1..row_offsets[j + 1] {
                    let col = col_indices[kk];
                    let pos = col_pos[col];
                    if pos != usize::MAX {
                        lu[pos] -= lij * lu[kk];
                    }
                }
            }
            let d = diag_idx[i];
            if lu[d].abs() <= floor {
                if floor > 0.0 {
                    lu[d] = if lu[d] < 0.0 { -floor } else { floor };
                } else if lu[d] == 0.0 {
                    for k in lo..hi {
                        col_pos[col_indices[k]] = usize::MAX;
                    }
                    return Err(SolverError::ZeroPivot(i));
                }
            }
            for k in lo..hi {
                col_pos[col_indices[k]] = usize::MAX;
            }
        }

        Ok(Ilu0 {
            row_offsets,
            col_indices,
            lu,
            diag_idx,
        })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag_idx.len();
        // Forward solve L y = r (unit diagonal).
        for i in 0..n {
            let mut acc = r[i];
            for k in self.row_offsets[i]..self.diag_idx[i] {
                acc -= self.lu[k] * z[self.col_indices[k]];
            }
            z[i] = acc;
        }
        // Backward solve U z = y.
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag_idx[i] + 1..self.row_offsets[i + 1] {
                acc -= self.lu[k] * z[self.col_indices[k]];
            }
            z[i] = acc / self.lu[self.diag_idx[i]];
        }
    }
}

/// Diagonal (Jacobi) preconditioner.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(a: &SparseMatrix) -> Result<Self, SolverError> {
        let n = a.n_rows();
        let mut inv_diag = vec![0.0; n];
        for (i, inv) in inv_diag.iter_mut().enumerate() {
            let d = a.get(i, i);
            if d == 0.0 {
                return Err(SolverError::ZeroDiagonal(i));
            }
            *inv = 1.0 / d;
        }
        Ok(Jacobi { inv_diag })
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = r[i] * self.inv_diag[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ilu_exact_on_triangular() {
        // For a triangular matrix ILU(0) is an exact factorization, so the
        // preconditioner solve reproduces A^{-1} r.
        let dense = vec![
            vec![2.0, 0.0, 0.0],
            vec![1.0, 4.0, 0.0],
            vec![-1.0, 2.0, 3.0],
        ];
        let a = SparseMatrix::from_dense(&dense);
        let m = Ilu0::new(&a).unwrap();
        let r = [2.0, 6.0, 4.0];
        let mut z = vec![0.0; 3];
        m.apply(&r, &mut z);
        // Forward substitution by hand: z0=1, z1=(6-1)/4=1.25, z2=(4+1-2.5)/3.
        assert!((z[0] - 1.0).abs() < 1e-14);
        assert!((z[1] - 1.25).abs() < 1e-14);
        assert!((z[2] - 2.5 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn ilu_rejects_zero_pivot() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        // Stored pattern has no (0,0) entry at all.
        assert!(Ilu0::new(&a).is_err());
    }

    #[test]
    fn jacobi_applies_inverse_diagonal() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 1.0], vec![0.0, 4.0]]);
        let m = Jacobi::new(&a).unwrap();
        let mut z = vec![0.0; 2];
        m.apply(&[2.0, 2.0], &mut z);
        assert_eq!(z, vec![1.0, 0.5]);
    }
}
