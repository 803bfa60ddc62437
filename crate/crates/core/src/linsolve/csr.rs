//! Compressed sparse row matrices with a shared, immutable sparsity pattern.

use std::sync::Arc;

use super::SolverError;

/// CSR sparsity pattern: row offsets plus sorted, unique column indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
}

impl Pattern {
    /// Build a pattern from per-row column lists; columns are sorted and
    /// deduplicated here.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<usize>>) -> Self {
        let n_rows = rows.len();
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut cols in rows {
            cols.sort_unstable();
            cols.dedup();
            debug_assert!(cols.iter().all(|&c| c < n_cols));
            col_indices.extend_from_slice(&cols);
            row_offsets.push(col_indices.len());
        }
        Pattern {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_cols(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    /// Index into the values array for entry (i, j), if present.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|k| lo + k)
    }
}

/// Sparse matrix in CSR form. The pattern is reference-counted so matrices
/// sharing a sparsity structure (mass, stiffness, grad-div, per-step system
/// matrices) can combine values without re-allocating indices.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseMatrix { pattern, values }
    }

    /// Dense constructor for tests and tiny systems; zero entries are kept out
    /// of the pattern.
    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n_rows = a.len();
        let n_cols = if n_rows == 0 { 0 } else { a[0].len() };
        let mut rows = Vec::with_capacity(n_rows);
        let mut values = Vec::new();
        for r in a {
            let mut cols = Vec::new();
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    values.push(v);
                }
            }
            rows.push(cols);
        }
        let pattern = Arc::new(Pattern::from_rows(n_cols, rows));
        SparseMatrix { pattern, values }
    }

    /// Build from triplets; duplicate entries are summed in input order.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n_rows];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let pattern = Arc::new(Pattern::from_rows(n_cols, rows));
        let mut m = SparseMatrix::zeros(pattern);
        for &(i, j, v) in triplets {
            m.add(i, j, v);
        }
        m
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.pattern.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.pattern.col_indices
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .find(i, j)
            .unwrap_or_else(|| panic!("entry ({i},{j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn set_all(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols(), "matvec dimension mismatch");
        assert_eq!(y.len(), self.n_rows(), "matvec dimension mismatch");
        let p = &self.pattern;
        for i in 0..p.n_rows {
            let mut acc = 0.0;
            for k in p.row_offsets[i]..p.row_offsets[i + 1] {
                acc += self.values[k] * x[p.col_indices[k]];
            }
            y[i] = acc;
        }
    }

    pub fn mul_vec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows()];
        self.mul_vec(x, &mut y);
        y
    }

    /// y = A^T x.
    pub fn mul_transpose_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_rows(), "matvec dimension mismatch");
        assert_eq!(y.len(), self.n_cols(), "matvec dimension mismatch");
        y.iter_mut().for_each(|v| *v = 0.0);
        let p = &self.pattern;
        for i in 0..p.n_rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for k in p.row_offsets[i]..p.row_offsets[i + 1] {
                y[p.col_indices[k]] += self.values[k] * xi;
            }
        }
    }

    pub fn mul_transpose_vec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_cols()];
        self.mul_transpose_vec(x, &mut y);
        y
    }

    /// x^T A x without forming A x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let p = &self.pattern;
        let mut acc = 0.0;
        for i in 0..p.n_rows {
            let mut row = 0.0;
            for k in p.row_offsets[i]..p.row_offsets[i + 1] {
                row += self.values[k] * x[p.col_indices[k]];
            }
            acc += x[i] * row;
        }
        acc
    }

    /// self += alpha * other; both matrices must share a pattern.
    pub fn add_scaled(&mut self, alpha: f64, other: &SparseMatrix) -> Result<(), SolverError> {
        if !Arc::ptr_eq(&self.pattern, &other.pattern) && *self.pattern != *other.pattern {
            return Err(SolverError::Dimension(
                "add_scaled requires matching sparsity patterns".into(),
            ));
        }
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += alpha * o;
        }
        Ok(())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols()]; self.n_rows()];
        let p = &self.pattern;
        for i in 0..p.n_rows {
            for k in p.row_offsets[i]..p.row_offsets[i + 1] {
                out[i][p.col_indices[k]] = self.values[k];
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pattern_sorted_unique() {
        let p = Pattern::from_rows(4, vec![vec![3, 1, 1, 0], vec![2], vec![], vec![0, 3]]);
        assert_eq!(p.row_cols(0), &[0, 1, 3]);
        assert_eq!(p.row_cols(2), &[] as &[usize]);
        assert_eq!(p.find(0, 1), Some(1));
        assert_eq!(p.find(0, 2), None);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn matvec_matches_dense() {
        let dense = vec![
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, -2.0],
            vec![0.0, -2.0, 5.0],
        ];
        let m = SparseMatrix::from_dense(&dense);
        let x = [1.0, -1.0, 2.0];
        let y = m.mul_vec_alloc(&x);
        assert_eq!(y, vec![3.0, -6.0, 12.0]);
        let yt = m.mul_transpose_vec_alloc(&x);
        assert_eq!(yt, vec![3.0, -6.0, 12.0]); // symmetric example
        assert!((m.quadratic_form(&x) - (3.0 + 6.0 + 24.0)).abs() < 1e-14);
    }
}
