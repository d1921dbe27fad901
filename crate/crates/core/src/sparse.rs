//! Compressed sparse row storage for document-term matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major sparse matrix. Column indices are strictly increasing inside
/// each row and no stored value is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from per-row `(column, value)` lists. Entries are
    /// sorted, zeros dropped; duplicate columns are rejected.
    pub fn from_rows<I>(cols: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<(usize, f64)>>,
    {
        let mut m = Self::empty(cols);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for pair in row.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(Error::Data(format!("duplicate column {} in row {}", pair[0].0, m.rows)));
                }
            }
            for (c, v) in row {
                if c >= cols {
                    return Err(Error::DimensionMismatch {
                        expected: cols,
                        actual: c + 1,
                    });
                }
                if v != 0.0 {
                    m.indices.push(c);
                    m.values.push(v);
                }
            }
            m.rows += 1;
            m.indptr.push(m.indices.len());
        }
        Ok(m)
    }

    /// Row-append for callers that already hold sorted, zero-free rows.
    pub(crate) fn push_sorted_row(&mut self, row: &[(usize, f64)]) {
        for &(c, v) in row {
            debug_assert!(c < self.cols && v != 0.0);
            self.indices.push(c);
            self.values.push(v);
        }
        self.rows += 1;
        self.indptr.push(self.indices.len());
    }

    pub fn from_dense(dense: &[Vec<f64>], cols: usize) -> Result<Self> {
        Self::from_rows(
            cols,
            dense.iter().map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(c, v)| (c, *v))
                    .collect()
            }),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, vals) = self.row(i);
        match idx.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| {
                let mut r = vec![0.0; self.cols];
                let (idx, vals) = self.row(i);
                for (&c, &v) in idx.iter().zip(vals) {
                    r[c] = v;
                }
                r
            })
            .collect()
    }

    /// Copy of the matrix with every entry in `drop` columns removed. Other
    /// values are copied bit-for-bit.
    pub fn without_columns(&self, drop: &[bool]) -> SparseMatrix {
        let mut out = SparseMatrix::empty(self.cols);
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (&c, &v) in idx.iter().zip(vals) {
                if !drop.get(c).copied().unwrap_or(false) {
                    out.indices.push(c);
                    out.values.push(v);
                }
            }
            out.rows += 1;
            out.indptr.push(out.indices.len());
        }
        out
    }

    /// Rows that store a value in column `j`.
    pub fn rows_with_column(&self, j: usize) -> Vec<usize> {
        (0..self.rows)
            .filter(|&i| self.row(i).0.binary_search(&j).is_ok())
            .collect()
    }

    /// Per-column lists of rows holding a value, built in one pass.
    pub fn column_occupancy(&self) -> Vec<Vec<usize>> {
        let mut occ = vec![Vec::new(); self.cols];
        for i in 0..self.rows {
            for &c in self.row(i).0 {
                occ[c].push(i);
            }
        }
        occ
    }

    /// Checks structural invariants and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.indptr.len() != self.rows + 1 || *self.indptr.last().unwrap() != self.values.len() {
            return Err(Error::Corrupt {
                what: "sparse matrix".into(),
                reason: "row pointer length mismatch".into(),
            });
        }
        for i in 0..self.rows {
            let (idx, vals) = self.row(i);
            for (k, (&c, &v)) in idx.iter().zip(vals).enumerate() {
                if c >= self.cols || (k > 0 && idx[k - 1] >= c) {
                    return Err(Error::Corrupt {
                        what: "sparse matrix".into(),
                        reason: format!("row {i} column indices not strictly increasing"),
                    });
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: c });
                }
            }
        }
        Ok(())
    }
}

/// Sparse dot product of a stored row with a dense vector, accumulated in
/// column order.
pub fn dot_row(indices: &[usize], values: &[f64], dense: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&c, &v) in indices.iter().zip(values) {
        acc += v * dense[c];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_sorts_and_drops_zeros() {
        let m = SparseMatrix::from_rows(4, vec![vec![(3, 1.0), (0, 2.0), (1, 0.0)], vec![]]).unwrap();
        assert_eq!(m.row(0), (&[0usize, 3][..], &[2.0, 1.0][..]));
        assert_eq!(m.row(1).0.len(), 0);
        assert_eq!(m.nnz(), 2);
        m.validate().unwrap();
    }

    #[test]
    fn duplicate_and_out_of_range_columns_rejected() {
        assert!(SparseMatrix::from_rows(3, vec![vec![(1, 1.0), (1, 2.0)]]).is_err());
        assert!(SparseMatrix::from_rows(3, vec![vec![(3, 1.0)]]).is_err());
    }

    #[test]
    fn without_columns_keeps_other_bits() {
        let m = SparseMatrix::from_rows(3, vec![vec![(0, 0.1), (1, 0.2), (2, 0.3)]]).unwrap();
        let z = m.without_columns(&[false, true, false]);
        assert_eq!(z.row(0), (&[0usize, 2][..], &[0.1, 0.3][..]));
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn dense_round_trip() {
        let d = vec![vec![0.0, 1.5, 0.0], vec![2.0, 0.0, -1.0]];
        assert_eq!(SparseMatrix::from_dense(&d, 3).unwrap().to_dense(), d);
    }

    #[test]
    fn occupancy() {
        let m = SparseMatrix::from_rows(3, vec![vec![(0, 1.0)], vec![(0, 1.0), (2, 1.0)]]).unwrap();
        assert_eq!(m.column_occupancy(), vec![vec![0, 1], vec![], vec![1]]);
        assert_eq!(m.rows_with_column(2), vec![1]);
    }
}
