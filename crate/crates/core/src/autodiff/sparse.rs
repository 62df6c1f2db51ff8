use crate::autodiff::Matrix;
use crate::error::{Error, Result};

/// Square CSR matrix with constant weights. Carries no gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(n: usize, offsets: Vec<usize>, indices: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if offsets.len() != n + 1 || offsets[0] != 0 {
            return Err(Error::DimensionMismatch(format!(
                "CSR offsets of length {} for {n} rows",
                offsets.len()
            )));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) || offsets[n] != indices.len() {
            return Err(Error::DimensionMismatch("CSR offsets are not a valid prefix sum".into()));
        }
        if indices.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} column indices but {} weights",
                indices.len(),
                weights.len()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&c| c >= n) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                num_nodes: n,
            });
        }
        Ok(Self {
            n,
            offsets,
            indices,
            weights,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            weights: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(column, weight)` pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.offsets[r]..self.offsets[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.weights[span].iter().copied())
    }

    /// Weight at `(r, c)`, zero when the entry is not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).filter(|&(j, _)| j == c).map(|(_, w)| w).sum()
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, w) in self.row(r) {
                out.set(r, c, out.get(r, c) + w);
            }
        }
        out
    }

    /// `S · d`.
    pub fn matmul(&self, d: &Matrix) -> Result<Matrix> {
        if d.rows() != self.n {
            return Err(Error::ShapeMismatch {
                op: "spmm",
                lhs: (self.n, self.n),
                rhs: d.shape(),
            });
        }
        let mut out = Matrix::zeros(self.n, d.cols());
        for r in 0..self.n {
            let out_row = out.row_mut(r);
            for (c, w) in self.row(r) {
                for (o, &v) in out_row.iter_mut().zip(d.row(c)) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }

    /// `Sᵀ · g`, by scattering rows.
    pub fn t_matmul(&self, g: &Matrix) -> Result<Matrix> {
        if g.rows() != self.n {
            return Err(Error::ShapeMismatch {
                op: "spmm_t",
                lhs: (self.n, self.n),
                rhs: g.shape(),
            });
        }
        let mut out = Matrix::zeros(self.n, g.cols());
        for r in 0..self.n {
            let g_row = g.row(r);
            for (c, w) in self.row(r) {
                for (o, &v) in out.row_mut(c).iter_mut().zip(g_row) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_csr() {
        assert!(SparseMatrix::new(2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(SparseMatrix::new(2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(2, vec![0, 1, 2], vec![0, 2], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(2, vec![0, 1, 2], vec![0, 1], vec![1.0]).is_err());
    }

    #[test]
    fn transpose_product_matches_dense() {
        let s = SparseMatrix::new(3, vec![0, 2, 3, 3], vec![0, 2, 1], vec![2.0, -1.0, 0.5]).unwrap();
        let g = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let dense = s.to_dense();
        assert_eq!(s.t_matmul(&g).unwrap(), dense.t_matmul(&g).unwrap());
        assert_eq!(s.matmul(&g).unwrap(), dense.matmul(&g).unwrap());
    }
}
