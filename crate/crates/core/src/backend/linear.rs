//! Sparse symmetric positive-definite solves for the normal equations.

use nalgebra::DVector;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

/// Accumulates a symmetric matrix from dense blocks. Both triangles must be
/// pushed; duplicate entries are summed.
pub(crate) struct SparseBuilder {
    coo: CooMatrix<f64>,
}

impl SparseBuilder {
    pub fn new(dim: usize) -> Self {
        SparseBuilder {
            coo: CooMatrix::new(dim, dim),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.coo.push(i, j, v);
        }
    }

    pub fn push_block<R, C, S>(&mut self, row: usize, col: usize, block: &nalgebra::Matrix<f64, R, C, S>)
    where
        R: nalgebra::Dim,
        C: nalgebra::Dim,
        S: nalgebra::RawStorage<f64, R, C>,
    {
        for c in 0..block.ncols() {
            for r in 0..block.nrows() {
                self.push(row + r, col + c, block[(r, c)]);
            }
        }
    }

    /// Solves `(A + diag(damping)) x = b`. `None` if the factorization fails.
    pub fn solve(&self, damping: &DVector<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
        let mut coo = self.coo.clone();
        for (i, d) in damping.iter().enumerate() {
            coo.push(i, i, *d);
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc).ok()?;
        let x = chol.solve(b);
        let x = DVector::from_column_slice(x.as_slice());
        x.iter().all(|v| v.is_finite()).then_some(x)
    }

    /// Diagonal of the accumulated matrix.
    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.coo.nrows());
        for (i, j, v) in self.coo.triplet_iter() {
            if i == j {
                d[i] += *v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;

    #[test]
    fn solves_small_system() {
        let mut b = SparseBuilder::new(3);
        b.push_block(0, 0, &Matrix2::new(4.0, 1.0, 1.0, 3.0));
        b.push(2, 2, 2.0);
        b.push(0, 0, 1.0);
        let x = b
            .solve(&DVector::zeros(3), &DVector::from_vec(vec![5.0, 4.0, 2.0]))
            .unwrap();
        // [[5,1],[1,3]] x = [5,4]  →  x = (11/14, 15/14)
        assert!((x[0] - 11.0 / 14.0).abs() < 1e-12 && (x[1] - 15.0 / 14.0).abs() < 1e-12);
        assert!((x[2] - 1.0).abs() < 1e-12);
        assert_eq!(b.diagonal()[0], 5.0);
    }
}
