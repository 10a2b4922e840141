use super::{
    check_row_range, streamed_multiply, streamed_multiply_transpose, Backend, CounterSnapshot,
    LinearOperator, MatrixSource, PassCounters, RowBlocks, StreamConfig,
};
use crate::error::{Error, Result};
use crate::DenseMatrix;

/// Source backed by a row-major matrix already resident in RAM.
#[derive(Debug)]
pub struct InMemory {
    matrix: DenseMatrix,
    counters: PassCounters,
}

impl InMemory {
    pub fn new(matrix: DenseMatrix) -> Result<Self> {
        if matrix.rows() == 0 || matrix.cols() == 0 {
            return Err(Error::dims(
                "a source needs at least one row and one column",
            ));
        }
        Ok(Self {
            matrix,
            counters: PassCounters::default(),
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

impl RowBlocks for InMemory {
    fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    fn counters_ref(&self) -> &PassCounters {
        &self.counters
    }

    fn block<'a>(&'a self, start: usize, rows: usize, _buf: &'a mut [f64]) -> Result<&'a [f64]> {
        let n = self.matrix.cols();
        Ok(&self.matrix.as_slice()[start * n..(start + rows) * n])
    }
}

impl LinearOperator for InMemory {
    fn nrows(&self) -> usize {
        self.matrix.rows()
    }

    fn ncols(&self) -> usize {
        self.matrix.cols()
    }

    fn multiply(&self, g: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        streamed_multiply(self, g, cfg)
    }

    fn multiply_transpose(&self, q: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        streamed_multiply_transpose(self, q, cfg)
    }

    fn counters(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }
}

impl MatrixSource for InMemory {
    fn backend(&self) -> Backend {
        Backend::InMemory
    }

    fn read_rows(&self, start: usize, out: &mut [f64]) -> Result<()> {
        let (m, n) = self.matrix.shape();
        let rows = check_row_range(m, n, start, out.len())?;
        out.copy_from_slice(&self.matrix.as_slice()[start * n..(start + rows) * n]);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::gaussian_matrix;

    fn cfg() -> StreamConfig {
        StreamConfig::default()
    }

    #[test]
    fn dims_of_small_matrix() {
        let src = InMemory::new(DenseMatrix::zeros(3, 2)).unwrap();
        assert_eq!(src.dims(), (3, 2));
    }

    #[test]
    fn identity_products() {
        let src = InMemory::new(DenseMatrix::identity(2)).unwrap();
        let g = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(src.multiply(&g, &cfg()).unwrap(), g);
        let q = DenseMatrix::from_rows(&[&[5.0], &[7.0]]).unwrap();
        assert_eq!(src.multiply_transpose(&q, &cfg()).unwrap(), q);
    }

    #[test]
    fn transpose_product_picks_row() {
        let src = InMemory::new(DenseMatrix::from_fn(3, 2, |_, _| 1.0)).unwrap();
        let e1 = DenseMatrix::from_rows(&[&[1.0], &[0.0], &[0.0]]).unwrap();
        let t = src.multiply_transpose(&e1, &cfg()).unwrap();
        assert_eq!(t.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn ones_vector_gives_row_sums() {
        let a: DenseMatrix = gaussian_matrix(17, 9, 4);
        let src = InMemory::new(a.clone()).unwrap();
        let ones = DenseMatrix::from_fn(9, 1, |_, _| 1.0);
        let out = src.multiply(&ones, &cfg()).unwrap();
        for r in 0..17 {
            let mut sum = 0.0;
            for c in 0..9 {
                sum += a[(r, c)];
            }
            assert!((out[(r, 0)] - sum).abs() < 1e-13);
        }
    }

    #[test]
    fn blocking_does_not_change_results() {
        let a: DenseMatrix = gaussian_matrix(150, 70, 9);
        let src = InMemory::new(a.clone()).unwrap();
        let g: DenseMatrix = gaussian_matrix(70, 3, 1);
        let q: DenseMatrix = gaussian_matrix(150, 3, 2);
        let big = cfg();
        // room for 7 rows per block
        let small = StreamConfig::new(3 * 220 + 7 * 70).unwrap();
        assert_eq!(small.block_rows(150, 70, 3).unwrap(), 7);
        assert_eq!(
            src.multiply(&g, &big).unwrap(),
            src.multiply(&g, &small).unwrap()
        );
        assert_eq!(
            src.multiply_transpose(&q, &big).unwrap(),
            src.multiply_transpose(&q, &small).unwrap()
        );
        let oracle = a.t_matmul(&q).unwrap();
        let got = src.multiply_transpose(&q, &small).unwrap();
        assert!(oracle.sub(&got).unwrap().max_abs() < 1e-12);
        let snap = src.counters();
        assert_eq!(snap.passes_over_a, 5);
        assert_eq!(snap.words_transferred, 5 * 150 * 70);

        let fresh = InMemory::new(a).unwrap();
        fresh.multiply(&g, &small).unwrap();
        fresh.multiply_transpose(&q, &small).unwrap();
        let snap = fresh.counters();
        assert_eq!(snap.disk_seeks, 2 * 22);
        assert!(snap.high_water_words <= small.ram_budget_words);
    }

    #[test]
    fn mismatched_operand() {
        let src = InMemory::new(DenseMatrix::identity(2)).unwrap();
        assert!(matches!(
            src.multiply(&DenseMatrix::zeros(3, 1), &cfg()),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            src.multiply_transpose(&DenseMatrix::zeros(3, 1), &cfg()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
