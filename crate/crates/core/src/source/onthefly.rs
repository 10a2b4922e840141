use rayon::prelude::*;

use super::{
    check_row_range, streamed_multiply, streamed_multiply_transpose, Backend, CounterSnapshot,
    LinearOperator, MatrixSource, PassCounters, RowBlocks, StreamConfig,
};
use crate::error::{Error, Result};
use crate::DenseMatrix;

/// Computes rows of a matrix on demand.
///
/// `generate(row, out)` must be a pure function of the generator's state and
/// `row`: regenerating a row, in any order and on any thread, yields the
/// same values bit for bit.
pub trait RowGenerator: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn generate(&self, row: usize, out: &mut [f64]);
}

/// Source whose rows are regenerated on every pass instead of stored.
pub struct OnTheFly<G> {
    generator: G,
    counters: PassCounters,
}

impl<G: RowGenerator> OnTheFly<G> {
    pub fn new(generator: G) -> Result<Self> {
        if generator.nrows() == 0 || generator.ncols() == 0 {
            return Err(Error::dims(
                "a source needs at least one row and one column",
            ));
        }
        Ok(Self {
            generator,
            counters: PassCounters::default(),
        })
    }

    pub fn generator(&self) -> &G {
        &self.generator
    }

    fn fill(&self, start: usize, out: &mut [f64]) {
        let n = self.generator.ncols();
        out.par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, row)| self.generator.generate(start + i, row));
    }
}

impl<G> std::fmt::Debug for OnTheFly<G> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnTheFly").finish_non_exhaustive()
    }
}

impl<G: RowGenerator> RowBlocks for OnTheFly<G> {
    fn shape(&self) -> (usize, usize) {
        (self.generator.nrows(), self.generator.ncols())
    }

    fn counters_ref(&self) -> &PassCounters {
        &self.counters
    }

    fn block<'a>(&'a self, start: usize, _rows: usize, buf: &'a mut [f64]) -> Result<&'a [f64]> {
        self.fill(start, buf);
        Ok(buf)
    }
}

impl<G: RowGenerator> LinearOperator for OnTheFly<G> {
    fn nrows(&self) -> usize {
        self.generator.nrows()
    }

    fn ncols(&self) -> usize {
        self.generator.ncols()
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

impl<G: RowGenerator> MatrixSource for OnTheFly<G> {
    fn backend(&self) -> Backend {
        Backend::OnTheFly
    }

    fn read_rows(&self, start: usize, out: &mut [f64]) -> Result<()> {
        check_row_range(
            self.generator.nrows(),
            self.generator.ncols(),
            start,
            out.len(),
        )?;
        self.fill(start, out);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::{materialize, InMemory};
    use rand::Rng;

    struct Noise {
        seed: u64,
        m: usize,
        n: usize,
    }

    impl RowGenerator for Noise {
        fn nrows(&self) -> usize {
            self.m
        }
        fn ncols(&self) -> usize {
            self.n
        }
        fn generate(&self, row: usize, out: &mut [f64]) {
            let mut rng = crate::rng::stream_rng(self.seed, row as u64);
            out.iter_mut().for_each(|x| *x = rng.random::<f64>() - 0.5);
        }
    }

    #[test]
    fn rows_regenerate_identically() {
        let src = OnTheFly::new(Noise {
            seed: 3,
            m: 50,
            n: 8,
        })
        .unwrap();
        let mut a = vec![0.0; 8];
        let mut b = vec![0.0; 8];
        src.read_rows(37, &mut a).unwrap();
        let _ = materialize(&src).unwrap();
        src.read_rows(37, &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bit_identical_to_materialized_copy() {
        let src = OnTheFly::new(Noise {
            seed: 5,
            m: 64,
            n: 31,
        })
        .unwrap();
        let mem = InMemory::new(materialize(&src).unwrap()).unwrap();
        let g: DenseMatrix = crate::dense::gaussian_matrix(31, 4, 2);
        let q: DenseMatrix = crate::dense::gaussian_matrix(64, 4, 3);
        let cfg = StreamConfig::new(4 * 95 + 10 * 31).unwrap();
        assert_eq!(
            src.multiply(&g, &cfg).unwrap(),
            mem.multiply(&g, &StreamConfig::default()).unwrap()
        );
        assert_eq!(
            src.multiply_transpose(&q, &cfg).unwrap(),
            mem.multiply_transpose(&q, &StreamConfig::default())
                .unwrap()
        );
    }

    #[test]
    fn out_of_range_rows_rejected() {
        let src = OnTheFly::new(Noise {
            seed: 1,
            m: 4,
            n: 2,
        })
        .unwrap();
        let mut buf = vec![0.0; 4];
        assert!(src.read_rows(3, &mut buf).is_err());
        let mut odd = vec![0.0; 3];
        assert!(src.read_rows(0, &mut odd).is_err());
    }
}
