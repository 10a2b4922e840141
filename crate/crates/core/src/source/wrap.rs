//! Implicit normalization and transposition of a source.
//!
//! The wrappers never rewrite the underlying data: centering and column
//! scaling are folded into the operands and results of each product.

use super::{for_each_block, Backend, CounterSnapshot, LinearOperator, MatrixSource, StreamConfig};
use crate::error::{Error, Result};
use crate::DenseMatrix;

/// Column means of `source`, in one pass.
pub fn column_means<S: MatrixSource + ?Sized>(source: &S, cfg: &StreamConfig) -> Result<Vec<f64>> {
    let (m, n) = source.dims();
    let mut sums = vec![0.0; n];
    for_each_block(source, cfg, |_, _, block| {
        for row in block.chunks_exact(n) {
            for (s, &x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        Ok(())
    })?;
    let inv = 1.0 / m as f64;
    Ok(sums.into_iter().map(|s| s * inv).collect())
}

/// Euclidean norm of every column of `source`, in one pass.
pub fn column_norms<S: MatrixSource + ?Sized>(source: &S, cfg: &StreamConfig) -> Result<Vec<f64>> {
    let n = source.ncols();
    let mut sq = vec![0.0; n];
    for_each_block(source, cfg, |_, _, block| {
        for row in block.chunks_exact(n) {
            for (s, &x) in sq.iter_mut().zip(row) {
                *s += x * x;
            }
        }
        Ok(())
    })?;
    Ok(sq.into_iter().map(f64::sqrt).collect())
}

/// `A − 1 μᵀ` where `μ` holds the column means of `A`.
#[derive(Debug)]
pub struct Centered<S> {
    inner: S,
    means: Vec<f64>,
}

/// Wraps `source` so that every column has zero mean. The means are
/// computed once, here, and cached.
pub fn center_columns<S: MatrixSource>(source: S, cfg: &StreamConfig) -> Result<Centered<S>> {
    let means = column_means(&source, cfg)?;
    Ok(Centered {
        inner: source,
        means,
    })
}

impl<S> Centered<S> {
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: MatrixSource> LinearOperator for Centered<S> {
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    // (A − 1μᵀ) G = A G − 1 (μᵀ G)
    fn multiply(&self, g: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        let mut out = self.inner.multiply(g, cfg)?;
        let s = g.cols();
        let mut mu_g = vec![0.0; s];
        for (c, &mu) in self.means.iter().enumerate() {
            for (acc, &x) in mu_g.iter_mut().zip(g.row(c)) {
                *acc += mu * x;
            }
        }
        for r in 0..out.rows() {
            for (o, &d) in out.row_mut(r).iter_mut().zip(&mu_g) {
                *o -= d;
            }
        }
        Ok(out)
    }

    // (A − 1μᵀ)ᵀ Q = Aᵀ Q − μ (1ᵀ Q)
    fn multiply_transpose(&self, q: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        let mut out = self.inner.multiply_transpose(q, cfg)?;
        let s = q.cols();
        let mut col_sums = vec![0.0; s];
        for r in 0..q.rows() {
            for (acc, &x) in col_sums.iter_mut().zip(q.row(r)) {
                *acc += x;
            }
        }
        for (c, &mu) in self.means.iter().enumerate() {
            for (o, &cs) in out.row_mut(c).iter_mut().zip(&col_sums) {
                *o -= mu * cs;
            }
        }
        Ok(out)
    }

    fn counters(&self) -> CounterSnapshot {
        self.inner.counters()
    }
}

impl<S: MatrixSource> MatrixSource for Centered<S> {
    fn backend(&self) -> Backend {
        Backend::Wrapped
    }

    fn read_rows(&self, start: usize, out: &mut [f64]) -> Result<()> {
        self.inner.read_rows(start, out)?;
        for row in out.chunks_exact_mut(self.means.len()) {
            for (x, &mu) in row.iter_mut().zip(&self.means) {
                *x -= mu;
            }
        }
        Ok(())
    }
}

/// `A diag(w)`.
#[derive(Debug)]
pub struct Scaled<S> {
    inner: S,
    weights: Vec<f64>,
}

/// Wraps `source` so that column `j` is multiplied by `weights[j]`.
///
/// Zero and non-finite weights are rejected; callers decide what to do with
/// all-zero columns before building weights from [`column_norms`].
pub fn scale_columns<S: MatrixSource>(source: S, weights: Vec<f64>) -> Result<Scaled<S>> {
    if weights.len() != source.ncols() {
        return Err(Error::dims(format!(
            "{} weights for {} columns",
            weights.len(),
            source.ncols()
        )));
    }
    if let Some(j) = weights.iter().position(|w| !w.is_finite() || *w == 0.0) {
        return Err(Error::param(format!(
            "column weight {j} is {}; weights must be finite and nonzero",
            weights[j]
        )));
    }
    Ok(Scaled {
        inner: source,
        weights,
    })
}

impl<S> Scaled<S> {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: MatrixSource> LinearOperator for Scaled<S> {
    fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    fn multiply(&self, g: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        if g.rows() != self.weights.len() {
            return Err(Error::dims("operand rows differ from column count"));
        }
        let mut wg = g.clone();
        for (r, &w) in self.weights.iter().enumerate() {
            wg.row_mut(r).iter_mut().for_each(|x| *x *= w);
        }
        self.inner.multiply(&wg, cfg)
    }

    fn multiply_transpose(&self, q: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        let mut out = self.inner.multiply_transpose(q, cfg)?;
        for (r, &w) in self.weights.iter().enumerate() {
            out.row_mut(r).iter_mut().for_each(|x| *x *= w);
        }
        Ok(out)
    }

    fn counters(&self) -> CounterSnapshot {
        self.inner.counters()
    }
}

impl<S: MatrixSource> MatrixSource for Scaled<S> {
    fn backend(&self) -> Backend {
        Backend::Wrapped
    }

    fn read_rows(&self, start: usize, out: &mut [f64]) -> Result<()> {
        self.inner.read_rows(start, out)?;
        for row in out.chunks_exact_mut(self.weights.len()) {
            for (x, &w) in row.iter_mut().zip(&self.weights) {
                *x *= w;
            }
        }
        Ok(())
    }
}

/// `Aᵀ` as an operator: the two products trade places. Row reads are not
/// available, so this is only a [`LinearOperator`].
#[derive(Debug)]
pub struct Transposed<'a, S: ?Sized>(pub &'a S);

impl<S: LinearOperator + ?Sized> LinearOperator for Transposed<'_, S> {
    fn nrows(&self) -> usize {
        self.0.ncols()
    }

    fn ncols(&self) -> usize {
        self.0.nrows()
    }

    fn multiply(&self, g: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        self.0.multiply_transpose(g, cfg)
    }

    fn multiply_transpose(&self, q: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        self.0.multiply(q, cfg)
    }

    fn counters(&self) -> CounterSnapshot {
        self.0.counters()
    }
}
