//! Blocked access to the large matrix `A`.
//!
//! `A` is only ever touched through whole passes over its rows: a pass reads
//! as many consecutive rows as the RAM budget allows into a block buffer,
//! folds them into the product being formed, and moves on. Backends differ
//! only in how a block of rows is obtained (copied from RAM, read from an
//! `OOCPCA01` file, or regenerated from a seed); the arithmetic on a block is
//! shared, so every backend produces bit-identical products for identical
//! row values.

mod disk;
mod memory;
mod onthefly;
mod wrap;

pub use disk::{
    open_disk_source, read_dense, read_header, write_dense, write_disk_source, DiskMatrixHeader,
    OnDisk, DTYPE_F32, HEADER_LEN, MAGIC, VERSION,
};
pub use memory::InMemory;
pub use onthefly::{OnTheFly, RowGenerator};
pub use wrap::{
    center_columns, column_means, column_norms, scale_columns, Centered, Scaled, Transposed,
};

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::DenseMatrix;

/// How a source obtains its rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    InMemory,
    OnDisk,
    OnTheFly,
    Wrapped,
}

/// RAM budget for the streaming passes, in 64-bit floating-point words.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub ram_budget_words: u64,
    /// Words set aside for the small in-RAM factors.
    pub workspace_reserve: u64,
}

impl StreamConfig {
    pub fn new(ram_budget_words: u64) -> Result<Self> {
        if ram_budget_words == 0 {
            return Err(Error::param("RAM budget must be positive"));
        }
        Ok(Self {
            ram_budget_words,
            workspace_reserve: 0,
        })
    }

    pub fn from_megabytes(mb: u64) -> Result<Self> {
        Self::new(mb.saturating_mul(1 << 20) / 8)
    }

    pub fn with_reserve(mut self, words: u64) -> Self {
        self.workspace_reserve = words;
        self
    }

    /// Reserve for a randomized PCA run: `4 (i+1) l (m+n)` words.
    pub fn pca_reserve(m: usize, n: usize, l: usize, i: usize) -> u64 {
        4 * (i as u64 + 1) * l as u64 * (m as u64 + n as u64)
    }

    /// Rows per block for a pass over an `m x n` matrix whose operand and
    /// result together have `s (m + n)` entries.
    pub fn block_rows(&self, m: usize, n: usize, s: usize) -> Result<usize> {
        let fixed = self.workspace_reserve.max(s as u64 * (m as u64 + n as u64));
        let row = n as u64;
        if self.ram_budget_words < fixed + row {
            return Err(Error::BudgetTooSmall {
                budget: self.ram_budget_words,
                row_words: row,
                reserve: fixed,
            });
        }
        let rows = (self.ram_budget_words - fixed) / row;
        Ok(rows.min(m as u64).max(1) as usize)
    }
}

impl Default for StreamConfig {
    /// 1 GiB of doubles, no reserve.
    fn default() -> Self {
        Self {
            ram_budget_words: 1 << 27,
            workspace_reserve: 0,
        }
    }
}

/// Pass accounting shared by a source and all of its wrappers.
#[derive(Debug, Default)]
pub struct PassCounters {
    passes: AtomicU64,
    words: AtomicU64,
    seeks: AtomicU64,
    high_water: AtomicU64,
    pass_peak: AtomicU64,
}

/// Point-in-time copy of [`PassCounters`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub passes_over_a: u64,
    pub words_transferred: u64,
    pub disk_seeks: u64,
    /// Largest resident workspace over the source's lifetime.
    pub high_water_words: u64,
    /// Largest resident workspace of the most recent pass.
    pub last_pass_high_water: u64,
}

impl CounterSnapshot {
    /// Counts accumulated since `earlier`; the high-water marks are kept as is.
    pub fn since(&self, earlier: &CounterSnapshot) -> CounterSnapshot {
        CounterSnapshot {
            passes_over_a: self.passes_over_a - earlier.passes_over_a,
            words_transferred: self.words_transferred - earlier.words_transferred,
            disk_seeks: self.disk_seeks - earlier.disk_seeks,
            high_water_words: self.high_water_words,
            last_pass_high_water: self.last_pass_high_water,
        }
    }
}

impl PassCounters {
    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            passes_over_a: self.passes.load(Ordering::SeqCst),
            words_transferred: self.words.load(Ordering::SeqCst),
            disk_seeks: self.seeks.load(Ordering::SeqCst),
            high_water_words: self.high_water.load(Ordering::SeqCst),
            last_pass_high_water: self.pass_peak.load(Ordering::SeqCst),
        }
    }

    fn begin_pass(&self) {
        self.passes.fetch_add(1, Ordering::SeqCst);
        self.pass_peak.store(0, Ordering::SeqCst);
    }

    fn record_block(&self, rows: usize, n: usize, resident: u64) {
        self.words.fetch_add((rows * n) as u64, Ordering::SeqCst);
        self.seeks.fetch_add(1, Ordering::SeqCst);
        self.high_water.fetch_max(resident, Ordering::SeqCst);
        self.pass_peak.fetch_max(resident, Ordering::SeqCst);
    }
}

/// Wall-clock seconds spent in each step of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeconds {
    pub prescale: f64,
    pub sample: f64,
    pub orthonormalize: f64,
    pub project: f64,
    pub svd: f64,
    pub rotate: f64,
    pub truncate: f64,
}

impl PhaseSeconds {
    pub fn total(&self) -> f64 {
        self.prescale
            + self.sample
            + self.orthonormalize
            + self.project
            + self.svd
            + self.rotate
            + self.truncate
    }
}

/// IO and timing accounting for one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub passes_over_a: u64,
    /// Matrix elements read (or generated) across all passes.
    pub words_transferred: u64,
    /// Block reads.
    pub disk_seeks: u64,
    /// Largest resident workspace of any pass, in words.
    pub high_water_words: u64,
    pub wall_time_per_phase: PhaseSeconds,
}

impl Diagnostics {
    pub fn from_counts(c: CounterSnapshot, phases: PhaseSeconds) -> Self {
        Self {
            passes_over_a: c.passes_over_a,
            words_transferred: c.words_transferred,
            disk_seeks: c.disk_seeks,
            high_water_words: c.high_water_words,
            wall_time_per_phase: phases,
        }
    }
}

/// Anything that can form `A G` and `Aᵀ Q` in streaming passes.
pub trait LinearOperator: Send + Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;

    /// `A G` for `G` of shape `n x s`, in one pass.
    fn multiply(&self, g: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix>;

    /// `Aᵀ Q` for `Q` of shape `m x s`, in one pass.
    fn multiply_transpose(&self, q: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix>;

    fn counters(&self) -> CounterSnapshot;

    fn dims(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }
}

/// A matrix whose rows can be read in blocks.
pub trait MatrixSource: LinearOperator {
    fn backend(&self) -> Backend;

    /// Fills `out` with rows `start..start + out.len() / n`, row-major.
    fn read_rows(&self, start: usize, out: &mut [f64]) -> Result<()>;
}

/// Row access used by the shared pass kernels. `block` may hand back a
/// borrowed slice instead of filling `buf`.
pub(crate) trait RowBlocks: Sync {
    fn shape(&self) -> (usize, usize);
    fn counters_ref(&self) -> &PassCounters;
    fn block<'a>(&'a self, start: usize, rows: usize, buf: &'a mut [f64]) -> Result<&'a [f64]>;
}

pub(crate) fn streamed_multiply<S: RowBlocks + ?Sized>(
    src: &S,
    g: &DenseMatrix,
    cfg: &StreamConfig,
) -> Result<DenseMatrix> {
    let (m, n) = src.shape();
    if g.rows() != n {
        return Err(Error::dims(format!(
            "A is {m}x{n} but the right factor has {} rows",
            g.rows()
        )));
    }
    let s = g.cols();
    let block_rows = cfg.block_rows(m, n, s)?;
    let resident = (block_rows * n) as u64 + (s * (m + n)) as u64;
    let counters = src.counters_ref();
    counters.begin_pass();

    let mut out = DenseMatrix::zeros(m, s);
    let mut buf = vec![0.0f64; block_rows * n];
    let gdata = g.as_slice();
    let mut start = 0;
    while start < m {
        let rows = block_rows.min(m - start);
        let block = src.block(start, rows, &mut buf[..rows * n])?;
        counters.record_block(rows, n, resident);
        let dst = &mut out.as_mut_slice()[start * s..(start + rows) * s];
        dst.par_chunks_mut(s.max(1))
            .zip(block.par_chunks(n))
            .for_each(|(o, a)| {
                for (c, &acr) in a.iter().enumerate() {
                    let grow = &gdata[c * s..(c + 1) * s];
                    for (oj, &gj) in o.iter_mut().zip(grow) {
                        *oj += acr * gj;
                    }
                }
            });
        start += rows;
    }
    Ok(out)
}

// Columns of A handled by one worker in the transpose pass.
const COLUMN_CHUNK: usize = 64;

pub(crate) fn streamed_multiply_transpose<S: RowBlocks + ?Sized>(
    src: &S,
    q: &DenseMatrix,
    cfg: &StreamConfig,
) -> Result<DenseMatrix> {
    let (m, n) = src.shape();
    if q.rows() != m {
        return Err(Error::dims(format!(
            "A is {m}x{n} but the left factor has {} rows",
            q.rows()
        )));
    }
    let s = q.cols();
    let block_rows = cfg.block_rows(m, n, s)?;
    let resident = (block_rows * n) as u64 + (s * (m + n)) as u64;
    let counters = src.counters_ref();
    counters.begin_pass();

    // T starts at zero; each block adds the transposes of its rows weighted
    // by the matching rows of Q. Every entry of T accumulates in ascending
    // row order, whatever the block size or thread count.
    let mut t = DenseMatrix::zeros(n, s);
    let mut buf = vec![0.0f64; block_rows * n];
    let qdata = q.as_slice();
    let mut start = 0;
    while start < m {
        let rows = block_rows.min(m - start);
        let block = src.block(start, rows, &mut buf[..rows * n])?;
        counters.record_block(rows, n, resident);
        t.as_mut_slice()
            .par_chunks_mut((COLUMN_CHUNK * s).max(1))
            .enumerate()
            .for_each(|(chunk, tchunk)| {
                let c0 = chunk * COLUMN_CHUNK;
                let width = tchunk.len() / s.max(1);
                for r in 0..rows {
                    let arow = &block[r * n + c0..r * n + c0 + width];
                    let qrow = &qdata[(start + r) * s..(start + r + 1) * s];
                    for (ci, &a) in arow.iter().enumerate() {
                        let trow = &mut tchunk[ci * s..(ci + 1) * s];
                        for (tj, &qj) in trow.iter_mut().zip(qrow) {
                            *tj += a * qj;
                        }
                    }
                }
            });
        start += rows;
    }
    Ok(t)
}

/// Visits every row block of `src` in order, for one pass.
pub(crate) fn for_each_block<S: MatrixSource + ?Sized>(
    src: &S,
    cfg: &StreamConfig,
    mut f: impl FnMut(usize, usize, &[f64]) -> Result<()>,
) -> Result<()> {
    let (m, n) = src.dims();
    let block_rows = cfg.block_rows(m, n, 0)?;
    let mut buf = vec![0.0f64; block_rows * n];
    let mut start = 0;
    while start < m {
        let rows = block_rows.min(m - start);
        src.read_rows(start, &mut buf[..rows * n])?;
        f(start, rows, &buf[..rows * n])?;
        start += rows;
    }
    Ok(())
}

/// Reads all of `src` into RAM. Intended for tests and small matrices.
pub fn materialize<S: MatrixSource + ?Sized>(src: &S) -> Result<DenseMatrix> {
    let (m, n) = src.dims();
    let mut data = vec![0.0; m * n];
    src.read_rows(0, &mut data)?;
    DenseMatrix::from_vec(m, n, data)
}

macro_rules! forward_source {
    ($($t:tt)*) => {
        impl<S: MatrixSource + ?Sized> LinearOperator for $($t)* {
            fn nrows(&self) -> usize { (**self).nrows() }
            fn ncols(&self) -> usize { (**self).ncols() }
            fn multiply(&self, g: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
                (**self).multiply(g, cfg)
            }
            fn multiply_transpose(&self, q: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
                (**self).multiply_transpose(q, cfg)
            }
            fn counters(&self) -> CounterSnapshot { (**self).counters() }
        }
        impl<S: MatrixSource + ?Sized> MatrixSource for $($t)* {
            fn backend(&self) -> Backend { (**self).backend() }
            fn read_rows(&self, start: usize, out: &mut [f64]) -> Result<()> {
                (**self).read_rows(start, out)
            }
        }
    };
}

forward_source!(&S);
forward_source!(Box<S>);
forward_source!(Arc<S>);

pub(crate) fn check_row_range(m: usize, n: usize, start: usize, len: usize) -> Result<usize> {
    if n == 0 || !len.is_multiple_of(n) {
        return Err(Error::dims(format!(
            "row buffer of {len} elements is not a whole number of {n}-element rows"
        )));
    }
    let rows = len / n;
    if start + rows > m {
        return Err(Error::dims(format!(
            "rows {start}..{} requested from a matrix with {m} rows",
            start + rows
        )));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_rows_respects_budget() {
        let cfg = StreamConfig::new(1000).unwrap();
        // s (m + n) = 2 * 30 = 60 fixed, rows of 10 words
        assert_eq!(cfg.block_rows(20, 10, 2).unwrap(), 20);
        let cfg = StreamConfig::new(160).unwrap();
        assert_eq!(cfg.block_rows(20, 10, 2).unwrap(), 10);
        let cfg = StreamConfig::new(69).unwrap();
        assert!(matches!(
            cfg.block_rows(20, 10, 2),
            Err(Error::BudgetTooSmall { .. })
        ));
        let cfg = StreamConfig::new(1000).unwrap().with_reserve(900);
        assert_eq!(cfg.block_rows(20, 10, 2).unwrap(), 10);
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(StreamConfig::new(0).is_err());
        assert_eq!(
            StreamConfig::from_megabytes(1).unwrap().ram_budget_words,
            131_072
        );
    }
}
