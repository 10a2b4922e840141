//! Randomized rank-`k` SVD of a matrix reachable only through streaming
//! passes.
//!
//! With `G` an `n x l` Gaussian matrix, the run forms
//!
//! ```text
//! H = [ A G | (A Aᵀ) A G | ... | (A Aᵀ)^i A G ]     (m x (i+1) l)
//! H = Q R                                           pivoted QR, Q orthonormal
//! T = Aᵀ Q                                          (n x (i+1) l)
//! T = Ṽ Σ̃ Wᵀ                                        thin SVD
//! Ũ = Q W
//! ```
//!
//! and keeps the leading `k` columns of `Ũ`, `Ṽ` and values of `Σ̃`. Each
//! power step `H⁽ᵖ⁾ = A (Aᵀ H⁽ᵖ⁻¹⁾)` costs two passes over `A`, so a run
//! makes exactly `2 (i + 1)` passes. Only `O((i+1) l (m+n))` numbers are
//! ever held in RAM besides one block of rows.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dense::{gaussian_matrix, orthonormalize, thin_svd};
use crate::error::{Error, Result};
use crate::rng::mix_seed;
use crate::source::{
    write_dense, Diagnostics, LinearOperator, PhaseSeconds, StreamConfig, Transposed,
};
use crate::specnorm::{estimate_norm, NormEstParams};
use crate::DenseMatrix;

/// Largest tolerated `|Fᵀ F − I|` entry of the returned factors.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaParams {
    /// Target rank.
    pub k: usize,
    /// Columns of the Gaussian test matrix, `l >= k`.
    pub l: usize,
    /// Number of power steps.
    pub i: usize,
    /// Failure constant of the error bound.
    pub c: f64,
    pub seed: u64,
    pub ram_budget_words: u64,
    /// Run on `A / ‖A‖₂` (norm estimated first) to keep `‖A‖^(2i+1)` in range.
    pub prescale: bool,
}

impl PcaParams {
    /// Defaults: `l = k + 2`, `i = 1`, `C = 10`, seed 0, 1 GiB budget.
    pub fn new(k: usize) -> Self {
        Self {
            k,
            l: k + 2,
            i: 1,
            c: 10.0,
            seed: 0,
            ram_budget_words: StreamConfig::default().ram_budget_words,
            prescale: false,
        }
    }

    pub fn oversample(mut self, l: usize) -> Self {
        self.l = l;
        self
    }

    pub fn power_steps(mut self, i: usize) -> Self {
        self.i = i;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn ram_budget_words(mut self, words: u64) -> Self {
        self.ram_budget_words = words;
        self
    }

    pub fn prescale(mut self, on: bool) -> Self {
        self.prescale = on;
        self
    }

    pub fn failure_constant(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    /// Columns of the sample block `H`.
    pub fn block_width(&self) -> usize {
        (self.i + 1) * self.l
    }

    /// Checks the parameters against an `m x n` matrix.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let short = m.min(n);
        if self.k == 0 {
            return Err(Error::param("rank k must be at least 1"));
        }
        if self.l < self.k {
            return Err(Error::param(format!(
                "l = {} is smaller than k = {}",
                self.l, self.k
            )));
        }
        if self.k >= short || self.block_width() > short - self.k {
            return Err(Error::param(format!(
                "(i+1) l = {} exceeds min(m, n) - k = {} for a {m}x{n} matrix",
                self.block_width(),
                short.saturating_sub(self.k)
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param("failure constant C must be positive"));
        }
        if self.ram_budget_words == 0 {
            return Err(Error::param("RAM budget must be positive"));
        }
        Ok(())
    }

    /// Stream configuration reserving `4 (i+1) l (m+n)` words for the factors.
    pub fn stream_config(&self, m: usize, n: usize) -> Result<StreamConfig> {
        Ok(StreamConfig::new(self.ram_budget_words)?
            .with_reserve(StreamConfig::pca_reserve(m, n, self.l, self.i)))
    }
}

/// `A ≈ U diag(sigma) Vᵀ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PcaResult {
    /// `m x k`, orthonormal columns.
    pub u: DenseMatrix,
    /// Nonincreasing, nonnegative.
    pub sigma: Vec<f64>,
    /// `n x k`, orthonormal columns.
    pub v: DenseMatrix,
    pub diagnostics: Diagnostics,
    pub params: PcaParams,
}

impl PcaResult {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) Vᵀ`, materialized. For tests on small matrices.
    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for r in 0..us.rows() {
            for (x, &s) in us.row_mut(r).iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        us.matmul(&self.v.transpose()).expect("conforming factors")
    }

    /// Writes `U.bin`, `sigma.bin` (a `1 x k` matrix) and `V.bin` into `dir`.
    pub fn write_factors(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_dense(dir.join("U.bin"), &self.u)?;
        write_dense(
            dir.join("sigma.bin"),
            &DenseMatrix::from_vec(1, self.sigma.len(), self.sigma.clone())?,
        )?;
        write_dense(dir.join("V.bin"), &self.v)?;
        Ok(())
    }

    fn check_invariants(&self) {
        let du = self.u.orthonormality_defect();
        let dv = self.v.orthonormality_defect();
        assert!(du <= ORTHONORMALITY_TOL, "U lost orthonormality: {du:e}");
        assert!(dv <= ORTHONORMALITY_TOL, "V lost orthonormality: {dv:e}");
        assert!(
            self.sigma.windows(2).all(|w| w[0] >= w[1]) && self.sigma.iter().all(|&s| s >= 0.0),
            "singular values out of order"
        );
    }
}

/// Rank-`params.k` approximation of `source`.
///
/// When `n > m` the algorithm runs on `Aᵀ` (swapping the two streaming
/// products) and the roles of `U` and `V` are exchanged on output.
pub fn randomized_pca<S: LinearOperator + ?Sized>(
    source: &S,
    params: &PcaParams,
) -> Result<PcaResult> {
    let (m, n) = source.dims();
    params.validate(m, n)?;
    let result = if n > m {
        let (u, sigma, v, diagnostics) = run(&Transposed(source), params)?;
        PcaResult {
            u: v,
            sigma,
            v: u,
            diagnostics,
            params: params.clone(),
        }
    } else {
        let (u, sigma, v, diagnostics) = run(source, params)?;
        PcaResult {
            u,
            sigma,
            v,
            diagnostics,
            params: params.clone(),
        }
    };
    result.check_invariants();
    Ok(result)
}

type Factors = (DenseMatrix, Vec<f64>, DenseMatrix, Diagnostics);

fn run<O: LinearOperator + ?Sized>(op: &O, params: &PcaParams) -> Result<Factors> {
    let (m, n) = op.dims();
    let cfg = params.stream_config(m, n)?;
    let before = op.counters();
    let mut phases = PhaseSeconds::default();

    let mut clock = Instant::now();
    let inv_scale = if params.prescale {
        let est = estimate_norm(
            op,
            &NormEstParams {
                j_iters: 6,
                k_probes: 1,
                seed: mix_seed(params.seed, 0x5ca1e),
            },
            &cfg,
        )?;
        if est.value > 0.0 && est.value.is_finite() {
            1.0 / est.value
        } else {
            1.0
        }
    } else {
        1.0
    };
    phases.prescale = lap(&mut clock);

    // Step 1: H⁽⁰⁾ = A G, H⁽ᵖ⁾ = A (Aᵀ H⁽ᵖ⁻¹⁾)
    // peak workspace of this run's own passes; the lifetime mark on the
    // source may come from an earlier run
    let mut peak = 0u64;
    let mut track = |x: DenseMatrix| {
        peak = peak.max(op.counters().last_pass_high_water);
        x
    };
    let g: DenseMatrix = gaussian_matrix(n, params.l, params.seed);
    let mut blocks = Vec::with_capacity(params.i + 1);
    let mut h = scaled_product(track(op.multiply(&g, &cfg)?), inv_scale, "H(0) = A G")?;
    for p in 1..=params.i {
        let f = scaled_product(track(op.multiply_transpose(&h, &cfg)?), inv_scale, "A^T H")?;
        let next = scaled_product(track(op.multiply(&f, &cfg)?), inv_scale, &format!("H({p})"))?;
        blocks.push(std::mem::replace(&mut h, next));
    }
    blocks.push(h);
    let h = DenseMatrix::hstack(&blocks)?;
    drop(blocks);
    phases.sample = lap(&mut clock);

    // Step 2
    let q = orthonormalize(&h)?;
    drop(h);
    phases.orthonormalize = lap(&mut clock);

    // Step 3
    let t = scaled_product(
        track(op.multiply_transpose(&q, &cfg)?),
        inv_scale,
        "T = A^T Q",
    )?;
    phases.project = lap(&mut clock);

    // Step 4
    let svd = thin_svd(&t)?;
    drop(t);
    phases.svd = lap(&mut clock);

    // Step 5, restricted to the k columns that survive step 6
    let w_k = svd.w.columns(0, params.k);
    let u = q.matmul(&w_k)?;
    phases.rotate = lap(&mut clock);

    // Step 6
    let v = svd.v.columns(0, params.k);
    let sigma = svd.sigma[..params.k]
        .iter()
        .map(|s| s / inv_scale)
        .collect();
    phases.truncate = lap(&mut clock);

    // the prescale passes (two per norm-estimate step) are reported too
    let mut counts = op.counters().since(&before);
    counts.high_water_words = peak;
    Ok((u, sigma, v, Diagnostics::from_counts(counts, phases)))
}

fn lap(clock: &mut Instant) -> f64 {
    let s = clock.elapsed().as_secs_f64();
    *clock = Instant::now();
    s
}

fn scaled_product(mut x: DenseMatrix, inv_scale: f64, what: &str) -> Result<DenseMatrix> {
    if inv_scale != 1.0 {
        x.scale(inv_scale);
    }
    if !x.is_finite() {
        return Err(Error::non_finite(what.to_string()));
    }
    Ok(x)
}

/// `sqrt((C k n)^{1/(2i+1)} + min(1, C/n)) σ_{k+1}`: the spectral error
/// that a run exceeds only with small probability (negligible for `C = 100`).
pub fn error_bound(k: usize, n: usize, i: usize, c: f64, sigma_kplus1: f64) -> Result<f64> {
    if k == 0 || n == 0 {
        return Err(Error::param("k and n must be positive"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param("C must be positive"));
    }
    if !(sigma_kplus1 >= 0.0 && sigma_kplus1.is_finite()) {
        return Err(Error::param("sigma_{k+1} must be finite and nonnegative"));
    }
    if (i + 2) * k > n {
        return Err(Error::param(format!(
            "(i+2) k = {} exceeds n = {n}",
            (i + 2) * k
        )));
    }
    let ckn = c * k as f64 * n as f64;
    let factor = (ckn.powf(1.0 / (2 * i + 1) as f64) + (c / n as f64).min(1.0)).sqrt();
    Ok(factor * sigma_kplus1)
}

/// Predicted cost of one run on an `m x n` matrix stored on disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    /// Point estimate of the floating-point operation count.
    pub flops: f64,
    /// Block reads over all passes.
    pub disk_seeks: u64,
    /// Matrix elements read: `2 (i+1) m n`.
    pub words_transferred: u64,
    pub passes: u64,
}

/// Cost model of a run with `ram_budget_words` words of RAM.
///
/// Every one of the `2 (i+1)` passes reads all `m n` entries once, in
/// blocks of as many rows as fit beside the `4 (i+1) l (m+n)` word reserve.
/// The flop count charges `2 l m n` for each of the `2i+1` products with
/// `l` columns, `2 (i+1) l m n` for `T = Aᵀ Q`, and `4 p² (m+n)` for the QR,
/// SVD and `Q W` with `p = (i+1) l`. The rank `k` does not enter beyond `l`.
pub fn predict_costs(
    m: u64,
    n: u64,
    _k: u64,
    l: u64,
    i: u64,
    ram_budget_words: u64,
) -> CostEstimate {
    let passes = 2 * (i + 1);
    let p = (i + 1) * l;
    let (mf, nf, lf, pf) = (m as f64, n as f64, l as f64, p as f64);
    let flops =
        2.0 * (2 * i + 1) as f64 * lf * mf * nf + 2.0 * pf * mf * nf + 4.0 * pf * pf * (mf + nf);
    let reserve = 4 * (i + 1) * l * (m + n);
    let block_rows = ram_budget_words
        .saturating_sub(reserve)
        .checked_div(n)
        .unwrap_or(1)
        .clamp(1, m.max(1));
    CostEstimate {
        flops,
        disk_seeks: passes * m.div_ceil(block_rows),
        words_transferred: passes * m * n,
        passes,
    }
}

/// `V_r V_rᵀ x` with `V_r` the leading `r` right singular vectors.
pub fn project_denoise(result: &PcaResult, x: &[f64], r: usize) -> Result<Vec<f64>> {
    if r > result.rank() {
        return Err(Error::param(format!(
            "projection rank {r} exceeds the computed rank {}",
            result.rank()
        )));
    }
    let n = result.v.rows();
    if x.len() != n {
        return Err(Error::dims(format!(
            "vector of length {} for n = {n}",
            x.len()
        )));
    }
    let mut coeffs = vec![0.0; r];
    for (row, &xi) in x.iter().enumerate() {
        for (c, &v) in coeffs.iter_mut().zip(&result.v.row(row)[..r]) {
            *c += v * xi;
        }
    }
    Ok((0..n)
        .map(|row| {
            result.v.row(row)[..r]
                .iter()
                .zip(&coeffs)
                .map(|(v, c)| v * c)
                .sum()
        })
        .collect())
}
