//! Randomized power-method estimate of a spectral norm `‖D‖₂`, for `D`
//! available only through `x -> D x` and `y -> Dᵀ y`.
//!
//! Each of `k` probes starts from an independent Gaussian vector `ω` and
//! runs `j` steps of `x <- DᵀD x / ‖DᵀD x‖`. With `ν` the norm in the last
//! step, `sqrt(ν)` never exceeds `‖D‖₂` and falls below `‖D‖₂ / 2` with
//! probability at most [`failure_probability_bound`]. The probes are run
//! side by side as the columns of one block, so a step costs two passes
//! over the underlying matrix whatever `k` is.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dense::norm2;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::rpca::PcaResult;
use crate::source::{CounterSnapshot, LinearOperator, StreamConfig};
use crate::DenseMatrix;

/// Fresh starts tried for a probe whose iterate collapses to zero.
pub const MAX_RESTARTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormEstParams {
    /// Power steps per probe.
    pub j_iters: usize,
    /// Independent probes.
    pub k_probes: usize,
    pub seed: u64,
}

impl Default for NormEstParams {
    fn default() -> Self {
        Self {
            j_iters: 6,
            k_probes: 1,
            seed: 0,
        }
    }
}

impl NormEstParams {
    /// `j = 6` and one probe per retained component of `result`.
    pub fn for_result(result: &PcaResult, seed: u64) -> Self {
        Self {
            j_iters: 6,
            k_probes: result.rank().max(1),
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub j_iters: usize,
    pub k_probes: usize,
    /// Upper bound on `P(value < ‖D‖₂ / 2)`.
    pub failure_bound: f64,
}

/// `min(1, (2n / ((2j - 1) 16^j))^{k/2})`.
pub fn failure_probability_bound(n: usize, j: usize, k: usize) -> f64 {
    if j == 0 || k == 0 {
        return 1.0;
    }
    // in logs: 16^j overflows for large j
    let log_base = (2.0 * n as f64).ln() - ((2 * j - 1) as f64).ln() - j as f64 * 16f64.ln();
    (0.5 * k as f64 * log_base).exp().min(1.0)
}

/// Estimates `‖op‖₂` from Gaussian starts drawn from `params.seed`.
pub fn estimate_norm<O: LinearOperator + ?Sized>(
    op: &O,
    params: &NormEstParams,
    cfg: &StreamConfig,
) -> Result<NormEstimate> {
    check_params(params)?;
    let n = op.ncols();
    let start = gaussian_starts(n, params.k_probes, params.seed, 0);
    let mut est = estimate_norm_from(op, &start, params.j_iters, cfg)?;

    // probes whose iterate vanished get fresh starts from later substreams
    let mut failed: Vec<usize> = est.collapsed.clone();
    for attempt in 1..=MAX_RESTARTS {
        if failed.is_empty() {
            break;
        }
        let fresh = gaussian_starts(n, params.k_probes, params.seed, attempt);
        let retry = select_columns(&fresh, &failed);
        let again = estimate_norm_from(op, &retry, params.j_iters, cfg)?;
        for (slot, &probe) in failed.iter().enumerate() {
            est.per_probe[probe] = est.per_probe[probe].max(again.per_probe[slot]);
        }
        failed = again.collapsed.iter().map(|&slot| failed[slot]).collect();
    }
    Ok(NormEstimate {
        value: est.per_probe.iter().copied().fold(0.0, f64::max),
        j_iters: params.j_iters,
        k_probes: params.k_probes,
        failure_bound: failure_probability_bound(n, params.j_iters, params.k_probes),
    })
}

/// Per-probe outcome of [`estimate_norm_from`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRun {
    /// `sqrt(ν)` from each probe's last step, or from its last nonzero step
    /// when the iterate collapsed (0 if it collapsed at once).
    pub per_probe: Vec<f64>,
    /// Probes whose iterate became exactly zero.
    pub collapsed: Vec<usize>,
}

/// Runs `j` power steps from the columns of `start` (`n x k`), without
/// restarts. A zero start column counts as collapsed.
pub fn estimate_norm_from<O: LinearOperator + ?Sized>(
    op: &O,
    start: &DenseMatrix,
    j: usize,
    cfg: &StreamConfig,
) -> Result<ProbeRun> {
    let n = op.ncols();
    if start.rows() != n {
        return Err(Error::dims(format!(
            "start block has {} rows, operator has {n} columns",
            start.rows()
        )));
    }
    if j == 0 {
        return Err(Error::param("need at least one power step"));
    }
    let k = start.cols();
    let mut x = start.clone();
    let mut alive = vec![true; k];
    let mut per_probe = vec![0.0; k];
    for (c, live) in alive.iter_mut().enumerate() {
        *live = normalize_column(&mut x, c)? > 0.0;
    }
    for _ in 0..j {
        if !alive.iter().any(|&a| a) {
            break;
        }
        // D x and Dᵀ(D x) are normalized separately and ν = ‖D x‖ ‖Dᵀ ŷ‖ kept
        // factored, so a norm near the top of the range does not overflow
        let mut y = op.multiply(&x, cfg)?;
        let mut first = vec![0.0; k];
        for c in 0..k {
            if alive[c] {
                first[c] = normalize_column(&mut y, c)?;
            }
        }
        x = op.multiply_transpose(&y, cfg)?;
        for c in 0..k {
            if !alive[c] || first[c] == 0.0 {
                alive[c] = false;
                x.set_column(c, &vec![0.0; n]);
                continue;
            }
            let second = normalize_column(&mut x, c)?;
            if second > 0.0 {
                per_probe[c] = first[c].sqrt() * second.sqrt();
            } else {
                alive[c] = false;
            }
        }
    }
    let collapsed = (0..k).filter(|&c| !alive[c]).collect();
    Ok(ProbeRun {
        per_probe,
        collapsed,
    })
}

fn check_params(p: &NormEstParams) -> Result<()> {
    if p.j_iters == 0 || p.k_probes == 0 {
        return Err(Error::param("j and k must be at least 1"));
    }
    Ok(())
}

/// Scales column `c` to unit length and returns its former norm.
fn normalize_column(x: &mut DenseMatrix, c: usize) -> Result<f64> {
    let col = x.column(c);
    let nu = norm2(&col);
    if !nu.is_finite() {
        return Err(Error::non_finite("power iterate"));
    }
    if nu > 0.0 {
        let scaled: Vec<f64> = col.iter().map(|v| v / nu).collect();
        x.set_column(c, &scaled);
    }
    Ok(nu)
}

/// `n x k` Gaussian block; probe `q` of restart round `attempt` has its own
/// substream.
fn gaussian_starts(n: usize, k: usize, seed: u64, attempt: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(n, k);
    for q in 0..k {
        let mut rng = stream_rng(seed, (attempt * k + q) as u64);
        let col: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        out.set_column(q, &col);
    }
    out
}

fn select_columns(x: &DenseMatrix, idx: &[usize]) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.rows(), idx.len());
    for (dst, &src) in idx.iter().enumerate() {
        out.set_column(dst, &x.column(src));
    }
    out
}

/// `D = A - U diag(σ) Vᵀ` applied without forming it.
pub struct ResidualOperator<'a, S: ?Sized> {
    source: &'a S,
    u: &'a DenseMatrix,
    sigma: &'a [f64],
    v: &'a DenseMatrix,
}

impl<'a, S: LinearOperator + ?Sized> ResidualOperator<'a, S> {
    pub fn new(source: &'a S, result: &'a PcaResult) -> Result<Self> {
        Self::from_factors(source, &result.u, &result.sigma, &result.v)
    }

    /// Factors loaded separately, e.g. from files.
    pub fn from_factors(
        source: &'a S,
        u: &'a DenseMatrix,
        sigma: &'a [f64],
        v: &'a DenseMatrix,
    ) -> Result<Self> {
        let (m, n) = source.dims();
        let k = sigma.len();
        if u.shape() != (m, k) || v.shape() != (n, k) {
            return Err(Error::dims(format!(
                "factors U {}x{}, V {}x{} with {k} singular values do not fit a {m}x{n} matrix",
                u.rows(),
                u.cols(),
                v.rows(),
                v.cols()
            )));
        }
        Ok(Self {
            source,
            u,
            sigma,
            v,
        })
    }
}

/// `left (σ ∘ (rightᵀ x))`.
fn low_rank_apply(
    left: &DenseMatrix,
    sigma: &[f64],
    right: &DenseMatrix,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    let mut c = right.t_matmul(x)?;
    for (r, &s) in sigma.iter().enumerate() {
        for v in c.row_mut(r) {
            *v *= s;
        }
    }
    left.matmul(&c)
}

impl<S: LinearOperator + ?Sized> LinearOperator for ResidualOperator<'_, S> {
    fn nrows(&self) -> usize {
        self.source.nrows()
    }

    fn ncols(&self) -> usize {
        self.source.ncols()
    }

    fn multiply(&self, g: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        let ag = self.source.multiply(g, cfg)?;
        let low = low_rank_apply(self.u, self.sigma, self.v, g)?;
        ag.sub(&low)
    }

    fn multiply_transpose(&self, q: &DenseMatrix, cfg: &StreamConfig) -> Result<DenseMatrix> {
        let atq = self.source.multiply_transpose(q, cfg)?;
        let low = low_rank_apply(self.v, self.sigma, self.u, q)?;
        atq.sub(&low)
    }

    fn counters(&self) -> CounterSnapshot {
        self.source.counters()
    }
}

/// Estimates `‖A - U Σ Vᵀ‖₂` in `2 j` passes over `source`.
pub fn estimate_pca_error<S: LinearOperator + ?Sized>(
    source: &S,
    result: &PcaResult,
    params: &NormEstParams,
    cfg: &StreamConfig,
) -> Result<NormEstimate> {
    estimate_norm(&ResidualOperator::new(source, result)?, params, cfg)
}

/// Dense matrix as an operator, for small problems and tests.
pub struct DenseOperator<'a>(pub &'a DenseMatrix);

impl LinearOperator for DenseOperator<'_> {
    fn nrows(&self) -> usize {
        self.0.rows()
    }

    fn ncols(&self) -> usize {
        self.0.cols()
    }

    fn multiply(&self, g: &DenseMatrix, _: &StreamConfig) -> Result<DenseMatrix> {
        self.0.matmul(g)
    }

    fn multiply_transpose(&self, q: &DenseMatrix, _: &StreamConfig) -> Result<DenseMatrix> {
        self.0.t_matmul(q)
    }

    fn counters(&self) -> CounterSnapshot {
        CounterSnapshot::default()
    }
}
