//! Synthetic matrices with analytically known spectra, and the noisy
//! ellipsoid simulation, all generated row by row on demand.
//!
//! The spectrum examples are `A = E S F` with `E` (`m x m`) and `F`
//! (`n x n`) unitary DCT-II matrices and `S` an `m x n` diagonal holding the
//! prescribed singular values. Row `r` of `A` is
//! `Σ_j E[r, j] S[j] F[j, :]`, i.e. the transpose DCT applied to the vector
//! `y_j = E[r, j] S[j]`, so each row costs one length-`n` transform.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dct::Dct2;
use crate::error::{Error, Result};
use crate::rng::{mix_seed, stream_rng};
use crate::source::{OnTheFly, RowGenerator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumKind {
    /// Ten-fold decay every 19/4 indices down to `1e-4` at index 20, then a
    /// slow `(j − 20)^{-1/10}` tail.
    Example1,
    /// Plateaus 1, 0.67, 0.34, 0.01 of three values each, then a linear
    /// ramp from 0.01 down to 0.
    Example2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub kind: SpectrumKind,
    pub m: usize,
    pub n: usize,
}

impl SpectrumSpec {
    pub fn new(kind: SpectrumKind, m: usize, n: usize) -> Self {
        Self { kind, m, n }
    }

    /// All `n` singular values, nonincreasing.
    pub fn singular_values(&self) -> Vec<f64> {
        (1..=self.n)
            .map(|j| sigma_at(self.kind, self.n, j))
            .collect()
    }
}

fn sigma_at(kind: SpectrumKind, n: usize, j: usize) -> f64 {
    match kind {
        SpectrumKind::Example1 => {
            if j <= 20 {
                10f64.powf(-4.0 * (j as f64 - 1.0) / 19.0)
            } else {
                1e-4 / ((j - 20) as f64).powf(0.1)
            }
        }
        SpectrumKind::Example2 => match j {
            1..=3 => 1.00,
            4..=6 => 0.67,
            7..=9 => 0.34,
            10..=12 => 0.01,
            // the ramp is 0.01 at j = 13 for every n; n = 13 has no ramp
            _ if n <= 13 => 0.01,
            _ => 0.01 * (n - j) as f64 / (n - 13) as f64,
        },
    }
}

/// `S[j, j]` for the 1-based index `j`; `σ_{k+1}` is the best possible
/// rank-`k` spectral error.
pub fn known_sigma(spec: &SpectrumSpec, j: usize) -> Result<f64> {
    if j == 0 || j > spec.n {
        return Err(Error::param(format!(
            "singular value index {j} outside 1..={}",
            spec.n
        )));
    }
    Ok(sigma_at(spec.kind, spec.n, j))
}

/// Row generator for `A = E S F`.
pub struct SpectrumGenerator {
    spec: SpectrumSpec,
    sigma: Vec<f64>,
    // cos(π t / (2m)) for t in 0..4m
    cos_table: Vec<f64>,
    row_weight0: f64,
    row_weight: f64,
    dct: Dct2<f64>,
}

impl SpectrumGenerator {
    pub fn new(spec: SpectrumSpec) -> Result<Self> {
        let SpectrumSpec { m, n, .. } = spec;
        if n == 0 || m < n {
            return Err(Error::param(format!(
                "spectrum examples need m >= n >= 1, got {m}x{n}; transpose wider matrices"
            )));
        }
        let period = 4 * m;
        let cos_table = (0..period)
            .map(|t| (PI * t as f64 / (2.0 * m as f64)).cos())
            .collect();
        Ok(Self {
            spec,
            sigma: spec.singular_values(),
            cos_table,
            row_weight0: (1.0 / m as f64).sqrt(),
            row_weight: (2.0 / m as f64).sqrt(),
            dct: Dct2::new(n),
        })
    }

    pub fn spec(&self) -> &SpectrumSpec {
        &self.spec
    }

    /// `E[r, j]`: entry `(r, j)` of the unitary `m x m` DCT-II.
    #[inline]
    fn e_entry(&self, r: usize, j: usize) -> f64 {
        let m = self.spec.m;
        let c = if r == 0 {
            self.row_weight0
        } else {
            self.row_weight
        };
        // angle π (2j+1) r / (2m), reduced exactly modulo 2π
        let t = ((2 * j + 1) as u128 * r as u128 % (4 * m) as u128) as usize;
        c * self.cos_table[t]
    }
}

impl RowGenerator for SpectrumGenerator {
    fn nrows(&self) -> usize {
        self.spec.m
    }

    fn ncols(&self) -> usize {
        self.spec.n
    }

    fn generate(&self, row: usize, out: &mut [f64]) {
        for (j, (y, &s)) in out.iter_mut().zip(&self.sigma).enumerate() {
            *y = if s == 0.0 {
                0.0
            } else {
                self.e_entry(row, j) * s
            };
        }
        let mut scratch = vec![Complex::new(0.0, 0.0); self.spec.n];
        self.dct.apply_transpose_with_scratch(out, &mut scratch);
    }
}

/// On-the-fly source for one of the spectrum examples.
pub fn make_spectrum_source(spec: SpectrumSpec) -> Result<OnTheFly<SpectrumGenerator>> {
    OnTheFly::new(SpectrumGenerator::new(spec)?)
}

/// Rows `α w1 + β w2 + γ w3 + δ`: a point drawn inside an ellipsoid spanned
/// by three fixed orthonormal directions, plus isotropic Gaussian noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub m: usize,
    pub n: usize,
    pub axes: [f64; 3],
    pub noise_sd: f64,
    pub master_seed: u64,
}

impl SimulationSpec {
    /// `n = 1000`, axes `(1.5, 1, 0.5)`, noise standard deviation 0.1.
    pub fn standard(m: usize, master_seed: u64) -> Self {
        Self {
            m,
            n: 1000,
            axes: [1.5, 1.0, 0.5],
            noise_sd: 0.1,
            master_seed,
        }
    }
}

// stream index reserved for the direction vectors; rows use 0..m
const DIRECTION_STREAM: u64 = u64::MAX;

pub struct SimulationGenerator {
    spec: SimulationSpec,
    directions: [Vec<f64>; 3],
    noise: Option<Normal<f64>>,
}

impl SimulationGenerator {
    pub fn new(spec: SimulationSpec) -> Result<Self> {
        if spec.m == 0 || spec.n < 3 {
            return Err(Error::param(format!(
                "simulation needs m >= 1 and n >= 3, got {}x{}",
                spec.m, spec.n
            )));
        }
        if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
            return Err(Error::param(
                "noise standard deviation must be finite and >= 0",
            ));
        }
        let noise = if spec.noise_sd > 0.0 {
            Some(Normal::new(0.0, spec.noise_sd).map_err(|e| Error::param(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            directions: gram_schmidt_directions(spec.n, spec.master_seed),
            spec,
            noise,
        })
    }

    /// The orthonormal directions `w1, w2, w3`.
    pub fn directions(&self) -> &[Vec<f64>; 3] {
        &self.directions
    }

    pub fn spec(&self) -> &SimulationSpec {
        &self.spec
    }
}

/// Gram–Schmidt on three Gaussian vectors drawn from a dedicated stream.
fn gram_schmidt_directions(n: usize, seed: u64) -> [Vec<f64>; 3] {
    let mut rng = stream_rng(mix_seed(seed, 0x5157), DIRECTION_STREAM);
    let mut draw = || -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let mut w = [draw(), draw(), draw()];
    for i in 0..3 {
        for j in 0..i {
            let (done, rest) = w.split_at_mut(i);
            let proj: f64 = rest[0].iter().zip(&done[j]).map(|(a, b)| a * b).sum();
            rest[0]
                .iter_mut()
                .zip(&done[j])
                .for_each(|(a, b)| *a -= proj * b);
        }
        let nrm = w[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        w[i].iter_mut().for_each(|x| *x /= nrm);
    }
    w
}

impl RowGenerator for SimulationGenerator {
    fn nrows(&self) -> usize {
        self.spec.m
    }

    fn ncols(&self) -> usize {
        self.spec.n
    }

    fn generate(&self, row: usize, out: &mut [f64]) {
        let mut rng = stream_rng(self.spec.master_seed, row as u64);
        let radius: f64 = rng.random();
        let phi = 2.0 * PI * rng.random::<f64>();
        let theta = PI * rng.random::<f64>();
        let [a, b, c] = self.spec.axes;
        let alpha = a * radius * phi.cos() * theta.sin();
        let beta = b * radius * phi.sin() * theta.sin();
        let gamma = c * radius * theta.cos();
        let [w1, w2, w3] = &self.directions;
        for (j, x) in out.iter_mut().enumerate() {
            *x = alpha * w1[j] + beta * w2[j] + gamma * w3[j];
        }
        if let Some(noise) = &self.noise {
            for x in out.iter_mut() {
                *x += noise.sample(&mut rng);
            }
        }
    }
}

pub fn make_simulation_source(spec: SimulationSpec) -> Result<OnTheFly<SimulationGenerator>> {
    OnTheFly::new(SimulationGenerator::new(spec)?)
}
