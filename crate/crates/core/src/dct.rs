//! Orthonormal (unitary) DCT-II and its transpose, via one complex FFT of
//! the same length (Makhoul's even/odd reordering).
//!
//! With `c_0 = sqrt(1/n)` and `c_k = sqrt(2/n)` otherwise, the forward
//! transform is `X_k = c_k Σ_t x_t cos(π (2t+1) k / (2n))`. The matrix is
//! orthogonal, so the inverse is the transpose (an orthonormal DCT-III).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Scalar;

/// Planned unitary DCT-II of a fixed length.
#[derive(Clone)]
pub struct Dct2<T: Scalar> {
    n: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    // e^{-iπk/(2n)}
    twiddles: Vec<Complex<T>>,
    // c_k
    weights: Vec<T>,
}

impl<T: Scalar> std::fmt::Debug for Dct2<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct2").field("n", &self.n).finish()
    }
}

impl<T: Scalar> Dct2<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "DCT length must be positive");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let nf = n as f64;
        let twiddles = (0..n)
            .map(|k| {
                let ang = -std::f64::consts::PI * k as f64 / (2.0 * nf);
                Complex::new(T::from_f64_lossy(ang.cos()), T::from_f64_lossy(ang.sin()))
            })
            .collect();
        let weights = (0..n)
            .map(|k| {
                T::from_f64_lossy(if k == 0 {
                    (1.0 / nf).sqrt()
                } else {
                    (2.0 / nf).sqrt()
                })
            })
            .collect();
        Self {
            n,
            forward,
            inverse,
            twiddles,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place unitary DCT-II.
    pub fn apply(&self, x: &mut [T]) {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n];
        self.apply_with_scratch(x, &mut buf);
    }

    /// In-place transpose (= inverse) of the unitary DCT-II.
    pub fn apply_transpose(&self, x: &mut [T]) {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.n];
        self.apply_transpose_with_scratch(x, &mut buf);
    }

    pub fn apply_with_scratch(&self, x: &mut [T], buf: &mut [Complex<T>]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(buf.len(), n);
        // v_t = x_{2t}, v_{n-1-t} = x_{2t+1}
        for t in 0..n.div_ceil(2) {
            buf[t] = Complex::new(x[2 * t], T::zero());
        }
        for t in 0..n / 2 {
            buf[n - 1 - t] = Complex::new(x[2 * t + 1], T::zero());
        }
        self.forward.process(buf);
        for k in 0..n {
            x[k] = (buf[k] * self.twiddles[k]).re * self.weights[k];
        }
    }

    pub fn apply_transpose_with_scratch(&self, x: &mut [T], buf: &mut [Complex<T>]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(buf.len(), n);
        // Undo the weights to get the plain cosine sums Y_k, then rebuild the
        // FFT of the reordered signal: V_k = e^{iπk/(2n)} (Y_k − i Y_{n−k}).
        for k in 0..n {
            let yk = x[k] / self.weights[k];
            let ynk = if k == 0 {
                T::zero()
            } else {
                x[n - k] / self.weights[n - k]
            };
            buf[k] = Complex::new(yk, -ynk) * self.twiddles[k].conj();
        }
        self.inverse.process(buf);
        let scale = T::one() / T::from_usize(n).unwrap();
        for t in 0..n.div_ceil(2) {
            x[2 * t] = buf[t].re * scale;
        }
        for t in 0..n / 2 {
            x[2 * t + 1] = buf[n - 1 - t].re * scale;
        }
    }
}

/// Unitary DCT-II of `x`, returned as a new vector.
pub fn dct2_apply<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut out = x.to_vec();
    Dct2::new(x.len()).apply(&mut out);
    out
}

/// Transpose (inverse) of [`dct2_apply`].
pub fn dct2_apply_transpose<T: Scalar>(x: &[T]) -> Vec<T> {
    let mut out = x.to_vec();
    Dct2::new(x.len()).apply_transpose(&mut out);
    out
}
