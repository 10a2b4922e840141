//! Thin SVD of tall matrices: pivoted QR followed by one-sided (Hestenes)
//! Jacobi on the small triangular factor.

use super::{dot, norm2, Matrix, PivotedQr};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 80;

/// `T = V diag(sigma) Wᵀ` for an `n x p` matrix `T`, `n >= p`.
#[derive(Clone, Debug)]
pub struct ThinSvd<T> {
    /// `n x p`, orthonormal columns.
    pub v: Matrix<T>,
    /// Nonincreasing, nonnegative.
    pub sigma: Vec<T>,
    /// `p x p` orthogonal.
    pub w: Matrix<T>,
}

impl<T: Scalar> ThinSvd<T> {
    pub fn reconstruct(&self) -> Matrix<T> {
        let mut vs = self.v.clone();
        for r in 0..vs.rows() {
            for (x, &s) in vs.row_mut(r).iter_mut().zip(&self.sigma) {
                *x *= s;
            }
        }
        vs.matmul(&self.w.transpose()).expect("conforming factors")
    }
}

/// Full SVD `M = X diag(sigma) Wᵀ` of a square matrix by one-sided Jacobi.
///
/// Returns `(X, sigma, W)` with sigma sorted nonincreasing. Columns of `X`
/// belonging to zero singular values are completed to an orthonormal basis.
pub fn jacobi_svd<T: Scalar>(m: &Matrix<T>) -> Result<(Matrix<T>, Vec<T>, Matrix<T>)> {
    let (rows, p) = m.shape();
    if rows != p {
        return Err(Error::dims(format!(
            "jacobi_svd expects a square matrix, got {rows}x{p}"
        )));
    }
    if !m.is_finite() {
        return Err(Error::non_finite("SVD input"));
    }
    let mut b: Vec<Vec<T>> = (0..p).map(|c| m.column(c)).collect();
    let mut w: Vec<Vec<T>> = (0..p)
        .map(|c| {
            let mut e = vec![T::zero(); p];
            e[c] = T::one();
            e
        })
        .collect();
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..p {
            for j in i + 1..p {
                let alpha = dot(&b[i], &b[i]);
                let beta = dot(&b[j], &b[j]);
                let gamma = dot(&b[i], &b[j]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let two = T::one() + T::one();
                let zeta = (beta - alpha) / (two * gamma);
                let sign = if zeta >= T::zero() {
                    T::one()
                } else {
                    -T::one()
                };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate(&mut b, i, j, c, s);
                rotate(&mut w, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = b.iter().map(|c| norm2(c)).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let mut x_cols: Vec<Vec<T>> = Vec::with_capacity(p);
    let mut sigma = Vec::with_capacity(p);
    let mut w_out = Matrix::zeros(p, p);
    let mut pending = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        w_out.set_column(dst, &w[src]);
        if s > T::zero() {
            x_cols.push(b[src].iter().map(|&x| x / s).collect());
        } else {
            x_cols.push(vec![T::zero(); p]);
            pending.push(dst);
        }
    }
    complete_basis(&mut x_cols, &pending);

    let mut x = Matrix::zeros(p, p);
    for (c, col) in x_cols.iter().enumerate() {
        x.set_column(c, col);
    }
    Ok((x, sigma, w_out))
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], i: usize, j: usize, c: T, s: T) {
    let (lo, hi) = cols.split_at_mut(j);
    for (a, b) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
        let ai = *a;
        let bj = *b;
        *a = c * ai - s * bj;
        *b = s * ai + c * bj;
    }
}

/// Fills the columns listed in `pending` with unit vectors orthogonal to
/// every other column, by Gram–Schmidt on the standard basis.
fn complete_basis<T: Scalar>(cols: &mut [Vec<T>], pending: &[usize]) {
    if pending.is_empty() {
        return;
    }
    let p = cols.len();
    let half = T::from_f64_lossy(0.5);
    let mut candidate = 0;
    for &slot in pending {
        loop {
            assert!(candidate < p, "standard basis exhausted during completion");
            let mut e = vec![T::zero(); p];
            e[candidate] = T::one();
            candidate += 1;
            // two rounds of classical Gram–Schmidt
            for _ in 0..2 {
                for (k, other) in cols.iter().enumerate() {
                    if k == slot || other.iter().all(|&x| x == T::zero()) {
                        continue;
                    }
                    let proj = dot(&e, other);
                    for (ei, &oi) in e.iter_mut().zip(other) {
                        *ei -= proj * oi;
                    }
                }
            }
            let nrm = norm2(&e);
            if nrm > half {
                cols[slot] = e.iter().map(|&x| x / nrm).collect();
                break;
            }
        }
    }
}

/// Thin SVD of an `n x p` matrix (`n >= p`).
///
/// Computes `T P = Q R` by pivoted QR, takes the Jacobi SVD
/// `R Pᵀ = X Σ Wᵀ`, and returns `V = Q X`.
pub fn thin_svd<T: Scalar>(t: &Matrix<T>) -> Result<ThinSvd<T>> {
    let (n, p) = t.shape();
    if n < p {
        return Err(Error::dims(format!(
            "thin SVD needs at least as many rows as columns, got {n}x{p}"
        )));
    }
    let qr = PivotedQr::new(t)?;
    let (x, sigma, w) = jacobi_svd(&qr.r_unpermuted())?;
    let v = qr.q_thin().matmul(&x)?;
    Ok(ThinSvd { v, sigma, w })
}
