//! Householder QR with column pivoting.
//!
//! Unblocked variant of the LAPACK `geqp3` scheme: at every step the
//! remaining column of largest partial norm is moved to the front, a
//! reflector annihilates it below the diagonal, and the partial norms are
//! downdated (recomputed from scratch when cancellation makes the downdate
//! unreliable).

use super::{norm2, Matrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compact pivoted QR factorization `H P = Q R` of an `m x p` matrix, `m >= p`.
#[derive(Clone, Debug)]
pub struct PivotedQr<T> {
    m: usize,
    p: usize,
    // column-major; reflector vectors below the diagonal, R on and above it
    cols: Vec<Vec<T>>,
    tau: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> PivotedQr<T> {
    pub fn new(h: &Matrix<T>) -> Result<Self> {
        let (m, p) = h.shape();
        if m < p {
            return Err(Error::dims(format!(
                "QR needs at least as many rows as columns, got {m}x{p}"
            )));
        }
        if !h.is_finite() {
            return Err(Error::non_finite("pivoted QR input"));
        }
        let mut cols: Vec<Vec<T>> = (0..p).map(|c| h.column(c)).collect();
        let mut perm: Vec<usize> = (0..p).collect();
        let mut tau = vec![T::zero(); p];
        let mut vn1: Vec<T> = cols.iter().map(|c| norm2(c)).collect();
        let mut vn2 = vn1.clone();
        let tol = T::epsilon().sqrt();

        for j in 0..p {
            let pvt = (j..p)
                .max_by(|&a, &b| vn1[a].partial_cmp(&vn1[b]).unwrap())
                .unwrap_or(j);
            if pvt != j {
                cols.swap(j, pvt);
                perm.swap(j, pvt);
                vn1.swap(j, pvt);
                vn2.swap(j, pvt);
            }

            tau[j] = make_reflector(&mut cols[j][j..]);

            let (head, tail) = cols.split_at_mut(j + 1);
            let v = &head[j][j..];
            for (off, col) in tail.iter_mut().enumerate() {
                apply_reflector(v, tau[j], &mut col[j..]);

                let c = j + 1 + off;
                if vn1[c] != T::zero() {
                    let ratio = col[j].abs() / vn1[c];
                    let temp = (T::one() - ratio * ratio).max(T::zero());
                    let temp2 = temp * (vn1[c] / vn2[c]) * (vn1[c] / vn2[c]);
                    if temp2 <= tol {
                        vn1[c] = norm2(&col[j + 1..]);
                        vn2[c] = vn1[c];
                    } else {
                        vn1[c] *= temp.sqrt();
                    }
                }
            }
        }

        Ok(Self {
            m,
            p,
            cols,
            tau,
            perm,
        })
    }

    /// Column permutation: column `j` of `H P` is column `perm()[j]` of `H`.
    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// Upper-triangular `p x p` factor of `H P = Q R`.
    pub fn r(&self) -> Matrix<T> {
        let mut r = Matrix::zeros(self.p, self.p);
        for (j, col) in self.cols.iter().enumerate() {
            for i in 0..=j {
                r[(i, j)] = col[i];
            }
        }
        r
    }

    /// Thin `m x p` factor with orthonormal columns.
    pub fn q_thin(&self) -> Matrix<T> {
        let (m, p) = (self.m, self.p);
        let mut q: Vec<Vec<T>> = (0..p)
            .map(|c| {
                let mut e = vec![T::zero(); m];
                e[c] = T::one();
                e
            })
            .collect();
        for j in (0..p).rev() {
            let v = &self.cols[j][j..];
            for col in q.iter_mut().skip(j) {
                apply_reflector(v, self.tau[j], &mut col[j..]);
            }
        }
        let mut out = Matrix::zeros(m, p);
        for (c, col) in q.iter().enumerate() {
            out.set_column(c, col);
        }
        out
    }

    /// `R Pᵀ`, so that `H = Q (R Pᵀ)`.
    pub fn r_unpermuted(&self) -> Matrix<T> {
        let r = self.r();
        let mut out = Matrix::zeros(self.p, self.p);
        for (j, &orig) in self.perm.iter().enumerate() {
            for i in 0..self.p {
                out[(i, orig)] = r[(i, j)];
            }
        }
        out
    }
}

/// Turns `x` into `beta e1`; on return `x[1..]` holds the reflector tail
/// (implicit leading 1) and the reflector coefficient is returned.
fn make_reflector<T: Scalar>(x: &mut [T]) -> T {
    if x.len() <= 1 {
        return T::zero();
    }
    let alpha = x[0];
    let xnorm = norm2(&x[1..]);
    if xnorm == T::zero() {
        return T::zero();
    }
    let mut beta = alpha.hypot(xnorm);
    if alpha >= T::zero() {
        beta = -beta;
    }
    let tau = (beta - alpha) / beta;
    let scal = T::one() / (alpha - beta);
    for xi in x[1..].iter_mut() {
        *xi *= scal;
    }
    x[0] = beta;
    tau
}

/// Applies `I − tau v vᵀ` (with `v[0] = 1` implied) to `y`.
fn apply_reflector<T: Scalar>(v: &[T], tau: T, y: &mut [T]) {
    if tau == T::zero() {
        return;
    }
    let mut w = y[0];
    for (vi, yi) in v[1..].iter().zip(&y[1..]) {
        w += *vi * *yi;
    }
    w *= tau;
    y[0] -= w;
    for (vi, yi) in v[1..].iter().zip(y[1..].iter_mut()) {
        *yi -= w * *vi;
    }
}

/// Orthonormal basis `Q` (`m x p`) of the column space of `h` via pivoted
/// Householder QR.
///
/// If `h` is rank deficient the trailing columns of `Q` complete an
/// arbitrary orthonormal set; only the span matters to callers.
pub fn orthonormalize<T: Scalar>(h: &Matrix<T>) -> Result<Matrix<T>> {
    Ok(PivotedQr::new(h)?.q_thin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{gaussian_matrix, matmul};

    #[test]
    fn identity_columns_are_kept() {
        let h = Matrix::<f64>::identity(4).columns(0, 2);
        let q = orthonormalize(&h).unwrap();
        assert!(q.orthonormality_defect() < 1e-15);
        // same span: Q Qᵀ H = H
        let proj = matmul(&q, &q.t_matmul(&h).unwrap()).unwrap();
        assert!(proj.sub(&h).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn single_column_is_normalized() {
        let h = Matrix::<f64>::from_rows(&[&[1.0], &[1.0]]).unwrap();
        let q = orthonormalize(&h).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((q[(0, 0)].abs() - s).abs() < 1e-15);
        assert!((q[(1, 0)].abs() - s).abs() < 1e-15);
        assert_eq!(q[(0, 0)].signum(), q[(1, 0)].signum());
    }

    #[test]
    fn projection_residual_small() {
        let h: Matrix<f64> = gaussian_matrix(50, 8, 11);
        let q = orthonormalize(&h).unwrap();
        let proj = matmul(&q, &q.t_matmul(&h).unwrap()).unwrap();
        let rel = proj.sub(&h).unwrap().frobenius_norm() / h.frobenius_norm();
        assert!(rel <= 1e-12, "{rel}");
        assert!(q.orthonormality_defect() <= 1e-12);
    }

    #[test]
    fn factorization_reconstructs() {
        let h: Matrix<f64> = gaussian_matrix(30, 6, 5);
        let qr = PivotedQr::new(&h).unwrap();
        let back = matmul(&qr.q_thin(), &qr.r_unpermuted()).unwrap();
        assert!(back.sub(&h).unwrap().max_abs() < 1e-13);
        // pivoting makes |R_jj| nonincreasing
        let r = qr.r();
        for j in 1..6 {
            assert!(r[(j, j)].abs() <= r[(j - 1, j - 1)].abs() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rank_deficient_still_orthonormal() {
        let base: Matrix<f64> = gaussian_matrix(20, 2, 8);
        // third and fourth columns are copies, fifth is zero
        let h = Matrix::from_fn(20, 5, |r, c| match c {
            0 | 2 => base[(r, 0)],
            1 | 3 => base[(r, 1)],
            _ => 0.0,
        });
        let q = orthonormalize(&h).unwrap();
        assert!(q.orthonormality_defect() < 1e-13);
        let proj = matmul(&q, &q.t_matmul(&h).unwrap()).unwrap();
        assert!(proj.sub(&h).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn generic_over_f32() {
        let h: Matrix<f32> = gaussian_matrix(12, 3, 2);
        let q = orthonormalize(&h).unwrap();
        assert!(q.orthonormality_defect() < 1e-5);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            orthonormalize(&Matrix::<f64>::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
        let mut h = Matrix::<f64>::zeros(3, 1);
        h[(1, 0)] = f64::NAN;
        assert!(matches!(orthonormalize(&h), Err(Error::NonFinite { .. })));
    }
}
