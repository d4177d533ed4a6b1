//! Finite-difference stencils, Richardson extrapolation and deterministic summation.

use crate::error::{CalcError, Result};
use crate::scalar::{lit, Real};

/// First derivative at 0 of `f` by the fourth-order central stencil.
///
/// This is one Richardson level applied to the two-point central difference.
pub fn diff1<T: Real, F: FnMut(T) -> Result<T>>(mut f: F, h: T) -> Result<T> {
    let two = lit::<T>(2.0);
    let fm2 = f(-two * h)?;
    let fm1 = f(-h)?;
    let fp1 = f(h)?;
    let fp2 = f(two * h)?;
    Ok((fm2 - lit::<T>(8.0) * fm1 + lit::<T>(8.0) * fp1 - fp2) / (lit::<T>(12.0) * h))
}

/// First derivative at 0 by the plain two-point central difference.
pub fn central1<T: Real, F: FnMut(T) -> Result<T>>(mut f: F, h: T) -> Result<T> {
    let fp = f(h)?;
    let fm = f(-h)?;
    Ok((fp - fm) / (lit::<T>(2.0) * h))
}

/// Second derivative at 0 by the five-point stencil.
pub fn diff2<T: Real, F: FnMut(T) -> Result<T>>(mut f: F, h: T) -> Result<T> {
    let two = lit::<T>(2.0);
    let sixteen = lit::<T>(16.0);
    let fm2 = f(-two * h)?;
    let fm1 = f(-h)?;
    let f0 = f(T::zero())?;
    let fp1 = f(h)?;
    let fp2 = f(two * h)?;
    Ok((-fm2 + sixteen * fm1 - lit::<T>(30.0) * f0 + sixteen * fp1 - fp2) / (lit::<T>(12.0) * h * h))
}

/// Richardson combination of estimates at steps `h` and `h/2` for an error of order `order`.
pub fn richardson<T: Real>(coarse: T, fine: T, order: i32) -> T {
    let r = lit::<T>(2.0).powi(order);
    (r * fine - coarse) / (r - T::one())
}

/// Pairwise (cascade) summation in index order; the result depends only on the input order.
pub fn pairwise_sum<T: Real>(v: &[T]) -> T {
    const LEAF: usize = 16;
    if v.len() <= LEAF {
        return v.iter().fold(T::zero(), |a, &b| a + b);
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Rejects non-finite values with a numeric-failure error naming the quantity.
pub fn finite<T: Real>(v: T, what: &str) -> Result<T> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CalcError::NumericFailure(format!("non-finite value for {what}")))
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope<T: Real>(x: &[T], y: &[T]) -> T {
    let n = T::from_usize(x.len()).unwrap();
    let mx = x.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = y.iter().fold(T::zero(), |a, &b| a + b) / n;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        sxy = sxy + (a - mx) * (b - my);
        sxx = sxx + (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Inverse of a dense row-major `n x n` matrix by Gauss-Jordan elimination with partial pivoting.
pub fn mat_inverse<T: Real>(n: usize, a: &[T]) -> Result<Vec<T>> {
    let mut m = a.to_vec();
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = T::one();
    }
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col] == T::zero() {
            return Err(CalcError::NumericFailure("singular matrix".into()));
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
                inv.swap(col * n + k, piv * n + k);
            }
        }
        let d = m[col * n + col];
        for k in 0..n {
            m[col * n + k] = m[col * n + k] / d;
            inv[col * n + k] = inv[col * n + k] / d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r * n + col];
                if f != T::zero() {
                    for k in 0..n {
                        m[r * n + k] = m[r * n + k] - f * m[col * n + k];
                        inv[r * n + k] = inv[r * n + k] - f * inv[col * n + k];
                    }
                }
            }
        }
    }
    Ok(inv)
}

/// Determinant of a dense row-major `n x n` matrix.
pub fn mat_det<T: Real>(n: usize, a: &[T]) -> T {
    let mut m = a.to_vec();
    let mut det = T::one();
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col] == T::zero() {
            return T::zero();
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            det = -det;
        }
        let d = m[col * n + col];
        det = det * d;
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            for k in col..n {
                m[r * n + k] = m[r * n + k] - f * m[col * n + k];
            }
        }
    }
    det
}

/// Product of dense row-major matrices `a (n x k)` and `b (k x m)`.
pub fn mat_mul<T: Real>(n: usize, k: usize, m: usize, a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n * m];
    for i in 0..n {
        for l in 0..k {
            let x = a[i * k + l];
            if x != T::zero() {
                for j in 0..m {
                    out[i * m + j] = out[i * m + j] + x * b[l * m + j];
                }
            }
        }
    }
    out
}
