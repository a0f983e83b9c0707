//! Blocked Cholesky factorization for symmetric positive definite systems.
//!
//! Right-looking, column-major, with the trailing update parallelized over
//! columns. Only the lower triangle is referenced and produced.

use rayon::prelude::*;

use super::{axpy_neg, LinalgError, Matrix};
use crate::scalar::Real;

const BLOCK: usize = 128;
/// Trailing updates below this size are not worth a rayon dispatch.
const PAR_THRESHOLD: usize = 96;

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factors `a` (its lower triangle) in place. Fails on a nonpositive pivot.
    pub fn factor(mut a: Matrix<T>) -> Result<Self, LinalgError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "Cholesky requires a square matrix");
        let mut k = 0;
        while k < n {
            let kb = BLOCK.min(n - k);
            factor_diagonal_block(&mut a, k, kb)?;
            panel_solve(&mut a, k, kb);
            trailing_update(&mut a, k, kb);
            k += kb;
        }
        Ok(Self { l: a })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solves `A x = b` via forward and backward substitution.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "Cholesky solve dimension mismatch");
        let mut x = b.to_vec();
        // L z = b
        for j in 0..n {
            let col = self.l.col(j);
            x[j] = x[j] / col[j];
            let xj = x[j];
            for i in j + 1..n {
                x[i] = x[i] - col[i] * xj;
            }
        }
        // L^T x = z
        for j in (0..n).rev() {
            let col = self.l.col(j);
            let mut s = x[j];
            for i in j + 1..n {
                s = s - col[i] * x[i];
            }
            x[j] = s / col[j];
        }
        x
    }
}

fn factor_diagonal_block<T: Real>(a: &mut Matrix<T>, k: usize, kb: usize) -> Result<(), LinalgError> {
    let n = a.nrows();
    for j in k..k + kb {
        // a[j, j] -= sum_{p=k..j} a[j, p]^2
        let mut d = a[(j, j)];
        for p in k..j {
            let l = a[(j, p)];
            d = d - l * l;
        }
        if d <= T::zero() || !d.is_finite() {
            return Err(LinalgError::NotPositiveDefinite { index: j });
        }
        let djj = d.sqrt();
        a[(j, j)] = djj;
        let inv = T::one() / djj;
        // rows j+1 .. k+kb of column j within the diagonal block
        for p in k..j {
            let ljp = a[(j, p)];
            let (head, tail) = a.data_mut().split_at_mut(j * n);
            let colp = &head[p * n..p * n + n];
            let colj = &mut tail[..n];
            axpy_neg(&mut colj[j + 1..k + kb], ljp, &colp[j + 1..k + kb]);
        }
        let colj = a.col_mut(j);
        for v in &mut colj[j + 1..k + kb] {
            *v = *v * inv;
        }
    }
    Ok(())
}

/// Computes `L21 = A21 * L11^{-T}` for rows `k+kb..n`.
fn panel_solve<T: Real>(a: &mut Matrix<T>, k: usize, kb: usize) {
    let n = a.nrows();
    let row0 = k + kb;
    if row0 == n {
        return;
    }
    for j in k..k + kb {
        let inv = T::one() / a[(j, j)];
        for p in k..j {
            let ljp = a[(j, p)];
            let (head, tail) = a.data_mut().split_at_mut(j * n);
            let colp = &head[p * n..p * n + n];
            let colj = &mut tail[..n];
            axpy_neg(&mut colj[row0..], ljp, &colp[row0..]);
        }
        let colj = a.col_mut(j);
        for v in &mut colj[row0..] {
            *v = *v * inv;
        }
    }
}

/// `A22 -= L21 L21^T`, lower triangle only, parallel over trailing columns.
fn trailing_update<T: Real>(a: &mut Matrix<T>, k: usize, kb: usize) {
    let n = a.nrows();
    let row0 = k + kb;
    if row0 == n {
        return;
    }
    let (head, tail) = a.data_mut().split_at_mut(row0 * n);
    let panel: Vec<&[T]> = (k..k + kb).map(|p| &head[p * n..(p + 1) * n]).collect();
    let update_col = |(c_off, col): (usize, &mut [T])| {
        let c = row0 + c_off;
        for colp in &panel {
            let lcp = colp[c];
            if lcp == T::zero() {
                continue;
            }
            axpy_neg(&mut col[c..], lcp, &colp[c..]);
        }
    };
    if n - row0 >= PAR_THRESHOLD {
        tail.par_chunks_mut(n).enumerate().for_each(update_col);
    } else {
        tail.chunks_mut(n).enumerate().for_each(update_col);
    }
}
