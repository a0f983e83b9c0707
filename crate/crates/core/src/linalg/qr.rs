//! Householder QR least squares for `m >= n` systems.

use super::{dot, LinalgError, Matrix};
use crate::scalar::Real;

/// Solves `min_x ||A x - b||_2` for a full-column-rank `A` with `m >= n`.
pub fn lstsq<T: Real>(a: &Matrix<T>, b: &[T]) -> Result<Vec<T>, LinalgError> {
    let (m, n) = (a.nrows(), a.ncols());
    if m < n {
        return Err(LinalgError::DimensionMismatch {
            context: format!("lstsq needs at least as many rows as columns, got {m}x{n}"),
        });
    }
    assert_eq!(b.len(), m, "lstsq rhs dimension mismatch");
    let mut r = a.clone();
    let mut y = b.to_vec();
    let scale = (0..n).map(|j| dot(r.col(j), r.col(j)).sqrt()).fold(T::zero(), T::max);
    let pivot_tol = scale * T::epsilon() * T::of(64.0);
    // Householder vectors overwrite the strict lower part of each column.
    let mut betas = vec![T::zero(); n];
    for j in 0..n {
        let alpha = house_generate(r.col_mut(j), j, &mut betas[j]);
        if alpha.abs() <= pivot_tol {
            return Err(LinalgError::RankDeficient { column: j });
        }
        let (head, tail) = r.data_mut().split_at_mut((j + 1) * m);
        let v = &head[j * m..(j + 1) * m];
        for c in tail.chunks_mut(m) {
            house_apply(v, betas[j], j, c);
        }
        house_apply(v, betas[j], j, &mut y);
        r.col_mut(j)[j] = alpha;
    }
    // back substitution on R
    let mut x = vec![T::zero(); n];
    for j in (0..n).rev() {
        let mut s = y[j];
        for p in j + 1..n {
            s = s - r[(j, p)] * x[p];
        }
        x[j] = s / r[(j, j)];
    }
    Ok(x)
}

/// Builds the Householder vector in `col[j..]` (v_j set to 1 implicitly via
/// storing the tail), returns the resulting diagonal value of `R`.
fn house_generate<T: Real>(col: &mut [T], j: usize, beta: &mut T) -> T {
    let tail_sq = dot(&col[j + 1..], &col[j + 1..]);
    let x0 = col[j];
    let norm = (x0 * x0 + tail_sq).sqrt();
    if norm == T::zero() {
        *beta = T::zero();
        return T::zero();
    }
    let alpha = if x0 >= T::zero() { -norm } else { norm };
    let v0 = x0 - alpha;
    // v = (v0, tail); beta = 2 / v.v
    let vv = v0 * v0 + tail_sq;
    if vv == T::zero() {
        *beta = T::zero();
        return alpha;
    }
    *beta = (T::one() + T::one()) / vv;
    col[j] = v0;
    alpha
}

/// Applies `(I - beta v v^T)` to `target` for the reflector stored at offset `j`.
fn house_apply<T: Real>(v: &[T], beta: T, j: usize, target: &mut [T]) {
    if beta == T::zero() {
        return;
    }
    let s = dot(&v[j..], &target[j..]) * beta;
    for (t, &vi) in target[j..].iter_mut().zip(&v[j..]) {
        *t = *t - s * vi;
    }
}
