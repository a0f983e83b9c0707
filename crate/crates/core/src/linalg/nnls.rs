//! Nonnegative least squares by the Lawson-Hanson active-set method.
//!
//! Works on the normal equations with an incrementally updated Cholesky
//! factor of the passive-set Gram block, which keeps the cost near
//! `O(m n^2)` even when most columns end up in the passive set. The
//! reported residual is always recomputed directly from the original
//! system, never from the (cancellation-prone) normal equations.

use rayon::prelude::*;

use super::{dot, norm2, Matrix};
use crate::scalar::Real;

#[derive(Debug, Clone)]
pub struct NnlsOutput<T> {
    /// Componentwise nonnegative solution.
    pub x: Vec<T>,
    /// `||A x - b||_2`, evaluated against the original system.
    pub residual_norm: T,
    /// Outer (column-insertion) iterations used.
    pub iterations: usize,
}

/// Solves `min ||A x - b||_2` subject to `x >= 0`.
pub fn nnls<T: Real>(a: &Matrix<T>, b: &[T]) -> NnlsOutput<T> {
    let (m, n) = (a.nrows(), a.ncols());
    assert_eq!(b.len(), m, "nnls rhs dimension mismatch");

    // Gram matrix and correlation vector.
    let mut gram = Matrix::zeros(n, n);
    {
        let cols: Vec<&[T]> = (0..n).map(|j| a.col(j)).collect();
        let entries: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|j| (0..=j).map(|i| dot(cols[i], cols[j])).collect())
            .collect();
        for (j, col) in entries.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                gram[(i, j)] = v;
                gram[(j, i)] = v;
            }
        }
    }
    let h = a.tr_matvec(b);

    let mut x = vec![T::zero(); n];
    let mut passive: Vec<usize> = Vec::new();
    let mut in_passive = vec![false; n];
    let mut rejected = vec![false; n];
    // Upper-triangular factor of gram[passive, passive], grown column by column.
    let mut r = Matrix::zeros(n, n);

    let h_scale = h.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let dual_tol = T::epsilon() * T::of(128.0) * h_scale.max(T::min_positive_value());

    let max_outer = 5 * n + 10;
    let mut iterations = 0;
    let mut w = h.clone();

    while passive.len() < n && iterations < max_outer {
        // Most positive dual among free, non-rejected columns.
        let mut best: Option<(usize, T)> = None;
        for j in 0..n {
            if in_passive[j] || rejected[j] {
                continue;
            }
            if w[j] > dual_tol && best.map_or(true, |(_, bw)| w[j] > bw) {
                best = Some((j, w[j]));
            }
        }
        let Some((t, _)) = best else { break };
        iterations += 1;

        if !grow_factor(&mut r, &gram, &passive, t) {
            // Numerically dependent column; never consider it again.
            rejected[t] = true;
            continue;
        }
        passive.push(t);
        in_passive[t] = true;

        // Inner loop: restore feasibility of the passive-set solution.
        loop {
            let z = solve_passive(&r, &gram, &h, &passive);
            if z.iter().all(|&v| v > T::zero()) {
                for (idx, &j) in passive.iter().enumerate() {
                    x[j] = z[idx];
                }
                break;
            }
            // Step toward z until the first passive coordinate hits zero.
            let mut alpha = T::one();
            for (idx, &j) in passive.iter().enumerate() {
                if z[idx] <= T::zero() {
                    let denom = x[j] - z[idx];
                    if denom > T::zero() {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = T::zero();
                    }
                }
            }
            for (idx, &j) in passive.iter().enumerate() {
                x[j] = x[j] + alpha * (z[idx] - x[j]);
            }
            let drop_tol = T::epsilon() * T::of(16.0);
            let mut kept: Vec<usize> = Vec::with_capacity(passive.len());
            for (idx, &j) in passive.iter().enumerate() {
                let hit_zero = z[idx] <= T::zero() && x[j] <= drop_tol;
                if hit_zero {
                    x[j] = T::zero();
                    in_passive[j] = false;
                } else {
                    kept.push(j);
                }
            }
            if kept.len() == passive.len() {
                // No progress possible; accept the clipped iterate.
                for (idx, &j) in passive.iter().enumerate() {
                    x[j] = z[idx].max(T::zero());
                }
                break;
            }
            passive = kept;
            rebuild_factor(&mut r, &gram, &passive);
        }

        // Dual refresh: w = h - G x restricted to free columns.
        for j in 0..n {
            if in_passive[j] {
                continue;
            }
            let mut s = h[j];
            let col = gram.col(j);
            for &p in &passive {
                s = s - col[p] * x[p];
            }
            w[j] = s;
        }
    }

    let mut residual = b.to_vec();
    for (j, &xj) in x.iter().enumerate() {
        if xj != T::zero() {
            for (ri, &aij) in residual.iter_mut().zip(a.col(j)) {
                *ri = *ri - aij * xj;
            }
        }
    }
    NnlsOutput { x, residual_norm: norm2(&residual), iterations }
}

/// Appends column `t` to the factor of `gram[passive, passive]`.
/// Returns false when the new pivot is not safely positive.
fn grow_factor<T: Real>(r: &mut Matrix<T>, gram: &Matrix<T>, passive: &[usize], t: usize) -> bool {
    let p = passive.len();
    // Solve R^T rho = gram[passive, t].
    let mut rho = vec![T::zero(); p];
    for i in 0..p {
        let mut s = gram[(passive[i], t)];
        for k in 0..i {
            s = s - r[(k, i)] * rho[k];
        }
        rho[i] = s / r[(i, i)];
    }
    let gtt = gram[(t, t)];
    let diag_sq = gtt - dot(&rho, &rho);
    if diag_sq <= gtt * T::epsilon() * T::of(64.0) {
        return false;
    }
    for (i, &v) in rho.iter().enumerate() {
        r[(i, p)] = v;
    }
    r[(p, p)] = diag_sq.sqrt();
    true
}

/// Recomputes the factor after passive-set shrinkage.
fn rebuild_factor<T: Real>(r: &mut Matrix<T>, gram: &Matrix<T>, passive: &[usize]) {
    let p = passive.len();
    for j in 0..p {
        for i in 0..=j {
            let mut s = gram[(passive[i], passive[j])];
            for k in 0..i {
                s = s - r[(k, i)] * r[(k, j)];
            }
            r[(i, j)] = if i == j { s.max(T::min_positive_value()).sqrt() } else { s / r[(i, i)] };
        }
    }
}

/// Solves `gram[passive, passive] z = h[passive]` through the factor.
fn solve_passive<T: Real>(r: &Matrix<T>, _gram: &Matrix<T>, h: &[T], passive: &[usize]) -> Vec<T> {
    let p = passive.len();
    let mut z = vec![T::zero(); p];
    for i in 0..p {
        let mut s = h[passive[i]];
        for k in 0..i {
            s = s - r[(k, i)] * z[k];
        }
        z[i] = s / r[(i, i)];
    }
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in i + 1..p {
            s = s - r[(i, k)] * z[k];
        }
        z[i] = s / r[(i, i)];
    }
    z
}
