//! Cyclic Jacobi eigensolver for small symmetric matrices.
//!
//! Used for spectral diagnostics (kernel matrix positive semidefiniteness)
//! and for Golub-Welsch construction of one-dimensional Gauss rules.

use super::Matrix;
use crate::scalar::Real;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and, when requested, the matrix of
/// column eigenvectors in the matching order. Intended for `n` up to a few
/// hundred; convergence to machine precision takes a handful of sweeps.
pub fn symmetric_eigen<T: Real>(
    a: &Matrix<T>,
    compute_vectors: bool,
) -> (Vec<T>, Option<Matrix<T>>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "symmetric_eigen requires a square matrix");
    let mut m = a.clone();
    let mut v = if compute_vectors {
        Some(Matrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() }))
    } else {
        None
    };

    let frob = {
        let mut s = T::zero();
        for j in 0..n {
            for i in 0..n {
                s = s + m[(i, j)] * m[(i, j)];
            }
        }
        s.sqrt()
    };
    let tol = frob * T::epsilon();
    let max_sweeps = 32;

    for _ in 0..max_sweeps {
        let mut off = T::zero();
        for q in 1..n {
            for p in 0..q {
                off = off + m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * T::of(1e-3) {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::of(2.0) * apq);
                let t = {
                    let s = if theta >= T::zero() { T::one() } else { -T::one() };
                    s / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                rotate(&mut m, p, q, c, s);
                if let Some(vm) = v.as_mut() {
                    for i in 0..n {
                        let vip = vm[(i, p)];
                        let viq = vm[(i, q)];
                        vm[(i, p)] = c * vip - s * viq;
                        vm[(i, q)] = s * vip + c * viq;
                    }
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).expect("NaN eigenvalue"));
    let values: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    let vectors = v.map(|vm| Matrix::from_fn(n, n, |i, j| vm[(i, order[j])]));
    (values, vectors)
}

/// Two-sided Jacobi rotation in the (p, q) plane.
fn rotate<T: Real>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    let n = m.nrows();
    for i in 0..n {
        let aip = m[(i, p)];
        let aiq = m[(i, q)];
        m[(i, p)] = c * aip - s * aiq;
        m[(i, q)] = s * aip + c * aiq;
    }
    for j in 0..n {
        let apj = m[(p, j)];
        let aqj = m[(q, j)];
        m[(p, j)] = c * apj - s * aqj;
        m[(q, j)] = s * apj + c * aqj;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn diagonalizes_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let mut a = Matrix::zeros(2, 2);
        a[(0, 0)] = 2.0;
        a[(1, 1)] = 2.0;
        a[(0, 1)] = 1.0;
        a[(1, 0)] = 1.0;
        let (vals, vecs) = symmetric_eigen(&a, true);
        assert_relative_eq!(vals[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(vals[1], 3.0, max_relative = 1e-12);
        let v = vecs.unwrap();
        for j in 0..2 {
            let av = a.matvec(v.col(j));
            for i in 0..2 {
                assert_relative_eq!(av[i], vals[j] * v[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn random_symmetric_residuals_are_small() {
        let n = 40;
        let mut state = 3u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = next();
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        let (vals, vecs) = symmetric_eigen(&a, true);
        let v = vecs.unwrap();
        for j in 0..n {
            let av = a.matvec(v.col(j));
            for i in 0..n {
                assert!((av[i] - vals[j] * v[(i, j)]).abs() < 1e-10);
            }
        }
        let trace: f64 = (0..n).map(|i| a[(i, i)]).sum();
        let sum: f64 = vals.iter().sum();
        assert_relative_eq!(trace, sum, epsilon = 1e-10);
    }
}
