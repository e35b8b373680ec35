use super::matrix::{dot, DenseMatrix};
use crate::Scalar;

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U diag(sigma) V^T`.
///
/// `sigma` has one entry per column of `A`, sorted descending; `v` is a full
/// `n x n` orthogonal matrix; column `j` of `u` is zero when `sigma[j] == 0`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: DenseMatrix<T>,
    pub sigma: Vec<T>,
    pub v: DenseMatrix<T>,
}

/// One-sided Jacobi (Hestenes) SVD.
pub fn svd<T: Scalar>(a: &DenseMatrix<T>) -> Svd<T> {
    let (m, n) = (a.rows(), a.cols());
    // Columns of `w` are rotated until mutually orthogonal; `w = A V`.
    let mut w: Vec<Vec<T>> = (0..n).map(|j| a.col(j)).collect();
    let mut v = DenseMatrix::<T>::identity(n);
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&w[p], &w[p]);
                let beta = dot(&w[q], &w[q]);
                let gamma = dot(&w[p], &w[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                #[allow(clippy::needless_range_loop)]
                for i in 0..m {
                    let (wp, wq) = (w[p][i], w[q][i]);
                    w[p][i] = c * wp - s * wq;
                    w[q][i] = s * wp + c * wq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));

    let mut u = DenseMatrix::zeros(m, n);
    let mut vs = DenseMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        if s > T::zero() {
            for i in 0..m {
                u[(i, k)] = w[j][i] / s;
            }
        }
        for i in 0..n {
            vs[(i, k)] = v[(i, j)];
        }
    }
    Svd { u, sigma, v: vs }
}

fn rank_from_sigma<T: Scalar>(sigma: &[T], tol_rank: T) -> usize {
    let smax = sigma.first().copied().unwrap_or_else(T::zero);
    if smax <= T::zero() {
        return 0;
    }
    sigma.iter().filter(|&&s| s > tol_rank * smax).count()
}

/// Number of singular values above `tol_rank * sigma_max`.
pub fn rank<T: Scalar>(m: &DenseMatrix<T>, tol_rank: T) -> usize {
    if m.is_empty() {
        return 0;
    }
    // Jacobi works on columns; the narrower orientation is cheaper.
    let s = if m.rows() < m.cols() {
        svd(&m.transpose())
    } else {
        svd(m)
    };
    rank_from_sigma(&s.sigma, tol_rank)
}

/// Orthonormal basis (as columns, `n x k`) of `ker M`, `k = n - rank(M)`.
pub fn null_space_orthonormal<T: Scalar>(m: &DenseMatrix<T>, tol_rank: T) -> DenseMatrix<T> {
    let n = m.cols();
    if m.rows() == 0 {
        return DenseMatrix::identity(n);
    }
    let s = svd(m);
    let r = rank_from_sigma(&s.sigma, tol_rank);
    let idx: Vec<usize> = (r..n).collect();
    s.v.select_cols(&idx)
}

/// Minimum-norm least-squares solution of `A x = b` via the pseudo-inverse.
pub fn lstsq<T: Scalar>(a: &DenseMatrix<T>, b: &[T], tol_rank: T) -> Vec<T> {
    assert_eq!(a.rows(), b.len(), "lstsq shape mismatch");
    let n = a.cols();
    if a.is_empty() {
        return vec![T::zero(); n];
    }
    let s = svd(a);
    let r = rank_from_sigma(&s.sigma, tol_rank);
    let mut x = vec![T::zero(); n];
    for k in 0..r {
        let coef = dot(&s.u.col(k), b) / s.sigma[k];
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += coef * s.v[(i, k)];
        }
    }
    x
}
