use super::matrix::DenseMatrix;
use super::NumericsError;
use crate::Scalar;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, ascending; `vectors` holds them as columns.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

fn symmetry_tol<T: Scalar>(h: &DenseMatrix<T>) -> T {
    T::lit(1e-10) * T::one().max(h.max_abs())
}

/// Cyclic Jacobi eigendecomposition.
pub fn sym_eig<T: Scalar>(h: &DenseMatrix<T>) -> Result<SymEigen<T>, NumericsError> {
    if h.rows() != h.cols() {
        return Err(NumericsError::Dimension(format!(
            "expected square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    let n = h.rows();
    if n == 0 {
        return Err(NumericsError::Empty);
    }
    let asym = h.asymmetry();
    if asym > symmetry_tol(h) {
        return Err(NumericsError::NotSymmetric(asym.to_f64().unwrap_or(f64::NAN)));
    }

    let mut a = h.clone();
    // symmetrize exactly so the rotations see one triangle
    for i in 0..n {
        for j in i + 1..n {
            let m = (a[(i, j)] + a[(j, i)]) / T::lit(2.0);
            a[(i, j)] = m;
            a[(j, i)] = m;
        }
    }
    let mut v = DenseMatrix::identity(n);
    let frob = a.as_slice().iter().fold(T::zero(), |s, &x| s + x * x).sqrt();
    let stop = T::epsilon() * frob;

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off.sqrt() <= stop {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = v.select_cols(&order);
    for k in 0..n {
        normalize_sign(&mut vectors, k);
    }
    Ok(SymEigen { values, vectors })
}

/// Flips column `k` so its largest-magnitude entry is positive.
fn normalize_sign<T: Scalar>(m: &mut DenseMatrix<T>, k: usize) {
    let mut best = 0;
    for i in 0..m.rows() {
        if m[(i, k)].abs() > m[(best, k)].abs() + T::epsilon() {
            best = i;
        }
    }
    if m[(best, k)] < T::zero() {
        for i in 0..m.rows() {
            m[(i, k)] = -m[(i, k)];
        }
    }
}

/// Smallest eigenvalue and a unit eigenvector for it.
pub fn sym_eig_min<T: Scalar>(h: &DenseMatrix<T>) -> Result<(T, Vec<T>), NumericsError> {
    let e = sym_eig(h)?;
    Ok((e.values[0], e.vectors.col(0)))
}
