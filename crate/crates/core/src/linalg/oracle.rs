//! Exact SVD of small dense matrices by one-sided (Hestenes) Jacobi.
//!
//! Used as the reference the randomized factorization is checked against;
//! it shares no code path with the sketching route, which diagonalizes a
//! Gram matrix instead.

use alloc::vec::Vec;

use super::dense::{dot, norm, DenseMatrix};
use super::TruncatedFactors;
use crate::error::{Error, Result};

pub const ORACLE_DIM_LIMIT: usize = 256;

/// Full SVD with `min(rows, cols)` singular triplets, values descending.
pub fn exact_svd_oracle(dense: &DenseMatrix) -> Result<TruncatedFactors> {
    let (m, n) = (dense.rows(), dense.cols());
    if m > ORACLE_DIM_LIMIT || n > ORACLE_DIM_LIMIT {
        return Err(Error::MatrixTooLarge { rows: m, cols: n, limit: ORACLE_DIM_LIMIT });
    }
    if m == 0 || n == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    if m < n {
        let t = one_sided_jacobi(&dense.transpose());
        return Ok(TruncatedFactors::from_parts_unchecked(t.v, t.sigma, t.u));
    }
    let t = one_sided_jacobi(dense);
    Ok(TruncatedFactors::from_parts_unchecked(t.u, t.sigma, t.v))
}

struct Triplets {
    /// row-major m x n
    u: Vec<f64>,
    sigma: Vec<f64>,
    /// row-major n x n
    v: Vec<f64>,
}

/// Requires rows >= cols.
fn one_sided_jacobi(a: &DenseMatrix) -> Triplets {
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(w.col(p), w.col(p));
                let beta = dot(w.col(q), w.col(q));
                let gamma = dot(w.col(p), w.col(q));
                if gamma == 0.0 || libm::fabs(gamma) <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                let (wp, wq) = w.col_pair_mut(p, q);
                rotate(wp, wq, c, s);
                let (vp, vq) = v.col_pair_mut(p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| norm(w.col(j))).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let tiny = sigma.first().copied().unwrap_or(0.0) * 1e-13;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        if sigma[k] > tiny && sigma[k] > 0.0 {
            u_cols.push(w.col(j).iter().map(|x| x / sigma[k]).collect());
        } else {
            u_cols.push(Vec::new());
            deficient.push(k);
        }
    }
    // Complete the left basis for (numerically) zero singular values.
    let mut candidate = 0;
    for k in deficient {
        loop {
            let mut e = alloc::vec![0.0; m];
            e[candidate % m] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for col in u_cols.iter().filter(|c| !c.is_empty()) {
                    let proj = dot(col, &e);
                    e.iter_mut().zip(col).for_each(|(x, c)| *x -= proj * c);
                }
            }
            let len = norm(&e);
            if len > 1e-6 {
                u_cols[k] = e.into_iter().map(|x| x / len).collect();
                break;
            }
        }
    }
    let sigma = sigma.into_iter().map(|s| if s > tiny { s } else { 0.0 }).collect();

    let mut u = alloc::vec![0.0; m * n];
    for (k, col) in u_cols.iter().enumerate() {
        for i in 0..m {
            u[i * n + k] = col[i];
        }
    }
    let mut vr = alloc::vec![0.0; n * n];
    for (k, &j) in order.iter().enumerate() {
        for i in 0..n {
            vr[i * n + k] = v.get(i, j);
        }
    }
    Triplets { u, sigma, v: vr }
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}
