use alloc::vec;
use alloc::vec::Vec;

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major nested slices.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n_cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == n_cols), "ragged rows");
        Self::from_fn(rows.len(), n_cols, |i, j| rows[i][j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Mutable access to two distinct columns.
    pub fn col_pair_mut(&mut self, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
        assert!(a < b);
        let (lo, hi) = self.data.split_at_mut(b * self.rows);
        (&mut lo[a * self.rows..(a + 1) * self.rows], &mut hi[..self.rows])
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = out.col_mut(j);
            for k in 0..self.cols {
                axpy(other.get(k, j), self.col(k), dst);
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(dot(&self.data, &self.data))
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }
}

/// Dot product with four independent accumulators so the loop vectorizes.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

/// Orthonormal basis of the column space of `a` (m x n, thin Q of a
/// Householder QR). Rank-deficient input still yields orthonormal columns.
pub fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    let (m, n) = (a.rows, a.cols);
    assert!(m >= n, "orthonormalize needs rows >= cols");
    let mut r = a.clone();
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    for k in 0..n {
        let mut v = r.col(k)[k..].to_vec();
        let x_norm = norm(&v);
        if x_norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -x_norm } else { x_norm };
        v[0] -= alpha;
        let v_norm = norm(&v);
        if v_norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        v.iter_mut().for_each(|x| *x /= v_norm);
        for j in k..n {
            let col = &mut r.col_mut(j)[k..];
            let proj = 2.0 * dot(&v, col);
            axpy(-proj, &v, col);
        }
        reflectors.push(v);
    }
    let mut q = DenseMatrix::from_fn(m, n, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in k..n {
            let col = &mut q.col_mut(j)[k..];
            let proj = 2.0 * dot(v, col);
            axpy(-proj, v, col);
        }
    }
    q
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching eigenvector
/// columns.
pub fn symmetric_eigen(a: &DenseMatrix) -> (Vec<f64>, DenseMatrix) {
    let n = a.rows;
    assert_eq!(n, a.cols, "symmetric_eigen needs a square matrix");
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);
    let scale = w.frobenius_norm();
    if scale > 0.0 {
        for _sweep in 0..100 {
            let mut off = 0.0;
            for j in 0..n {
                for i in 0..j {
                    off += w.get(i, j) * w.get(i, j);
                }
            }
            if libm::sqrt(off) <= 1e-16 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = w.get(p, q);
                    if libm::fabs(apq) <= 1e-300 {
                        continue;
                    }
                    let theta = (w.get(q, q) - w.get(p, p)) / (2.0 * apq);
                    let t = libm::copysign(1.0, theta) / (libm::fabs(theta) + libm::sqrt(theta * theta + 1.0));
                    let c = 1.0 / libm::sqrt(t * t + 1.0);
                    let s = t * c;
                    // W <- J^T W J, columns then rows.
                    {
                        let (cp, cq) = w.col_pair_mut(p, q);
                        rotate(cp, cq, c, s);
                    }
                    for k in 0..n {
                        let (wp, wq) = (w.get(p, k), w.get(q, k));
                        w.set(p, k, c * wp - s * wq);
                        w.set(q, k, s * wp + c * wq);
                    }
                    let (vp, vq) = v.col_pair_mut(p, q);
                    rotate(vp, vq, c, s);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w.get(j, j).total_cmp(&w.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&i| w.get(i, i)).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    (values, vectors)
}

/// (x, y) <- (c x - s y, s x + c y)
#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let (a, b) = (*xi, *yi);
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}
