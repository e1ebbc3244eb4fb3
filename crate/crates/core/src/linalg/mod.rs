//! Degree-normalized adjacency and its randomized truncated SVD.

mod dense;
mod oracle;

pub use dense::{axpy, dot, norm, orthonormalize, symmetric_eigen, DenseMatrix};
pub use oracle::{exact_svd_oracle, ORACLE_DIM_LIMIT};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::dataset::{BipartiteGraph, SparseInteractionMatrix};
use crate::error::{Error, Result};
use crate::rng;

/// Real-valued matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

/// Ã: the interaction matrix scaled by 1/sqrt(rowD(u) colD(p)).
pub type NormalizedMatrix = SparseMatrix;

impl SparseMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1
            || col_indices.len() != values.len()
            || row_offsets.last() != Some(&col_indices.len())
            || row_offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::DimensionMismatch("inconsistent CSR arrays".into()));
        }
        for u in 0..n_rows {
            let row = &col_indices[row_offsets[u]..row_offsets[u + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.last().is_some_and(|&p| p as usize >= n_cols) {
                return Err(Error::DimensionMismatch(format!("row {u} has unsorted or out-of-range columns")));
            }
        }
        Ok(Self { n_rows, n_cols, row_offsets, col_indices, values })
    }

    /// Stores every non-zero entry of a dense matrix.
    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..dense.rows() {
            for j in 0..dense.cols() {
                let v = dense.get(i, j);
                if v != 0.0 {
                    col_indices.push(j as u32);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self { n_rows: dense.rows(), n_cols: dense.cols(), row_offsets, col_indices, values }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for u in 0..self.n_rows {
            for (p, v) in self.row(u) {
                out.set(u, p as usize, v);
            }
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let range = self.row_offsets[u]..self.row_offsets[u + 1];
        self.col_indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, u: usize, p: u32) -> f64 {
        let range = self.row_offsets[u]..self.row_offsets[u + 1];
        match self.col_indices[range.clone()].binary_search(&p) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &p in &self.col_indices {
            counts[p as usize + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for u in 0..self.n_rows {
            for (p, v) in self.row(u) {
                let slot = next[p as usize];
                col_indices[slot] = u as u32;
                values[slot] = v;
                next[p as usize] += 1;
            }
        }
        SparseMatrix { n_rows: self.n_cols, n_cols: self.n_rows, row_offsets, col_indices, values }
    }

    /// self * dense
    pub fn mul_dense(&self, dense: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, dense.rows(), "inner dimensions differ");
        let mut out = DenseMatrix::zeros(self.n_rows, dense.cols());
        for j in 0..dense.cols() {
            let src = dense.col(j);
            let dst = out.col_mut(j);
            for (u, slot) in dst.iter_mut().enumerate() {
                let range = self.row_offsets[u]..self.row_offsets[u + 1];
                *slot = self.col_indices[range.clone()]
                    .iter()
                    .zip(&self.values[range])
                    .map(|(&p, &v)| v * src[p as usize])
                    .sum();
            }
        }
        out
    }
}

/// Ã(u,p) = A(u,p) / sqrt(rowD(u) * colD(p)).
pub fn normalize_adjacency(a: &SparseInteractionMatrix, graph: &BipartiteGraph) -> Result<NormalizedMatrix> {
    if a.n_rows() != graph.n_users() || a.n_cols() != graph.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but graph is {}x{}",
            a.n_rows(),
            a.n_cols(),
            graph.n_users(),
            graph.n_items()
        )));
    }
    let mut values = Vec::with_capacity(a.nnz());
    for u in 0..a.n_rows() {
        let row_degree = graph.user_degree(u) as f64;
        for &p in a.row(u) {
            let col_degree = graph.item_degree(p as usize) as f64;
            values.push(1.0 / libm::sqrt(row_degree * col_degree));
        }
    }
    Ok(SparseMatrix {
        n_rows: a.n_rows(),
        n_cols: a.n_cols(),
        row_offsets: a.row_offsets().to_vec(),
        col_indices: a.col_indices().to_vec(),
        values,
    })
}

/// Rank-q factors M_q diag(sigma_q) N_qᵀ.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFactors {
    rank: usize,
    /// |U| x q, row-major
    user_factors: Vec<f64>,
    sigma: Vec<f64>,
    /// |P| x q, row-major
    item_factors: Vec<f64>,
}

impl TruncatedFactors {
    /// Validates shapes and ordering of the singular values.
    pub fn new(user_factors: Vec<f64>, sigma: Vec<f64>, item_factors: Vec<f64>) -> Result<Self> {
        let q = sigma.len();
        if q == 0 || !user_factors.len().is_multiple_of(q) || !item_factors.len().is_multiple_of(q) {
            return Err(Error::DimensionMismatch("factor lengths must be multiples of the rank".into()));
        }
        if sigma.iter().any(|s| !(*s >= 0.0)) || sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::param("sigma", "singular values must be non-negative and descending"));
        }
        Ok(Self::from_parts_unchecked(user_factors, sigma, item_factors))
    }

    pub(crate) fn from_parts_unchecked(user_factors: Vec<f64>, sigma: Vec<f64>, item_factors: Vec<f64>) -> Self {
        Self { rank: sigma.len(), user_factors, sigma, item_factors }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn n_users(&self) -> usize {
        self.user_factors.len() / self.rank
    }

    pub fn n_items(&self) -> usize {
        self.item_factors.len() / self.rank
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn user_factor(&self, u: usize) -> &[f64] {
        &self.user_factors[u * self.rank..(u + 1) * self.rank]
    }

    pub fn item_factor(&self, p: usize) -> &[f64] {
        &self.item_factors[p * self.rank..(p + 1) * self.rank]
    }

    pub fn user_factors(&self) -> &[f64] {
        &self.user_factors
    }

    pub fn item_factors(&self) -> &[f64] {
        &self.item_factors
    }

    /// Row u of M diag(sigma) Nᵀ, in O(q |P|).
    pub fn reconstruct_row(&self, u: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_items()];
        self.reconstruct_rows_into(&[u], &mut out)?;
        Ok(out)
    }

    /// Reconstructs several rows at once into `out` (row after row, each
    /// |P| long). Each item factor is loaded once per call, so callers
    /// should pass small blocks of users.
    pub fn reconstruct_rows_into(&self, users: &[usize], out: &mut [f64]) -> Result<()> {
        let (n_users, n_items, q) = (self.n_users(), self.n_items(), self.rank);
        if out.len() != users.len() * n_items {
            return Err(Error::DimensionMismatch(format!(
                "output holds {} values, expected {}",
                out.len(),
                users.len() * n_items
            )));
        }
        let mut scaled = Vec::with_capacity(users.len() * q);
        for &u in users {
            if u >= n_users {
                return Err(Error::IndexOutOfRange { index: u, len: n_users });
            }
            scaled.extend(self.user_factor(u).iter().zip(&self.sigma).map(|(m, s)| m * s));
        }
        for p in 0..n_items {
            let item = self.item_factor(p);
            for (b, w) in scaled.chunks_exact(q).enumerate() {
                out[b * n_items + p] = dot(w, item);
            }
        }
        Ok(())
    }

    /// Dense M diag(sigma) Nᵀ, for tests and small inputs.
    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.n_users(), self.n_items(), |u, p| {
            (0..self.rank).map(|k| self.user_factor(u)[k] * self.sigma[k] * self.item_factor(p)[k]).sum()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdConfig {
    pub rank: usize,
    pub oversample: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl SvdConfig {
    pub fn new(rank: usize, seed: u64) -> Self {
        Self { rank, oversample: 10, power_iters: 4, seed }
    }
}

/// Randomized truncated SVD: Gaussian sketch, power iterations with QR
/// re-orthonormalization, then an exact decomposition of the projected
/// problem mapped back to the full space.
pub fn randomized_svd(a: &SparseMatrix, config: &SvdConfig) -> Result<TruncatedFactors> {
    let (m, n) = (a.n_rows(), a.n_cols());
    let max_rank = m.min(n);
    if config.rank == 0 || config.rank > max_rank {
        return Err(Error::RankOutOfRange { rank: config.rank, max: max_rank });
    }
    let width = (config.rank + config.oversample).min(max_rank);
    let mut rng = rng::stream(config.seed, rng::SKETCH, 0);
    let omega = DenseMatrix::from_fn(n, width, |_, _| StandardNormal.sample(&mut rng));

    let at = a.transpose();
    let mut basis = orthonormalize(&a.mul_dense(&omega));
    for _ in 0..config.power_iters {
        let z = orthonormalize(&at.mul_dense(&basis));
        basis = orthonormalize(&a.mul_dense(&z));
    }

    // Projected problem B = Qᵀ Ã, held transposed (n x width).
    let bt = at.mul_dense(&basis);
    let gram = DenseMatrix::from_fn(width, width, |i, j| dot(bt.col(i), bt.col(j)));
    let (_, eigvecs) = symmetric_eigen(&gram);

    let q = config.rank;
    let mut triplets: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..q)
        .map(|k| {
            let coeffs = eigvecs.col(k);
            let mut left = vec![0.0; m];
            let mut right = vec![0.0; n];
            for (c, &w) in coeffs.iter().enumerate() {
                axpy(w, basis.col(c), &mut left);
                axpy(w, bt.col(c), &mut right);
            }
            let sigma = norm(&right);
            if sigma > 0.0 {
                right.iter_mut().for_each(|x| *x /= sigma);
            }
            (sigma, left, right)
        })
        .collect();
    triplets.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut user_factors = vec![0.0; m * q];
    let mut item_factors = vec![0.0; n * q];
    let mut sigma = Vec::with_capacity(q);
    for (k, (s, left, right)) in triplets.into_iter().enumerate() {
        sigma.push(s);
        for (i, v) in left.into_iter().enumerate() {
            user_factors[i * q + k] = v;
        }
        for (i, v) in right.into_iter().enumerate() {
            item_factors[i * q + k] = v;
        }
    }
    Ok(TruncatedFactors::from_parts_unchecked(user_factors, sigma, item_factors))
}
