//! Matrix-factorization backbone: dot-product scores, the user-weighted
//! BPR loss with analytic gradients, sparse Adam, and top-k ranking.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::psp::UserWeights;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    n_users: usize,
    n_items: usize,
    dim: usize,
    user_emb: Vec<f64>,
    item_emb: Vec<f64>,
}

/// Xavier-uniform embeddings in ±sqrt(6 / (fan_in + fan_out)) with
/// fan_in = fan_out = dim.
pub fn init_embeddings(n_users: usize, n_items: usize, dim: usize, seed: u64) -> Result<EmbeddingModel> {
    if dim == 0 {
        return Err(Error::param("d", "embedding dimension must be at least 1"));
    }
    let bound = xavier_bound(dim);
    let mut rng = rng::stream(seed, rng::INIT, 0);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..=bound)).collect() };
    let user_emb = draw(n_users * dim);
    let item_emb = draw(n_items * dim);
    Ok(EmbeddingModel { n_users, n_items, dim, user_emb, item_emb })
}

pub fn xavier_bound(dim: usize) -> f64 {
    libm::sqrt(6.0 / (2 * dim) as f64)
}

impl EmbeddingModel {
    pub fn from_parts(n_users: usize, n_items: usize, dim: usize, user_emb: Vec<f64>, item_emb: Vec<f64>) -> Result<Self> {
        if dim == 0 || user_emb.len() != n_users * dim || item_emb.len() != n_items * dim {
            return Err(Error::DimensionMismatch(format!(
                "embedding buffers of {} and {} values do not fit {n_users}x{dim} and {n_items}x{dim}",
                user_emb.len(),
                item_emb.len()
            )));
        }
        Ok(Self { n_users, n_items, dim, user_emb, item_emb })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn user(&self, u: u32) -> &[f64] {
        let d = self.dim;
        &self.user_emb[u as usize * d..(u as usize + 1) * d]
    }

    pub fn item(&self, p: u32) -> &[f64] {
        let d = self.dim;
        &self.item_emb[p as usize * d..(p as usize + 1) * d]
    }

    pub fn user_mut(&mut self, u: u32) -> &mut [f64] {
        let d = self.dim;
        &mut self.user_emb[u as usize * d..(u as usize + 1) * d]
    }

    pub fn item_mut(&mut self, p: u32) -> &mut [f64] {
        let d = self.dim;
        &mut self.item_emb[p as usize * d..(p as usize + 1) * d]
    }

    pub fn user_embeddings(&self) -> &[f64] {
        &self.user_emb
    }

    pub fn item_embeddings(&self) -> &[f64] {
        &self.item_emb
    }

    pub fn score(&self, u: u32, p: u32) -> f64 {
        dot(self.user(u), self.item(p))
    }

    /// Scores of user `u` against every item.
    pub fn scores_into(&self, u: u32, out: &mut [f64]) {
        let e = self.user(u);
        for (p, slot) in out.iter_mut().enumerate() {
            *slot = dot(e, self.item(p as u32));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.user_emb.iter().chain(&self.item_emb).all(|x| x.is_finite())
    }

    /// m = score(u, p⁺) - score(u, p⁻)
    pub fn margin(&self, t: &Triplet) -> f64 {
        let e = self.user(t.user);
        dot(e, self.item(t.pos)) - dot(e, self.item(t.neg))
    }

    /// θ <- θ - eta ∇, plain gradient descent.
    pub fn apply_sgd(&mut self, grads: &Gradients, eta: f64) {
        for (k, &u) in grads.users.iter().enumerate() {
            let g = &grads.user_grads[k * self.dim..(k + 1) * self.dim];
            self.user_mut(u).iter_mut().zip(g).for_each(|(x, g)| *x -= eta * g);
        }
        for (k, &p) in grads.items.iter().enumerate() {
            let g = &grads.item_grads[k * self.dim..(k + 1) * self.dim];
            self.item_mut(p).iter_mut().zip(g).for_each(|(x, g)| *x -= eta * g);
        }
    }
}

/// (user, positive, negative) with an extra per-triplet loss factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub user: u32,
    pub pos: u32,
    pub neg: u32,
    pub loss_weight: f64,
}

impl Triplet {
    pub fn new(user: u32, pos: u32, neg: u32) -> Self {
        Self { user, pos, neg, loss_weight: 1.0 }
    }
}

/// Row-sparse gradients: only rows touched by a batch, in first-touch order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradients {
    pub dim: usize,
    pub users: Vec<u32>,
    pub user_grads: Vec<f64>,
    pub items: Vec<u32>,
    pub item_grads: Vec<f64>,
}

impl Gradients {
    pub fn user_grad(&self, u: u32) -> Option<&[f64]> {
        let k = self.users.iter().position(|&x| x == u)?;
        Some(&self.user_grads[k * self.dim..(k + 1) * self.dim])
    }

    pub fn item_grad(&self, p: u32) -> Option<&[f64]> {
        let k = self.items.iter().position(|&x| x == p)?;
        Some(&self.item_grads[k * self.dim..(k + 1) * self.dim])
    }
}

struct RowAccumulator {
    dim: usize,
    slots: BTreeMap<u32, usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl RowAccumulator {
    fn new(dim: usize) -> Self {
        Self { dim, slots: BTreeMap::new(), rows: Vec::new(), values: Vec::new() }
    }

    fn row(&mut self, id: u32) -> &mut [f64] {
        let dim = self.dim;
        let next = self.rows.len();
        let slot = *self.slots.entry(id).or_insert(next);
        if slot == next {
            self.rows.push(id);
            self.values.resize(self.values.len() + dim, 0.0);
        }
        &mut self.values[slot * dim..(slot + 1) * dim]
    }
}

/// -ln σ(m), computed without overflow.
pub fn neg_log_sigmoid(m: f64) -> f64 {
    if m > 0.0 {
        libm::log1p(libm::exp(-m))
    } else {
        -m + libm::log1p(libm::exp(m))
    }
}

/// σ(x), computed without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Σ -t_u c ln σ(m) + 0.5 l2 (|e_u|² + |e_p⁺|² + |e_p⁻|²) over the batch,
/// where c is the triplet's loss factor, with exact gradients.
pub fn bpr_loss(batch: &[Triplet], weights: &UserWeights, model: &EmbeddingModel, l2: f64) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::param("batch", "batch must not be empty"));
    }
    let dim = model.dim;
    let mut users = RowAccumulator::new(dim);
    let mut items = RowAccumulator::new(dim);
    let mut loss = 0.0;
    for t in batch {
        let (eu, ep, en) = (model.user(t.user), model.item(t.pos), model.item(t.neg));
        let scale = weights.get(t.user) * t.loss_weight;
        let m = dot(eu, ep) - dot(eu, en);
        loss += scale * neg_log_sigmoid(m);
        // dℓ/dm = -scale (1 - σ(m)) = -scale σ(-m)
        let g = -scale * sigmoid(-m);
        if l2 != 0.0 {
            loss += 0.5 * l2 * (dot(eu, eu) + dot(ep, ep) + dot(en, en));
        }
        let gu = users.row(t.user);
        for k in 0..dim {
            gu[k] += g * (ep[k] - en[k]) + l2 * eu[k];
        }
        let gp = items.row(t.pos);
        for k in 0..dim {
            gp[k] += g * eu[k] + l2 * ep[k];
        }
        let gn = items.row(t.neg);
        for k in 0..dim {
            gn[k] += -g * eu[k] + l2 * en[k];
        }
    }
    Ok((
        loss,
        Gradients { dim, users: users.rows, user_grads: users.values, items: items.rows, item_grads: items.values },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay applied to touched rows; 0 disables it.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, weight_decay: 0.0 }
    }
}

/// Adam moments shaped like the embeddings, plus the shared step count.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    user_m: Vec<f64>,
    user_v: Vec<f64>,
    item_m: Vec<f64>,
    item_v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(model: &EmbeddingModel, config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            user_m: vec![0.0; model.user_emb.len()],
            user_v: vec![0.0; model.user_emb.len()],
            item_m: vec![0.0; model.item_emb.len()],
            item_v: vec![0.0; model.item_emb.len()],
        }
    }
}

/// Sparse Adam: only rows present in `grads` move; moments are
/// bias-corrected with the global step count.
pub fn gradient_step(grads: &Gradients, state: &mut OptimizerState, model: &mut EmbeddingModel) -> Result<()> {
    if grads.dim != model.dim && !(grads.users.is_empty() && grads.items.is_empty()) {
        return Err(Error::DimensionMismatch(format!("gradient dim {} vs model dim {}", grads.dim, model.dim)));
    }
    state.step += 1;
    let c = state.config;
    let bc1 = 1.0 - libm::pow(c.beta1, state.step as f64);
    let bc2 = 1.0 - libm::pow(c.beta2, state.step as f64);
    let dim = model.dim;
    let update = |rows: &[u32], g: &[f64], theta: &mut [f64], m: &mut [f64], v: &mut [f64]| {
        for (k, &r) in rows.iter().enumerate() {
            let base = r as usize * dim;
            for j in 0..dim {
                let gj = g[k * dim + j];
                let i = base + j;
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gj;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gj * gj;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= c.lr * m_hat / (libm::sqrt(v_hat) + c.epsilon);
                if c.weight_decay != 0.0 {
                    theta[i] -= c.lr * c.weight_decay * theta[i];
                }
            }
        }
    };
    update(&grads.users, &grads.user_grads, &mut model.user_emb, &mut state.user_m, &mut state.user_v);
    update(&grads.items, &grads.item_grads, &mut model.item_emb, &mut state.item_m, &mut state.item_v);
    Ok(())
}

/// Descending by score, ties by ascending item.
fn rank_order(scores: &[f64]) -> impl Fn(&u32, &u32) -> Ordering + '_ {
    move |&a, &b| scores[b as usize].total_cmp(&scores[a as usize]).then(a.cmp(&b))
}

/// The `k` highest-scoring items outside `exclusion` (sorted), best first.
pub fn top_k_excluding(scores: &[f64], k: usize, exclusion: &[u32]) -> Vec<u32> {
    let mut candidates: Vec<u32> =
        (0..scores.len() as u32).filter(|p| exclusion.binary_search(p).is_err()).collect();
    let cmp = rank_order(scores);
    if k == 0 {
        return Vec::new();
    }
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, &cmp);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(&cmp);
    candidates
}

pub fn recommend_topk(model: &EmbeddingModel, u: u32, k: usize, exclusion: &[u32]) -> Result<Vec<u32>> {
    if k == 0 {
        return Err(Error::param("k", "cutoff must be at least 1"));
    }
    if u as usize >= model.n_users {
        return Err(Error::IndexOutOfRange { index: u as usize, len: model.n_users });
    }
    let mut scores = vec![0.0; model.n_items];
    model.scores_into(u, &mut scores);
    Ok(top_k_excluding(&scores, k, exclusion))
}
