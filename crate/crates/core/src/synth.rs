//! Planted-block interaction generator with label noise and skewed user
//! activity.
//!
//! Users and items are split into blocks. Each user draws an activity
//! level θ ≥ 1 from a Pareto law of shape `activity_skew`; the true
//! preferences contain each same-block item with probability
//! min(1, θ·density_in) and every other item with probability
//! min(1, θ·density_out), so active users both like more and roam wider.
//! Each true preference is observed with probability `observe_rate`, and
//! every observed interaction is replaced, with probability `noise_rate`,
//! by a random item outside the user's true set.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_blocks: usize,
    pub density_in: f64,
    pub density_out: f64,
    pub noise_rate: f64,
    pub activity_skew: f64,
    /// Probability that a true preference is observed.
    pub observe_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_users: 500,
            n_items: 300,
            n_blocks: 5,
            density_in: 0.6,
            density_out: 0.01,
            noise_rate: 0.1,
            activity_skew: 1.2,
            observe_rate: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(Error::param("synth", "need at least one user and one item"));
        }
        if self.n_users > u32::MAX as usize || self.n_items > u32::MAX as usize {
            return Err(Error::param("synth", "too many users or items"));
        }
        if self.n_blocks == 0 || self.n_blocks > self.n_items.min(self.n_users) {
            return Err(Error::param("blocks", "must lie in [1, min(users, items)]"));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.density_in) || !unit(self.density_out) || self.density_in <= self.density_out {
            return Err(Error::param("density", "need 0 <= density_out < density_in <= 1"));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::param("noise", "must lie in [0, 1)"));
        }
        if !(self.activity_skew > 0.0 && self.activity_skew.is_finite()) {
            return Err(Error::param("skew", "must be positive"));
        }
        if !(self.observe_rate > 0.0 && self.observe_rate <= 1.0) {
            return Err(Error::param("observe_rate", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn item_block(&self, p: usize) -> usize {
        p * self.n_blocks / self.n_items
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Observed interactions over `0..n_users` x `0..n_items`.
    pub dataset: InteractionDataset,
    /// Clean preference sets, sorted per user.
    pub ground_truth: Vec<Vec<u32>>,
    pub user_blocks: Vec<u32>,
    /// Number of observed interactions that are noise.
    pub n_noisy: usize,
    /// Per-user activity level θ.
    pub activity: Vec<f64>,
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, rng::SYNTH, 0);
    let (n_users, n_items) = (spec.n_users, spec.n_items);
    let mut truth = Vec::with_capacity(n_users);
    let mut user_blocks = Vec::with_capacity(n_users);
    let mut activity = Vec::with_capacity(n_users);
    let mut pairs = Vec::new();
    let mut n_noisy = 0;
    let mut in_truth = vec![false; n_items];
    let mut taken = vec![false; n_items];

    for u in 0..n_users {
        let block = rng.random_range(0..spec.n_blocks);
        let theta = libm::pow(1.0 - rng.random::<f64>(), -1.0 / spec.activity_skew);
        let mut t: Vec<u32> = (0..n_items)
            .filter(|&p| {
                let d = if spec.item_block(p) == block { spec.density_in } else { spec.density_out };
                rng.random_bool((theta * d).min(1.0))
            })
            .map(|p| p as u32)
            .collect();
        if t.is_empty() {
            let lo = (0..n_items).find(|&p| spec.item_block(p) == block).unwrap_or(0);
            let hi = (lo..n_items).find(|&p| spec.item_block(p) != block).unwrap_or(n_items);
            t.push(rng.random_range(lo..hi) as u32);
        }
        let mut observed: Vec<u32> = t.iter().copied().filter(|_| rng.random_bool(spec.observe_rate)).collect();
        if observed.is_empty() {
            observed.push(t[rng.random_range(0..t.len())]);
        }

        t.iter().for_each(|&p| in_truth[p as usize] = true);
        observed.iter().for_each(|&p| taken[p as usize] = true);
        let free = n_items - t.len();
        for slot in observed.iter_mut() {
            if free == 0 || !rng.random_bool(spec.noise_rate) {
                continue;
            }
            // rejection over items outside the true set and not yet used
            let mut tries = 0;
            let replacement = loop {
                let p = rng.random_range(0..n_items);
                if !in_truth[p] && !taken[p] {
                    break Some(p as u32);
                }
                tries += 1;
                if tries > 64 {
                    break (0..n_items).find(|&p| !in_truth[p] && !taken[p]).map(|p| p as u32);
                }
            };
            if let Some(p) = replacement {
                taken[*slot as usize] = false;
                taken[p as usize] = true;
                *slot = p;
                n_noisy += 1;
            }
        }
        t.iter().for_each(|&p| in_truth[p as usize] = false);
        observed.iter().for_each(|&p| taken[p as usize] = false);
        observed.sort_unstable();
        pairs.extend(observed.iter().map(|&p| (u as u32, p)));
        truth.push(t);
        user_blocks.push(block as u32);
        activity.push(theta);
    }
    let dataset = InteractionDataset::from_indices(n_users, n_items, &pairs)?;
    if dataset.len() != pairs.len() {
        return Err(Error::DimensionMismatch(format!("{} duplicate synthetic pairs", pairs.len() - dataset.len())));
    }
    Ok(SyntheticData { dataset, ground_truth: truth, user_blocks, n_noisy, activity })
}
