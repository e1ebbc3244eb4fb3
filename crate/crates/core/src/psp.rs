//! Positive sample pairs built by replication-based reweighting, the
//! evaluation-leakage guard, activity-aware user weights, and positive-set
//! quality measures.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::dataset::{InteractionDataset, ItemSets};
use crate::error::{Error, Result};
use crate::graph::WeightedBipartiteGraph;

/// How positive pairs are derived from the fused graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PspMode {
    /// Observed edges once.
    OneHop,
    /// Observed edges twice.
    OneHopX2,
    /// Reconstructed-graph edges once.
    SvdHop,
    /// Every fused edge once.
    WHop,
    /// Every fused edge once, loss scaled by the edge weight.
    WHopLw,
    /// Every fused edge replicated by its weight.
    WEw,
}

impl PspMode {
    pub const ALL: [PspMode; 6] =
        [PspMode::OneHop, PspMode::OneHopX2, PspMode::SvdHop, PspMode::WHop, PspMode::WHopLw, PspMode::WEw];

    pub fn as_str(self) -> &'static str {
        match self {
            PspMode::OneHop => "one_hop",
            PspMode::OneHopX2 => "one_hop_x2",
            PspMode::SvdHop => "svd_hop",
            PspMode::WHop => "w_hop",
            PspMode::WHopLw => "w_hop_lw",
            PspMode::WEw => "w_ew",
        }
    }

    /// Whether the mode needs the SVD-derived graphs at all.
    pub fn uses_reconstruction(self) -> bool {
        !matches!(self, PspMode::OneHop | PspMode::OneHopX2)
    }
}

impl fmt::Display for PspMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PspMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PspMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownVariant { kind: "psp mode", value: s.to_string() })
    }
}

/// One distinct positive pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEntry {
    pub user: u32,
    pub item: u32,
    pub multiplicity: u32,
    /// Per-triplet loss factor (the edge weight under `w_hop_lw`, else 1).
    pub loss_weight: f64,
}

/// Multiset of positive pairs, grouped by user with items ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PositivePairTable {
    mode: PspMode,
    n_items: usize,
    offsets: Vec<usize>,
    items: Vec<u32>,
    multiplicities: Vec<u32>,
    loss_weights: Vec<f64>,
}

impl PositivePairTable {
    pub fn mode(&self) -> PspMode {
        self.mode
    }

    pub fn n_users(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// Number of distinct pairs.
    pub fn n_pairs(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Sum of multiplicities: the length of one epoch's pair stream.
    pub fn total_expanded(&self) -> u64 {
        self.multiplicities.iter().map(|&m| u64::from(m)).sum()
    }

    pub fn entry(&self, index: usize) -> PairEntry {
        let user = self.offsets.partition_point(|&o| o <= index) - 1;
        PairEntry {
            user: user as u32,
            item: self.items[index],
            multiplicity: self.multiplicities[index],
            loss_weight: self.loss_weights[index],
        }
    }

    pub fn user_entries(&self, u: usize) -> impl Iterator<Item = PairEntry> + '_ {
        (self.offsets[u]..self.offsets[u + 1]).map(move |k| PairEntry {
            user: u as u32,
            item: self.items[k],
            multiplicity: self.multiplicities[k],
            loss_weight: self.loss_weights[k],
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = PairEntry> + '_ {
        (0..self.n_users()).flat_map(move |u| self.user_entries(u))
    }

    pub fn multiplicity(&self, u: usize, p: u32) -> u32 {
        let range = self.offsets[u]..self.offsets[u + 1];
        self.items[range.clone()].binary_search(&p).map_or(0, |k| self.multiplicities[range.start + k])
    }

    /// The user of every distinct pair, in table order.
    pub fn pair_users(&self) -> Vec<u32> {
        (0..self.n_users()).flat_map(|u| core::iter::repeat_n(u as u32, self.offsets[u + 1] - self.offsets[u])).collect()
    }

    fn from_entries(mode: PspMode, n_users: usize, n_items: usize, entries: impl Iterator<Item = PairEntry>) -> Self {
        let mut offsets = vec![0usize; n_users + 1];
        let mut items = Vec::new();
        let mut multiplicities = Vec::new();
        let mut loss_weights = Vec::new();
        for e in entries {
            debug_assert!(e.multiplicity > 0);
            offsets[e.user as usize + 1] += 1;
            items.push(e.item);
            multiplicities.push(e.multiplicity);
            loss_weights.push(e.loss_weight);
        }
        for u in 0..n_users {
            offsets[u + 1] += offsets[u];
        }
        Self { mode, n_items, offsets, items, multiplicities, loss_weights }
    }
}

impl ItemSets for PositivePairTable {
    fn n_sets(&self) -> usize {
        self.n_users()
    }

    fn items(&self, u: u32) -> &[u32] {
        let u = u as usize;
        if u < self.n_users() {
            &self.items[self.offsets[u]..self.offsets[u + 1]]
        } else {
            &[]
        }
    }
}

/// Derives the pair table for `mode` from the fused graph. Edges are
/// visited in user-major, item-ascending order, so the table is too.
pub fn build_psp(g_hat: &WeightedBipartiteGraph, mode: PspMode) -> PositivePairTable {
    let entries = g_hat.iter().filter_map(|(user, e)| {
        let (multiplicity, loss_weight) = match mode {
            PspMode::OneHop if e.origin.in_observed() => (1, 1.0),
            PspMode::OneHopX2 if e.origin.in_observed() => (2, 1.0),
            PspMode::SvdHop if e.origin.in_reconstructed() => (1, 1.0),
            PspMode::WHop => (1, 1.0),
            PspMode::WHopLw => (1, f64::from(e.weight)),
            PspMode::WEw => (e.weight, 1.0),
            _ => return None,
        };
        Some(PairEntry { user, item: e.item, multiplicity, loss_weight })
    });
    PositivePairTable::from_entries(mode, g_hat.n_users(), g_hat.n_items(), entries)
}

/// Removes every pair present in the validation or test interactions.
pub fn exclude_eval_interactions(
    psp: &PositivePairTable,
    val: &InteractionDataset,
    test: &InteractionDataset,
) -> PositivePairTable {
    let mut held_out = vec![Vec::new(); psp.n_users()];
    for &(u, p) in val.interactions().iter().chain(test.interactions()) {
        if let Some(list) = held_out.get_mut(u as usize) {
            list.push(p);
        }
    }
    for list in &mut held_out {
        list.sort_unstable();
    }
    let kept = psp.iter().filter(|e| held_out[e.user as usize].binary_search(&e.item).is_err());
    PositivePairTable::from_entries(psp.mode, psp.n_users(), psp.n_items, kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WeightScheme {
    None,
    /// 1 / ln(a d + 1)
    Log,
    /// 1 / sqrt(a d + 1)
    Isw,
    /// exp(-a d)
    Edw,
    /// min(1 / (a d), cap)
    Crw,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 5] =
        [WeightScheme::None, WeightScheme::Log, WeightScheme::Isw, WeightScheme::Edw, WeightScheme::Crw];

    pub fn as_str(self) -> &'static str {
        match self {
            WeightScheme::None => "none",
            WeightScheme::Log => "log",
            WeightScheme::Isw => "isw",
            WeightScheme::Edw => "edw",
            WeightScheme::Crw => "crw",
        }
    }

    /// Weight of a user with fused degree `degree`, before capping.
    pub fn raw_weight(self, degree: usize, a: f64) -> f64 {
        let x = a * degree as f64;
        match self {
            WeightScheme::None => 1.0,
            WeightScheme::Log => 1.0 / libm::log1p(x),
            WeightScheme::Isw => 1.0 / libm::sqrt(x + 1.0),
            WeightScheme::Edw => libm::exp(-x),
            WeightScheme::Crw => 1.0 / x,
        }
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        WeightScheme::ALL
            .into_iter()
            .find(|w| w.as_str() == s)
            .ok_or_else(|| Error::UnknownVariant { kind: "weight scheme", value: s.to_string() })
    }
}

pub const DEFAULT_WEIGHT_CAP: f64 = 1e4;

/// Per-user loss weights t_u.
#[derive(Debug, Clone, PartialEq)]
pub struct UserWeights {
    values: Vec<f64>,
    pub scheme: WeightScheme,
    pub sensitivity: f64,
    pub cap: f64,
}

impl UserWeights {
    /// All-ones weights.
    pub fn uniform(n_users: usize) -> Self {
        Self { values: vec![1.0; n_users], scheme: WeightScheme::None, sensitivity: 1.0, cap: DEFAULT_WEIGHT_CAP }
    }

    /// Arbitrary weights, e.g. for probes and tests.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values, scheme: WeightScheme::None, sensitivity: 1.0, cap: f64::INFINITY }
    }

    pub fn get(&self, u: u32) -> f64 {
        self.values[u as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// t_u from the fused degree |P_u^Ĝ|, clamped to [0, cap]. Users without
/// fused edges get 0 except under `none`.
pub fn compute_user_weights(g_hat: &WeightedBipartiteGraph, scheme: WeightScheme, a: f64, cap: f64) -> Result<UserWeights> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::param("a", "sensitivity must be positive"));
    }
    if !(cap > 0.0) {
        return Err(Error::param("cap", "weight cap must be positive"));
    }
    let values = (0..g_hat.n_users())
        .map(|u| match (scheme, g_hat.degree(u)) {
            (WeightScheme::None, _) => 1.0,
            (_, 0) => 0.0,
            (s, d) => s.raw_weight(d, a).clamp(0.0, cap),
        })
        .collect();
    Ok(UserWeights { values, scheme, sensitivity: a, cap })
}

/// Precision and coverage of constructed positives against known true
/// preferences, pooled over all users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PspQuality {
    /// Share of distinct pairs that are true positives.
    pub acc: f64,
    /// Share of the expanded (multiplicity-weighted) stream that is true positive.
    pub acc_weighted: f64,
    /// Share of true positive pairs present in the table.
    pub cov: f64,
    pub n_pairs: usize,
    pub n_true: usize,
}

pub fn measure_psp_quality(psp: &PositivePairTable, ground_truth: &[Vec<u32>]) -> Result<PspQuality> {
    if psp.is_empty() {
        return Err(Error::EmptyPairTable);
    }
    let (mut hits, mut weighted_hits, mut covered) = (0usize, 0u64, 0usize);
    for e in psp.iter() {
        if ground_truth.items(e.user).binary_search(&e.item).is_ok() {
            hits += 1;
            weighted_hits += u64::from(e.multiplicity);
        }
    }
    let mut n_true = 0;
    for (u, truth) in ground_truth.iter().enumerate() {
        n_true += truth.len();
        let table_items = psp.items(u as u32);
        covered += truth.iter().filter(|p| table_items.binary_search(p).is_ok()).count();
    }
    Ok(PspQuality {
        acc: hits as f64 / psp.n_pairs() as f64,
        acc_weighted: weighted_hits as f64 / psp.total_expanded() as f64,
        cov: if n_true == 0 { 0.0 } else { covered as f64 / n_true as f64 },
        n_pairs: psp.n_pairs(),
        n_true,
    })
}
