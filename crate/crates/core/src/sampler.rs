//! Negative samplers: uniform, popularity-proportional, and dynamic
//! (best-scoring of M uniform candidates). Every sampler avoids the
//! caller's exclusion set, given as a sorted item slice.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Rejections tolerated before falling back to enumerating the complement.
pub const MAX_REJECTIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Uniform,
    Popularity,
    Dynamic,
}

impl SamplerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::Popularity => "popularity",
            SamplerKind::Dynamic => "dynamic",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplerKind::Uniform),
            "popularity" => Ok(SamplerKind::Popularity),
            "dynamic" => Ok(SamplerKind::Dynamic),
            other => Err(Error::UnknownVariant { kind: "sampler", value: other.to_string() }),
        }
    }
}

/// Which positives a user's negatives must avoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExclusionSource {
    /// Every item in the user's positive pair table.
    Psp,
    /// Only the user's observed training items.
    Train,
}

impl ExclusionSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionSource::Psp => "psp",
            ExclusionSource::Train => "train",
        }
    }
}

impl FromStr for ExclusionSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "psp" => Ok(ExclusionSource::Psp),
            "train" => Ok(ExclusionSource::Train),
            other => Err(Error::UnknownVariant { kind: "exclusion source", value: other.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeSamplerConfig {
    pub kind: SamplerKind,
    pub popularity_exponent: f64,
    pub candidates: usize,
    pub seed: u64,
    pub exclude: ExclusionSource,
}

impl Default for NegativeSamplerConfig {
    fn default() -> Self {
        Self { kind: SamplerKind::Uniform, popularity_exponent: 1.0, candidates: 8, seed: 0, exclude: ExclusionSource::Psp }
    }
}

impl NegativeSamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidates == 0 {
            return Err(Error::param("sampler.M", "candidate count must be at least 1"));
        }
        if !(self.popularity_exponent >= 0.0 && self.popularity_exponent.is_finite()) {
            return Err(Error::param("sampler.exponent", "popularity exponent must be non-negative"));
        }
        Ok(())
    }
}

fn is_excluded(exclusion: &[u32], item: u32) -> bool {
    exclusion.binary_search(&item).is_ok()
}

/// Uniform draw from the items not in `exclusion` (sorted, de-duplicated).
pub fn sample_uniform(n_items: usize, exclusion: &[u32], rng: &mut Rng) -> Result<u32> {
    let excluded = exclusion.iter().filter(|&&p| (p as usize) < n_items).count();
    if excluded >= n_items {
        return Err(Error::EmptySupport);
    }
    for _ in 0..MAX_REJECTIONS {
        let item = rng.random_range(0..n_items as u32);
        if !is_excluded(exclusion, item) {
            return Ok(item);
        }
    }
    let allowed = n_items - excluded;
    let mut target = rng.random_range(0..allowed);
    // Walk the gaps between excluded items to find the target-th allowed one.
    let mut start = 0u32;
    for &p in exclusion.iter().filter(|&&p| (p as usize) < n_items) {
        let gap = (p - start) as usize;
        if target < gap {
            return Ok(start + target as u32);
        }
        target -= gap;
        start = p + 1;
    }
    Ok(start + target as u32)
}

/// Cumulative popularity mass colD(p)^exponent over items with colD(p) > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityTable {
    cumulative: Vec<f64>,
    weights: Vec<f64>,
}

impl PopularityTable {
    pub fn new(item_degrees: &[u32], exponent: f64) -> Self {
        let weights: Vec<f64> = item_degrees
            .iter()
            .map(|&d| if d == 0 { 0.0 } else { libm::pow(f64::from(d), exponent) })
            .collect();
        let mut total = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                total += w;
                total
            })
            .collect();
        Self { cumulative, weights }
    }

    pub fn n_items(&self) -> usize {
        self.weights.len()
    }

    fn draw(&self, rng: &mut Rng) -> u32 {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        let x = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= x).min(self.weights.len() - 1);
        idx as u32
    }
}

/// Draw proportional to popularity among non-excluded items with positive
/// degree.
pub fn sample_popularity(table: &PopularityTable, exclusion: &[u32], rng: &mut Rng) -> Result<u32> {
    let eligible_mass: f64 = table
        .weights
        .iter()
        .enumerate()
        .filter(|(p, &w)| w > 0.0 && !is_excluded(exclusion, *p as u32))
        .map(|(_, w)| w)
        .sum();
    if !(eligible_mass > 0.0) {
        return Err(Error::EmptySupport);
    }
    for _ in 0..MAX_REJECTIONS {
        let item = table.draw(rng);
        if table.weights[item as usize] > 0.0 && !is_excluded(exclusion, item) {
            return Ok(item);
        }
    }
    let mut x = rng.random::<f64>() * eligible_mass;
    let mut last = None;
    for (p, &w) in table.weights.iter().enumerate() {
        if w > 0.0 && !is_excluded(exclusion, p as u32) {
            last = Some(p as u32);
            if x < w {
                return Ok(p as u32);
            }
            x -= w;
        }
    }
    last.ok_or(Error::EmptySupport)
}

/// Best-scoring of `candidates` uniform draws (with replacement); ties go
/// to the smaller item index.
pub fn sample_dynamic(
    n_items: usize,
    exclusion: &[u32],
    score: impl Fn(u32) -> f64,
    candidates: usize,
    rng: &mut Rng,
) -> Result<u32> {
    if candidates == 0 {
        return Err(Error::param("sampler.M", "candidate count must be at least 1"));
    }
    let mut best = sample_uniform(n_items, exclusion, rng)?;
    let mut best_score = score(best);
    for _ in 1..candidates {
        let item = sample_uniform(n_items, exclusion, rng)?;
        let s = score(item);
        if s > best_score || (s == best_score && item < best) {
            best = item;
            best_score = s;
        }
    }
    Ok(best)
}

/// A configured sampler over a fixed catalog.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    config: NegativeSamplerConfig,
    n_items: usize,
    popularity: Option<PopularityTable>,
}

impl NegativeSampler {
    /// `item_degrees` are the training colD values, used by the popularity
    /// sampler.
    pub fn new(config: NegativeSamplerConfig, item_degrees: &[u32]) -> Result<Self> {
        config.validate()?;
        let popularity = match config.kind {
            SamplerKind::Popularity => Some(PopularityTable::new(item_degrees, config.popularity_exponent)),
            _ => None,
        };
        Ok(Self { config, n_items: item_degrees.len(), popularity })
    }

    pub fn config(&self) -> &NegativeSamplerConfig {
        &self.config
    }

    /// One negative for a user whose positives are `exclusion`. `score` is
    /// only consulted by the dynamic sampler.
    pub fn sample(&self, exclusion: &[u32], score: impl Fn(u32) -> f64, rng: &mut Rng) -> Result<u32> {
        match (self.config.kind, &self.popularity) {
            (SamplerKind::Popularity, Some(table)) => sample_popularity(table, exclusion, rng),
            (SamplerKind::Dynamic, _) => sample_dynamic(self.n_items, exclusion, score, self.config.candidates, rng),
            _ => sample_uniform(self.n_items, exclusion, rng),
        }
    }
}
