//! Training loop with early stopping, Recall/Precision@k evaluation,
//! inactive-user segment reports, and the one-step margin probe.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;

use crate::dataset::{build_matrix_and_graph, InteractionDataset, ItemSets, SplitDataset};
use crate::error::{Error, Result};
use crate::model::{
    bpr_loss, gradient_step, init_embeddings, top_k_excluding, AdamConfig, EmbeddingModel, OptimizerState, Triplet,
};
use crate::psp::{PositivePairTable, PspMode, UserWeights, WeightScheme, DEFAULT_WEIGHT_CAP};
use crate::rng;
use crate::sampler::{ExclusionSource, NegativeSampler, NegativeSamplerConfig, SamplerKind};

/// Size of the inactive-user segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InactiveSegment {
    Count(usize),
    /// Fraction of all users, e.g. 0.2 for the bottom 20%.
    Fraction(f64),
}

impl InactiveSegment {
    pub fn resolve(self, n_users: usize) -> usize {
        match self {
            InactiveSegment::Count(n) => n.min(n_users),
            InactiveSegment::Fraction(f) => (libm::round(f * n_users as f64) as usize).min(n_users),
        }
    }
}

impl core::fmt::Display for InactiveSegment {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            InactiveSegment::Count(n) => write!(f, "{n}"),
            InactiveSegment::Fraction(x) => write!(f, "{}%", x * 100.0),
        }
    }
}

impl FromStr for InactiveSegment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(pct) = s.strip_suffix('%') {
            let x: f64 = pct.trim().parse().map_err(|_| Error::param("inactive", format!("bad percentage `{s}`")))?;
            if !(0.0..=100.0).contains(&x) {
                return Err(Error::param("inactive", "percentage must lie in [0, 100]"));
            }
            return Ok(InactiveSegment::Fraction(x / 100.0));
        }
        s.parse().map(InactiveSegment::Count).map_err(|_| Error::param("inactive", format!("bad count `{s}`")))
    }
}

/// Every hyperparameter of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub q: usize,
    pub oversample: usize,
    pub power_iters: usize,
    pub s: u32,
    pub a: f64,
    pub weight_cap: f64,
    pub scheme: WeightScheme,
    pub mode: PspMode,
    pub sampler: NegativeSamplerConfig,
    pub d: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub decoupled_weight_decay: bool,
    pub max_epochs: usize,
    pub patience: usize,
    pub eval_every: usize,
    pub ks: Vec<usize>,
    pub seed: u64,
    pub inactive: InactiveSegment,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            q: 50,
            oversample: 10,
            power_iters: 4,
            s: 3,
            a: 0.1,
            weight_cap: DEFAULT_WEIGHT_CAP,
            scheme: WeightScheme::Log,
            mode: PspMode::WEw,
            sampler: NegativeSamplerConfig::default(),
            d: 64,
            lr: 1e-3,
            batch_size: 2048,
            l2: 1e-4,
            decoupled_weight_decay: false,
            max_epochs: 200,
            patience: 10,
            eval_every: 1,
            ks: vec![20, 30],
            seed: 0,
            inactive: InactiveSegment::Count(1000),
        }
    }
}

fn parse<T: FromStr>(key: &'static str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::param(key, format!("cannot parse `{value}`")))
}

impl TrainConfig {
    /// Keys accepted by [`TrainConfig::set`].
    pub const KEYS: [&'static str; 25] = [
        "q",
        "oversample",
        "power_iters",
        "s",
        "a",
        "cap",
        "scheme",
        "mode",
        "sampler",
        "sampler.kind",
        "sampler.exponent",
        "sampler.M",
        "sampler.seed",
        "sampler.exclude",
        "d",
        "lr",
        "batch_size",
        "l2",
        "decoupled_weight_decay",
        "max_epochs",
        "patience",
        "eval_every",
        "ks",
        "seed",
        "inactive",
    ];

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "q" => self.q = parse("q", v)?,
            "oversample" => self.oversample = parse("oversample", v)?,
            "power_iters" => self.power_iters = parse("power_iters", v)?,
            "s" => {
                self.s = parse("s", v).map_err(|_| Error::param("s", format!("`{v}` is not a positive integer")))?
            }
            "a" => self.a = parse("a", v)?,
            "cap" => self.weight_cap = parse("cap", v)?,
            "scheme" => self.scheme = v.parse()?,
            "mode" => self.mode = v.parse()?,
            "sampler" | "sampler.kind" => self.sampler.kind = v.parse::<SamplerKind>()?,
            "sampler.exponent" => self.sampler.popularity_exponent = parse("sampler.exponent", v)?,
            "sampler.M" => self.sampler.candidates = parse("sampler.M", v)?,
            "sampler.seed" => self.sampler.seed = parse("sampler.seed", v)?,
            "sampler.exclude" => self.sampler.exclude = v.parse::<ExclusionSource>()?,
            "d" => self.d = parse("d", v)?,
            "lr" => self.lr = parse("lr", v)?,
            "batch_size" => self.batch_size = parse("batch_size", v)?,
            "l2" => self.l2 = parse("l2", v)?,
            "decoupled_weight_decay" => self.decoupled_weight_decay = parse("decoupled_weight_decay", v)?,
            "max_epochs" => self.max_epochs = parse("max_epochs", v)?,
            "patience" => self.patience = parse("patience", v)?,
            "eval_every" => self.eval_every = parse("eval_every", v)?,
            "ks" => {
                self.ks = v
                    .split(',')
                    .map(|k| parse("ks", k))
                    .collect::<Result<Vec<usize>>>()?;
            }
            "seed" => self.seed = parse("seed", v)?,
            "inactive" => self.inactive = v.parse()?,
            other => return Err(Error::UnknownVariant { kind: "config key", value: other.to_string() }),
        }
        Ok(())
    }

    /// (key, value) pairs in [`TrainConfig::KEYS`] order; `set` accepts every
    /// value back.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let ks = self.ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("q", self.q.to_string()),
            ("oversample", self.oversample.to_string()),
            ("power_iters", self.power_iters.to_string()),
            ("s", self.s.to_string()),
            ("a", self.a.to_string()),
            ("cap", self.weight_cap.to_string()),
            ("scheme", self.scheme.to_string()),
            ("mode", self.mode.to_string()),
            ("sampler", self.sampler.kind.to_string()),
            ("sampler.kind", self.sampler.kind.to_string()),
            ("sampler.exponent", self.sampler.popularity_exponent.to_string()),
            ("sampler.M", self.sampler.candidates.to_string()),
            ("sampler.seed", self.sampler.seed.to_string()),
            ("sampler.exclude", self.sampler.exclude.as_str().to_string()),
            ("d", self.d.to_string()),
            ("lr", self.lr.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("l2", self.l2.to_string()),
            ("decoupled_weight_decay", self.decoupled_weight_decay.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("ks", ks),
            ("seed", self.seed.to_string()),
            ("inactive", self.inactive.to_string()),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: usize| {
            if v == 0 {
                Err(Error::param(name, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        positive("q", self.q)?;
        positive("d", self.d)?;
        positive("batch_size", self.batch_size)?;
        positive("patience", self.patience)?;
        positive("eval_every", self.eval_every)?;
        positive("max_epochs", self.max_epochs)?;
        if self.s == 0 {
            return Err(Error::param("s", "must be a positive integer"));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::param("a", "must be positive"));
        }
        if !(self.weight_cap > 0.0) {
            return Err(Error::param("cap", "must be positive"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::param("lr", "must be positive"));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::param("l2", "must be non-negative"));
        }
        if self.ks.is_empty() || self.ks.contains(&0) || self.ks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("ks", "cutoffs must be non-empty, positive and strictly ascending"));
        }
        if let InactiveSegment::Fraction(f) = self.inactive {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::param("inactive", "fraction must lie in [0, 1]"));
            }
        }
        self.sampler.validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: if self.decoupled_weight_decay { self.l2 } else { 0.0 },
            ..AdamConfig::default()
        }
    }

    fn loss_l2(&self) -> f64 {
        if self.decoupled_weight_decay {
            0.0
        } else {
            self.l2
        }
    }
}

/// Macro-averaged Recall@k and Precision@k over users with at least one
/// evaluation item.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub n_evaluable_users: usize,
    pub epoch: Option<usize>,
    pub seconds: Option<f64>,
}

impl EvalReport {
    fn empty(ks: &[usize]) -> Self {
        Self {
            ks: ks.to_vec(),
            recall: vec![0.0; ks.len()],
            precision: vec![0.0; ks.len()],
            n_evaluable_users: 0,
            epoch: None,
            seconds: None,
        }
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }

    pub fn precision_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.precision[i])
    }
}

fn evaluate_users(
    model: &EmbeddingModel,
    eval_sets: &[Vec<u32>],
    users: impl Iterator<Item = u32>,
    exclusions: &dyn ItemSets,
    ks: &[usize],
) -> EvalReport {
    let mut report = EvalReport::empty(ks);
    let max_k = ks.iter().copied().max().unwrap_or(0);
    let mut scores = vec![0.0; model.n_items()];
    for u in users {
        let truth = eval_sets.items(u);
        if truth.is_empty() || u as usize >= model.n_users() {
            continue;
        }
        model.scores_into(u, &mut scores);
        let ranked = top_k_excluding(&scores, max_k, exclusions.items(u));
        for (i, &k) in ks.iter().enumerate() {
            let hits = ranked.iter().take(k).filter(|p| truth.binary_search(p).is_ok()).count() as f64;
            report.recall[i] += hits / truth.len() as f64;
            report.precision[i] += hits / k as f64;
        }
        report.n_evaluable_users += 1;
    }
    if report.n_evaluable_users > 0 {
        let n = report.n_evaluable_users as f64;
        report.recall.iter_mut().chain(report.precision.iter_mut()).for_each(|x| *x /= n);
    }
    report
}

/// Ranks every item for each user with evaluation items, skipping the
/// user's observed training items (`exclusions`).
pub fn evaluate(model: &EmbeddingModel, eval_set: &InteractionDataset, exclusions: &dyn ItemSets, ks: &[usize]) -> EvalReport {
    let eval_sets = eval_set.user_item_sets();
    evaluate_users(model, &eval_sets, 0..eval_sets.len() as u32, exclusions, ks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub n_inactive: usize,
    pub inactive: EvalReport,
    pub other: EvalReport,
}

/// Splits users into the `n_inactive` with the fewest training
/// interactions (ties by user index) and everyone else.
pub fn segment_report(
    model: &EmbeddingModel,
    eval_set: &InteractionDataset,
    train_degrees: &[usize],
    n_inactive: usize,
    exclusions: &dyn ItemSets,
    ks: &[usize],
) -> Result<SegmentReport> {
    let n_users = train_degrees.len();
    if n_inactive > n_users {
        return Err(Error::param("inactive", format!("{n_inactive} exceeds the {n_users} users")));
    }
    let mut order: Vec<u32> = (0..n_users as u32).collect();
    order.sort_by_key(|&u| (train_degrees[u as usize], u));
    let eval_sets = eval_set.user_item_sets();
    let (inactive, other) = order.split_at(n_inactive);
    Ok(SegmentReport {
        n_inactive,
        inactive: evaluate_users(model, &eval_sets, inactive.iter().copied(), exclusions, ks),
        other: evaluate_users(model, &eval_sets, other.iter().copied(), exclusions, ks),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops after `patience` consecutive evaluations without a strict
/// improvement of the monitored metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None, stale: 0 }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn observe(&mut self, metric: f64) -> StopDecision {
        if self.best.is_none_or(|b| metric > b) {
            self.best = Some(metric);
            self.stale = 0;
            return StopDecision::Improved;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub epoch: usize,
    /// Mean per-triplet loss over the epoch.
    pub loss: f64,
    pub validation: Option<EvalReport>,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    pub history: Vec<HistoryRecord>,
    pub best_epoch: usize,
    pub best_validation: Option<f64>,
}

/// Trains the embedding model on the expanded pair stream. Every epoch
/// shuffles all pair occurrences, draws one negative per occurrence, and
/// applies weighted BPR updates; the checkpoint with the best validation
/// Recall@ks[0] is returned.
pub fn train(
    config: &TrainConfig,
    split: &SplitDataset,
    psp: &PositivePairTable,
    weights: &UserWeights,
    sampler: &NegativeSampler,
) -> Result<TrainOutcome> {
    config.validate()?;
    if psp.is_empty() {
        return Err(Error::EmptyPairTable);
    }
    let (_, train_graph) = build_matrix_and_graph(&split.train)?;
    let n_users = split.train.n_users();
    let n_items = split.train.n_items();
    if psp.n_users() != n_users || weights.values().len() != n_users {
        return Err(Error::DimensionMismatch("pair table, weights and split disagree on the user count".into()));
    }

    let mut model = init_embeddings(n_users, n_items, config.d, config.seed)?;
    let mut state = OptimizerState::new(&model, config.adam());
    let mut sampler_rng = rng::stream(config.seed, rng::SAMPLER, config.sampler.seed);
    let pair_users = psp.pair_users();
    let mut occurrences: Vec<u32> = Vec::with_capacity(psp.total_expanded() as usize);
    for (k, e) in psp.iter().enumerate() {
        occurrences.extend(core::iter::repeat_n(k as u32, e.multiplicity as usize));
    }
    let flat_entries: Vec<_> = psp.iter().collect();

    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut batch = Vec::with_capacity(config.batch_size);
    let validate = !split.val.is_empty();

    for epoch in 1..=config.max_epochs {
        occurrences.shuffle(&mut rng::stream(config.seed, rng::SHUFFLE, epoch as u64));
        let mut epoch_loss = 0.0;
        for chunk in occurrences.chunks(config.batch_size) {
            batch.clear();
            for &k in chunk {
                let entry = flat_entries[k as usize];
                let user = pair_users[k as usize];
                let exclusion = match config.sampler.exclude {
                    ExclusionSource::Psp => psp.items(user),
                    ExclusionSource::Train => train_graph.items(user),
                };
                let neg = sampler.sample(exclusion, |p| model.score(user, p), &mut sampler_rng)?;
                batch.push(Triplet { user, pos: entry.item, neg, loss_weight: entry.loss_weight });
            }
            let (loss, grads) = bpr_loss(&batch, weights, &model, config.loss_l2())?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { epoch, detail: format!("batch loss {loss}") });
            }
            epoch_loss += loss;
            gradient_step(&grads, &mut state, &mut model)?;
        }
        if !model.is_finite() {
            return Err(Error::NonFinite { epoch, detail: "embedding contains NaN or infinity".into() });
        }
        let mut record =
            HistoryRecord { epoch, loss: epoch_loss / occurrences.len() as f64, validation: None, improved: false };
        let mut stop = false;
        if validate && epoch % config.eval_every == 0 {
            let mut report = evaluate(&model, &split.val, &train_graph, &config.ks);
            report.epoch = Some(epoch);
            match stopper.observe(report.recall[0]) {
                StopDecision::Improved => {
                    record.improved = true;
                    best.clone_from(&model);
                    best_epoch = epoch;
                }
                StopDecision::Continue => {}
                StopDecision::Stop => stop = true,
            }
            record.validation = Some(report);
        }
        history.push(record);
        if stop {
            break;
        }
    }
    if !validate {
        best_epoch = history.len();
        best = model;
    }
    Ok(TrainOutcome { model: best, history, best_epoch, best_validation: stopper.best() })
}

/// Mean one-step margin change of the triplets of users sharing a weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupGain {
    pub weight: f64,
    pub n_triplets: usize,
    /// Measured mean of m_after - m_before.
    pub mean_gain: f64,
    /// Mean of the first-order prediction -eta <∇m, ∇ℓ>.
    pub mean_first_order: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginProbe {
    pub mean_before: f64,
    pub mean_after: f64,
    pub groups: Vec<GroupGain>,
}

impl MarginProbe {
    pub fn mean_gain(&self) -> f64 {
        self.mean_after - self.mean_before
    }

    pub fn group(&self, weight: f64) -> Option<&GroupGain> {
        self.groups.iter().find(|g| g.weight == weight)
    }
}

/// Applies one plain gradient-descent step of rate `eta` to a copy of the
/// model and reports how the batch margins move, grouped by user weight.
pub fn margin_probe(
    model: &EmbeddingModel,
    batch: &[Triplet],
    weights: &UserWeights,
    eta: f64,
    l2: f64,
) -> Result<MarginProbe> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::param("eta", "step size must be non-negative"));
    }
    let (_, grads) = bpr_loss(batch, weights, model, l2)?;
    let mut stepped = model.clone();
    stepped.apply_sgd(&grads, eta);

    let zero = vec![0.0; model.dim()];
    let mut groups: Vec<(f64, usize, f64, f64)> = Vec::new();
    let (mut before_sum, mut after_sum) = (0.0, 0.0);
    for t in batch {
        let before = model.margin(t);
        let after = stepped.margin(t);
        before_sum += before;
        after_sum += after;
        let (eu, ep, en) = (model.user(t.user), model.item(t.pos), model.item(t.neg));
        let gu = grads.user_grad(t.user).unwrap_or(&zero);
        let gp = grads.item_grad(t.pos).unwrap_or(&zero);
        let gn = grads.item_grad(t.neg).unwrap_or(&zero);
        let mut inner = 0.0;
        for k in 0..model.dim() {
            inner += (ep[k] - en[k]) * gu[k] + eu[k] * gp[k] - eu[k] * gn[k];
        }
        let w = weights.get(t.user);
        let slot = match groups.iter().position(|g| g.0 == w) {
            Some(i) => i,
            None => {
                groups.push((w, 0, 0.0, 0.0));
                groups.len() - 1
            }
        };
        groups[slot].1 += 1;
        groups[slot].2 += after - before;
        groups[slot].3 += -eta * inner;
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = batch.len() as f64;
    Ok(MarginProbe {
        mean_before: before_sum / n,
        mean_after: after_sum / n,
        groups: groups
            .into_iter()
            .map(|(weight, count, gain, first)| GroupGain {
                weight,
                n_triplets: count,
                mean_gain: gain / count as f64,
                mean_first_order: first / count as f64,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EmbeddingModel;

    fn line_model(item_scores: &[f64], n_users: usize) -> EmbeddingModel {
        EmbeddingModel::from_parts(n_users, item_scores.len(), 1, vec![1.0; n_users], item_scores.to_vec()).unwrap()
    }

    #[test]
    fn early_stopping_with_patience_one() {
        let mut s = EarlyStopping::new(1);
        assert_eq!(s.observe(0.5), StopDecision::Improved);
        assert_eq!(s.observe(0.4), StopDecision::Stop);

        let mut s = EarlyStopping::new(3);
        let seq = [0.1, 0.2, 0.2, 0.15, 0.3, 0.1, 0.1, 0.1];
        let decisions: Vec<_> = seq.iter().map(|&v| s.observe(v)).collect();
        assert_eq!(decisions[7], StopDecision::Stop);
        assert_eq!(s.best(), Some(0.3));
    }

    #[test]
    fn hand_counted_recall_and_precision() {
        // 30 items, user's eval items {3, 7} score highest
        let mut scores = vec![0.0; 30];
        scores[3] = 2.0;
        scores[7] = 1.0;
        let model = line_model(&scores, 1);
        let eval = InteractionDataset::from_indices(1, 30, &[(0, 3), (0, 7)]).unwrap();
        let none: Vec<Vec<u32>> = vec![vec![]];
        let r = evaluate(&model, &eval, &none, &[20]);
        assert_eq!((r.recall[0], r.precision[0], r.n_evaluable_users), (1.0, 0.1, 1));

        let mut scores = vec![1.0; 30];
        scores[3] = -1.0;
        scores[7] = -1.0;
        let r = evaluate(&line_model(&scores, 1), &eval, &none, &[20]);
        assert_eq!((r.recall[0], r.precision[0]), (0.0, 0.0));
    }

    #[test]
    fn training_items_are_not_ranked() {
        let model = line_model(&[5.0, 4.0, 3.0, 2.0], 1);
        let eval = InteractionDataset::from_indices(1, 4, &[(0, 2)]).unwrap();
        let r = evaluate(&model, &eval, &vec![vec![0u32, 1]], &[1]);
        assert_eq!(r.recall[0], 1.0);
    }

    #[test]
    fn segments_cover_extremes() {
        let model = line_model(&[3.0, 2.0, 1.0, 0.0], 3);
        let eval = InteractionDataset::from_indices(3, 4, &[(0, 0), (1, 3), (2, 1)]).unwrap();
        let ex: Vec<Vec<u32>> = vec![vec![]; 3];
        let global = evaluate(&model, &eval, &ex, &[1, 2]);
        let degrees = [5, 1, 3];
        let full = segment_report(&model, &eval, &degrees, 3, &ex, &[1, 2]).unwrap();
        assert_eq!(full.inactive, global);
        let none = segment_report(&model, &eval, &degrees, 0, &ex, &[1, 2]).unwrap();
        assert_eq!(none.inactive.n_evaluable_users, 0);
        assert_eq!(none.other, global);
        // the least active user is user 1, whose item ranks last
        let one = segment_report(&model, &eval, &degrees, 1, &ex, &[1, 2]).unwrap();
        assert_eq!(one.inactive.recall, [0.0, 0.0]);
        assert!(segment_report(&model, &eval, &degrees, 4, &ex, &[1]).is_err());
    }

    #[test]
    fn zero_step_probe_changes_nothing() {
        let model = init_embeddings(3, 6, 4, 1).unwrap();
        let batch = [Triplet::new(0, 1, 2), Triplet::new(2, 4, 5)];
        let probe = margin_probe(&model, &batch, &UserWeights::uniform(3), 0.0, 0.0).unwrap();
        assert_eq!(probe.mean_before, probe.mean_after);
        assert!(probe.groups.iter().all(|g| g.mean_gain == 0.0));
    }

    #[test]
    fn config_keys_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.set("mode", "w_hop_lw").unwrap();
        cfg.set("ks", "10,20").unwrap();
        cfg.set("inactive", "20%").unwrap();
        cfg.set("sampler.M", "4").unwrap();
        let mut copy = TrainConfig::default();
        for (k, v) in cfg.entries() {
            copy.set(k, &v).unwrap();
        }
        assert_eq!(copy, cfg);
        assert_eq!(cfg.entries().len(), TrainConfig::KEYS.len());
        assert!(cfg.entries().iter().map(|e| e.0).eq(TrainConfig::KEYS));
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.set("s", "2.5").is_err());
        assert!(cfg.set("mode", "two_hop").is_err());
        assert!(cfg.set("nope", "1").is_err());
        cfg.set("patience", "0").unwrap();
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.set("ks", "30,20").unwrap();
        assert!(cfg.validate().is_err());
    }
}
