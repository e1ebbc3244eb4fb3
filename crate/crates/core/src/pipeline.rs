//! End-to-end stages: normalize, randomized SVD, adaptive top-K, fuse,
//! pair table, leakage guard, user weights, training and test evaluation.
//! Failures are wrapped with the name of the stage that produced them.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{build_matrix_and_graph, BipartiteGraph, SparseInteractionMatrix, SplitDataset};
use crate::error::{Error, Result};
use crate::graph::{adaptive_topk_select, fuse_graphs, WeightedBipartiteGraph};
use crate::linalg::{normalize_adjacency, randomized_svd, SvdConfig, TruncatedFactors};
use crate::psp::{build_psp, compute_user_weights, exclude_eval_interactions, PositivePairTable, UserWeights, WeightScheme};
use crate::sampler::NegativeSampler;
use crate::train_eval::{evaluate, segment_report, train, EvalReport, SegmentReport, TrainConfig, TrainOutcome};

pub mod stage {
    pub const GRAPH: &str = "graph";
    pub const NORMALIZE: &str = "normalize";
    pub const SVD: &str = "svd";
    pub const TOPK: &str = "topk";
    pub const FUSE: &str = "fuse";
    pub const PSP: &str = "psp";
    pub const LEAKAGE_GUARD: &str = "leakage_guard";
    pub const WEIGHTS: &str = "weights";
    pub const TRAIN: &str = "train";
    pub const EVALUATE: &str = "evaluate";
}

trait InStage<T> {
    fn stage(self, name: &'static str) -> Result<T>;
}

impl<T> InStage<T> for Result<T> {
    fn stage(self, name: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(name))
    }
}

/// Everything produced before training.
#[derive(Debug, Clone)]
pub struct PspArtifacts {
    pub matrix: SparseInteractionMatrix,
    pub graph: BipartiteGraph,
    /// Absent when neither the mode nor the weighting needs the
    /// reconstruction.
    pub factors: Option<TruncatedFactors>,
    pub g_svd: BipartiteGraph,
    pub g_hat: WeightedBipartiteGraph,
    /// Pair table before the leakage guard.
    pub raw_psp: PositivePairTable,
    pub psp: PositivePairTable,
    pub weights: UserWeights,
}

impl PspArtifacts {
    pub fn n_leaked(&self) -> usize {
        self.raw_psp.n_pairs() - self.psp.n_pairs()
    }
}

pub fn needs_reconstruction(config: &TrainConfig) -> bool {
    config.mode.uses_reconstruction() || config.scheme != WeightScheme::None
}

/// Builds the fused graph, pair table and user weights from the train split.
pub fn construct_psp(split: &SplitDataset, config: &TrainConfig) -> Result<PspArtifacts> {
    construct_psp_observed(split, config, &mut |_| {})
}

/// As [`construct_psp`], calling `done` with each stage name as it finishes.
pub fn construct_psp_observed(
    split: &SplitDataset,
    config: &TrainConfig,
    done: &mut dyn FnMut(&'static str),
) -> Result<PspArtifacts> {
    let (matrix, graph) = build_matrix_and_graph(&split.train).stage(stage::GRAPH)?;
    done(stage::GRAPH);
    let (factors, g_svd) = if needs_reconstruction(config) {
        let normalized = normalize_adjacency(&matrix, &graph).stage(stage::NORMALIZE)?;
        done(stage::NORMALIZE);
        let svd = SvdConfig {
            rank: config.q,
            oversample: config.oversample,
            power_iters: config.power_iters,
            seed: config.seed,
        };
        let factors = randomized_svd(&normalized, &svd).stage(stage::SVD)?;
        done(stage::SVD);
        let g_svd = adaptive_topk_select(&factors, &graph).stage(stage::TOPK)?;
        done(stage::TOPK);
        (Some(factors), g_svd)
    } else {
        let empty = BipartiteGraph::from_adjacency(graph.n_items(), vec![Vec::new(); graph.n_users()]);
        (None, empty.stage(stage::TOPK)?)
    };
    let g_hat = fuse_graphs(&graph, &g_svd, config.s).stage(stage::FUSE)?;
    done(stage::FUSE);
    let raw_psp = build_psp(&g_hat, config.mode);
    done(stage::PSP);
    let psp = exclude_eval_interactions(&raw_psp, &split.val, &split.test);
    if psp.is_empty() {
        return Err(Error::EmptyPairTable.in_stage(stage::LEAKAGE_GUARD));
    }
    done(stage::LEAKAGE_GUARD);
    let weights = compute_user_weights(&g_hat, config.scheme, config.a, config.weight_cap).stage(stage::WEIGHTS)?;
    done(stage::WEIGHTS);
    Ok(PspArtifacts { matrix, graph, factors, g_svd, g_hat, raw_psp, psp, weights })
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub artifacts: PspArtifacts,
    pub outcome: TrainOutcome,
    pub test: EvalReport,
    pub segments: SegmentReport,
}

/// Constructs the pair table, trains, and evaluates the best checkpoint on
/// the test split.
pub fn run_experiment(split: &SplitDataset, config: &TrainConfig) -> Result<ExperimentResult> {
    run_experiment_observed(split, config, &mut |_| {})
}

/// As [`run_experiment`], calling `done` with each stage name as it finishes.
pub fn run_experiment_observed(
    split: &SplitDataset,
    config: &TrainConfig,
    done: &mut dyn FnMut(&'static str),
) -> Result<ExperimentResult> {
    config.validate().stage(stage::TRAIN)?;
    let artifacts = construct_psp_observed(split, config, done)?;
    let sampler =
        NegativeSampler::new(config.sampler, artifacts.graph.item_degrees()).stage(stage::TRAIN)?;
    let outcome = train(config, split, &artifacts.psp, &artifacts.weights, &sampler).stage(stage::TRAIN)?;
    done(stage::TRAIN);
    let test = evaluate(&outcome.model, &split.test, &artifacts.graph, &config.ks);
    let degrees = artifacts.graph.user_degrees();
    let n_inactive = config.inactive.resolve(degrees.len());
    let segments =
        segment_report(&outcome.model, &split.test, &degrees, n_inactive, &artifacts.graph, &config.ks)
            .stage(stage::EVALUATE)?;
    done(stage::EVALUATE);
    Ok(ExperimentResult { artifacts, outcome, test, segments })
}
