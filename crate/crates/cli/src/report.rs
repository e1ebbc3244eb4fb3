//! JSON renderings of run results. Object keys are sorted, so equal inputs
//! give byte-identical text.

use psp_core::dataset::{InteractionDataset, SplitDataset};
use psp_core::pipeline::{ExperimentResult, PspArtifacts};
use psp_core::psp::PspQuality;
use psp_core::train_eval::{EvalReport, HistoryRecord, SegmentReport, TrainConfig};
use serde_json::{json, Map, Value};

fn per_k(ks: &[usize], values: &[f64]) -> Value {
    Value::Object(ks.iter().zip(values).map(|(k, v)| (k.to_string(), json!(v))).collect())
}

pub fn eval_json(r: &EvalReport) -> Value {
    json!({
        "n_evaluable_users": r.n_evaluable_users,
        "recall": per_k(&r.ks, &r.recall),
        "precision": per_k(&r.ks, &r.precision),
    })
}

pub fn segments_json(s: &SegmentReport) -> Value {
    json!({ "n_inactive": s.n_inactive, "inactive": eval_json(&s.inactive), "other": eval_json(&s.other) })
}

pub fn config_json(c: &TrainConfig) -> Value {
    Value::Object(c.entries().into_iter().map(|(k, v)| (k.to_owned(), Value::String(v))).collect())
}

pub fn dataset_stats(ds: &InteractionDataset) -> Value {
    json!({
        "users": ds.n_users(),
        "items": ds.n_items(),
        "interactions": ds.len(),
        "density_percent": ds.density() * 100.0,
    })
}

pub fn split_json(split: &SplitDataset) -> Value {
    let total = split.train.len() + split.val.len() + split.test.len();
    let cells = (split.train.n_users() * split.train.n_items()).max(1) as f64;
    json!({
        "users": split.train.n_users(),
        "items": split.train.n_items(),
        "interactions": total,
        "density_percent": total as f64 / cells * 100.0,
        "split_seed": split.split_seed,
        "train": split.train.len(),
        "val": split.val.len(),
        "test": split.test.len(),
    })
}

pub fn quality_json(q: &PspQuality) -> Value {
    json!({
        "acc": q.acc,
        "acc_weighted": q.acc_weighted,
        "cov": q.cov,
        "n_pairs": q.n_pairs,
        "n_true": q.n_true,
    })
}

pub fn psp_json(a: &PspArtifacts) -> Value {
    let mut m = Map::new();
    m.insert("g_edges".into(), json!(a.graph.n_edges()));
    m.insert("g_svd_edges".into(), json!(a.g_svd.n_edges()));
    m.insert("g_hat_edges".into(), json!(a.g_hat.n_edges()));
    m.insert("g_hat_total_weight".into(), json!(a.g_hat.total_weight()));
    m.insert("pairs".into(), json!(a.psp.n_pairs()));
    m.insert("expanded_pairs".into(), json!(a.psp.total_expanded()));
    m.insert("leaked_pairs_removed".into(), json!(a.n_leaked()));
    if let Some(f) = &a.factors {
        m.insert("singular_values".into(), json!(f.singular_values()));
    }
    let w = a.weights.values();
    let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    m.insert("user_weight_min".into(), json!(lo));
    m.insert("user_weight_max".into(), json!(hi));
    Value::Object(m)
}

pub fn history_line(r: &HistoryRecord) -> String {
    let v = json!({
        "epoch": r.epoch,
        "loss": r.loss,
        "improved": r.improved,
        "validation": r.validation.as_ref().map(eval_json),
    });
    v.to_string()
}

/// The final report of one training run.
pub fn experiment_json(
    config: &TrainConfig,
    split: &SplitDataset,
    result: &ExperimentResult,
    quality: Option<&PspQuality>,
) -> Value {
    json!({
        "config": config_json(config),
        "seeds": { "root": config.seed, "split": split.split_seed, "sampler_stream": config.sampler.seed },
        "split": split_json(split),
        "psp": psp_json(&result.artifacts),
        "psp_quality": quality.map(quality_json),
        "training": {
            "epochs_run": result.outcome.history.len(),
            "best_epoch": result.outcome.best_epoch,
            "best_validation": result.outcome.best_validation,
        },
        "test": eval_json(&result.test),
        "segments": segments_json(&result.segments),
    })
}

/// Pretty JSON with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s
}
