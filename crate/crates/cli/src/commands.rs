//! The `prepare`, `synth`, `train` and `ablate` commands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{ensure, Context, Result};
use clap::Args;
use psp_core::dataset::{split_dataset, InputFormat, SplitDataset};
use psp_core::pipeline::{run_experiment_observed, ExperimentResult};
use psp_core::psp::{measure_psp_quality, PspQuality};
use psp_core::synth::{generate, SyntheticSpec};
use psp_core::train_eval::TrainConfig;
use serde_json::json;

use crate::ablation::{parse_grid, parse_seeds, run_ablation, AblationTable};
use crate::{config, io, report};

pub const SPLIT_FILE: &str = "split.bin";
pub const TRUTH_FILE: &str = "truth.tsv";
pub const INTERACTIONS_FILE: &str = "interactions.tsv";

/// An error tagged with the command stage that raised it.
fn stage<T>(r: Result<T>, name: &str) -> Result<T> {
    r.with_context(|| format!("[{name}]"))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<_, _>>()?;
    ensure!(parts.len() == 3, "expected three ratios, got {}", parts.len());
    Ok((parts[0], parts[1], parts[2]))
}

#[derive(Debug, Clone, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "tsv")]
    pub format: InputFormat,
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth `user<TAB>item` file copied next to the cache.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Loads, splits and caches a dataset; returns the statistics line.
pub fn prepare(args: &PrepareArgs) -> Result<String> {
    let ds = stage(io::load_interactions(&args.input, args.format), "load")?;
    let ratios = stage(parse_ratios(&args.ratios), "split")?;
    let split = stage(split_dataset(&ds, ratios, args.seed).map_err(Into::into), "split")?;
    stage(create_dir(&args.out), "write")?;
    stage(io::write_split_cache(&args.out.join(SPLIT_FILE), &split), "write")?;
    if let Some(truth) = &args.truth {
        stage(
            fs::copy(truth, args.out.join(TRUTH_FILE)).with_context(|| format!("cannot copy {}", truth.display())),
            "write",
        )?;
    }
    Ok(format!(
        "users {}  items {}  interactions {}  density {:.3}%  (train {}, val {}, test {})",
        ds.n_users(),
        ds.n_items(),
        ds.len(),
        ds.density() * 100.0,
        split.train.len(),
        split.val.len(),
        split.test.len()
    ))
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub users: usize,
    #[arg(long)]
    pub items: usize,
    #[arg(long, default_value_t = 5)]
    pub blocks: usize,
    #[arg(long = "density-in", default_value_t = 0.6)]
    pub density_in: f64,
    #[arg(long = "density-out", default_value_t = 0.01)]
    pub density_out: f64,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.2)]
    pub skew: f64,
    /// Probability that a true preference is observed.
    #[arg(long, default_value_t = 0.1)]
    pub observe: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            n_users: self.users,
            n_items: self.items,
            n_blocks: self.blocks,
            density_in: self.density_in,
            density_out: self.density_out,
            noise_rate: self.noise,
            activity_skew: self.skew,
            observe_rate: self.observe,
            seed: self.seed,
        }
    }
}

/// Writes `interactions.tsv` (observed, with noise) and `truth.tsv`.
pub fn synth(args: &SynthArgs) -> Result<String> {
    let data = stage(generate(&args.spec()).map_err(Into::into), "synth")?;
    let ids = data.dataset.ids().clone();
    let truth_pairs = data.ground_truth.iter().enumerate().flat_map(|(u, s)| s.iter().map(move |&p| (u as u32, p)));
    stage(create_dir(&args.out), "write")?;
    stage(
        write(&args.out.join(INTERACTIONS_FILE), io::format_pairs(data.dataset.interactions().iter().copied(), &ids)),
        "write",
    )?;
    stage(write(&args.out.join(TRUTH_FILE), io::format_pairs(truth_pairs, &ids)), "write")?;
    Ok(format!(
        "interactions {}  noisy {}  true preferences {}",
        data.dataset.len(),
        data.n_noisy,
        data.ground_truth.iter().map(Vec::len).sum::<usize>()
    ))
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the fused graph as `user<TAB>item<TAB>weight`.
    #[arg(long)]
    pub export_graph: bool,
    /// Write the pair table as `user<TAB>item<TAB>multiplicity`.
    #[arg(long)]
    pub export_psp: bool,
    /// Write the truncated SVD factors.
    #[arg(long)]
    pub save_factors: bool,
    /// Any other config key as `--key value`.
    #[arg(last = true)]
    pub overrides: Vec<String>,
}

impl TrainArgs {
    fn flag_overrides(&self) -> Result<Vec<(String, String)>> {
        let named = [
            ("q", &self.q),
            ("s", &self.s),
            ("a", &self.a),
            ("mode", &self.mode),
            ("scheme", &self.scheme),
            ("sampler", &self.sampler),
            ("seed", &self.seed),
        ];
        let mut out: Vec<(String, String)> =
            named.iter().filter_map(|(k, v)| v.as_ref().map(|v| ((*k).to_owned(), v.clone()))).collect();
        out.extend(config::parse_flag_overrides(&self.overrides)?);
        Ok(out)
    }
}

pub fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<TrainConfig> {
    let text = path
        .map(|p| fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display())))
        .transpose()?;
    config::load(text.as_deref(), overrides)
}

fn load_truth(data_dir: &Path, split: &SplitDataset) -> Result<Option<Vec<Vec<u32>>>> {
    let path = data_dir.join(TRUTH_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(Some(io::read_ground_truth(&text, split.train.ids())?.0))
}

pub struct TrainRun {
    pub config: TrainConfig,
    pub result: ExperimentResult,
    pub quality: Option<PspQuality>,
}

/// Runs the whole pipeline and writes `report.json`, `history.jsonl`,
/// `model.ckpt` and `timing.json` (plus optional exports) into `--out`.
pub fn train(args: &TrainArgs) -> Result<TrainRun> {
    let split = stage(io::read_split_cache(&args.data.join(SPLIT_FILE)), "load")?;
    let overrides = stage(args.flag_overrides(), "config")?;
    let config = stage(load_config(args.config.as_deref(), &overrides), "config")?;
    let truth = stage(load_truth(&args.data, &split), "load")?;

    let start = Instant::now();
    let mut last = start;
    let mut timings = serde_json::Map::new();
    let result = run_experiment_observed(&split, &config, &mut |name| {
        let now = Instant::now();
        timings.insert(name.to_owned(), json!((now - last).as_secs_f64()));
        last = now;
    });
    let result = stage(result.map_err(Into::into), "pipeline")?;
    timings.insert("total".into(), json!(start.elapsed().as_secs_f64()));
    let quality =
        stage(truth.as_ref().map(|t| measure_psp_quality(&result.artifacts.psp, t)).transpose().map_err(Into::into), "quality")?;

    stage(create_dir(&args.out), "write")?;
    let out = |name: &str| args.out.join(name);
    let ids = split.train.ids();
    let written: Result<()> = (|| {
        write(&out("report.json"), report::render(&report::experiment_json(&config, &split, &result, quality.as_ref())))?;
        let history: String = result.outcome.history.iter().map(|r| report::history_line(r) + "\n").collect();
        write(&out("history.jsonl"), history)?;
        write(&out("model.ckpt"), io::encode_checkpoint(&result.outcome.model))?;
        write(&out("config.conf"), config::render(&config))?;
        write(&out("timing.json"), report::render(&serde_json::Value::Object(timings)))?;
        if args.export_graph {
            write(&out("g_hat.tsv"), io::format_g_hat(&result.artifacts.g_hat, ids))?;
        }
        if args.export_psp {
            write(&out("psp.tsv"), io::format_psp(&result.artifacts.psp, ids))?;
        }
        if args.save_factors {
            if let Some(f) = &result.artifacts.factors {
                write(&out("factors.bin"), io::encode_factors(f))?;
            }
        }
        Ok(())
    })();
    stage(written, "write")?;
    Ok(TrainRun { config, result, quality })
}

impl TrainRun {
    pub fn summary(&self) -> String {
        let t = &self.result.test;
        let metrics: Vec<String> = t
            .ks
            .iter()
            .zip(t.recall.iter().zip(&t.precision))
            .map(|(k, (r, p))| format!("recall@{k} {r:.4}  precision@{k} {p:.4}"))
            .collect();
        format!(
            "{}/{}  best epoch {}  {}",
            self.config.mode,
            self.config.scheme,
            self.result.outcome.best_epoch,
            metrics.join("  ")
        )
    }
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `all`, `mode=a,b;scheme=c,d`, or `mode/scheme,...`
    #[arg(long, default_value = "all")]
    pub grid: String,
    /// Inclusive range `0..4` or a comma list.
    #[arg(long, default_value = "0..4")]
    pub seeds: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Any other config key as `--key value`.
    #[arg(last = true)]
    pub overrides: Vec<String>,
}

/// Writes `ablation.json` and `ablation.tsv` into `--out`.
pub fn ablate(args: &AblateArgs, progress: &mut dyn FnMut(&str)) -> Result<AblationTable> {
    let split = stage(io::read_split_cache(&args.data.join(SPLIT_FILE)), "load")?;
    let overrides = stage(config::parse_flag_overrides(&args.overrides), "config")?;
    let base = stage(load_config(args.config.as_deref(), &overrides), "config")?;
    let variants = stage(parse_grid(&args.grid), "grid")?;
    let seeds = stage(parse_seeds(&args.seeds), "grid")?;
    let truth = stage(load_truth(&args.data, &split), "load")?;
    let table = stage(run_ablation(&split, &base, &variants, &seeds, truth.as_deref(), progress), "pipeline")?;
    stage(create_dir(&args.out), "write")?;
    let mut doc = table.to_json();
    doc["config"] = report::config_json(&base);
    doc["split"] = report::split_json(&split);
    stage(write(&args.out.join("ablation.json"), report::render(&doc)), "write")?;
    stage(write(&args.out.join("ablation.tsv"), table.to_tsv()), "write")?;
    Ok(table)
}
