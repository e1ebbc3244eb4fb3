//! Variant grid runs and the consolidated comparison table.

use anyhow::{bail, ensure, Context, Result};
use psp_core::dataset::SplitDataset;
use psp_core::pipeline::run_experiment;
use psp_core::psp::{measure_psp_quality, PspMode, PspQuality, WeightScheme};
use psp_core::train_eval::TrainConfig;
use serde_json::{json, Value};

use crate::report::quality_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub mode: PspMode,
    pub scheme: WeightScheme,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.mode, self.scheme)
    }
}

const SCHEMES: [WeightScheme; 5] =
    [WeightScheme::None, WeightScheme::Log, WeightScheme::Isw, WeightScheme::Edw, WeightScheme::Crw];

/// Grid syntax: `all`; axes such as `mode=one_hop,w_ew;scheme=none,log`
/// (an omitted axis takes every value); or explicit `mode/scheme` items
/// separated by commas.
pub fn parse_grid(spec: &str) -> Result<Vec<Variant>> {
    let spec = spec.trim();
    let cross = |modes: &[PspMode], schemes: &[WeightScheme]| {
        modes.iter().flat_map(|&mode| schemes.iter().map(move |&scheme| Variant { mode, scheme })).collect()
    };
    if spec == "all" {
        return Ok(cross(&PspMode::ALL, &SCHEMES));
    }
    if spec.contains('=') {
        let (mut modes, mut schemes) = (PspMode::ALL.to_vec(), SCHEMES.to_vec());
        for axis in spec.split(';').filter(|a| !a.trim().is_empty()) {
            let (name, values) = axis.split_once('=').with_context(|| format!("bad grid axis `{axis}`"))?;
            let values = values.split(',').map(str::trim);
            match name.trim() {
                "mode" => modes = values.map(str::parse).collect::<Result<_, _>>()?,
                "scheme" => schemes = values.map(str::parse).collect::<Result<_, _>>()?,
                other => bail!("unknown grid axis `{other}`"),
            }
        }
        return Ok(cross(&modes, &schemes));
    }
    spec.split(',')
        .map(|item| {
            let (mode, scheme) = item.trim().split_once('/').with_context(|| format!("expected mode/scheme, got `{item}`"))?;
            Ok(Variant { mode: mode.parse()?, scheme: scheme.parse()? })
        })
        .collect()
}

/// `0..4` (inclusive) or a comma list.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let seeds: Vec<u64> = if let Some((lo, hi)) = spec.split_once("..") {
        let (lo, hi): (u64, u64) = (lo.trim().parse()?, hi.trim().trim_start_matches('=').parse()?);
        ensure!(lo <= hi, "empty seed range `{spec}`");
        (lo..=hi).collect()
    } else {
        spec.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>()?
    };
    ensure!(!seeds.is_empty(), "no seeds given");
    Ok(seeds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub inactive_recall: Vec<f64>,
    pub best_epoch: usize,
    pub quality: Option<PspQuality>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantRuns {
    pub variant: Variant,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

fn stat(xs: impl Iterator<Item = f64> + Clone) -> Stat {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = if n > 1.0 { xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Stat { mean, std: var.sqrt() }
}

impl VariantRuns {
    pub fn recall(&self, k_index: usize) -> Stat {
        stat(self.runs.iter().map(move |r| r.recall[k_index]))
    }

    pub fn precision(&self, k_index: usize) -> Stat {
        stat(self.runs.iter().map(move |r| r.precision[k_index]))
    }

    pub fn inactive_recall(&self, k_index: usize) -> Stat {
        stat(self.runs.iter().map(move |r| r.inactive_recall[k_index]))
    }
}

/// A pair of adjacent variants in the expected ordering whose mean
/// Recall@first-k came out reversed.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub expected_higher: Variant,
    pub expected_lower: Variant,
    /// (lower - higher) / lower
    pub relative_gap: f64,
}

/// Expected Recall ordering of the pair-table modes, strongest first.
pub const EXPECTED_ORDER: [PspMode; 4] = [PspMode::WEw, PspMode::WHopLw, PspMode::WHop, PspMode::OneHop];

/// Tolerated relative size of an ordering inversion.
pub const ORDER_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub rows: Vec<VariantRuns>,
}

impl AblationTable {
    pub fn row(&self, mode: PspMode, scheme: WeightScheme) -> Option<&VariantRuns> {
        self.rows.iter().find(|r| r.variant == Variant { mode, scheme })
    }

    /// Inversions of [`EXPECTED_ORDER`] within each weighting scheme.
    pub fn inversions(&self) -> Vec<Inversion> {
        let mut out = Vec::new();
        for scheme in SCHEMES {
            let present: Vec<&VariantRuns> = EXPECTED_ORDER.iter().filter_map(|&m| self.row(m, scheme)).collect();
            for pair in present.windows(2) {
                let (hi, lo) = (pair[0].recall(0).mean, pair[1].recall(0).mean);
                if hi < lo {
                    out.push(Inversion {
                        expected_higher: pair[0].variant,
                        expected_lower: pair[1].variant,
                        relative_gap: (lo - hi) / lo,
                    });
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let metric = |f: &dyn Fn(usize) -> Stat| -> Value {
                    self.ks
                        .iter()
                        .enumerate()
                        .map(|(i, k)| (k.to_string(), json!({ "mean": f(i).mean, "std": f(i).std })))
                        .collect::<serde_json::Map<_, _>>()
                        .into()
                };
                let runs: Vec<Value> = row
                    .runs
                    .iter()
                    .map(|r| {
                        json!({
                            "seed": r.seed,
                            "recall": r.recall,
                            "precision": r.precision,
                            "inactive_recall": r.inactive_recall,
                            "best_epoch": r.best_epoch,
                            "psp_quality": r.quality.as_ref().map(quality_json),
                        })
                    })
                    .collect();
                json!({
                    "mode": row.variant.mode.as_str(),
                    "scheme": row.variant.scheme.as_str(),
                    "recall": metric(&|i| row.recall(i)),
                    "precision": metric(&|i| row.precision(i)),
                    "inactive_recall": metric(&|i| row.inactive_recall(i)),
                    "runs": runs,
                })
            })
            .collect();
        let inversions: Vec<Value> = self
            .inversions()
            .iter()
            .map(|inv| {
                json!({
                    "expected_higher": inv.expected_higher.to_string(),
                    "expected_lower": inv.expected_lower.to_string(),
                    "relative_gap": inv.relative_gap,
                    "within_tolerance": inv.relative_gap < ORDER_TOLERANCE,
                })
            })
            .collect();
        json!({ "ks": self.ks, "seeds": self.seeds, "variants": rows, "ordering_inversions": inversions })
    }

    /// Human-readable table: one row per variant, mean ± std over seeds.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("mode\tscheme");
        for k in &self.ks {
            out.push_str(&format!("\trecall@{k}\tprecision@{k}"));
        }
        out.push_str(&format!("\tinactive_recall@{}\n", self.ks[0]));
        for row in &self.rows {
            out.push_str(&format!("{}\t{}", row.variant.mode, row.variant.scheme));
            for i in 0..self.ks.len() {
                let (r, p) = (row.recall(i), row.precision(i));
                out.push_str(&format!("\t{:.4}±{:.4}\t{:.4}±{:.4}", r.mean, r.std, p.mean, p.std));
            }
            let ir = row.inactive_recall(0);
            out.push_str(&format!("\t{:.4}±{:.4}\n", ir.mean, ir.std));
        }
        for inv in self.inversions() {
            let flag = if inv.relative_gap < ORDER_TOLERANCE { "minor" } else { "MAJOR" };
            out.push_str(&format!(
                "# ordering inversion ({flag}): {} below {} by {:.2}%\n",
                inv.expected_higher,
                inv.expected_lower,
                inv.relative_gap * 100.0
            ));
        }
        out
    }
}

/// Runs every variant under every seed on the same split. `progress`
/// receives one line per finished run.
pub fn run_ablation(
    split: &SplitDataset,
    base: &TrainConfig,
    variants: &[Variant],
    seeds: &[u64],
    truth: Option<&[Vec<u32>]>,
    progress: &mut dyn FnMut(&str),
) -> Result<AblationTable> {
    ensure!(!variants.is_empty(), "empty variant grid");
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let mut runs = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let config = TrainConfig { mode: variant.mode, scheme: variant.scheme, seed, ..base.clone() };
            let result = run_experiment(split, &config).with_context(|| format!("variant {variant}, seed {seed}"))?;
            let quality = truth.map(|t| measure_psp_quality(&result.artifacts.psp, t)).transpose()?;
            progress(&format!("{variant} seed {seed}: recall@{} = {:.4}", config.ks[0], result.test.recall[0]));
            runs.push(RunSummary {
                seed,
                recall: result.test.recall,
                precision: result.test.precision,
                inactive_recall: result.segments.inactive.recall,
                best_epoch: result.outcome.best_epoch,
                quality,
            });
        }
        rows.push(VariantRuns { variant, runs });
    }
    Ok(AblationTable { ks: base.ks.clone(), seeds: seeds.to_vec(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("all").unwrap().len(), 30);
        let g = parse_grid("mode=one_hop,w_ew;scheme=log").unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.iter().all(|v| v.scheme == WeightScheme::Log));
        assert_eq!(parse_grid("scheme=none").unwrap().len(), 6);
        let g = parse_grid("w_ew/log, one_hop/none").unwrap();
        assert_eq!(g[1], Variant { mode: PspMode::OneHop, scheme: WeightScheme::None });
        assert!(parse_grid("mode=bogus").is_err());
        assert!(parse_grid("w_ew").is_err());
    }

    #[test]
    fn seed_forms() {
        assert_eq!(parse_seeds("0..4").unwrap(), [0, 1, 2, 3, 4]);
        assert_eq!(parse_seeds("3,1").unwrap(), [3, 1]);
        assert!(parse_seeds("4..0").is_err());
    }

    #[test]
    fn inversions_are_detected() {
        let row = |mode, r: f64| VariantRuns {
            variant: Variant { mode, scheme: WeightScheme::None },
            runs: vec![RunSummary {
                seed: 0,
                recall: vec![r],
                precision: vec![0.0],
                inactive_recall: vec![0.0],
                best_epoch: 1,
                quality: None,
            }],
        };
        let table = AblationTable {
            ks: vec![20],
            seeds: vec![0],
            rows: vec![row(PspMode::OneHop, 0.2), row(PspMode::WHop, 0.3), row(PspMode::WEw, 0.297)],
        };
        let inv = table.inversions();
        assert_eq!(inv.len(), 1);
        assert_eq!(inv[0].expected_higher.mode, PspMode::WEw);
        assert!((inv[0].relative_gap - 0.01).abs() < 1e-12);
        assert!(table.to_tsv().contains("ordering inversion"));
    }
}
