//! Flat `key = value` configuration files. Blank lines and lines starting
//! with `#` are ignored; later assignments win, and command-line overrides
//! are applied last.

use anyhow::{bail, Context, Result};
use psp_core::train_eval::TrainConfig;

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected key = value, got `{line}`", i + 1);
        };
        out.push((key.trim().to_owned(), value.trim().to_owned()));
    }
    Ok(out)
}

/// Accepts both `batch_size` and `batch-size` spellings.
pub fn canonical_key(key: &str) -> String {
    let k = key.trim_start_matches("--").replace('-', "_");
    TrainConfig::KEYS.iter().find(|c| c.eq_ignore_ascii_case(&k)).map_or(k, |c| (*c).to_owned())
}

pub fn apply(config: &mut TrainConfig, pairs: &[(String, String)]) -> Result<()> {
    for (key, value) in pairs {
        let key = canonical_key(key);
        config.set(&key, value).with_context(|| format!("config key `{key}`"))?;
    }
    Ok(())
}

/// Builds a config from file text plus overrides, then validates it.
pub fn load(text: Option<&str>, overrides: &[(String, String)]) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(text) = text {
        apply(&mut config, &parse_pairs(text)?)?;
    }
    apply(&mut config, overrides)?;
    config.validate().context("invalid configuration")?;
    Ok(config)
}

/// Renders a config in the file format; `load` reads it back unchanged.
pub fn render(config: &TrainConfig) -> String {
    config
        .entries()
        .into_iter()
        .filter(|(k, _)| *k != "sampler")
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

/// Turns trailing `--key value`, `--key=value` or `key=value` arguments into
/// pairs.
pub fn parse_flag_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            match arg.split_once('=') {
                Some((k, v)) => out.push((k.to_owned(), v.to_owned())),
                None => bail!("unexpected argument `{arg}`"),
            }
            continue;
        };
        match flag.split_once('=') {
            Some((k, v)) => out.push((k.to_owned(), v.to_owned())),
            None => {
                let value = it.next().with_context(|| format!("flag --{flag} needs a value"))?;
                out.push((flag.to_owned(), value.clone()));
            }
        }
    }
    Ok(out)
}
