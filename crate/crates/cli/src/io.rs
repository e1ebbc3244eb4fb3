//! On-disk formats: interaction text files, the binary split cache, model
//! checkpoints, factor caches and the tab-separated debug exports.
//!
//! Every binary file starts with an 8-byte magic and a little-endian `u32`
//! format version, followed by little-endian counts and arrays.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use psp_core::dataset::{parse_interactions, IdMap, IdMaps, InputFormat, InteractionDataset, SplitDataset};
use psp_core::graph::WeightedBipartiteGraph;
use psp_core::linalg::TruncatedFactors;
use psp_core::model::EmbeddingModel;
use psp_core::psp::PositivePairTable;

pub const SPLIT_MAGIC: &[u8; 8] = b"PSPSPLIT";
pub const CHECKPOINT_MAGIC: &[u8; 8] = b"PSPMODEL";
pub const FACTORS_MAGIC: &[u8; 8] = b"PSPFACTR";
pub const FORMAT_VERSION: u32 = 1;

pub fn load_interactions(path: &Path, format: InputFormat) -> Result<InteractionDataset> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_interactions(&text, format).with_context(|| format!("cannot parse {}", path.display()))
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn header(magic: &[u8; 8]) -> Self {
        let mut w = Writer(magic.to_vec());
        w.u32(FORMAT_VERSION);
        w
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        vs.iter().for_each(|v| self.0.extend_from_slice(&v.to_le_bytes()));
    }

    fn pairs(&mut self, pairs: &[(u32, u32)]) {
        for &(u, p) in pairs {
            self.u32(u);
            self.u32(p);
        }
    }

    fn names(&mut self, names: &[String]) {
        for name in names {
            self.u32(name.len() as u32);
            self.0.extend_from_slice(name.as_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn open(bytes: &'a [u8], magic: &[u8; 8], what: &str) -> Result<Self> {
        ensure!(bytes.len() >= 12 && &bytes[..8] == magic, "not a {what} file (bad magic)");
        let mut r = Reader { bytes, pos: 8 };
        let version = r.u32()?;
        ensure!(version == FORMAT_VERSION, "unsupported {what} version {version}");
        Ok(r)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else { bail!("truncated file at byte {}", self.pos) };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into()?))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        ensure!(v <= (self.bytes.len() as u64) * 8 + (1 << 32), "implausible count {v}");
        Ok(v as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).context("array too large")?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn pairs(&mut self, n: usize) -> Result<Vec<(u32, u32)>> {
        (0..n).map(|_| Ok((self.u32()?, self.u32()?))).collect()
    }

    fn names(&mut self, n: usize) -> Result<Vec<String>> {
        (0..n)
            .map(|_| {
                let len = self.u32()? as usize;
                Ok(std::str::from_utf8(self.take(len)?).context("identifier is not UTF-8")?.to_owned())
            })
            .collect()
    }

    fn finish(self) -> Result<()> {
        ensure!(self.pos == self.bytes.len(), "{} trailing bytes", self.bytes.len() - self.pos);
        Ok(())
    }
}

/// Layout: magic, version, n_users, n_items, split_seed, n_train, n_val,
/// n_test (all u64), then the train, val and test (user, item) pairs as u32,
/// then the user and item identifiers as length-prefixed UTF-8.
pub fn encode_split(split: &SplitDataset) -> Vec<u8> {
    let ids = split.train.ids();
    let mut w = Writer::header(SPLIT_MAGIC);
    w.u64(ids.users.len() as u64);
    w.u64(ids.items.len() as u64);
    w.u64(split.split_seed);
    for part in [&split.train, &split.val, &split.test] {
        w.u64(part.len() as u64);
    }
    for part in [&split.train, &split.val, &split.test] {
        w.pairs(part.interactions());
    }
    w.names(ids.users.names());
    w.names(ids.items.names());
    w.0
}

pub fn decode_split(bytes: &[u8]) -> Result<SplitDataset> {
    let mut r = Reader::open(bytes, SPLIT_MAGIC, "split cache")?;
    let (n_users, n_items, split_seed) = (r.len()?, r.len()?, r.u64()?);
    let counts = [r.len()?, r.len()?, r.len()?];
    let parts: Vec<Vec<(u32, u32)>> = counts.iter().map(|&n| r.pairs(n)).collect::<Result<_>>()?;
    let ids = Arc::new(IdMaps { users: IdMap::from_names(r.names(n_users)?)?, items: IdMap::from_names(r.names(n_items)?)? });
    r.finish()?;
    let mut views = parts.into_iter().map(|p| InteractionDataset::with_ids(ids.clone(), p));
    let (train, val, test) = (views.next().unwrap()?, views.next().unwrap()?, views.next().unwrap()?);
    ensure!(
        [train.len(), val.len(), test.len()] == counts,
        "split cache contains duplicate pairs"
    );
    Ok(SplitDataset { train, val, test, split_seed })
}

pub fn write_split_cache(path: &Path, split: &SplitDataset) -> Result<()> {
    fs::write(path, encode_split(split)).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_split_cache(path: &Path) -> Result<SplitDataset> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    decode_split(&bytes).with_context(|| format!("invalid split cache {}", path.display()))
}

/// Layout: magic, version, n_users, n_items, dim (u64), then the user and
/// item embeddings row-major as f64.
pub fn encode_checkpoint(model: &EmbeddingModel) -> Vec<u8> {
    let mut w = Writer::header(CHECKPOINT_MAGIC);
    w.u64(model.n_users() as u64);
    w.u64(model.n_items() as u64);
    w.u64(model.dim() as u64);
    w.f64s(model.user_embeddings());
    w.f64s(model.item_embeddings());
    w.0
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<EmbeddingModel> {
    let mut r = Reader::open(bytes, CHECKPOINT_MAGIC, "checkpoint")?;
    let (n_users, n_items, dim) = (r.len()?, r.len()?, r.len()?);
    let users = r.f64s(n_users.checked_mul(dim).context("checkpoint too large")?)?;
    let items = r.f64s(n_items.checked_mul(dim).context("checkpoint too large")?)?;
    r.finish()?;
    Ok(EmbeddingModel::from_parts(n_users, n_items, dim, users, items)?)
}

/// Layout: magic, version, n_users, n_items, q (u64), then sigma, the user
/// factors and the item factors row-major as f64.
pub fn encode_factors(f: &TruncatedFactors) -> Vec<u8> {
    let q = f.rank();
    let mut w = Writer::header(FACTORS_MAGIC);
    w.u64(f.n_users() as u64);
    w.u64(f.n_items() as u64);
    w.u64(q as u64);
    w.f64s(f.singular_values());
    (0..f.n_users()).for_each(|u| w.f64s(f.user_factor(u)));
    (0..f.n_items()).for_each(|p| w.f64s(f.item_factor(p)));
    w.0
}

pub fn decode_factors(bytes: &[u8]) -> Result<TruncatedFactors> {
    let mut r = Reader::open(bytes, FACTORS_MAGIC, "factor cache")?;
    let (m, n, q) = (r.len()?, r.len()?, r.len()?);
    let sigma = r.f64s(q)?;
    let users = r.f64s(m.checked_mul(q).context("factor cache too large")?)?;
    let items = r.f64s(n.checked_mul(q).context("factor cache too large")?)?;
    r.finish()?;
    Ok(TruncatedFactors::new(users, sigma, items)?)
}

fn name(map: &IdMap, index: u32) -> &str {
    map.name(index).unwrap_or("?")
}

/// `user<TAB>item<TAB>weight` for every edge of the fused graph.
pub fn format_g_hat(g_hat: &WeightedBipartiteGraph, ids: &IdMaps) -> String {
    let mut out = String::new();
    for (u, e) in g_hat.iter() {
        let _ = writeln!(out, "{}\t{}\t{}", name(&ids.users, u), name(&ids.items, e.item), e.weight);
    }
    out
}

/// `user<TAB>item<TAB>multiplicity` for every pair of the table.
pub fn format_psp(psp: &PositivePairTable, ids: &IdMaps) -> String {
    let mut out = String::new();
    let users = psp.pair_users();
    for (e, u) in psp.iter().zip(users) {
        let _ = writeln!(out, "{}\t{}\t{}", name(&ids.users, u), name(&ids.items, e.item), e.multiplicity);
    }
    out
}

/// Tab-separated `user<TAB>item` lines for the given index pairs.
pub fn format_pairs(pairs: impl IntoIterator<Item = (u32, u32)>, ids: &IdMaps) -> String {
    let mut out = String::new();
    for (u, p) in pairs {
        let _ = writeln!(out, "{}\t{}", name(&ids.users, u), name(&ids.items, p));
    }
    out
}

/// Maps a `user<TAB>item` ground-truth file onto the dataset's indices.
/// Unknown users or items are skipped; the count of skipped lines is
/// returned alongside the per-user sets.
pub fn read_ground_truth(text: &str, ids: &IdMaps) -> Result<(Vec<Vec<u32>>, usize)> {
    let mut sets = vec![Vec::new(); ids.users.len()];
    let mut skipped = 0;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(user), Some(item)) = (fields.next(), fields.next()) else {
            bail!("line {}: expected user<TAB>item", i + 1);
        };
        match (ids.users.index_of(user.trim()), ids.items.index_of(item.trim())) {
            (Some(u), Some(p)) => sets[u as usize].push(p),
            _ => skipped += 1,
        }
    }
    for s in &mut sets {
        s.sort_unstable();
        s.dedup();
    }
    Ok((sets, skipped))
}
