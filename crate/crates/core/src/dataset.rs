//! Interaction logs, deterministic splits, and the sparse structures built
//! from the training split.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Dense 0-based index assignment for raw string identifiers, in order of
/// first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    names: Vec<String>,
    lookup: BTreeMap<String, u32>,
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut map = IdMap::new();
        for name in names {
            let before = map.len();
            if map.get_or_insert(&name) as usize != before {
                return Err(Error::param("id map", format!("duplicate identifier `{name}`")));
            }
        }
        Ok(map)
    }

    pub fn get_or_insert(&mut self, name: &str) -> u32 {
        if let Some(&idx) = self.lookup.get(name) {
            return idx;
        }
        let idx = self.names.len() as u32;
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), idx);
        idx
    }

    pub fn index_of(&self, name: &str) -> Option<u32> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, index: u32) -> Option<&str> {
        self.names.get(index as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMaps {
    pub users: IdMap,
    pub items: IdMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Tsv,
    Csv,
}

impl InputFormat {
    fn separator(self) -> char {
        match self {
            InputFormat::Tsv => '\t',
            InputFormat::Csv => ',',
        }
    }
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tsv" => Ok(InputFormat::Tsv),
            "csv" => Ok(InputFormat::Csv),
            other => Err(Error::UnknownVariant { kind: "input format", value: other.to_string() }),
        }
    }
}

/// De-duplicated implicit interactions over contiguous user and item index
/// spaces. Split views share the ID maps of the full dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    interactions: Vec<(u32, u32)>,
    ids: Arc<IdMaps>,
}

impl InteractionDataset {
    /// Builds a dataset from raw identifier pairs, collapsing duplicates and
    /// assigning indices in first-appearance order.
    pub fn from_raw_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut ids = IdMaps::default();
        let mut seen = BTreeSet::new();
        let mut interactions = Vec::new();
        for (user, item) in pairs {
            let u = ids.users.get_or_insert(user.as_ref());
            let p = ids.items.get_or_insert(item.as_ref());
            if seen.insert((u, p)) {
                interactions.push((u, p));
            }
        }
        if interactions.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { interactions, ids: Arc::new(ids) })
    }

    /// Builds a dataset over already-dense indices; identifiers are the
    /// decimal indices themselves.
    pub fn from_indices(n_users: usize, n_items: usize, pairs: &[(u32, u32)]) -> Result<Self> {
        let ids = IdMaps {
            users: IdMap::from_names((0..n_users).map(|u| u.to_string()).collect())?,
            items: IdMap::from_names((0..n_items).map(|p| p.to_string()).collect())?,
        };
        Self::with_ids(Arc::new(ids), pairs.iter().copied())
    }

    /// A view over `pairs` sharing existing ID maps. Duplicates are collapsed.
    pub fn with_ids(ids: Arc<IdMaps>, pairs: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let (n_users, n_items) = (ids.users.len(), ids.items.len());
        let mut seen = BTreeSet::new();
        let mut interactions = Vec::new();
        for (u, p) in pairs {
            if u as usize >= n_users {
                return Err(Error::IndexOutOfRange { index: u as usize, len: n_users });
            }
            if p as usize >= n_items {
                return Err(Error::IndexOutOfRange { index: p as usize, len: n_items });
            }
            if seen.insert((u, p)) {
                interactions.push((u, p));
            }
        }
        Ok(Self { interactions, ids })
    }

    pub fn interactions(&self) -> &[(u32, u32)] {
        &self.interactions
    }

    pub fn len(&self) -> usize {
        self.interactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interactions.is_empty()
    }

    pub fn n_users(&self) -> usize {
        self.ids.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.ids.items.len()
    }

    pub fn ids(&self) -> &Arc<IdMaps> {
        &self.ids
    }

    /// Fraction of the user-item grid that is observed.
    pub fn density(&self) -> f64 {
        self.len() as f64 / (self.n_users() as f64 * self.n_items() as f64)
    }

    /// Raw identifier pairs in interaction order.
    pub fn raw_pairs(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.interactions.iter().map(move |&(u, p)| {
            (self.ids.users.name(u).unwrap_or(""), self.ids.items.name(p).unwrap_or(""))
        })
    }

    /// Per-user sorted item lists.
    pub fn user_item_sets(&self) -> Vec<Vec<u32>> {
        let mut sets = vec![Vec::new(); self.n_users()];
        for &(u, p) in &self.interactions {
            sets[u as usize].push(p);
        }
        for set in &mut sets {
            set.sort_unstable();
        }
        sets
    }
}

/// Parses "user<sep>item[<sep>...]" lines. Lines starting with `#` and blank
/// lines are skipped; extra columns are ignored.
pub fn parse_interactions(text: &str, format: InputFormat) -> Result<InteractionDataset> {
    let sep = format.separator();
    let mut pairs = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(sep).map(str::trim);
        match (fields.next(), fields.next()) {
            (Some(u), Some(p)) if !u.is_empty() && !p.is_empty() => pairs.push((u, p)),
            _ => {
                return Err(Error::Parse {
                    line: line_no + 1,
                    message: format!("expected `user{}item`, got `{line}`", sep.escape_default()),
                })
            }
        }
    }
    InteractionDataset::from_raw_pairs(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitDataset {
    pub train: InteractionDataset,
    pub val: InteractionDataset,
    pub test: InteractionDataset,
    pub split_seed: u64,
}

/// Global uniform shuffle of all interactions followed by a proportional cut.
pub fn split_dataset(ds: &InteractionDataset, ratios: (f64, f64, f64), seed: u64) -> Result<SplitDataset> {
    let (r_train, r_val, r_test) = ratios;
    if [r_train, r_val, r_test].iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(Error::InvalidRatios(format!("{ratios:?} must all be positive")));
    }
    if libm::fabs(r_train + r_val + r_test - 1.0) > 1e-9 {
        return Err(Error::InvalidRatios(format!("{ratios:?} must sum to 1")));
    }
    let n = ds.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng::stream(seed, rng::SPLIT, 0));

    let n_train = (libm::round(n as f64 * r_train) as usize).min(n);
    let n_val = (libm::round(n as f64 * r_val) as usize).min(n - n_train);
    let pick = |range: core::ops::Range<usize>| {
        let pairs = order[range].iter().map(|&i| ds.interactions[i as usize]);
        InteractionDataset::with_ids(ds.ids.clone(), pairs)
    };
    Ok(SplitDataset {
        train: pick(0..n_train)?,
        val: pick(n_train..n_train + n_val)?,
        test: pick(n_train + n_val..n)?,
        split_seed: seed,
    })
}

/// Binary user-item matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseInteractionMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
}

impl SparseInteractionMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[u32] {
        &self.col_indices
    }

    pub fn row(&self, u: usize) -> &[u32] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    pub fn contains(&self, u: usize, p: u32) -> bool {
        u < self.n_rows && self.row(u).binary_search(&p).is_ok()
    }
}

/// Per-user item sets, read through a common interface by evaluation and
/// sampling code.
pub trait ItemSets {
    fn n_sets(&self) -> usize;
    /// Sorted items of user `u`; empty when `u` is out of range.
    fn items(&self, u: u32) -> &[u32];
}

impl ItemSets for [Vec<u32>] {
    fn n_sets(&self) -> usize {
        self.len()
    }

    fn items(&self, u: u32) -> &[u32] {
        self.get(u as usize).map_or(&[], Vec::as_slice)
    }
}

impl ItemSets for Vec<Vec<u32>> {
    fn n_sets(&self) -> usize {
        self.len()
    }

    fn items(&self, u: u32) -> &[u32] {
        self.as_slice().items(u)
    }
}

/// Unweighted user-item bipartite graph with degree tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteGraph {
    n_items: usize,
    offsets: Vec<usize>,
    adjacency: Vec<u32>,
    item_degrees: Vec<u32>,
}

impl BipartiteGraph {
    /// Builds a graph from per-user adjacency lists; lists are sorted and
    /// de-duplicated.
    pub fn from_adjacency(n_items: usize, lists: Vec<Vec<u32>>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(lists.len() + 1);
        offsets.push(0);
        let mut adjacency = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        let mut item_degrees = vec![0u32; n_items];
        for mut list in lists {
            list.sort_unstable();
            list.dedup();
            for &p in &list {
                if p as usize >= n_items {
                    return Err(Error::IndexOutOfRange { index: p as usize, len: n_items });
                }
                item_degrees[p as usize] += 1;
            }
            adjacency.extend_from_slice(&list);
            offsets.push(adjacency.len());
        }
        Ok(Self { n_items, offsets, adjacency, item_degrees })
    }

    pub fn n_users(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_edges(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adjacency[self.offsets[u]..self.offsets[u + 1]]
    }

    /// rowD(u)
    pub fn user_degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    /// colD(p)
    pub fn item_degree(&self, p: usize) -> usize {
        self.item_degrees[p] as usize
    }

    pub fn user_degrees(&self) -> Vec<usize> {
        (0..self.n_users()).map(|u| self.user_degree(u)).collect()
    }

    pub fn item_degrees(&self) -> &[u32] {
        &self.item_degrees
    }

    pub fn contains(&self, u: usize, p: u32) -> bool {
        u < self.n_users() && self.neighbors(u).binary_search(&p).is_ok()
    }
}

impl ItemSets for BipartiteGraph {
    fn n_sets(&self) -> usize {
        self.n_users()
    }

    fn items(&self, u: u32) -> &[u32] {
        if (u as usize) < self.n_users() {
            self.neighbors(u as usize)
        } else {
            &[]
        }
    }
}

/// Materializes the interaction matrix A and graph G of a training split.
pub fn build_matrix_and_graph(train: &InteractionDataset) -> Result<(SparseInteractionMatrix, BipartiteGraph)> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let graph = BipartiteGraph::from_adjacency(train.n_items(), train.user_item_sets())?;
    let matrix = SparseInteractionMatrix {
        n_rows: graph.n_users(),
        n_cols: graph.n_items(),
        row_offsets: graph.offsets.clone(),
        col_indices: graph.adjacency.clone(),
    };
    Ok((matrix, graph))
}
