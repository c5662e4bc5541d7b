//! Map and Reduce task assignment: job parameters, empty-file padding, the
//! combinatorial file placement, the symmetric Reduce assignment, and the
//! split used for non-integer computation loads.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde_json::{json, Value};

use crate::combinatorics::{binomial, enumerate_subsets, NodeSubset};
use crate::error::{CdcError, Result};
use crate::rational::{as_usize, format_rational, integer, Rational};

/// Node limit imposed by the 32-bit subset mask of the wire format.
pub const MAX_CLUSTER_NODES: usize = 32;

/// The job tuple (K, Q, N, r, s, T).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JobSpec {
    /// K
    pub nodes: usize,
    /// Q
    pub functions: usize,
    /// N, before padding
    pub files: usize,
    /// r, average number of nodes that map each file
    pub computation_load: Rational,
    /// s, number of nodes that reduce each function
    pub reduce_replication: usize,
    /// T, bits per intermediate value
    pub value_bits: usize,
}

impl JobSpec {
    pub fn new(
        nodes: usize,
        functions: usize,
        files: usize,
        load: usize,
        reduce_replication: usize,
        value_bits: usize,
    ) -> Result<Self> {
        Self::with_load(
            nodes,
            functions,
            files,
            integer(load),
            reduce_replication,
            value_bits,
        )
    }

    pub fn with_load(
        nodes: usize,
        functions: usize,
        files: usize,
        computation_load: Rational,
        reduce_replication: usize,
        value_bits: usize,
    ) -> Result<Self> {
        let spec = Self {
            nodes,
            functions,
            files,
            computation_load,
            reduce_replication,
            value_bits,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.nodes;
        if k == 0 || k > MAX_CLUSTER_NODES {
            return Err(CdcError::InvalidJob(format!(
                "K = {k} outside 1..={MAX_CLUSTER_NODES}"
            )));
        }
        if self.functions == 0 || self.files == 0 || self.value_bits == 0 {
            return Err(CdcError::InvalidJob("Q, N and T must be positive".into()));
        }
        if self.computation_load < integer(1) || self.computation_load > integer(k) {
            return Err(CdcError::InvalidJob(format!(
                "r = {} outside [1, {k}]",
                format_rational(&self.computation_load)
            )));
        }
        if self.reduce_replication == 0 || self.reduce_replication > k {
            return Err(CdcError::InvalidJob(format!(
                "s = {} outside 1..={k}",
                self.reduce_replication
            )));
        }
        Ok(())
    }

    /// r when it is an integer.
    pub fn integer_load(&self) -> Option<usize> {
        as_usize(&self.computation_load)
    }

    /// eta2 = Q / C(K, s).
    pub fn reduce_batch_size(&self) -> Result<usize> {
        let groups = binomial(self.nodes, self.reduce_replication) as usize;
        if !self.functions.is_multiple_of(groups) {
            let lower = self.functions / groups * groups;
            let upper = lower + groups;
            return Err(CdcError::Divisibility(format!(
                "Q = {} is not a multiple of C({}, {}) = {groups}; nearest valid Q: {}",
                self.functions,
                self.nodes,
                self.reduce_replication,
                if lower == 0 {
                    upper.to_string()
                } else {
                    format!("{lower} or {upper}")
                }
            )));
        }
        Ok(self.functions / groups)
    }
}

/// Returns (padded file count, files per batch) for an integer load `r`.
pub fn pad_files(files: usize, nodes: usize, r: usize) -> (usize, usize) {
    let groups = binomial(nodes, r) as usize;
    let batch = files.div_ceil(groups);
    (groups * batch, batch)
}

/// Deals `files` to the size-`r` subsets of `{1..=nodes}` in enumeration
/// order, `files.len() / C(nodes, r)` consecutive files per subset.
pub fn deal_files(
    nodes: usize,
    r: usize,
    files: &[usize],
) -> Result<BTreeMap<NodeSubset, Vec<usize>>> {
    let subsets = enumerate_subsets(nodes, r)?;
    if r == 0 || !files.len().is_multiple_of(subsets.len()) {
        return Err(CdcError::Divisibility(format!(
            "{} files cannot be split evenly over C({nodes}, {r}) = {} batches",
            files.len(),
            subsets.len()
        )));
    }
    let batch = files.len() / subsets.len();
    Ok(subsets
        .into_iter()
        .zip(files.chunks(batch.max(1)))
        .map(|(s, chunk)| (s, chunk.to_vec()))
        .collect())
}

/// Which nodes map which files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FileAssignment {
    nodes: usize,
    real_files: usize,
    batches: BTreeMap<NodeSubset, Vec<usize>>,
    holders: Vec<NodeSubset>,
    per_node: Vec<BTreeSet<usize>>,
}

impl FileAssignment {
    /// Builds from holder-set batches. The batches must partition
    /// `1..=total`; files above `real_files` are padding.
    pub fn from_batches(
        nodes: usize,
        real_files: usize,
        batches: BTreeMap<NodeSubset, Vec<usize>>,
    ) -> Result<Self> {
        let total: usize = batches.values().map(Vec::len).sum();
        if total < real_files {
            return Err(CdcError::InvalidJob(format!(
                "{total} assigned files cannot cover {real_files} real files"
            )));
        }
        let mut holders: Vec<Option<NodeSubset>> = vec![None; total];
        let mut per_node = vec![BTreeSet::new(); nodes];
        for (subset, files) in &batches {
            if subset.is_empty() || subset.members().last().is_some_and(|&m| m > nodes) {
                return Err(CdcError::InvalidSubset(format!(
                    "batch key {subset} is not a nonempty subset of 1..={nodes}"
                )));
            }
            for &n in files {
                let slot = n
                    .checked_sub(1)
                    .and_then(|i| holders.get_mut(i))
                    .ok_or_else(|| {
                        CdcError::InvalidJob(format!("file index {n} outside 1..={total}"))
                    })?;
                if slot.is_some() {
                    return Err(CdcError::InvalidJob(format!(
                        "file {n} appears in two batches"
                    )));
                }
                *slot = Some(subset.clone());
                for &k in subset.members() {
                    per_node[k - 1].insert(n);
                }
            }
        }
        let holders = holders
            .into_iter()
            .map(|h| h.expect("counted files fill every slot"))
            .collect();
        Ok(Self {
            nodes,
            real_files,
            batches,
            holders,
            per_node,
        })
    }

    /// Builds from explicit per-node file sets `M_1, ..., M_K` over files
    /// `1..=files`. Every file must be mapped somewhere.
    pub fn from_node_sets(files: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let holders = holder_masks(files, sets)?;
        let mut batches: BTreeMap<NodeSubset, Vec<usize>> = BTreeMap::new();
        for (i, mask) in holders.into_iter().enumerate() {
            batches
                .entry(NodeSubset::from_mask(mask))
                .or_default()
                .push(i + 1);
        }
        Self::from_batches(sets.len(), files, batches)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// N-bar, padding included.
    pub fn total_files(&self) -> usize {
        self.holders.len()
    }

    /// N, padding excluded.
    pub fn real_files(&self) -> usize {
        self.real_files
    }

    pub fn is_padding(&self, file: usize) -> bool {
        file > self.real_files
    }

    pub fn batches(&self) -> &BTreeMap<NodeSubset, Vec<usize>> {
        &self.batches
    }

    /// Files mapped by exactly `subset`; empty when there are none.
    pub fn batch(&self, subset: &NodeSubset) -> &[usize] {
        self.batches.get(subset).map_or(&[], Vec::as_slice)
    }

    /// Nodes that map `file`.
    pub fn holders(&self, file: usize) -> &NodeSubset {
        &self.holders[file - 1]
    }

    /// M_k.
    pub fn files_of(&self, node: usize) -> &BTreeSet<usize> {
        &self.per_node[node - 1]
    }

    pub fn maps(&self, node: usize, file: usize) -> bool {
        self.holders[file - 1].contains(node)
    }

    /// Distinct batch sizes present (the per-file replication levels).
    pub fn replication_levels(&self) -> BTreeSet<usize> {
        self.batches
            .iter()
            .filter(|(_, f)| !f.is_empty())
            .map(|(s, _)| s.len())
            .collect()
    }

    /// Sum of |M_k| over N-bar.
    pub fn computation_load(&self) -> Rational {
        let total: usize = self.per_node.iter().map(BTreeSet::len).sum();
        Rational::new(total.into(), self.total_files().max(1).into())
    }

    /// Sorted-key JSON: `{"nodes", "files", "padded_files", "batches", "per_node"}`.
    pub fn to_canonical_json(&self) -> String {
        let batches: BTreeMap<String, &Vec<usize>> =
            self.batches.iter().map(|(s, f)| (s.key(), f)).collect();
        let per_node: BTreeMap<String, Vec<usize>> = self
            .per_node
            .iter()
            .enumerate()
            .map(|(k, f)| (format!("{:02}", k + 1), f.iter().copied().collect()))
            .collect();
        canonical(json!({
            "nodes": self.nodes,
            "files": self.real_files,
            "padded_files": self.total_files(),
            "batches": batches,
            "per_node": per_node,
        }))
    }
}

fn canonical(v: Value) -> String {
    // serde_json maps are BTreeMap-backed, so keys serialize sorted
    serde_json::to_string(&v).expect("JSON values always serialize")
}

/// Per-file holder bitmasks from per-node file sets; errors on uncovered files.
pub(crate) fn holder_masks(files: usize, sets: &[Vec<usize>]) -> Result<Vec<u64>> {
    if sets.len() > MAX_CLUSTER_NODES {
        return Err(CdcError::InvalidJob(format!(
            "{} nodes exceeds the {MAX_CLUSTER_NODES}-node limit",
            sets.len()
        )));
    }
    let mut holders = vec![0u64; files];
    for (k, set) in sets.iter().enumerate() {
        for &n in set {
            let slot = n
                .checked_sub(1)
                .and_then(|i| holders.get_mut(i))
                .ok_or_else(|| {
                    CdcError::InvalidJob(format!("file index {n} outside 1..={files}"))
                })?;
            *slot |= 1 << k;
        }
    }
    if let Some(i) = holders.iter().position(|&m| m == 0) {
        return Err(CdcError::InvalidJob(format!(
            "file {} is not mapped by any node",
            i + 1
        )));
    }
    Ok(holders)
}

/// Canonical Map placement for an integer computation load, with empty-file
/// padding up to a multiple of C(K, r).
pub fn assign_map_tasks(spec: &JobSpec) -> Result<FileAssignment> {
    let r = spec.integer_load().ok_or_else(|| {
        CdcError::InvalidJob(format!(
            "canonical placement needs an integer load, got r = {}; use assign_split_tasks",
            format_rational(&spec.computation_load)
        ))
    })?;
    let (padded, _) = pad_files(spec.files, spec.nodes, r);
    let files: Vec<usize> = (1..=padded).collect();
    FileAssignment::from_batches(spec.nodes, spec.files, deal_files(spec.nodes, r, &files)?)
}

/// One replication level of a (possibly split) placement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubJob {
    pub replication: usize,
    /// Global file indices, padding included.
    pub files: Vec<usize>,
    /// How many of `files` are real (the rest are padding).
    pub real_files: usize,
}

/// A computation load expressed as a mix of two integer loads.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadSplit {
    /// Weight of the lower load, `ceil(r) - r`.
    pub alpha: Rational,
    pub parts: Vec<SubJob>,
}

impl LoadSplit {
    pub fn padded_files(&self) -> usize {
        self.parts.iter().map(|p| p.files.len()).sum()
    }
}

/// Splits the files between `floor(r)` and `ceil(r)`: the low part gets
/// `alpha * N` rounded down to a multiple of C(K, floor r), the high part gets
/// the rest, padded up to a multiple of C(K, ceil r). Integer loads give a
/// single part.
pub fn split_noninteger_r(spec: &JobSpec) -> Result<LoadSplit> {
    spec.validate()?;
    let k = spec.nodes;
    let n = spec.files;
    if let Some(r) = spec.integer_load() {
        let (padded, _) = pad_files(n, k, r);
        return Ok(LoadSplit {
            alpha: Rational::one(),
            parts: vec![SubJob {
                replication: r,
                files: (1..=padded).collect(),
                real_files: n,
            }],
        });
    }
    let r = &spec.computation_load;
    let low = r.floor().to_integer().to_usize().expect("validated load");
    let high = low + 1;
    let alpha = integer(high) - r;
    let low_groups = binomial(k, low) as usize;
    let high_groups = binomial(k, high) as usize;
    let target = (&alpha * integer(n)).floor().to_integer();
    let low_count = (target.to_usize().expect("bounded by N") / low_groups) * low_groups;
    let high_real = n - low_count;
    let high_padded = high_real.div_ceil(high_groups) * high_groups;
    let mut parts = Vec::new();
    if low_count > 0 {
        parts.push(SubJob {
            replication: low,
            files: (1..=low_count).collect(),
            real_files: low_count,
        });
    }
    if high_real > 0 {
        let mut files: Vec<usize> = (low_count + 1..=n).collect();
        files.extend(n + 1..=n + (high_padded - high_real));
        parts.push(SubJob {
            replication: high,
            files,
            real_files: high_real,
        });
    }
    Ok(LoadSplit { alpha, parts })
}

/// Placement for any load: canonical dealing per part of [`split_noninteger_r`].
pub fn assign_split_tasks(spec: &JobSpec) -> Result<FileAssignment> {
    let split = split_noninteger_r(spec)?;
    let mut batches = BTreeMap::new();
    for part in &split.parts {
        batches.extend(deal_files(spec.nodes, part.replication, &part.files)?);
    }
    FileAssignment::from_batches(spec.nodes, spec.files, batches)
}

/// Which nodes reduce which functions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReduceAssignment {
    nodes: usize,
    replication: usize,
    batches: BTreeMap<NodeSubset, Vec<usize>>,
    reducers: Vec<NodeSubset>,
    per_node: Vec<BTreeSet<usize>>,
}

impl ReduceAssignment {
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// s
    pub fn replication(&self) -> usize {
        self.replication
    }

    pub fn functions(&self) -> usize {
        self.reducers.len()
    }

    pub fn batches(&self) -> &BTreeMap<NodeSubset, Vec<usize>> {
        &self.batches
    }

    /// Functions reduced by exactly `subset`.
    pub fn batch(&self, subset: &NodeSubset) -> &[usize] {
        self.batches.get(subset).map_or(&[], Vec::as_slice)
    }

    /// The nodes that reduce `function`.
    pub fn reducers(&self, function: usize) -> &NodeSubset {
        &self.reducers[function - 1]
    }

    /// W_k.
    pub fn functions_of(&self, node: usize) -> &BTreeSet<usize> {
        &self.per_node[node - 1]
    }

    pub fn to_canonical_json(&self) -> String {
        let batches: BTreeMap<String, &Vec<usize>> =
            self.batches.iter().map(|(s, f)| (s.key(), f)).collect();
        let per_node: BTreeMap<String, Vec<usize>> = self
            .per_node
            .iter()
            .enumerate()
            .map(|(k, f)| (format!("{:02}", k + 1), f.iter().copied().collect()))
            .collect();
        canonical(json!({
            "nodes": self.nodes,
            "functions": self.functions(),
            "replication": self.replication,
            "batches": batches,
            "per_node": per_node,
        }))
    }
}

/// Deals functions to size-s subsets in enumeration order, Q / C(K, s) each.
pub fn assign_reduce_tasks(spec: &JobSpec) -> Result<ReduceAssignment> {
    let per_batch = spec.reduce_batch_size()?;
    let subsets = enumerate_subsets(spec.nodes, spec.reduce_replication)?;
    let mut batches = BTreeMap::new();
    let mut reducers = Vec::with_capacity(spec.functions);
    let mut per_node = vec![BTreeSet::new(); spec.nodes];
    for (i, subset) in subsets.into_iter().enumerate() {
        let functions: Vec<usize> = (i * per_batch + 1..=(i + 1) * per_batch).collect();
        for &q in &functions {
            reducers.push(subset.clone());
            for &k in subset.members() {
                per_node[k - 1].insert(q);
            }
        }
        batches.insert(subset, functions);
    }
    Ok(ReduceAssignment {
        nodes: spec.nodes,
        replication: spec.reduce_replication,
        batches,
        reducers,
        per_node,
    })
}

/// Least common multiple of C(K, r) over `loads`, the smallest file count
/// that needs no padding at any of them.
pub fn file_quantum(nodes: usize, loads: impl IntoIterator<Item = usize>) -> u64 {
    loads
        .into_iter()
        .map(|r| binomial(nodes, r))
        .fold(1u64, |acc, c| acc.lcm(&c))
}
