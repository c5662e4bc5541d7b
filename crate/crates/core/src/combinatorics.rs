//! Node subsets, lexicographic enumeration, and the subset indexing used by
//! the coded shuffle. Node indices are 1-based throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CdcError, Result};

/// Largest node index a subset may hold (bitmask width).
pub const MAX_NODES: usize = 64;

/// Exact binomial coefficient; 0 when `k > n`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(c).expect("binomial coefficient overflows u64")
}

/// A strictly increasing set of 1-based node indices.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeSubset(Vec<usize>);

impl NodeSubset {
    /// Sorts and validates; duplicates and index 0 are rejected.
    pub fn new(mut members: Vec<usize>) -> Result<Self> {
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(CdcError::InvalidSubset(format!(
                "duplicate member in {members:?}"
            )));
        }
        if let Some(&m) = members.iter().find(|&&m| m == 0 || m > MAX_NODES) {
            return Err(CdcError::InvalidSubset(format!(
                "node index {m} outside 1..={MAX_NODES}"
            )));
        }
        Ok(Self(members))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// `{1, ..., k}`.
    pub fn full(k: usize) -> Self {
        Self((1..=k).collect())
    }

    pub fn from_mask(mask: u64) -> Self {
        Self(
            (0..64)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| i + 1)
                .collect(),
        )
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.binary_search(&node).is_ok()
    }

    /// Bit `i - 1` is set for every member `i`.
    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &i| m | 1 << (i - 1))
    }

    pub fn is_subset_of(&self, other: &NodeSubset) -> bool {
        self.mask() & !other.mask() == 0
    }

    pub fn difference(&self, other: &NodeSubset) -> NodeSubset {
        Self::from_mask(self.mask() & !other.mask())
    }

    pub fn union(&self, other: &NodeSubset) -> NodeSubset {
        Self::from_mask(self.mask() | other.mask())
    }

    /// Zero-based position of `node` within the sorted members.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.0.binary_search(&node).ok()
    }

    /// All size-`size` subsets of this set, lexicographic.
    pub fn subsets(&self, size: usize) -> Vec<NodeSubset> {
        combinations(self.len(), size)
            .into_iter()
            .map(|idx| NodeSubset(idx.into_iter().map(|i| self.0[i]).collect()))
            .collect()
    }

    /// Comma-separated members, used as a map key in text output.
    pub fn key(&self) -> String {
        self.0
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }
}

impl fmt::Debug for NodeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for NodeSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.key())
    }
}

/// Zero-based index combinations of `0..n` taken `size` at a time, lexicographic.
fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    if size > n {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(binomial(n, size) as usize);
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.clone());
        // rightmost position that can still advance
        let Some(i) = (0..size).rev().find(|&i| idx[i] != i + n - size) else {
            break;
        };
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// All size-`size` subsets of `{1, ..., k}` in lexicographic order.
pub fn enumerate_subsets(k: usize, size: usize) -> Result<Vec<NodeSubset>> {
    if size > k {
        return Err(CdcError::InvalidSubset(format!(
            "cannot choose {size} of {k} nodes"
        )));
    }
    if k > MAX_NODES {
        return Err(CdcError::InvalidSubset(format!(
            "{k} nodes exceeds the {MAX_NODES}-node limit"
        )));
    }
    Ok(NodeSubset::full(k).subsets(size))
}

/// Position of `subset` in `enumerate_subsets(k, subset.len())`.
pub fn subset_rank(subset: &NodeSubset, k: usize) -> Result<u64> {
    let t = subset.len();
    if subset.members().last().is_some_and(|&m| m > k) {
        return Err(CdcError::InvalidSubset(format!(
            "{subset} is not a subset of 1..={k}"
        )));
    }
    let mut rank = 0u64;
    let mut prev = 0usize;
    for (i, &c) in subset.members().iter().enumerate() {
        for v in prev + 1..c {
            rank += binomial(k - v, t - i - 1);
        }
        prev = c;
    }
    Ok(rank)
}

/// Inverse of [`subset_rank`].
pub fn subset_unrank(mut rank: u64, k: usize, size: usize) -> Result<NodeSubset> {
    if size > k || rank >= binomial(k, size) {
        return Err(CdcError::InvalidSubset(format!(
            "rank {rank} out of range for {size}-subsets of {k}"
        )));
    }
    let mut members = Vec::with_capacity(size);
    let mut v = 1usize;
    for i in 0..size {
        loop {
            let block = binomial(k - v, size - i - 1);
            if rank < block {
                break;
            }
            rank -= block;
            v += 1;
        }
        members.push(v);
        v += 1;
    }
    Ok(NodeSubset(members))
}

/// The size-`r` subsets of `shuffle` that contain `node`, lexicographic.
/// There are C(|S| - 1, r - 1) of them.
pub fn subsets_containing(node: usize, shuffle: &NodeSubset, r: usize) -> Result<Vec<NodeSubset>> {
    if !shuffle.contains(node) {
        return Err(CdcError::InvalidSubset(format!(
            "node {node} is not in {shuffle}"
        )));
    }
    if r == 0 || r > shuffle.len() {
        return Err(CdcError::InvalidSubset(format!(
            "subset size {r} invalid for {shuffle}"
        )));
    }
    Ok(shuffle
        .subsets(r)
        .into_iter()
        .filter(|s| s.contains(node))
        .collect())
}

/// 1-based positions into `subsets_containing(sender, shuffle, r)` whose
/// subsets exclude `receiver`, ascending. There are C(|S| - 2, r - 1).
pub fn complement_indices(
    receiver: usize,
    sender: usize,
    shuffle: &NodeSubset,
    r: usize,
) -> Result<Vec<usize>> {
    if receiver == sender {
        return Err(CdcError::InvalidSubset(format!(
            "receiver and sender are both node {sender}"
        )));
    }
    if !shuffle.contains(receiver) {
        return Err(CdcError::InvalidSubset(format!(
            "node {receiver} is not in {shuffle}"
        )));
    }
    Ok(subsets_containing(sender, shuffle, r)?
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.contains(receiver))
        .map(|(i, _)| i + 1)
        .collect())
}
