//! Closed-form communication loads, converse lower bounds over file
//! assignment profiles, and the counting identity behind the coded scheme.

use std::io::Write;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::combinatorics::binomial;
use crate::error::{CdcError, Result};
use crate::placement::{holder_masks, FileAssignment};
use crate::rational::{format_rational, integer, ratio, Rational};

fn big_binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::from(1u32);
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn check_load(r: &Rational, nodes: usize) -> Result<()> {
    if nodes == 0 || *r < integer(1) || *r > integer(nodes) {
        return Err(CdcError::InvalidJob(format!(
            "r = {} outside [1, {nodes}]",
            format_rational(r)
        )));
    }
    Ok(())
}

/// 1 - r/K.
pub fn l_uncoded(r: &Rational, nodes: usize) -> Result<Rational> {
    check_load(r, nodes)?;
    Ok(integer(1) - r / integer(nodes))
}

/// The coded load at integer r with each function reduced at s nodes:
/// sum over l of l C(K,l) C(l-2,r-1) C(r,l-s) / (r C(K,r) C(K,s)), for
/// max(r+1, s) <= l <= min(r+s, K).
pub fn l_coded(r: usize, s: usize, nodes: usize) -> Result<Rational> {
    check_load(&integer(r), nodes)?;
    if s == 0 || s > nodes {
        return Err(CdcError::InvalidJob(format!("s = {s} outside 1..={nodes}")));
    }
    let k = nodes;
    let mut num = BigInt::zero();
    for l in (r + 1).max(s)..=(r + s).min(k) {
        num += BigInt::from(l)
            * big_binomial(k, l)
            * big_binomial(l - 2, r - 1)
            * big_binomial(r, l - s);
    }
    let den = BigInt::from(r) * big_binomial(k, r) * big_binomial(k, s);
    Ok(Rational::new(num, den))
}

/// Lower convex envelope of the integer-r points: linear interpolation
/// between floor(r) and ceil(r).
pub fn l_coded_envelope(r: &Rational, s: usize, nodes: usize) -> Result<Rational> {
    check_load(r, nodes)?;
    let lo = r.floor().to_integer().to_usize().expect("checked range");
    if r.is_integer() {
        return l_coded(lo, s, nodes);
    }
    let frac = r - integer(lo);
    let a = l_coded(lo, s, nodes)?;
    let b = l_coded(lo + 1, s, nodes)?;
    Ok(&a + (b - &a) * frac)
}

/// File counts by replication: `a[j - 1]` files are mapped at exactly j nodes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AProfile {
    pub nodes: usize,
    pub files: usize,
    pub a: Vec<u64>,
}

impl AProfile {
    pub fn new(nodes: usize, a: Vec<u64>) -> Result<Self> {
        if a.len() != nodes {
            return Err(CdcError::InvalidJob(format!(
                "profile has {} entries for {nodes} nodes",
                a.len()
            )));
        }
        let files = a.iter().sum::<u64>() as usize;
        if files == 0 {
            return Err(CdcError::InvalidJob("profile covers no files".into()));
        }
        Ok(Self { nodes, files, a })
    }

    /// All `files` at exactly `r` nodes.
    pub fn canonical(nodes: usize, r: usize, files: usize) -> Result<Self> {
        if r == 0 || r > nodes {
            return Err(CdcError::InvalidJob(format!("r = {r} outside 1..={nodes}")));
        }
        let mut a = vec![0; nodes];
        a[r - 1] = files as u64;
        Self::new(nodes, a)
    }

    pub fn count(&self, j: usize) -> u64 {
        self.a[j - 1]
    }

    /// Sum of j a_j over N.
    pub fn computation_load(&self) -> Rational {
        let weighted: u64 = self
            .a
            .iter()
            .enumerate()
            .map(|(i, &c)| (i as u64 + 1) * c)
            .sum();
        ratio(weighted, self.files as u64)
    }
}

/// Profile of a file assignment, padding files included.
pub fn count_a_profile(fa: &FileAssignment) -> AProfile {
    let mut a = vec![0u64; fa.nodes()];
    for n in 1..=fa.total_files() {
        a[fa.holders(n).len() - 1] += 1;
    }
    AProfile::new(fa.nodes(), a).expect("assignments cover at least one file")
}

/// Profile of explicit per-node file sets over files `1..=files`.
pub fn a_profile_from_sets(files: usize, sets: &[Vec<usize>]) -> Result<AProfile> {
    let mut a = vec![0u64; sets.len()];
    for mask in holder_masks(files, sets)? {
        a[mask.count_ones() as usize - 1] += 1;
    }
    AProfile::new(sets.len(), a)
}

/// Any shuffle for an assignment with this profile (s = 1) sends at least
/// sum_j (a_j / N) (K - j) / (K j).
pub fn lower_bound_lemma1(profile: &AProfile) -> Rational {
    let k = profile.nodes;
    (1..=k)
        .map(|j| ratio(profile.count(j), profile.files as u64) * ratio(k - j, k * j))
        .sum()
}

/// Cascaded version: sum_j (a_j / N) sum_l C(K-j, l-j) C(j, l-s) / C(K, s)
/// * (l - j) / (l - 1), over max(j, s) <= l <= min(j + s, K).
pub fn lower_bound_lemma2(profile: &AProfile, s: usize) -> Result<Rational> {
    let k = profile.nodes;
    if s == 0 || s > k {
        return Err(CdcError::InvalidJob(format!("s = {s} outside 1..={k}")));
    }
    let ks = big_binomial(k, s);
    let mut total = Rational::zero();
    for j in 1..=k {
        if profile.count(j) == 0 {
            continue;
        }
        let mut inner = Rational::zero();
        for l in j.max(s)..=(j + s).min(k) {
            if l == j {
                continue;
            }
            inner += Rational::new(
                big_binomial(k - j, l - j) * big_binomial(j, l - s) * BigInt::from(l - j),
                &ks * BigInt::from(l - 1),
            );
        }
        total += ratio(profile.count(j), profile.files as u64) * inner;
    }
    Ok(total)
}

/// Both sides of sum_l C(s-1, l-r-1) C(K-s, l-s) = C(K-1, r), summed over
/// the round sizes, with one file per batch.
pub fn counting_identity(nodes: usize, r: usize, s: usize) -> (u64, u64, bool) {
    let lhs = ((r + 1).max(s)..=(r + s).min(nodes))
        .map(|l| binomial(s - 1, l - r - 1) * binomial(nodes - s, l - s))
        .sum();
    let rhs = binomial(nodes - 1, r);
    (lhs, rhs, lhs == rhs)
}

/// One row of a load/bound sweep.
#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub s: usize,
    pub r: String,
    pub l_uncoded: String,
    pub l_coded: String,
    pub bound: String,
}

/// Rows for integer r = 1..=K: uncoded load, coded load, and the converse
/// bound at the canonical profile.
pub fn bound_table(nodes: usize, s: usize) -> Result<Vec<BoundRow>> {
    (1..=nodes)
        .map(|r| {
            let profile = AProfile::canonical(nodes, r, 1)?;
            Ok(BoundRow {
                k: nodes,
                s,
                r: r.to_string(),
                l_uncoded: format_rational(&l_uncoded(&integer(r), nodes)?),
                l_coded: format_rational(&l_coded(r, s, nodes)?),
                bound: format_rational(&lower_bound_lemma2(&profile, s)?),
            })
        })
        .collect()
}

pub fn write_bound_csv(rows: &[BoundRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
