use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::rational::{format_rational, ratio, Rational};

/// How the shuffle phase is carried out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Coded multicast rounds; segment lengths must divide exactly.
    Coded,
    /// Every missing value sent once, in the clear, from its lowest-index holder.
    Uncoded,
    /// Coded rounds with zero-padding of ragged segments, for arbitrary placements.
    RandomPlacementCoded,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Coded => "coded",
            Strategy::Uncoded => "uncoded",
            Strategy::RandomPlacementCoded => "random_placement_coded",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RoundStats {
    pub messages: usize,
    pub bits: u64,
}

/// Exact bit accounting for one shuffle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoadReport {
    pub strategy: Strategy,
    pub nodes: usize,
    pub computation_load: Rational,
    pub reduce_replication: usize,
    pub functions: usize,
    /// N, unpadded.
    pub files: usize,
    /// N-bar.
    pub padded_files: usize,
    pub value_bits: usize,
    pub total_bits: u64,
    pub useful_bits: u64,
    pub messages: usize,
    /// Keyed by multicast group size (the shuffle subset, or sender plus
    /// recipients for uncoded messages).
    pub rounds: BTreeMap<usize, RoundStats>,
    /// Bits sent by node k at index k - 1.
    pub per_sender: Vec<u64>,
}

impl LoadReport {
    fn normalized(&self, bits: u64, files: usize) -> Rational {
        ratio(bits, (self.functions * files * self.value_bits) as u64)
    }

    /// Bits sent over QNT with the unpadded N.
    pub fn load(&self) -> Rational {
        self.normalized(self.total_bits, self.files)
    }

    /// Bits sent over Q * N-bar * T.
    pub fn padded_load(&self) -> Rational {
        self.normalized(self.total_bits, self.padded_files)
    }

    /// Application-content bits over QNT.
    pub fn useful_load(&self) -> Rational {
        self.normalized(self.useful_bits, self.files)
    }

    /// Breakdowns sum to the total and the load is within [0, QK].
    pub fn is_consistent(&self) -> bool {
        let rounds: u64 = self.rounds.values().map(|r| r.bits).sum();
        let msgs: usize = self.rounds.values().map(|r| r.messages).sum();
        let senders: u64 = self.per_sender.iter().sum();
        rounds == self.total_bits
            && senders == self.total_bits
            && msgs == self.messages
            && self.load() <= ratio((self.functions * self.nodes) as u64, 1u64)
    }

    pub fn csv_row(&self) -> LoadRow {
        let load = self.load();
        LoadRow {
            strategy: self.strategy.name(),
            k: self.nodes,
            r: format_rational(&self.computation_load),
            s: self.reduce_replication,
            q: self.functions,
            n: self.files,
            t: self.value_bits,
            total_bits: self.total_bits,
            load_num: load.numer().to_string(),
            load_den: load.denom().to_string(),
        }
    }
}

/// One CSV line of a [`LoadReport`].
#[derive(Clone, Debug, Serialize)]
pub struct LoadRow {
    pub strategy: &'static str,
    #[serde(rename = "K")]
    pub k: usize,
    pub r: String,
    pub s: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub total_bits: u64,
    pub load_num: String,
    pub load_den: String,
}

/// Writes `strategy,K,r,s,Q,N,T,total_bits,load_num,load_den` rows with a header.
pub fn write_load_csv<'a>(
    reports: impl IntoIterator<Item = &'a LoadReport>,
    out: impl Write,
) -> crate::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(r.csv_row())?;
    }
    w.flush()?;
    Ok(())
}
