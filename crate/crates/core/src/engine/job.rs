use bitvec::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::codec::Bits;

/// One intermediate value as seen by a Reduce function.
#[derive(Clone, Copy, Debug)]
pub struct ReduceInput<'a> {
    pub file: usize,
    pub value: &'a BitSlice<u8, Msb0>,
    /// Set for the empty files added to reach a multiple of the batch count.
    pub padding: bool,
}

/// A computation decomposed into per-file Map functions and per-function
/// Reduce functions.
pub trait MapReduceJob: Sync {
    /// Q
    fn functions(&self) -> usize;

    /// T
    fn value_bits(&self) -> usize;

    /// The Q intermediate values of one file, each exactly T bits.
    fn map(&self, file: usize, data: &[u8]) -> Vec<Bits>;

    /// The output of `function` from its values, ordered by file index.
    fn reduce(&self, function: usize, values: &[ReduceInput<'_>]) -> Vec<u8>;

    /// Bits of application content in a value, for useful-bit accounting.
    fn useful_bits(&self, value: &BitSlice<u8, Msb0>) -> usize {
        value.len()
    }
}

/// Pseudorandom intermediate values keyed by the file contents: a ChaCha
/// stream seeded with SHA-256 of the file is cut into Q byte-aligned chunks
/// and value q is the first T bits of chunk q. Reduce concatenates the real
/// values.
#[derive(Clone, Debug)]
pub struct SyntheticJob {
    pub functions: usize,
    pub value_bits: usize,
}

impl SyntheticJob {
    pub fn new(functions: usize, value_bits: usize) -> Self {
        Self {
            functions,
            value_bits,
        }
    }
}

impl MapReduceJob for SyntheticJob {
    fn functions(&self) -> usize {
        self.functions
    }

    fn value_bits(&self) -> usize {
        self.value_bits
    }

    fn map(&self, _file: usize, data: &[u8]) -> Vec<Bits> {
        let seed: [u8; 32] = Sha256::digest(data).into();
        let width = self.value_bits.div_ceil(8);
        let mut buf = vec![0u8; width * self.functions];
        ChaCha8Rng::from_seed(seed).fill_bytes(&mut buf);
        buf.chunks_exact(width)
            .map(|chunk| {
                let mut v = Bits::from_slice(chunk);
                v.truncate(self.value_bits);
                v
            })
            .collect()
    }

    fn reduce(&self, _function: usize, values: &[ReduceInput<'_>]) -> Vec<u8> {
        let mut out = Bits::new();
        for v in values.iter().filter(|v| !v.padding) {
            out.extend_from_bitslice(v.value);
        }
        out.set_uninitialized(false);
        out.into_vec()
    }
}

/// Counts words by bucket: function q totals the whitespace-separated words
/// whose FNV-1a hash falls in bucket q. Values are T-bit big-endian counts.
#[derive(Clone, Debug)]
pub struct WordCountJob {
    pub functions: usize,
    pub value_bits: usize,
}

impl WordCountJob {
    pub fn new(functions: usize, value_bits: usize) -> Self {
        assert!((1..=64).contains(&value_bits), "counts are at most 64 bits");
        Self {
            functions,
            value_bits,
        }
    }

    pub fn bucket(&self, word: &[u8]) -> usize {
        let hash = word.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
            (h ^ u64::from(b.to_ascii_lowercase())).wrapping_mul(0x0000_0100_0000_01b3)
        });
        (hash % self.functions as u64) as usize + 1
    }

    fn encode(&self, count: u64) -> Bits {
        let mut v = Bits::repeat(false, self.value_bits);
        v.store_be(count);
        v
    }
}

impl MapReduceJob for WordCountJob {
    fn functions(&self) -> usize {
        self.functions
    }

    fn value_bits(&self) -> usize {
        self.value_bits
    }

    fn map(&self, _file: usize, data: &[u8]) -> Vec<Bits> {
        let mut counts = vec![0u64; self.functions];
        for word in data
            .split(u8::is_ascii_whitespace)
            .filter(|w| !w.is_empty())
        {
            counts[self.bucket(word) - 1] += 1;
        }
        counts.into_iter().map(|c| self.encode(c)).collect()
    }

    fn reduce(&self, _function: usize, values: &[ReduceInput<'_>]) -> Vec<u8> {
        let total: u64 = values.iter().map(|v| v.value.load_be::<u64>()).sum();
        total.to_be_bytes().to_vec()
    }
}
