//! The coded shuffle: exclusive sets, segmentation, Vandermonde-coded
//! multicast messages, decoding, and the message wire format.
//!
//! Coding is word-wise: a segment of `L` bits is read as `L / m` symbols of
//! GF(2^m) and every message position is an independent linear combination.
//! The word size is a pure function of the segment length and the number of
//! combined segments, so senders and receivers agree without negotiation.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::RangeInclusive;
use std::sync::OnceLock;

use bitvec::field::BitField;
use bitvec::prelude::*;
use num_integer::Integer;

use crate::combinatorics::{binomial, complement_indices, subsets_containing, NodeSubset};
use crate::error::{CdcError, Result};
use crate::gf2m::{vandermonde_matrix, vandermonde_solve, GaloisField, MAX_DEGREE};
use crate::placement::{FileAssignment, ReduceAssignment};

/// Bit strings, most significant bit of each byte first.
pub type Bits = BitVec<u8, Msb0>;

/// A copy starting at bit 0 of its own storage, with zeroed tail bits.
/// (`BitVec::from_bitslice` keeps the source's bit offset, which breaks
/// byte-wise access.)
pub fn aligned(bits: &BitSlice<u8, Msb0>) -> Bits {
    let mut out = Bits::with_capacity(bits.len());
    out.extend_from_bitslice(bits);
    out.set_uninitialized(false);
    out
}

/// Size of the fixed wire header preceding every payload.
pub const WIRE_HEADER_BYTES: usize = 12;

/// Shuffle subset sizes for which coded rounds run: max(r+1, s) ..= min(r+s, K).
pub fn round_sizes(nodes: usize, r: usize, s: usize) -> RangeInclusive<usize> {
    (r + 1).max(s)..=(r + s).min(nodes)
}

/// Number of segments each sender combines in a round over `|S|` nodes.
pub fn segments_per_sender(shuffle_size: usize, r: usize) -> usize {
    binomial(shuffle_size - 1, r - 1) as usize
}

/// Number of messages each sender multicasts in a round over `|S|` nodes.
pub fn messages_per_sender(shuffle_size: usize, r: usize) -> usize {
    binomial(shuffle_size - 2, r - 1) as usize
}

/// Intermediate values known exactly by `owners` and needed by every node of
/// `shuffle` outside `owners`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExclusiveSet {
    pub shuffle: NodeSubset,
    pub owners: NodeSubset,
    /// (function, file), lexicographic.
    pub values: Vec<(usize, usize)>,
}

impl ExclusiveSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One exclusive set per size-`r` owner subset of `shuffle`, in enumeration
/// order of the owners.
pub fn build_exclusive_sets(
    shuffle: &NodeSubset,
    r: usize,
    fa: &FileAssignment,
    ra: &ReduceAssignment,
) -> Result<Vec<ExclusiveSet>> {
    let s = ra.replication();
    let sizes = round_sizes(fa.nodes(), r, s);
    if !sizes.contains(&shuffle.len()) {
        return Err(CdcError::InvalidSubset(format!(
            "|{shuffle}| = {} outside the round range {}..={} for r = {r}, s = {s}",
            shuffle.len(),
            sizes.start(),
            sizes.end()
        )));
    }
    Ok(shuffle
        .subsets(r)
        .into_iter()
        .map(|owners| {
            let rest = shuffle.difference(&owners);
            let mut functions: Vec<usize> = owners
                .subsets(s - rest.len())
                .iter()
                .flat_map(|extra| ra.batch(&rest.union(extra)).iter().copied())
                .collect();
            functions.sort_unstable();
            let files = fa.batch(&owners);
            let values = functions
                .iter()
                .flat_map(|&q| files.iter().map(move |&n| (q, n)))
                .collect();
            ExclusiveSet {
                shuffle: shuffle.clone(),
                owners,
                values,
            }
        })
        .collect())
}

/// How segments of unequal or awkward length are handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SegmentMode {
    /// Lengths must divide exactly; any mismatch is an error.
    Strict,
    /// Zero-pad to the next usable length.
    ZeroPad,
}

/// An exclusive-set payload split into one segment per owner.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentGroup {
    pub owners: NodeSubset,
    /// Unpadded payload length.
    pub payload_bits: usize,
    /// In owner order; all the same length.
    pub segments: Vec<Bits>,
    /// Application-level content per segment, for useful-bit accounting.
    pub useful_bits: usize,
}

impl SegmentGroup {
    pub fn segment_bits(&self) -> usize {
        self.segments.first().map_or(0, BitVec::len)
    }

    /// The segment `node` is responsible for sending.
    pub fn segment_for(&self, node: usize) -> Option<&Bits> {
        self.owners.position(node).map(|i| &self.segments[i])
    }

    /// Reassembles the payload.
    pub fn concat(&self) -> Bits {
        let mut out = Bits::with_capacity(self.segment_bits() * self.segments.len());
        for seg in &self.segments {
            out.extend_from_bitslice(seg);
        }
        out.truncate(self.payload_bits);
        out
    }
}

/// Splits `payload` (the concatenated values of `es`, `value_bits` each) into
/// `|owners|` equal segments.
pub fn segment(
    es: &ExclusiveSet,
    payload: &BitSlice<u8, Msb0>,
    value_bits: usize,
    mode: SegmentMode,
) -> Result<SegmentGroup> {
    let r = es.owners.len();
    let expected = es.len() * value_bits;
    if payload.len() != expected {
        return Err(CdcError::Segmentation(format!(
            "payload for owners {} has {} bits, expected {} values of {value_bits} bits",
            es.owners,
            payload.len(),
            es.len()
        )));
    }
    if mode == SegmentMode::Strict && !expected.is_multiple_of(r) {
        let step = r / r.gcd(&es.len());
        return Err(CdcError::Segmentation(format!(
            "{expected} bits cannot be split into {r} equal segments; \
             T must be a multiple of {step} (smallest valid T >= {value_bits} is {})",
            value_bits.next_multiple_of(step)
        )));
    }
    let len = expected.div_ceil(r);
    let segments = (0..r)
        .map(|i| {
            let lo = (i * len).min(expected);
            let hi = ((i + 1) * len).min(expected);
            let mut seg = aligned(&payload[lo..hi]);
            seg.resize(len, false);
            seg
        })
        .collect();
    Ok(SegmentGroup {
        owners: es.owners.clone(),
        payload_bits: expected,
        segments,
        useful_bits: len,
    })
}

/// Word layout of one round's messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CodingWord {
    /// A single message per sender: the XOR of its segments.
    Xor,
    /// Vandermonde combinations over GF(2^m), `m` bits per symbol.
    Field(u32),
}

/// Deterministic word choice for `segment_bits`-bit segments combining `n1`
/// segments into `n2` messages. Prefers bytes; otherwise the smallest degree
/// that divides the length and has at least `n1` nonzero elements.
pub fn coding_word(segment_bits: usize, n1: usize, n2: usize) -> Result<CodingWord> {
    if n2 <= 1 {
        return Ok(CodingWord::Xor);
    }
    let fits = |m: u32| segment_bits.is_multiple_of(m as usize) && (1u64 << m) > n1 as u64;
    if fits(8) {
        return Ok(CodingWord::Field(8));
    }
    (1..=MAX_DEGREE)
        .find(|&m| fits(m))
        .map(CodingWord::Field)
        .ok_or(CdcError::FieldTooSmall { segment_bits, n1 })
}

/// Like [`coding_word`], but grows the length to the next multiple of a
/// usable word size instead of failing. Returns the padded length.
pub fn padded_coding_word(
    segment_bits: usize,
    n1: usize,
    n2: usize,
) -> Result<(usize, CodingWord)> {
    if let Ok(word) = coding_word(segment_bits, n1, n2) {
        return Ok((segment_bits, word));
    }
    let m = (8..=MAX_DEGREE)
        .step_by(8)
        .find(|&m| (1u64 << m) > n1 as u64)
        .ok_or(CdcError::FieldTooSmall { segment_bits, n1 })?;
    let len = segment_bits.next_multiple_of(m as usize);
    Ok((len, coding_word(len, n1, n2)?))
}

/// Shared field instances, built on first use.
pub fn coding_field(m: u32) -> Result<&'static GaloisField> {
    static FIELDS: [OnceLock<GaloisField>; MAX_DEGREE as usize + 1] =
        [const { OnceLock::new() }; MAX_DEGREE as usize + 1];
    let slot = FIELDS
        .get(m as usize)
        .filter(|_| m > 0)
        .ok_or_else(|| CdcError::InvalidField(format!("degree {m} outside 1..={MAX_DEGREE}")))?;
    if let Some(f) = slot.get() {
        return Ok(f);
    }
    let field = GaloisField::with_degree(m)?;
    Ok(slot.get_or_init(|| field))
}

fn to_words(bits: &Bits, m: u32) -> Vec<u32> {
    if m == 8 {
        return bits.as_raw_slice()[..bits.len() / 8]
            .iter()
            .map(|&b| u32::from(b))
            .collect();
    }
    bits.chunks_exact(m as usize)
        .map(|c| c.load_be::<u32>())
        .collect()
}

fn from_words(words: &[u32], m: u32) -> Bits {
    if m == 8 {
        return Bits::from_vec(words.iter().map(|&w| w as u8).collect());
    }
    let mut out = Bits::repeat(false, words.len() * m as usize);
    for (chunk, &w) in out.chunks_exact_mut(m as usize).zip(words) {
        chunk.store_be(w);
    }
    out
}

fn xor_into(acc: &mut Bits, other: &Bits) {
    debug_assert_eq!(acc.len(), other.len());
    for (a, b) in acc.as_raw_mut_slice().iter_mut().zip(other.as_raw_slice()) {
        *a ^= b;
    }
}

fn padded(seg: &Bits, len: usize) -> Bits {
    let mut out = aligned(seg);
    out.resize(len, false);
    out.set_uninitialized(false);
    out
}

/// Computes `rows` combinations: row `i` is `sum_c alpha_c^i * segs[c]` with
/// `alpha_c = c + 1`. All segments must share one length that `word` divides.
pub fn vandermonde_combine(segs: &[Bits], rows: usize, word: CodingWord) -> Result<Vec<Bits>> {
    let len = segs.first().map_or(0, BitVec::len);
    if segs.iter().any(|s| s.len() != len) {
        return Err(CdcError::Segmentation("segments differ in length".into()));
    }
    match word {
        CodingWord::Xor => {
            let mut acc = Bits::repeat(false, len);
            for seg in segs {
                xor_into(&mut acc, &padded(seg, len));
            }
            Ok(vec![acc; rows.min(1)])
        }
        CodingWord::Field(m) => {
            if !len.is_multiple_of(m as usize) {
                return Err(CdcError::FieldTooSmall {
                    segment_bits: len,
                    n1: segs.len(),
                });
            }
            let field = coding_field(m)?;
            let alphas = field.coefficients(segs.len())?;
            let matrix = vandermonde_matrix(field, &alphas, rows);
            let words: Vec<Vec<u32>> = segs.iter().map(|s| to_words(&aligned(s), m)).collect();
            Ok(matrix
                .iter()
                .map(|row| {
                    let mut out = vec![0u32; len / m as usize];
                    for (&coef, seg) in row.iter().zip(&words) {
                        for (o, &w) in out.iter_mut().zip(seg) {
                            *o ^= field.mul_raw(coef, w);
                        }
                    }
                    from_words(&out, m)
                })
                .collect())
        }
    }
}

/// A coded (or, for the uncoded baseline, plain) multicast transmission.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MulticastMessage {
    pub sender: usize,
    /// The shuffle subset (for uncoded messages: sender plus recipients).
    pub shuffle: NodeSubset,
    /// 1-based message index within the sender's batch for `shuffle`.
    pub index: usize,
    pub payload: Bits,
    /// Application-level content carried, for useful-bit accounting.
    pub useful_bits: usize,
}

impl MulticastMessage {
    pub fn bit_length(&self) -> usize {
        self.payload.len()
    }

    /// Header (sender u16, subset mask u32, index u16, byte length u32, all
    /// little-endian) followed by the payload, zero-filled to whole bytes.
    pub fn to_wire(&self) -> Result<Vec<u8>> {
        let sender = u16::try_from(self.sender)
            .map_err(|_| CdcError::Wire(format!("sender {} exceeds u16", self.sender)))?;
        let mask = u32::try_from(self.shuffle.mask())
            .map_err(|_| CdcError::Wire(format!("subset {} exceeds 32 nodes", self.shuffle)))?;
        let index = u16::try_from(self.index)
            .map_err(|_| CdcError::Wire(format!("message index {} exceeds u16", self.index)))?;
        let bytes = aligned(&self.payload).into_vec();
        let len = u32::try_from(bytes.len())
            .map_err(|_| CdcError::Wire("payload exceeds u32 bytes".into()))?;
        let mut out = Vec::with_capacity(WIRE_HEADER_BYTES + bytes.len());
        out.extend_from_slice(&sender.to_le_bytes());
        out.extend_from_slice(&mask.to_le_bytes());
        out.extend_from_slice(&index.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(&bytes);
        Ok(out)
    }

    /// Parses one record; returns it and the number of bytes consumed. The
    /// payload comes back byte-granular.
    pub fn from_wire(bytes: &[u8]) -> Result<(Self, usize)> {
        if bytes.len() < WIRE_HEADER_BYTES {
            return Err(CdcError::Wire(format!(
                "truncated header: {} bytes",
                bytes.len()
            )));
        }
        let sender = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
        let mask = u32::from_le_bytes(bytes[2..6].try_into().expect("4 bytes"));
        let index = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
        let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let end = WIRE_HEADER_BYTES + len;
        let payload = bytes
            .get(WIRE_HEADER_BYTES..end)
            .ok_or_else(|| CdcError::Wire(format!("payload of {len} bytes is truncated")))?;
        let payload = Bits::from_slice(payload);
        Ok((
            Self {
                sender,
                shuffle: NodeSubset::from_mask(u64::from(mask)),
                index,
                useful_bits: payload.len(),
                payload,
            },
            end,
        ))
    }
}

/// Concatenated wire records.
pub fn encode_log(messages: &[MulticastMessage]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for m in messages {
        out.extend(m.to_wire()?);
    }
    Ok(out)
}

pub fn decode_log(mut bytes: &[u8]) -> Result<Vec<MulticastMessage>> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (m, used) = MulticastMessage::from_wire(bytes)?;
        out.push(m);
        bytes = &bytes[used..];
    }
    Ok(out)
}

pub fn write_log(messages: &[MulticastMessage], mut w: impl Write) -> Result<()> {
    w.write_all(&encode_log(messages)?)?;
    Ok(())
}

pub fn read_log(mut r: impl Read) -> Result<Vec<MulticastMessage>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    decode_log(&buf)
}

/// The segments `sender` combines in `shuffle`, in the order of
/// [`subsets_containing`].
fn sender_segments<'a>(
    sender: usize,
    shuffle: &NodeSubset,
    r: usize,
    groups: &'a BTreeMap<NodeSubset, SegmentGroup>,
) -> Result<Vec<(NodeSubset, &'a SegmentGroup)>> {
    subsets_containing(sender, shuffle, r)?
        .into_iter()
        .map(|owners| {
            let g = groups.get(&owners).ok_or_else(|| {
                CdcError::Segmentation(format!("node {sender} has no segment group for {owners}"))
            })?;
            Ok((owners, g))
        })
        .collect()
}

/// The coded messages node `sender` multicasts to `shuffle`. `groups` must
/// hold the segment group of every size-`r` subset of `shuffle` containing
/// `sender`. Returns nothing when every segment is empty.
pub fn encode_node_messages(
    sender: usize,
    shuffle: &NodeSubset,
    r: usize,
    groups: &BTreeMap<NodeSubset, SegmentGroup>,
    mode: SegmentMode,
) -> Result<Vec<MulticastMessage>> {
    let owned = sender_segments(sender, shuffle, r, groups)?;
    let n1 = owned.len();
    let n2 = messages_per_sender(shuffle.len(), r);
    let segs: Vec<&Bits> = owned
        .iter()
        .map(|(_, g)| {
            g.segment_for(sender)
                .expect("owner subsets contain the sender")
        })
        .collect();
    let longest = segs.iter().map(|s| s.len()).max().unwrap_or(0);
    if longest == 0 {
        return Ok(Vec::new());
    }
    let (len, word) = match mode {
        SegmentMode::Strict => {
            if segs.iter().any(|s| s.len() != longest) {
                return Err(CdcError::Segmentation(format!(
                    "node {sender} holds segments of unequal length for {shuffle}"
                )));
            }
            (longest, coding_word(longest, n1, n2)?)
        }
        SegmentMode::ZeroPad => padded_coding_word(longest, n1, n2)?,
    };
    let segs: Vec<Bits> = segs.into_iter().map(|s| padded(s, len)).collect();
    let useful_bits = owned.iter().map(|(_, g)| g.useful_bits).max().unwrap_or(0);
    Ok(vandermonde_combine(&segs, n2, word)?
        .into_iter()
        .enumerate()
        .map(|(i, payload)| MulticastMessage {
            sender,
            shuffle: shuffle.clone(),
            index: i + 1,
            payload,
            useful_bits,
        })
        .collect())
}

/// Recovers, from `sender`'s messages in `shuffle`, the segments `receiver`
/// lacks: one per owner subset containing `sender` but not `receiver`. Each is
/// returned at message length; callers trim to the known segment length.
pub fn decode_messages(
    receiver: usize,
    sender: usize,
    shuffle: &NodeSubset,
    r: usize,
    received: &[MulticastMessage],
    local: &BTreeMap<NodeSubset, SegmentGroup>,
) -> Result<Vec<(NodeSubset, Bits)>> {
    let owners = subsets_containing(sender, shuffle, r)?;
    let unknown = complement_indices(receiver, sender, shuffle, r)?;
    let n1 = owners.len();
    let n2 = unknown.len();
    if received.len() != n2 {
        return Err(CdcError::Decode(format!(
            "node {receiver} expected {n2} messages from node {sender} for {shuffle}, got {}",
            received.len()
        )));
    }
    let len = received[0].payload.len();
    if received.iter().any(|m| m.payload.len() != len) {
        return Err(CdcError::Decode(format!(
            "messages from node {sender} for {shuffle} differ in length"
        )));
    }
    let known: Vec<(usize, Bits)> = owners
        .iter()
        .enumerate()
        .filter(|(c, _)| !unknown.contains(&(c + 1)))
        .map(|(c, o)| {
            let seg = local
                .get(o)
                .and_then(|g| g.segment_for(sender))
                .ok_or_else(|| {
                    CdcError::Decode(format!("node {receiver} lacks the segment group for {o}"))
                })?;
            if seg.len() > len {
                return Err(CdcError::Decode(format!(
                    "known segment for {o} is longer than the messages from node {sender}"
                )));
            }
            Ok((c, padded(seg, len)))
        })
        .collect::<Result<_>>()?;

    let recovered: Vec<Bits> = match coding_word(len, n1, n2)? {
        CodingWord::Xor => {
            let mut acc = padded(&received[0].payload, len);
            for (_, seg) in &known {
                xor_into(&mut acc, seg);
            }
            vec![acc]
        }
        CodingWord::Field(m) => {
            let field = coding_field(m)?;
            let alphas = field.coefficients(n1)?;
            let matrix = vandermonde_matrix(field, &alphas, n2);
            let known_words: Vec<(usize, Vec<u32>)> =
                known.iter().map(|(c, s)| (*c, to_words(s, m))).collect();
            let rhs: Vec<Vec<u32>> = received
                .iter()
                .zip(&matrix)
                .map(|(msg, row)| {
                    let mut y = to_words(&padded(&msg.payload, len), m);
                    for (c, words) in &known_words {
                        let coef = row[*c];
                        for (o, &w) in y.iter_mut().zip(words) {
                            *o ^= field.mul_raw(coef, w);
                        }
                    }
                    y
                })
                .collect();
            let unknown_alphas: Vec<u32> = unknown.iter().map(|&c| alphas[c - 1]).collect();
            vandermonde_solve(field, &unknown_alphas, n2, &rhs)?
                .iter()
                .map(|w| from_words(w, m))
                .collect()
        }
    };
    Ok(unknown
        .iter()
        .zip(recovered)
        .map(|(&c, seg)| (owners[c - 1].clone(), seg))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::enumerate_subsets;
    use crate::placement::{assign_map_tasks, assign_reduce_tasks, JobSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(m: &[usize]) -> NodeSubset {
        NodeSubset::new(m.to_vec()).unwrap()
    }

    fn example_two() -> (FileAssignment, ReduceAssignment) {
        let spec = JobSpec::new(4, 6, 6, 2, 2, 4).unwrap();
        (
            assign_map_tasks(&spec).unwrap(),
            assign_reduce_tasks(&spec).unwrap(),
        )
    }

    fn random_bits(rng: &mut ChaCha8Rng, len: usize) -> Bits {
        (0..len).map(|_| rng.random::<bool>()).collect()
    }

    /// Random segment groups for every owner subset of `shuffle`.
    fn random_groups(
        rng: &mut ChaCha8Rng,
        shuffle: &NodeSubset,
        r: usize,
        len: usize,
    ) -> BTreeMap<NodeSubset, SegmentGroup> {
        shuffle
            .subsets(r)
            .into_iter()
            .map(|owners| {
                let segments = (0..r).map(|_| random_bits(rng, len)).collect();
                let g = SegmentGroup {
                    owners: owners.clone(),
                    payload_bits: len * r,
                    segments,
                    useful_bits: len,
                };
                (owners, g)
            })
            .collect()
    }

    #[test]
    fn example_two_round_one_sets() {
        let (fa, ra) = example_two();
        let sets = build_exclusive_sets(&set(&[1, 2, 3]), 2, &fa, &ra).unwrap();
        let owners: Vec<_> = sets.iter().map(|e| e.owners.clone()).collect();
        assert_eq!(owners, vec![set(&[1, 2]), set(&[1, 3]), set(&[2, 3])]);
        // node 3 alone outside {1,2}: functions reduced by 3 and one of 1, 2
        assert_eq!(sets[0].values, vec![(2, 1), (4, 1)]);
        assert!(sets[0].values.contains(&(4, 1)));
        for es in &sets {
            assert_eq!(es.len(), 2);
        }
    }

    #[test]
    fn example_two_round_two_sets() {
        let (fa, ra) = example_two();
        let sets = build_exclusive_sets(&set(&[1, 2, 3, 4]), 2, &fa, &ra).unwrap();
        let mut values: Vec<_> = sets.iter().flat_map(|e| e.values.clone()).collect();
        values.sort_by_key(|&(q, n)| n * 10 + q);
        assert_eq!(values, vec![(6, 1), (5, 2), (4, 3), (3, 4), (2, 5), (1, 6)]);
        for es in &sets {
            assert_eq!(es.len(), 1);
        }
        assert_eq!(sets[4].owners, set(&[2, 4]));
        assert_eq!(sets[3].owners, set(&[2, 3]));
        assert_eq!(sets[3].values, vec![(3, 4)]);
    }

    #[test]
    fn example_one_sets() {
        let spec = JobSpec::new(3, 3, 6, 1, 1, 8).unwrap();
        let fa = assign_map_tasks(&spec).unwrap();
        let ra = assign_reduce_tasks(&spec).unwrap();
        let sets = build_exclusive_sets(&set(&[1, 2]), 1, &fa, &ra).unwrap();
        assert_eq!(sets[0].values, vec![(2, 1), (2, 2)]);
        assert_eq!(sets[1].values, vec![(1, 3), (1, 4)]);
    }

    #[test]
    fn exclusive_set_cardinality() {
        for k in 2..=6 {
            for r in 1..k {
                for s in 1..=k {
                    let q = binomial(k, s) as usize;
                    let n = binomial(k, r) as usize * 2;
                    let spec = JobSpec::new(k, q, n, r, s, 8).unwrap();
                    let fa = assign_map_tasks(&spec).unwrap();
                    let ra = assign_reduce_tasks(&spec).unwrap();
                    for size in round_sizes(k, r, s) {
                        for shuffle in enumerate_subsets(k, size).unwrap() {
                            for es in build_exclusive_sets(&shuffle, r, &fa, &ra).unwrap() {
                                assert_eq!(es.len(), binomial(r, size - s) as usize * 2);
                                for &(q, f) in &es.values {
                                    let p = ra.reducers(q);
                                    assert!(shuffle.difference(&es.owners).is_subset_of(p));
                                    assert!(p.is_subset_of(&shuffle));
                                    assert_eq!(fa.holders(f), &es.owners);
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn out_of_range_round_is_rejected() {
        let (fa, ra) = example_two();
        assert!(build_exclusive_sets(&set(&[1, 2]), 2, &fa, &ra).is_err());
    }

    #[test]
    fn segmenting_round_trips_and_reports_minimal_t() {
        let (fa, ra) = example_two();
        let sets = build_exclusive_sets(&set(&[1, 2, 3, 4]), 2, &fa, &ra).unwrap();
        let payload = bits![u8, Msb0; 1, 0, 1, 1];
        let g = segment(&sets[0], payload, 4, SegmentMode::Strict).unwrap();
        assert_eq!(g.segments.len(), 2);
        assert_eq!(g.segment_bits(), 2);
        assert_eq!(g.concat(), payload.to_bitvec());

        let odd = bits![u8, Msb0; 1, 0, 1];
        let err = segment(&sets[0], odd, 3, SegmentMode::Strict).unwrap_err();
        assert!(err.to_string().contains("multiple of 2"), "{err}");
        let g = segment(&sets[0], odd, 3, SegmentMode::ZeroPad).unwrap();
        assert_eq!(g.segment_bits(), 2);
        assert_eq!(g.concat(), odd.to_bitvec());
    }

    #[test]
    fn single_owner_segment_is_payload() {
        let es = ExclusiveSet {
            shuffle: set(&[1, 2]),
            owners: set(&[1]),
            values: vec![(2, 1)],
        };
        let payload = bits![u8, Msb0; 1, 1, 0, 1, 0];
        let g = segment(&es, payload, 5, SegmentMode::Strict).unwrap();
        assert_eq!(g.segments, vec![payload.to_bitvec()]);
    }

    #[test]
    fn word_choice() {
        assert_eq!(coding_word(16, 3, 1).unwrap(), CodingWord::Xor);
        assert_eq!(coding_word(16, 3, 2).unwrap(), CodingWord::Field(8));
        assert_eq!(coding_word(2, 3, 2).unwrap(), CodingWord::Field(2));
        assert_eq!(coding_word(6, 3, 2).unwrap(), CodingWord::Field(2));
        assert_eq!(coding_word(6, 4, 2).unwrap(), CodingWord::Field(3));
        assert_eq!(coding_word(512, 300, 2).unwrap(), CodingWord::Field(16));
        assert!(matches!(
            coding_word(5, 40, 2),
            Err(CdcError::FieldTooSmall { .. })
        ));
        assert_eq!(
            padded_coding_word(5, 40, 2).unwrap(),
            (8, CodingWord::Field(8))
        );
    }

    #[test]
    fn pascal_split_of_sender_segments() {
        for size in 2..=12 {
            for r in 2..size {
                assert_eq!(
                    segments_per_sender(size, r),
                    messages_per_sender(size, r) + binomial(size - 2, r - 2) as usize
                );
            }
        }
    }

    #[test]
    fn first_row_is_plain_xor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let segs: Vec<Bits> = (0..3).map(|_| random_bits(&mut rng, 16)).collect();
        let mut xor = segs[0].clone();
        xor ^= segs[1].as_bitslice();
        xor ^= segs[2].as_bitslice();
        for word in [
            CodingWord::Xor,
            CodingWord::Field(8),
            CodingWord::Field(16),
            CodingWord::Field(2),
        ] {
            let rows = vandermonde_combine(&segs, 2, word).unwrap();
            assert_eq!(rows[0], xor, "{word:?}");
        }
    }

    #[test]
    fn byte_and_wide_symbol_coding_both_decode() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let shuffle = set(&[1, 2, 3, 4]);
        let groups = random_groups(&mut rng, &shuffle, 2, 16);
        let owners = subsets_containing(1, &shuffle, 2).unwrap();
        let segs: Vec<Bits> = owners
            .iter()
            .map(|o| groups[o].segment_for(1).unwrap().clone())
            .collect();
        let unknown = complement_indices(2, 1, &shuffle, 2).unwrap();
        for word in [CodingWord::Field(8), CodingWord::Field(16)] {
            let CodingWord::Field(m) = word else {
                unreachable!()
            };
            let rows = vandermonde_combine(&segs, 2, word).unwrap();
            let field = coding_field(m).unwrap();
            let known = (0..3).find(|c| !unknown.contains(&(c + 1))).unwrap();
            let rhs: Vec<Vec<u32>> = (0..2)
                .map(|i| {
                    let coef = field.pow_raw(known as u32 + 1, i);
                    to_words(&rows[i as usize], m)
                        .iter()
                        .zip(to_words(&segs[known], m))
                        .map(|(y, w)| y ^ field.mul_raw(coef, w))
                        .collect()
                })
                .collect();
            let alphas: Vec<u32> = unknown.iter().map(|&c| c as u32).collect();
            let sol = vandermonde_solve(field, &alphas, 2, &rhs).unwrap();
            for (c, words) in unknown.iter().zip(sol) {
                assert_eq!(from_words(&words, m), segs[c - 1]);
            }
        }
    }

    #[test]
    fn example_two_messages() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shuffle = set(&[1, 2, 3, 4]);
        let groups = random_groups(&mut rng, &shuffle, 2, 2);
        let msgs = encode_node_messages(1, &shuffle, 2, &groups, SegmentMode::Strict).unwrap();
        assert_eq!(msgs.len(), 2);
        assert!(msgs.iter().all(|m| m.bit_length() == 2));
        let decoded = decode_messages(2, 1, &shuffle, 2, &msgs, &groups).unwrap();
        let owners: Vec<_> = decoded.iter().map(|(o, _)| o.clone()).collect();
        assert_eq!(owners, vec![set(&[1, 3]), set(&[1, 4])]);
        for (o, seg) in decoded {
            assert_eq!(&seg, groups[&o].segment_for(1).unwrap());
        }

        let round_one = set(&[1, 2, 3]);
        let groups = random_groups(&mut rng, &round_one, 2, 4);
        let msgs = encode_node_messages(1, &round_one, 2, &groups, SegmentMode::Strict).unwrap();
        assert_eq!(msgs.len(), 1);
        let mut xor = groups[&set(&[1, 2])].segments[0].clone();
        xor ^= groups[&set(&[1, 3])].segments[0].as_bitslice();
        assert_eq!(msgs[0].payload, xor);
    }

    #[test]
    fn randomized_round_trips_small_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in 2..=6 {
            for r in 1..k {
                for size in r + 1..=k {
                    let shuffle = NodeSubset::full(size);
                    let len = 8 * rng.random_range(1..4);
                    let groups = random_groups(&mut rng, &shuffle, r, len);
                    for &sender in shuffle.members() {
                        let msgs =
                            encode_node_messages(sender, &shuffle, r, &groups, SegmentMode::Strict)
                                .unwrap();
                        assert_eq!(msgs.len(), messages_per_sender(size, r));
                        for &receiver in shuffle.members().iter().filter(|&&j| j != sender) {
                            for (o, seg) in
                                decode_messages(receiver, sender, &shuffle, r, &msgs, &groups)
                                    .unwrap()
                            {
                                assert!(!o.contains(receiver));
                                assert_eq!(&seg, groups[&o].segment_for(sender).unwrap());
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_padding_handles_ragged_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shuffle = set(&[1, 2, 3, 4]);
        let mut groups = random_groups(&mut rng, &shuffle, 2, 5);
        let short = set(&[1, 3]);
        for seg in &mut groups.get_mut(&short).unwrap().segments {
            seg.truncate(3);
        }
        assert!(encode_node_messages(1, &shuffle, 2, &groups, SegmentMode::Strict).is_err());
        let msgs = encode_node_messages(1, &shuffle, 2, &groups, SegmentMode::ZeroPad).unwrap();
        assert!(msgs.iter().all(|m| m.bit_length() == 5));
        for (o, seg) in decode_messages(4, 1, &shuffle, 2, &msgs, &groups).unwrap() {
            let want = groups[&o].segment_for(1).unwrap();
            assert_eq!(&seg[..want.len()], want.as_bitslice());
            assert!(seg[want.len()..].not_any());
        }
    }

    #[test]
    fn decode_rejects_wrong_message_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let shuffle = set(&[1, 2, 3, 4]);
        let groups = random_groups(&mut rng, &shuffle, 2, 8);
        let msgs = encode_node_messages(1, &shuffle, 2, &groups, SegmentMode::Strict).unwrap();
        assert!(decode_messages(2, 1, &shuffle, 2, &msgs[..1], &groups).is_err());
    }

    #[test]
    fn wire_round_trip() {
        let msg = MulticastMessage {
            sender: 3,
            shuffle: set(&[1, 3, 4]),
            index: 2,
            payload: bits![u8, Msb0; 1, 0, 1, 1, 0, 0, 1, 1, 1].to_bitvec(),
            useful_bits: 9,
        };
        let wire = msg.to_wire().unwrap();
        assert_eq!(
            wire,
            vec![
                3,
                0,
                0b1101,
                0,
                0,
                0,
                2,
                0,
                2,
                0,
                0,
                0,
                0b1011_0011,
                0b1000_0000
            ]
        );
        let (back, used) = MulticastMessage::from_wire(&wire).unwrap();
        assert_eq!(used, wire.len());
        assert_eq!((back.sender, back.index), (3, 2));
        assert_eq!(back.shuffle, msg.shuffle);
        assert_eq!(&back.payload[..9], msg.payload.as_bitslice());

        let log = encode_log(&[msg.clone(), msg]).unwrap();
        assert_eq!(decode_log(&log).unwrap().len(), 2);
        assert!(decode_log(&log[..log.len() - 1]).is_err());
    }

    #[test]
    fn offset_slices_encode_like_aligned_copies() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let backing = random_bits(&mut rng, 64);
        let offset: Vec<Bits> = (0..3)
            .map(|c| backing[3 + 16 * c..19 + 16 * c].to_bitvec())
            .collect();
        let copies: Vec<Bits> = offset
            .iter()
            .map(|s| s.iter().by_vals().collect())
            .collect();
        for word in [CodingWord::Xor, CodingWord::Field(8), CodingWord::Field(4)] {
            assert_eq!(
                vandermonde_combine(&offset, 2, word).unwrap(),
                vandermonde_combine(&copies, 2, word).unwrap()
            );
        }
        let msg = |payload: Bits| MulticastMessage {
            sender: 1,
            shuffle: set(&[1, 2]),
            index: 1,
            payload,
            useful_bits: 16,
        };
        assert_eq!(
            msg(backing[5..18].to_bitvec()).to_wire().unwrap(),
            msg(backing[5..18].iter().by_vals().collect())
                .to_wire()
                .unwrap()
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn segment_concat_is_lossless(values in 1usize..6, t in 1usize..20, seed: u64) {
                let r = 3;
                let es = ExclusiveSet {
                    shuffle: NodeSubset::full(4),
                    owners: NodeSubset::full(r),
                    values: (1..=values).map(|q| (q, 1)).collect(),
                };
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let payload = random_bits(&mut rng, values * t);
                let g = segment(&es, &payload, t, SegmentMode::ZeroPad).unwrap();
                prop_assert_eq!(g.concat(), payload);
            }
        }
    }
}
