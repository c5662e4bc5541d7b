use std::collections::BTreeMap;

use rayon::prelude::*;

use super::job::MapReduceJob;
use super::report::{LoadReport, Strategy};
use super::store::{IntermediateStore, Provenance};
use crate::codec::{
    aligned, build_exclusive_sets, decode_messages, encode_node_messages, round_sizes, segment,
    Bits, MulticastMessage, SegmentGroup, SegmentMode,
};
use crate::combinatorics::{enumerate_subsets, NodeSubset};
use crate::error::{CdcError, Result};
use crate::placement::{FileAssignment, JobSpec, ReduceAssignment};

/// The message log and its accounting.
#[derive(Clone, Debug)]
pub struct ShuffleOutcome {
    /// In wire order.
    pub messages: Vec<MulticastMessage>,
    pub report: LoadReport,
}

/// Message counts per bit length, ascending by length.
pub fn message_sizes(log: &[MulticastMessage]) -> BTreeMap<usize, usize> {
    let mut out = BTreeMap::new();
    for m in log {
        *out.entry(m.bit_length()).or_insert(0) += 1;
    }
    out
}

/// Runs the shuffle phase on a post-Map store, leaving every node with all
/// values of the functions it reduces.
pub fn run_shuffle<J: MapReduceJob + ?Sized>(
    spec: &JobSpec,
    fa: &FileAssignment,
    ra: &ReduceAssignment,
    store: &mut IntermediateStore,
    strategy: Strategy,
    job: &J,
) -> Result<ShuffleOutcome> {
    if store.files() != fa.total_files()
        || store.functions() != ra.functions()
        || store.nodes() != fa.nodes()
    {
        return Err(CdcError::InvalidJob(format!(
            "store shape {}x{}x{} does not match the assignments",
            store.nodes(),
            store.functions(),
            store.files()
        )));
    }
    let messages = match strategy {
        Strategy::Uncoded => uncoded_shuffle(fa, ra, store, job)?,
        Strategy::Coded => coded_shuffle(fa, ra, store, job, SegmentMode::Strict)?,
        Strategy::RandomPlacementCoded => coded_shuffle(fa, ra, store, job, SegmentMode::ZeroPad)?,
    };
    check_coverage(ra, store)?;
    let report = account(spec, fa, strategy, store.value_bits(), &messages);
    Ok(ShuffleOutcome { messages, report })
}

fn account(
    spec: &JobSpec,
    fa: &FileAssignment,
    strategy: Strategy,
    value_bits: usize,
    messages: &[MulticastMessage],
) -> LoadReport {
    let mut report = LoadReport {
        strategy,
        nodes: spec.nodes,
        computation_load: spec.computation_load.clone(),
        reduce_replication: spec.reduce_replication,
        functions: spec.functions,
        files: fa.real_files(),
        padded_files: fa.total_files(),
        value_bits,
        total_bits: 0,
        useful_bits: 0,
        messages: messages.len(),
        rounds: BTreeMap::new(),
        per_sender: vec![0; spec.nodes],
    };
    for m in messages {
        let bits = m.bit_length() as u64;
        report.total_bits += bits;
        report.useful_bits += m.useful_bits.min(m.bit_length()) as u64;
        report.per_sender[m.sender - 1] += bits;
        let round = report.rounds.entry(m.shuffle.len()).or_default();
        round.messages += 1;
        round.bits += bits;
    }
    report
}

fn check_coverage(ra: &ReduceAssignment, store: &IntermediateStore) -> Result<()> {
    for node in 1..=ra.nodes() {
        for &q in ra.functions_of(node) {
            if let Some(n) = (1..=store.files()).find(|&n| !store.holds(node, q, n)) {
                return Err(CdcError::MissingValue {
                    node,
                    function: q,
                    file: n,
                });
            }
        }
    }
    Ok(())
}

fn uncoded_shuffle<J: MapReduceJob + ?Sized>(
    fa: &FileAssignment,
    ra: &ReduceAssignment,
    store: &mut IntermediateStore,
    job: &J,
) -> Result<Vec<MulticastMessage>> {
    let mut log = Vec::new();
    for q in 1..=ra.functions() {
        let reducers = ra.reducers(q);
        for n in 1..=fa.total_files() {
            let holders = fa.holders(n);
            let requesters = reducers.difference(holders);
            if requesters.is_empty() {
                continue;
            }
            let sender = *holders.members().first().ok_or(CdcError::Unreachable {
                function: q,
                file: n,
            })?;
            let value = aligned(store.require(sender, q, n)?);
            for &j in requesters.members() {
                store.put(j, q, n, &value, Provenance::Decoded)?;
            }
            log.push(MulticastMessage {
                sender,
                shuffle: requesters.union(&NodeSubset::new(vec![sender])?),
                index: 1,
                useful_bits: job.useful_bits(&value),
                payload: value,
            });
        }
    }
    Ok(log)
}

/// (receiver, values in payload order, concatenated payload)
type Recovered = (usize, Vec<(usize, usize)>, Bits);

/// One shuffle subset's traffic and what each receiver recovers from it.
struct SubsetOutcome {
    messages: Vec<MulticastMessage>,
    decoded: Vec<Recovered>,
}

fn coded_shuffle<J: MapReduceJob + ?Sized>(
    fa: &FileAssignment,
    ra: &ReduceAssignment,
    store: &mut IntermediateStore,
    job: &J,
    mode: SegmentMode,
) -> Result<Vec<MulticastMessage>> {
    let k = fa.nodes();
    let s = ra.replication();
    let mut tasks = Vec::new();
    for r in fa.replication_levels() {
        for size in round_sizes(k, r, s) {
            for shuffle in enumerate_subsets(k, size)? {
                tasks.push((r, shuffle));
            }
        }
    }
    let shared: &IntermediateStore = store;
    let outcomes: Vec<SubsetOutcome> = tasks
        .par_iter()
        .map(|(r, shuffle)| shuffle_subset(shuffle, *r, fa, ra, shared, job, mode))
        .collect::<Result<_>>()?;

    let t = store.value_bits();
    let mut log = Vec::new();
    for outcome in outcomes {
        log.extend(outcome.messages);
        for (node, values, payload) in outcome.decoded {
            for (&(q, n), chunk) in values.iter().zip(payload.chunks_exact(t)) {
                store.put(node, q, n, chunk, Provenance::Decoded)?;
            }
        }
    }
    Ok(log)
}

fn shuffle_subset<J: MapReduceJob + ?Sized>(
    shuffle: &NodeSubset,
    r: usize,
    fa: &FileAssignment,
    ra: &ReduceAssignment,
    store: &IntermediateStore,
    job: &J,
    mode: SegmentMode,
) -> Result<SubsetOutcome> {
    let sets = build_exclusive_sets(shuffle, r, fa, ra)?;
    let t = store.value_bits();

    // Each node segments the exclusive sets it owns from its own store.
    let mut groups: BTreeMap<usize, BTreeMap<NodeSubset, SegmentGroup>> = BTreeMap::new();
    for &node in shuffle.members() {
        let mine = groups.entry(node).or_default();
        for es in sets.iter().filter(|es| es.owners.contains(node)) {
            let mut payload = Bits::with_capacity(es.len() * t);
            let mut useful = 0;
            for &(q, n) in &es.values {
                let v = store.require(node, q, n)?;
                useful += job.useful_bits(v);
                payload.extend_from_bitslice(v);
            }
            let mut group = segment(es, &payload, t, mode)?;
            group.useful_bits = useful.div_ceil(r);
            mine.insert(es.owners.clone(), group);
        }
    }

    let mut sent: BTreeMap<usize, Vec<MulticastMessage>> = BTreeMap::new();
    for &sender in shuffle.members() {
        sent.insert(
            sender,
            encode_node_messages(sender, shuffle, r, &groups[&sender], mode)?,
        );
    }

    let mut decoded = Vec::new();
    for &receiver in shuffle.members() {
        let mut pieces: BTreeMap<NodeSubset, Vec<Bits>> = sets
            .iter()
            .filter(|es| !es.owners.contains(receiver))
            .map(|es| (es.owners.clone(), vec![Bits::new(); r]))
            .collect();
        for (&sender, msgs) in sent.iter().filter(|(&k, _)| k != receiver) {
            if msgs.is_empty() {
                continue;
            }
            for (owners, seg) in
                decode_messages(receiver, sender, shuffle, r, msgs, &groups[&receiver])?
            {
                let slot = owners
                    .position(sender)
                    .expect("decoded owners contain the sender");
                pieces.get_mut(&owners).ok_or_else(|| {
                    CdcError::Decode(format!("unexpected segment for {owners}"))
                })?[slot] = seg;
            }
        }
        for es in sets.iter().filter(|es| !es.owners.contains(receiver)) {
            let bits = es.len() * t;
            let seg_len = bits.div_ceil(r);
            let mut payload = Bits::with_capacity(bits);
            for seg in &pieces[&es.owners] {
                let take = seg_len.min(seg.len());
                payload.extend_from_bitslice(&seg[..take]);
            }
            payload.truncate(bits);
            if payload.len() != bits {
                return Err(CdcError::Decode(format!(
                    "node {receiver} recovered {} of {bits} bits for owners {} in {shuffle}",
                    payload.len(),
                    es.owners
                )));
            }
            decoded.push((receiver, es.values.clone(), payload));
        }
    }

    Ok(SubsetOutcome {
        messages: sent.into_values().flatten().collect(),
        decoded,
    })
}
