//! Distributed sorting on the engine: records are range-partitioned by key in
//! the Map phase, shuffled (coded or uncoded), and sorted per partition in
//! the Reduce phase.
//!
//! Groups vary in size while intermediate values must all be T bits, so each
//! group is framed as `[u32 LE byte count][records][zero fill]` with T taken
//! from the largest group in the job.

use bitvec::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::Bits;
use crate::combinatorics::binomial;
use crate::engine::{run_job, LoadReport, MapReduceJob, ReduceInput, RunConfig, Strategy};
use crate::error::{CdcError, Result};
use crate::placement::JobSpec;

const FRAME_HEADER: usize = 4;

/// Fixed-width record layout: a big-endian unsigned key then an opaque value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordFormat {
    pub key_bytes: usize,
    pub value_bytes: usize,
}

impl RecordFormat {
    /// 10-byte keys, 90-byte values.
    pub const TERASORT: Self = Self {
        key_bytes: 10,
        value_bytes: 90,
    };

    pub fn new(key_bytes: usize, value_bytes: usize) -> Result<Self> {
        if !(1..=16).contains(&key_bytes) {
            return Err(CdcError::Config(format!(
                "key width {key_bytes} outside 1..=16 bytes"
            )));
        }
        Ok(Self {
            key_bytes,
            value_bytes,
        })
    }

    pub fn width(&self) -> usize {
        self.key_bytes + self.value_bytes
    }

    pub fn key(&self, record: &[u8]) -> u128 {
        record[..self.key_bytes]
            .iter()
            .fold(0u128, |acc, &b| (acc << 8) | u128::from(b))
    }

    /// Largest representable key.
    pub fn key_max(&self) -> u128 {
        u128::MAX >> (128 - 8 * self.key_bytes)
    }

    fn check_whole(&self, data: &[u8]) -> Result<()> {
        if !data.len().is_multiple_of(self.width()) {
            return Err(CdcError::TornRecord {
                len: data.len(),
                record: self.width(),
            });
        }
        Ok(())
    }
}

/// `count` seeded uniform random records.
pub fn generate_records(count: usize, format: RecordFormat, seed: u64) -> Vec<u8> {
    let mut out = vec![0u8; count * format.width()];
    ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut out);
    out
}

/// Q contiguous key ranges over `0..=domain_max`; range q (1-based) starts at
/// `floor((q-1) * domain_max / Q)` and the last range includes `domain_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPartition {
    pub domain_max: u128,
    /// The Q - 1 split keys, ascending.
    pub boundaries: Vec<u128>,
}

pub fn partition_key_domain(domain_max: u128, parts: usize) -> Result<KeyPartition> {
    if parts == 0 || (parts as u128).saturating_sub(1) > domain_max {
        return Err(CdcError::Config(format!(
            "cannot split keys 0..={domain_max} into {parts} ranges"
        )));
    }
    let q = parts as u128;
    let (whole, rem) = (domain_max / q, domain_max % q);
    let boundaries = (1..q).map(|i| i * whole + i * rem / q).collect();
    Ok(KeyPartition {
        domain_max,
        boundaries,
    })
}

impl KeyPartition {
    pub fn parts(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// The 1-based range containing `key`.
    pub fn part_of(&self, key: u128) -> usize {
        self.boundaries.partition_point(|&b| b <= key) + 1
    }

    /// `(start, end)` per range; every end is exclusive except the last.
    pub fn ranges(&self) -> Vec<(u128, u128)> {
        let mut starts = vec![0];
        starts.extend(&self.boundaries);
        let mut ends = self.boundaries.clone();
        ends.push(self.domain_max);
        starts.into_iter().zip(ends).collect()
    }
}

/// Splits a file's records into one group per key range, preserving order.
pub fn hash_map_fn(
    data: &[u8],
    format: RecordFormat,
    partition: &KeyPartition,
) -> Result<Vec<Vec<u8>>> {
    format.check_whole(data)?;
    let mut groups = vec![Vec::new(); partition.parts()];
    for record in data.chunks_exact(format.width()) {
        groups[partition.part_of(format.key(record)) - 1].extend_from_slice(record);
    }
    Ok(groups)
}

/// Stable sort of concatenated records by key.
pub fn sort_records(data: &[u8], format: RecordFormat) -> Result<Vec<u8>> {
    format.check_whole(data)?;
    let mut records: Vec<&[u8]> = data.chunks_exact(format.width()).collect();
    records.sort_by_key(|r| format.key(r));
    Ok(records.concat())
}

/// Range-partition Map, sort Reduce, framed into `value_bits`-bit values.
#[derive(Clone, Debug)]
pub struct TeraSortJob {
    pub format: RecordFormat,
    pub partition: KeyPartition,
    pub value_bits: usize,
}

impl TeraSortJob {
    fn frame(&self, group: &[u8]) -> Bits {
        let mut bytes = Vec::with_capacity(self.value_bits / 8);
        bytes.extend_from_slice(&(group.len() as u32).to_le_bytes());
        bytes.extend_from_slice(group);
        bytes.resize(self.value_bits / 8, 0);
        Bits::from_vec(bytes)
    }

    fn unframe(&self, value: &BitSlice<u8, Msb0>) -> Vec<u8> {
        let bytes = crate::codec::aligned(value).into_vec();
        let len = u32::from_le_bytes(bytes[..FRAME_HEADER].try_into().expect("4 bytes")) as usize;
        bytes[FRAME_HEADER..FRAME_HEADER + len].to_vec()
    }
}

impl MapReduceJob for TeraSortJob {
    fn functions(&self) -> usize {
        self.partition.parts()
    }

    fn value_bits(&self) -> usize {
        self.value_bits
    }

    fn map(&self, _file: usize, data: &[u8]) -> Vec<Bits> {
        hash_map_fn(data, self.format, &self.partition)
            .expect("inputs are split on record boundaries")
            .iter()
            .map(|g| self.frame(g))
            .collect()
    }

    fn reduce(&self, _function: usize, values: &[ReduceInput<'_>]) -> Vec<u8> {
        let mut all = Vec::new();
        for v in values.iter().filter(|v| !v.padding) {
            all.extend(self.unframe(v.value));
        }
        sort_records(&all, self.format).expect("groups hold whole records")
    }

    fn useful_bits(&self, value: &BitSlice<u8, Msb0>) -> usize {
        let head = crate::codec::aligned(&value[..8 * FRAME_HEADER]).into_vec();
        8 * (FRAME_HEADER + u32::from_le_bytes(head.try_into().expect("4 bytes")) as usize)
    }
}

#[derive(Clone, Debug)]
pub struct SortConfig {
    pub nodes: usize,
    pub load: usize,
    pub records: usize,
    pub format: RecordFormat,
    pub seed: u64,
    /// Files per size-r node subset.
    pub files_per_batch: usize,
    pub strategies: Vec<Strategy>,
    pub workers: usize,
}

impl SortConfig {
    pub fn new(nodes: usize, load: usize, records: usize, seed: u64) -> Self {
        Self {
            nodes,
            load,
            records,
            format: RecordFormat::TERASORT,
            seed,
            files_per_batch: 1,
            strategies: vec![Strategy::Coded, Strategy::Uncoded],
            workers: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SortRun {
    pub strategy: Strategy,
    pub report: LoadReport,
    /// Partition outputs concatenated in key order.
    pub sorted: Vec<u8>,
    pub matches_oracle: bool,
}

#[derive(Clone, Debug)]
pub struct SortOutcome {
    pub files: usize,
    pub value_bits: usize,
    pub runs: Vec<SortRun>,
}

impl SortOutcome {
    pub fn run(&self, strategy: Strategy) -> Option<&SortRun> {
        self.runs.iter().find(|r| r.strategy == strategy)
    }
}

/// `records` split into `files` contiguous chunks of near-equal size.
pub fn split_into_files(
    records: &[u8],
    format: RecordFormat,
    files: usize,
) -> Result<Vec<Vec<u8>>> {
    format.check_whole(records)?;
    let count = records.len() / format.width();
    Ok((0..files)
        .map(|i| {
            records[i * count / files * format.width()..(i + 1) * count / files * format.width()]
                .to_vec()
        })
        .collect())
}

/// Smallest framed value size holding every group, in whole bytes and
/// divisible into `load` byte-aligned segments.
pub fn frame_bits(
    inputs: &[Vec<u8>],
    format: RecordFormat,
    partition: &KeyPartition,
    load: usize,
) -> Result<usize> {
    let mut largest = 0;
    for data in inputs {
        for g in hash_map_fn(data, format, partition)? {
            largest = largest.max(g.len());
        }
    }
    Ok(8 * (FRAME_HEADER + largest).next_multiple_of(load))
}

/// Generates the records, sorts them on the cluster with each requested
/// strategy, and compares every result with a single-machine sort.
pub fn run_coded_sort(config: &SortConfig) -> Result<SortOutcome> {
    let (k, r) = (config.nodes, config.load);
    let format = config.format;
    let files = binomial(k, r) as usize * config.files_per_batch;
    let records = generate_records(config.records, format, config.seed);
    let inputs = split_into_files(&records, format, files)?;
    let partition = partition_key_domain(format.key_max(), k)?;
    let value_bits = frame_bits(&inputs, format, &partition, r)?;
    let job = TeraSortJob {
        format,
        partition,
        value_bits,
    };
    let spec = JobSpec::new(k, k, files, r, 1, value_bits)?;
    let oracle = sort_records(&records, format)?;

    let runs = config
        .strategies
        .iter()
        .map(|&strategy| {
            let mut rc = RunConfig::new(strategy);
            rc.workers = config.workers;
            rc.verify = false;
            let out = run_job(&spec, &job, &inputs, &rc)?;
            let sorted: Vec<u8> = (1..=k)
                .flat_map(|q| {
                    let node = out.reduce_assignment.reducers(q).members()[0];
                    out.outputs[node - 1][&q].clone()
                })
                .collect();
            Ok(SortRun {
                strategy,
                matches_oracle: sorted == oracle,
                report: out.report,
                sorted,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SortOutcome {
        files,
        value_bits,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn key_ranges_for_hundred() {
        let p = partition_key_domain(100, 4).unwrap();
        assert_eq!(p.boundaries, vec![25, 50, 75]);
        assert_eq!(p.ranges(), vec![(0, 25), (25, 50), (50, 75), (75, 100)]);
        assert_eq!(p.part_of(0), 1);
        assert_eq!(p.part_of(24), 1);
        assert_eq!(p.part_of(25), 2);
        assert_eq!(p.part_of(100), 4);
        let one = partition_key_domain(100, 1).unwrap();
        assert_eq!(one.ranges(), vec![(0, 100)]);
        assert!(partition_key_domain(2, 4).is_err());
        assert!(partition_key_domain(2, 0).is_err());
    }

    #[test]
    fn wide_domains_do_not_overflow() {
        let p = partition_key_domain(u128::MAX, 10).unwrap();
        assert!(p.boundaries.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p.part_of(u128::MAX), 10);
    }

    #[test]
    fn map_groups_partition_the_records() {
        let format = RecordFormat::new(2, 3).unwrap();
        let data = generate_records(500, format, 1);
        let p = partition_key_domain(format.key_max(), 4).unwrap();
        let groups = hash_map_fn(&data, format, &p).unwrap();
        assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), data.len());
        for (q, g) in groups.iter().enumerate() {
            for rec in g.chunks_exact(5) {
                assert_eq!(p.part_of(format.key(rec)), q + 1);
            }
        }
        assert!(hash_map_fn(&[], format, &p)
            .unwrap()
            .iter()
            .all(Vec::is_empty));
        assert!(matches!(
            hash_map_fn(&data[..7], format, &p),
            Err(CdcError::TornRecord { len: 7, record: 5 })
        ));
    }

    #[test]
    fn sorting_is_stable() {
        let format = RecordFormat::new(1, 1).unwrap();
        let data = [3, 0, 1, 1, 3, 2, 1, 3];
        assert_eq!(
            sort_records(&data, format).unwrap(),
            vec![1, 1, 1, 3, 3, 0, 3, 2]
        );
    }

    #[test]
    fn frames_round_trip() {
        let format = RecordFormat::new(1, 1).unwrap();
        let job = TeraSortJob {
            format,
            partition: partition_key_domain(255, 1).unwrap(),
            value_bits: 64,
        };
        let v = job.frame(&[9, 8]);
        assert_eq!(v.len(), 64);
        assert_eq!(job.unframe(&v), vec![9, 8]);
        assert_eq!(job.useful_bits(&v), 48);
    }

    #[test]
    fn small_cluster_sort_matches_oracle() {
        let mut config = SortConfig::new(4, 2, 2000, 9);
        config.format = RecordFormat::new(4, 12).unwrap();
        let out = run_coded_sort(&config).unwrap();
        assert_eq!(out.files, 6);
        let coded = out.run(Strategy::Coded).unwrap();
        let uncoded = out.run(Strategy::Uncoded).unwrap();
        assert!(coded.matches_oracle && uncoded.matches_oracle);
        assert_eq!(coded.report.load() / uncoded.report.load(), ratio(1, 2));
        assert!(coded.report.useful_bits <= uncoded.report.useful_bits);
    }

    #[test]
    fn single_copy_sort_has_no_coding_gain() {
        let mut config = SortConfig::new(4, 1, 500, 2);
        config.format = RecordFormat::new(4, 4).unwrap();
        let out = run_coded_sort(&config).unwrap();
        let coded = out.run(Strategy::Coded).unwrap();
        let uncoded = out.run(Strategy::Uncoded).unwrap();
        assert!(coded.matches_oracle);
        assert_eq!(coded.report.total_bits, uncoded.report.total_bits);
    }
}
