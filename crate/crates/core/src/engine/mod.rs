//! Deterministic end-to-end executor: Map, Shuffle and Reduce over a
//! simulated multicast network, with every transmitted bit accounted for.

mod job;
mod report;
mod shuffle;
mod store;

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use job::{MapReduceJob, ReduceInput, SyntheticJob, WordCountJob};
pub use report::{write_load_csv, LoadReport, LoadRow, RoundStats, Strategy};
pub use shuffle::{message_sizes, run_shuffle, ShuffleOutcome};
pub use store::{IntermediateStore, NodeStore, Provenance};

use crate::codec::{
    coding_word, messages_per_sender, round_sizes, segments_per_sender, Bits, MulticastMessage,
};
use crate::combinatorics::{binomial, NodeSubset};
use crate::error::{CdcError, Result};
use crate::placement::{
    assign_reduce_tasks, assign_split_tasks, split_noninteger_r, FileAssignment, JobSpec,
    ReduceAssignment,
};

/// Runs `f` on a dedicated pool of `workers` threads (0 means rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CdcError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Every node maps each of its files. `inputs` holds the N real files; files
/// beyond them are padding and get all-zero values without running Map.
pub fn run_map_phase<J: MapReduceJob + ?Sized>(
    fa: &FileAssignment,
    job: &J,
    inputs: &[Vec<u8>],
) -> Result<IntermediateStore> {
    if inputs.len() != fa.real_files() {
        return Err(CdcError::InvalidJob(format!(
            "{} input files supplied for an assignment of {}",
            inputs.len(),
            fa.real_files()
        )));
    }
    let (q, t, files) = (job.functions(), job.value_bits(), fa.total_files());
    let zero = Bits::repeat(false, t);
    let nodes = (1..=fa.nodes())
        .into_par_iter()
        .map(|k| {
            let mut node = IntermediateStore::empty_node(q, files, t);
            for &n in fa.files_of(k) {
                if fa.is_padding(n) {
                    for f in 1..=q {
                        node.put((f - 1) * files + n - 1, t, &zero, Provenance::Local)?;
                    }
                    continue;
                }
                let values = job.map(n, &inputs[n - 1]);
                if values.len() != q || values.iter().any(|v| v.len() != t) {
                    return Err(CdcError::PayloadShape {
                        file: n,
                        got: format!(
                            "{} values of lengths {:?}",
                            values.len(),
                            values.iter().map(|v| v.len()).collect::<Vec<_>>()
                        ),
                        expected: format!("{q} values of {t} bits"),
                    });
                }
                for (f, v) in values.iter().enumerate() {
                    node.put(f * files + n - 1, t, v, Provenance::Local)?;
                }
            }
            Ok(node)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IntermediateStore::from_nodes(q, files, t, nodes))
}

/// Per node, the outputs of the functions it reduces.
pub type ReduceOutputs = Vec<BTreeMap<usize, Vec<u8>>>;

/// Every node evaluates each of its Reduce functions over all N-bar values.
pub fn run_reduce_phase<J: MapReduceJob + ?Sized>(
    fa: &FileAssignment,
    ra: &ReduceAssignment,
    store: &IntermediateStore,
    job: &J,
) -> Result<ReduceOutputs> {
    (1..=ra.nodes())
        .into_par_iter()
        .map(|k| {
            ra.functions_of(k)
                .iter()
                .map(|&q| {
                    let inputs = (1..=store.files())
                        .map(|n| {
                            Ok(ReduceInput {
                                file: n,
                                value: store.require(k, q, n)?,
                                padding: fa.is_padding(n),
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((q, job.reduce(q, &inputs)))
                })
                .collect()
        })
        .collect()
}

/// Where a run first disagrees with the single-machine evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub node: usize,
    pub function: usize,
    /// Set when an intermediate value differs; unset for a Reduce output.
    pub file: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleReport {
    pub outputs_checked: usize,
    pub first_divergence: Option<Divergence>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.first_divergence.is_none()
    }
}

/// Direct single-machine evaluation: each file mapped once, each function
/// reduced once.
pub struct Oracle {
    files: usize,
    values: Vec<Vec<Bits>>,
    outputs: Vec<Vec<u8>>,
}

impl Oracle {
    pub fn new<J: MapReduceJob + ?Sized>(job: &J, inputs: &[Vec<u8>], padded_files: usize) -> Self {
        let t = job.value_bits();
        let mut values: Vec<Vec<Bits>> = inputs
            .par_iter()
            .enumerate()
            .map(|(i, data)| job.map(i + 1, data))
            .collect();
        values.resize(padded_files, vec![Bits::repeat(false, t); job.functions()]);
        let outputs = (1..=job.functions())
            .into_par_iter()
            .map(|q| {
                let inputs: Vec<ReduceInput> = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| ReduceInput {
                        file: i + 1,
                        value: &v[q - 1],
                        padding: i >= inputs.len(),
                    })
                    .collect();
                job.reduce(q, &inputs)
            })
            .collect();
        Self {
            files: padded_files,
            values,
            outputs,
        }
    }

    pub fn value(&self, function: usize, file: usize) -> &Bits {
        &self.values[file - 1][function - 1]
    }

    pub fn output(&self, function: usize) -> &[u8] {
        &self.outputs[function - 1]
    }

    /// Checks every value each node needs (when a store is given), then every
    /// Reduce output, stopping at the first mismatch.
    pub fn verify(
        &self,
        ra: &ReduceAssignment,
        store: Option<&IntermediateStore>,
        outputs: &ReduceOutputs,
    ) -> OracleReport {
        let mut checked = 0;
        for k in 1..=ra.nodes() {
            for &q in ra.functions_of(k) {
                if let Some(store) = store {
                    for n in 1..=self.files {
                        if store.get(k, q, n) != Some(self.value(q, n).as_bitslice()) {
                            return OracleReport {
                                outputs_checked: checked,
                                first_divergence: Some(Divergence {
                                    node: k,
                                    function: q,
                                    file: Some(n),
                                }),
                            };
                        }
                    }
                }
                let got = outputs.get(k - 1).and_then(|o| o.get(&q));
                if got.map(Vec::as_slice) != Some(self.output(q)) {
                    return OracleReport {
                        outputs_checked: checked,
                        first_divergence: Some(Divergence {
                            node: k,
                            function: q,
                            file: None,
                        }),
                    };
                }
                checked += 1;
            }
        }
        OracleReport {
            outputs_checked: checked,
            first_divergence: None,
        }
    }
}

/// Compares a run against the direct single-machine evaluation.
pub fn verify_against_oracle<J: MapReduceJob + ?Sized>(
    fa: &FileAssignment,
    ra: &ReduceAssignment,
    job: &J,
    inputs: &[Vec<u8>],
    store: Option<&IntermediateStore>,
    outputs: &ReduceOutputs,
) -> OracleReport {
    Oracle::new(job, inputs, fa.total_files()).verify(ra, store, outputs)
}

/// Each file placed on an independent uniformly random size-r subset; no
/// padding. Deterministic per seed.
pub fn random_placement(spec: &JobSpec, seed: u64) -> Result<FileAssignment> {
    let r = spec
        .integer_load()
        .ok_or_else(|| CdcError::InvalidJob("random placement needs an integer load".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut batches: BTreeMap<NodeSubset, Vec<usize>> = BTreeMap::new();
    for n in 1..=spec.files {
        let mut members: Vec<usize> = sample(&mut rng, spec.nodes, r)
            .into_iter()
            .map(|i| i + 1)
            .collect();
        members.sort_unstable();
        batches
            .entry(NodeSubset::new(members)?)
            .or_default()
            .push(n);
    }
    FileAssignment::from_batches(spec.nodes, spec.files, batches)
}

/// Checks that T lets every coded round of the canonical placement split
/// into equal segments with a usable coding word.
pub fn check_value_bits(spec: &JobSpec) -> Result<()> {
    value_bits_problem(spec, spec.value_bits).map_or(Ok(()), |why| {
        let hint = suggest_value_bits(spec)
            .map(|t| format!("; smallest valid T >= {} is {t}", spec.value_bits))
            .unwrap_or_default();
        Err(CdcError::Divisibility(format!(
            "T = {}: {why}{hint}",
            spec.value_bits
        )))
    })
}

/// The smallest T at least `spec.value_bits` that passes [`check_value_bits`].
pub fn suggest_value_bits(spec: &JobSpec) -> Option<usize> {
    let start = spec.value_bits.max(1);
    (start..start + (1 << 16)).find(|&t| value_bits_problem(spec, t).is_none())
}

fn value_bits_problem(spec: &JobSpec, value_bits: usize) -> Option<String> {
    let split = match split_noninteger_r(spec) {
        Ok(split) => split,
        Err(e) => return Some(e.to_string()),
    };
    let eta2 = match spec.reduce_batch_size() {
        Ok(eta2) => eta2,
        Err(e) => return Some(e.to_string()),
    };
    let s = spec.reduce_replication;
    for part in &split.parts {
        let r = part.replication;
        let eta1 = part.files.len() / binomial(spec.nodes, r) as usize;
        for size in round_sizes(spec.nodes, r, s) {
            let values = binomial(r, size - s) as usize * eta1 * eta2;
            let bits = values * value_bits;
            if !bits.is_multiple_of(r) {
                return Some(format!(
                    "rounds of size {size} at r = {r} carry {bits} bits, not divisible into {r} segments"
                ));
            }
            let n1 = segments_per_sender(size, r);
            let n2 = messages_per_sender(size, r);
            if let Err(e) = coding_word(bits / r, n1, n2) {
                return Some(e.to_string());
            }
        }
    }
    None
}

/// Which placement a [`run_job`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlacementKind {
    /// Batches dealt to node subsets, split across two loads when r is fractional.
    Canonical,
    /// Independent uniform subsets per file, from the given seed.
    Random(u64),
}

#[derive(Clone, Copy, Debug)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub placement: PlacementKind,
    /// Worker threads; 0 picks the machine default.
    pub workers: usize,
    /// Compare against the single-machine evaluation.
    pub verify: bool,
}

impl RunConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            placement: PlacementKind::Canonical,
            workers: 0,
            verify: true,
        }
    }
}

/// Everything a complete run produced.
#[derive(Debug)]
pub struct JobRun {
    pub map_assignment: FileAssignment,
    pub reduce_assignment: ReduceAssignment,
    pub messages: Vec<MulticastMessage>,
    pub report: LoadReport,
    pub outputs: ReduceOutputs,
    pub oracle: Option<OracleReport>,
}

/// Assign, Map, Shuffle, Reduce and (optionally) verify.
pub fn run_job<J: MapReduceJob + ?Sized>(
    spec: &JobSpec,
    job: &J,
    inputs: &[Vec<u8>],
    config: &RunConfig,
) -> Result<JobRun> {
    spec.validate()?;
    if job.functions() != spec.functions || job.value_bits() != spec.value_bits {
        return Err(CdcError::InvalidJob(format!(
            "job has Q = {}, T = {} but the spec has Q = {}, T = {}",
            job.functions(),
            job.value_bits(),
            spec.functions,
            spec.value_bits
        )));
    }
    let fa = match config.placement {
        PlacementKind::Canonical => {
            if config.strategy == Strategy::Coded {
                check_value_bits(spec)?;
            }
            assign_split_tasks(spec)?
        }
        PlacementKind::Random(seed) => random_placement(spec, seed)?,
    };
    let ra = assign_reduce_tasks(spec)?;
    with_workers(config.workers, || {
        let mut store = run_map_phase(&fa, job, inputs)?;
        let shuffle = run_shuffle(spec, &fa, &ra, &mut store, config.strategy, job)?;
        let outputs = run_reduce_phase(&fa, &ra, &store, job)?;
        let oracle = config
            .verify
            .then(|| verify_against_oracle(&fa, &ra, job, inputs, Some(&store), &outputs));
        Ok(JobRun {
            map_assignment: fa,
            reduce_assignment: ra,
            messages: shuffle.messages,
            report: shuffle.report,
            outputs,
            oracle,
        })
    })?
}

/// `files` seeded pseudorandom inputs of `bytes` bytes each.
pub fn synthetic_inputs(files: usize, bytes: usize, seed: u64) -> Vec<Vec<u8>> {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..files)
        .map(|_| {
            let mut buf = vec![0u8; bytes];
            rng.fill_bytes(&mut buf);
            buf
        })
        .collect()
}
