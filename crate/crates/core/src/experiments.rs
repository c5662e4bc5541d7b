//! Experiment harness: configuration, load sweeps, worked-example replays
//! against golden message logs, random-placement trials and sort runs, all
//! emitted as CSV with the configuration echoed in a comment header.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bitvec::prelude::*;
use serde::Serialize;

use crate::bounds::{
    count_a_profile, l_coded, l_coded_envelope, lower_bound_lemma1, lower_bound_lemma2,
};
use crate::codec::{coding_word, encode_log, Bits, CodingWord, MulticastMessage};
use crate::combinatorics::binomial;
use crate::engine::{
    check_value_bits, message_sizes, run_job, suggest_value_bits, synthetic_inputs, JobRun,
    PlacementKind, RunConfig, Strategy, SyntheticJob,
};
use crate::error::{CdcError, Result};
use crate::gf2m::GaloisField;
use crate::placement::JobSpec;
use crate::rational::{as_usize, format_rational, integer, parse_rational, ratio, Rational};
use crate::sortapp::{run_coded_sort, SortConfig};

/// Bytes per synthetic input file.
const INPUT_BYTES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Sweep,
    Example1,
    Example2,
    Sort,
    RandomPlacement,
    Bounds,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sweep => "sweep",
            Mode::Example1 => "example1",
            Mode::Example2 => "example2",
            Mode::Sort => "sort",
            Mode::RandomPlacement => "random-placement",
            Mode::Bounds => "bounds",
        }
    }
}

impl FromStr for Mode {
    type Err = CdcError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "sweep" => Mode::Sweep,
            "example1" => Mode::Example1,
            "example2" => Mode::Example2,
            "sort" => Mode::Sort,
            "random-placement" => Mode::RandomPlacement,
            "bounds" => Mode::Bounds,
            other => return Err(CdcError::Config(format!("unknown mode {other:?}"))),
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything one CLI run depends on. Built from defaults, then a key=value
/// file, then command-line flags, each overriding the last.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// K
    pub nodes: usize,
    /// Computation loads to visit, in order; `None` means 1..=K.
    pub loads: Option<Vec<Rational>>,
    /// s
    pub reduce_replication: usize,
    /// Q
    pub functions: usize,
    /// N
    pub files: usize,
    /// T; `None` picks the smallest valid T per point.
    pub value_bits: Option<usize>,
    pub seed: u64,
    /// Random placements to draw.
    pub trials: usize,
    /// Records to sort.
    pub records: usize,
    /// Also measure the uncoded shuffle in sweeps.
    pub uncoded: bool,
    pub workers: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Sweep,
            nodes: 10,
            loads: None,
            reduce_replication: 1,
            functions: 10,
            files: 2520,
            value_bits: Some(1024),
            seed: 1,
            trials: 200,
            records: 100_000,
            uncoded: true,
            workers: 0,
            output: None,
        }
    }
}

/// Parses `"3"`, `"5/2"`, `"1..10"`, `"1..=10"` or comma lists of those.
pub fn parse_loads(text: &str) -> Result<Vec<Rational>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let lo: usize = parse_int(lo, "r")?;
            let hi: usize = parse_int(hi, "r")?;
            if lo > hi {
                return Err(CdcError::Config(format!("empty load range {part:?}")));
            }
            out.extend((lo..=hi).map(integer));
        } else {
            out.push(parse_rational(part)?);
        }
    }
    if out.is_empty() {
        return Err(CdcError::Config("no computation loads given".into()));
    }
    Ok(out)
}

fn parse_int<T: FromStr>(text: &str, key: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| CdcError::Config(format!("{key}: expected an integer, got {text:?}")))
}

fn parse_bool(text: &str, key: &str) -> Result<bool> {
    match text.trim() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(CdcError::Config(format!(
            "{key}: expected true or false, got {text:?}"
        ))),
    }
}

impl ExperimentConfig {
    /// Defaults for a mode: the ten-node sweep, or the worked examples' sizes.
    pub fn for_mode(mode: Mode) -> Self {
        let base = Self {
            mode,
            ..Self::default()
        };
        match mode {
            Mode::Example1 => Self {
                nodes: 3,
                loads: Some(vec![integer(2)]),
                functions: 3,
                files: 6,
                value_bits: Some(8),
                ..base
            },
            Mode::Example2 => Self {
                nodes: 4,
                loads: Some(vec![integer(2)]),
                reduce_replication: 2,
                functions: 6,
                files: 6,
                value_bits: Some(4),
                ..base
            },
            Mode::Sort => Self {
                loads: Some(vec![integer(1), integer(3), integer(5)]),
                ..base
            },
            Mode::RandomPlacement => Self {
                nodes: 6,
                loads: Some(vec![integer(2)]),
                functions: 6,
                files: 12,
                value_bits: Some(8),
                ..base
            },
            Mode::Sweep | Mode::Bounds => base,
        }
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "mode" => self.mode = v.parse()?,
            "K" | "nodes" => self.nodes = parse_int(v, key)?,
            "r" | "loads" => self.loads = Some(parse_loads(v)?),
            "s" => self.reduce_replication = parse_int(v, key)?,
            "Q" | "functions" => self.functions = parse_int(v, key)?,
            "N" | "files" => self.files = parse_int(v, key)?,
            "T" | "value_bits" => {
                self.value_bits = if v == "auto" {
                    None
                } else {
                    Some(parse_int(v, key)?)
                }
            }
            "seed" => self.seed = parse_int(v, key)?,
            "trials" => self.trials = parse_int(v, key)?,
            "records" => self.records = parse_int(v, key)?,
            "uncoded" => self.uncoded = parse_bool(v, key)?,
            "workers" => self.workers = parse_int(v, key)?,
            "output" => self.output = (!v.is_empty()).then(|| PathBuf::from(v)),
            other => return Err(CdcError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CdcError::Config(format!("line {}: expected key=value, got {line:?}", i + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    pub fn loads(&self) -> Vec<Rational> {
        self.loads
            .clone()
            .unwrap_or_else(|| (1..=self.nodes).map(integer).collect())
    }

    pub fn first_load(&self) -> Rational {
        self.loads()
            .into_iter()
            .next()
            .unwrap_or_else(|| integer(1))
    }

    /// The settings in a fixed order, as `key=value` strings.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let loads: Vec<String> = self.loads().iter().map(format_rational).collect();
        vec![
            ("mode", self.mode.to_string()),
            ("K", self.nodes.to_string()),
            ("r", loads.join(",")),
            ("s", self.reduce_replication.to_string()),
            ("Q", self.functions.to_string()),
            ("N", self.files.to_string()),
            (
                "T",
                self.value_bits.map_or("auto".into(), |t| t.to_string()),
            ),
            ("seed", self.seed.to_string()),
            ("trials", self.trials.to_string()),
            ("records", self.records.to_string()),
            ("uncoded", self.uncoded.to_string()),
            ("workers", self.workers.to_string()),
        ]
    }

    /// `# key=value` lines, one per setting.
    pub fn header(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("# {k}={v}\n"))
            .collect()
    }

    /// Job specs for every sweep point, or every divisibility problem found,
    /// each with the nearest valid values.
    pub fn sweep_specs(&self) -> Result<Vec<JobSpec>> {
        let loads = self.loads();
        let mut specs = Vec::new();
        // each distinct problem once, with the loads it affects
        let mut problems: Vec<(String, Vec<String>)> = Vec::new();
        for r in &loads {
            match self.point_spec(r) {
                Ok(spec) => specs.push(spec),
                Err(e) => {
                    let text = match e {
                        CdcError::Divisibility(why) => why,
                        other => other.to_string(),
                    };
                    match problems.iter_mut().find(|(t, _)| *t == text) {
                        Some((_, rs)) => rs.push(format_rational(r)),
                        None => problems.push((text, vec![format_rational(r)])),
                    }
                }
            }
        }
        if problems.is_empty() {
            return Ok(specs);
        }
        let lines: Vec<String> = problems
            .into_iter()
            .map(|(text, rs)| {
                if rs.len() == loads.len() && loads.len() > 1 {
                    format!("every r: {text}")
                } else {
                    format!("r = {}: {text}", rs.join(", "))
                }
            })
            .collect();
        Err(CdcError::Divisibility(lines.join("; ")))
    }

    fn point_spec(&self, r: &Rational) -> Result<JobSpec> {
        let k = self.nodes;
        let t = self.value_bits.unwrap_or(1);
        let mut spec = JobSpec::with_load(
            k,
            self.functions,
            self.files,
            r.clone(),
            self.reduce_replication,
            t,
        )?;
        spec.reduce_batch_size()?;
        if let Some(r) = spec.integer_load() {
            let groups = binomial(k, r) as usize;
            if !self.files.is_multiple_of(groups) {
                let lower = self.files / groups * groups;
                let upper = lower + groups;
                let nearest = if lower == 0 {
                    upper.to_string()
                } else {
                    format!("{lower} or {upper}")
                };
                return Err(CdcError::Divisibility(format!(
                    "N = {} is not a multiple of C({k}, {r}) = {groups}; nearest valid N: {nearest}",
                    self.files
                )));
            }
        }
        if self.value_bits.is_none() {
            spec.value_bits = suggest_value_bits(&spec).ok_or_else(|| {
                CdcError::Divisibility(format!("no valid T found for r = {}", format_rational(r)))
            })?;
        }
        check_value_bits(&spec)?;
        Ok(spec)
    }
}

/// One sweep point with exact loads.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub spec: JobSpec,
    /// Measured uncoded load, when requested.
    pub uncoded: Option<Rational>,
    pub formula: Rational,
    pub measured: Rational,
    /// Converse bound at the placement used.
    pub bound: Rational,
    pub messages: usize,
}

impl SweepPoint {
    /// Measured equals the closed form, required whenever r is an integer.
    pub fn matches_formula(&self) -> bool {
        self.spec.integer_load().is_none() || self.measured == self.formula
    }

    pub fn row(&self) -> SweepRow {
        SweepRow {
            k: self.spec.nodes,
            q: self.spec.functions,
            n: self.spec.files,
            t: self.spec.value_bits,
            s: self.spec.reduce_replication,
            r: format_rational(&self.spec.computation_load),
            l_uncoded: self
                .uncoded
                .as_ref()
                .map(format_rational)
                .unwrap_or_default(),
            l_coded_formula: format_rational(&self.formula),
            l_measured: format_rational(&self.measured),
            lemma_bound: format_rational(&self.bound),
            messages: self.messages,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub s: usize,
    pub r: String,
    #[serde(rename = "L_uncoded")]
    pub l_uncoded: String,
    #[serde(rename = "L_coded_formula")]
    pub l_coded_formula: String,
    #[serde(rename = "L_measured")]
    pub l_measured: String,
    pub lemma_bound: String,
    pub messages: usize,
}

fn measure(spec: &JobSpec, strategy: Strategy, config: &ExperimentConfig) -> Result<JobRun> {
    let job = SyntheticJob::new(spec.functions, spec.value_bits);
    let inputs = synthetic_inputs(spec.files, INPUT_BYTES, config.seed);
    let mut rc = RunConfig::new(strategy);
    rc.workers = config.workers;
    rc.verify = false;
    run_job(spec, &job, &inputs, &rc)
}

/// Runs the coded (and optionally uncoded) shuffle at every load in the
/// config. Points run one after another; each uses the full worker pool.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let specs = config.sweep_specs()?;
    specs
        .into_iter()
        .map(|spec| {
            let s = spec.reduce_replication;
            let coded = measure(&spec, Strategy::Coded, config)?;
            let uncoded = config
                .uncoded
                .then(|| measure(&spec, Strategy::Uncoded, config).map(|run| run.report.load()))
                .transpose()?;
            let profile = count_a_profile(&coded.map_assignment);
            let formula = match spec.integer_load() {
                Some(r) => l_coded(r, s, spec.nodes)?,
                None => l_coded_envelope(&spec.computation_load, s, spec.nodes)?,
            };
            Ok(SweepPoint {
                bound: lower_bound_lemma2(&profile, s)?,
                formula,
                measured: coded.report.load(),
                messages: coded.report.messages,
                uncoded,
                spec,
            })
        })
        .collect()
}

/// Writes the config header then one CSV row per item.
pub fn write_csv<T: Serialize>(
    config: &ExperimentConfig,
    rows: &[T],
    mut out: impl Write,
) -> Result<()> {
    out.write_all(config.header().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One replayed worked example.
#[derive(Clone, Debug)]
pub struct ExampleReplay {
    pub name: &'static str,
    pub spec: JobSpec,
    pub messages: Vec<MulticastMessage>,
    /// Message length in bits -> count.
    pub sizes: BTreeMap<usize, usize>,
    pub load: Rational,
    pub expected_load: Rational,
    pub expected_sizes: BTreeMap<usize, usize>,
    /// The log matches the stored golden log byte for byte.
    pub golden_match: bool,
    /// Every payload matches a direct evaluation from the intermediate values.
    pub content_match: bool,
    /// Every reducer output matches the single-machine evaluation.
    pub oracle_passed: bool,
    pub log: Vec<u8>,
}

impl ExampleReplay {
    pub fn passed(&self) -> bool {
        self.golden_match
            && self.content_match
            && self.oracle_passed
            && self.load == self.expected_load
            && self.sizes == self.expected_sizes
    }
}

const GOLDEN_EXAMPLE1: &[u8] = include_bytes!("../fixtures/example1.log");
const GOLDEN_EXAMPLE2: &[u8] = include_bytes!("../fixtures/example2.log");

/// Directory of the golden logs; `CDC_BLESS=1` rewrites them from a replay.
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn example_spec(mode: Mode) -> JobSpec {
    let c = ExperimentConfig::for_mode(mode);
    JobSpec::new(
        c.nodes,
        c.functions,
        c.files,
        as_usize(&c.first_load()).expect("integer load"),
        c.reduce_replication,
        c.value_bits.expect("fixed T"),
    )
    .expect("example parameters are valid")
}

/// Payload `sender` should multicast as message `index` in `shuffle`,
/// computed straight from the intermediate values: the exclusive set of each
/// owner subset holds v[q,n] for the files mapped exactly at the owners and
/// the functions whose reducers lie in the shuffle subset and include every
/// non-owner. Each is cut into one segment per owner, and the sender's
/// segments are combined with weights alpha^(index-1), alpha = 1, 2, ...
fn expected_payload(
    run: &JobRun,
    oracle: &SyntheticJob,
    inputs: &[Vec<u8>],
    msg: &MulticastMessage,
    r: usize,
) -> Result<Bits> {
    let fa = &run.map_assignment;
    let ra = &run.reduce_assignment;
    let t = oracle.value_bits;
    let shuffle = &msg.shuffle;
    let mut segs = Vec::new();
    for owners in shuffle
        .subsets(r)
        .into_iter()
        .filter(|o| o.contains(msg.sender))
    {
        let rest = shuffle.difference(&owners);
        let mut payload = Bits::new();
        for q in 1..=ra.functions() {
            let reducers = ra.reducers(q);
            if !reducers.is_subset_of(shuffle) || !rest.is_subset_of(reducers) {
                continue;
            }
            for n in (1..=fa.total_files()).filter(|&n| *fa.holders(n) == owners) {
                let value = if fa.is_padding(n) {
                    Bits::repeat(false, t)
                } else {
                    crate::engine::MapReduceJob::map(oracle, n, &inputs[n - 1])[q - 1].clone()
                };
                payload.extend_from_bitslice(&value);
            }
        }
        let len = payload.len() / r;
        let i = owners.position(msg.sender).expect("sender owns");
        segs.push(payload[i * len..(i + 1) * len].to_bitvec());
    }
    let len = segs[0].len();
    let n2 = binomial(shuffle.len() - 1, r - 1) as usize;
    let row = (msg.index - 1) as u64;
    let mut out = Bits::repeat(false, len);
    match coding_word(len, segs.len(), n2)? {
        CodingWord::Xor => {
            for seg in &segs {
                for (mut o, b) in out.iter_mut().zip(seg.iter()) {
                    *o ^= *b;
                }
            }
        }
        CodingWord::Field(m) => {
            let field = GaloisField::with_degree(m)?;
            let m = m as usize;
            for w in 0..len / m {
                let mut acc = 0u32;
                for (c, seg) in segs.iter().enumerate() {
                    let word = seg[w * m..(w + 1) * m].load_be::<u32>();
                    acc ^= field.mul_raw(field.pow_raw(c as u32 + 1, row), word);
                }
                out[w * m..(w + 1) * m].store_be(acc);
            }
        }
    }
    Ok(out)
}

fn replay(mode: Mode, seed: u64) -> Result<ExampleReplay> {
    let spec = example_spec(mode);
    let r = spec.integer_load().expect("integer load");
    let (name, golden, expected_load, expected_sizes) = match mode {
        Mode::Example1 => (
            "example1",
            GOLDEN_EXAMPLE1,
            ratio(1, 6),
            BTreeMap::from([(spec.value_bits, 3)]),
        ),
        _ => (
            "example2",
            GOLDEN_EXAMPLE2,
            ratio(4, 9),
            BTreeMap::from([(spec.value_bits, 12), (spec.value_bits / 2, 8)]),
        ),
    };
    let job = SyntheticJob::new(spec.functions, spec.value_bits);
    let inputs = synthetic_inputs(spec.files, INPUT_BYTES, seed);
    let run = run_job(&spec, &job, &inputs, &RunConfig::new(Strategy::Coded))?;
    let log = encode_log(&run.messages)?;
    if std::env::var_os("CDC_BLESS").is_some() {
        std::fs::write(fixtures_dir().join(format!("{name}.log")), &log)?;
    }
    let mut content_match = true;
    for msg in &run.messages {
        content_match &= expected_payload(&run, &job, &inputs, msg, r)? == msg.payload;
    }
    Ok(ExampleReplay {
        name,
        sizes: message_sizes(&run.messages),
        load: run.report.load(),
        expected_load,
        expected_sizes,
        golden_match: log == golden,
        content_match,
        oracle_passed: run.oracle.as_ref().is_some_and(|o| o.passed()),
        messages: run.messages,
        spec,
        log,
    })
}

/// Seed of the golden-log inputs.
pub const EXAMPLE_SEED: u64 = 1;

/// Replays both worked examples against their golden logs.
pub fn replay_examples() -> Result<Vec<ExampleReplay>> {
    [Mode::Example1, Mode::Example2]
        .into_iter()
        .map(|mode| replay(mode, EXAMPLE_SEED))
        .collect()
}

pub fn replay_example(mode: Mode) -> Result<ExampleReplay> {
    match mode {
        Mode::Example1 | Mode::Example2 => replay(mode, EXAMPLE_SEED),
        other => Err(CdcError::Config(format!("{other} is not a worked example"))),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExampleRow {
    pub example: &'static str,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub messages: usize,
    pub message_bits: String,
    pub load: String,
    pub expected_load: String,
    pub golden_match: bool,
    pub content_match: bool,
    pub passed: bool,
}

impl From<&ExampleReplay> for ExampleRow {
    fn from(e: &ExampleReplay) -> Self {
        let bits: Vec<String> = e.sizes.iter().map(|(b, n)| format!("{n}x{b}")).collect();
        Self {
            example: e.name,
            k: e.spec.nodes,
            t: e.spec.value_bits,
            messages: e.messages.len(),
            message_bits: bits.join(" "),
            load: format_rational(&e.load),
            expected_load: format_rational(&e.expected_load),
            golden_match: e.golden_match,
            content_match: e.content_match,
            passed: e.passed(),
        }
    }
}

/// One seeded random placement, run with both strategies.
#[derive(Clone, Debug, PartialEq)]
pub struct PlacementTrial {
    pub seed: u64,
    pub bound: Rational,
    pub coded: Rational,
    pub uncoded: Rational,
    pub decoded: bool,
}

impl PlacementTrial {
    pub fn respects_bound(&self) -> bool {
        self.coded >= self.bound && self.uncoded >= self.bound
    }

    pub fn row(&self) -> PlacementRow {
        PlacementRow {
            seed: self.seed,
            lemma_bound: format_rational(&self.bound),
            l_coded: format_rational(&self.coded),
            l_uncoded: format_rational(&self.uncoded),
            decoded: self.decoded,
            respects_bound: self.respects_bound(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PlacementRow {
    pub seed: u64,
    pub lemma_bound: String,
    #[serde(rename = "L_coded")]
    pub l_coded: String,
    #[serde(rename = "L_uncoded")]
    pub l_uncoded: String,
    pub decoded: bool,
    pub respects_bound: bool,
}

/// `config.trials` random placements at the first load, seeds counting up
/// from `config.seed`.
pub fn run_random_placements(config: &ExperimentConfig) -> Result<Vec<PlacementTrial>> {
    let r = as_usize(&config.first_load())
        .ok_or_else(|| CdcError::Config("random placements need an integer r".into()))?;
    let t = config.value_bits.unwrap_or(8);
    let spec = JobSpec::new(
        config.nodes,
        config.functions,
        config.files,
        r,
        config.reduce_replication,
        t,
    )?;
    spec.reduce_batch_size()?;
    let job = SyntheticJob::new(spec.functions, t);
    (0..config.trials as u64)
        .map(|i| {
            let seed = config.seed + i;
            let inputs = synthetic_inputs(spec.files, INPUT_BYTES, seed);
            let mut loads = Vec::new();
            let mut decoded = true;
            let mut bound = Rational::from_integer(0.into());
            for strategy in [Strategy::RandomPlacementCoded, Strategy::Uncoded] {
                let mut rc = RunConfig::new(strategy);
                rc.placement = PlacementKind::Random(seed);
                rc.workers = config.workers;
                let run = run_job(&spec, &job, &inputs, &rc)?;
                decoded &= run.oracle.as_ref().is_some_and(|o| o.passed());
                bound = lower_bound_lemma1(&count_a_profile(&run.map_assignment));
                loads.push(run.report.load());
            }
            let uncoded = loads.pop().expect("two runs");
            let coded = loads.pop().expect("two runs");
            Ok(PlacementTrial {
                seed,
                bound,
                coded,
                uncoded,
                decoded,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SortRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub r: usize,
    pub strategy: &'static str,
    pub records: usize,
    pub files: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub total_bits: u64,
    pub useful_bits: u64,
    pub load: String,
    pub useful_load: String,
    pub matches_oracle: bool,
}

/// Sorts `config.records` records at every load, coded and uncoded.
pub fn run_sort(config: &ExperimentConfig) -> Result<Vec<SortRow>> {
    let mut rows = Vec::new();
    for r in &config.loads() {
        let r = as_usize(r).ok_or_else(|| CdcError::Config("sorting needs integer r".into()))?;
        let mut sc = SortConfig::new(config.nodes, r, config.records, config.seed);
        sc.workers = config.workers;
        let outcome = run_coded_sort(&sc)?;
        for run in &outcome.runs {
            rows.push(SortRow {
                k: config.nodes,
                r,
                strategy: run.strategy.name(),
                records: config.records,
                files: outcome.files,
                t: outcome.value_bits,
                total_bits: run.report.total_bits,
                useful_bits: run.report.useful_bits,
                load: format_rational(&run.report.load()),
                useful_load: format_rational(&run.report.useful_load()),
                matches_oracle: run.matches_oracle,
            });
        }
    }
    Ok(rows)
}

/// Uncoded and coded loads with the converse bound, r = 1..=K.
pub fn bounds_rows(config: &ExperimentConfig) -> Result<Vec<crate::bounds::BoundRow>> {
    crate::bounds::bound_table(config.nodes, config.reduce_replication)
}
