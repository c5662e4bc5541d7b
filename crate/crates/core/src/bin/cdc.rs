use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cdc_core::codec::write_log;
use cdc_core::engine::{
    run_job, synthetic_inputs, write_load_csv, RunConfig, Strategy, SyntheticJob,
};
use cdc_core::experiments::{
    bounds_rows, replay_example, replay_examples, run_random_placements, run_sort, run_sweep,
    write_csv, ExampleRow, ExperimentConfig, Mode, SweepPoint,
};
use cdc_core::placement::JobSpec;
use cdc_core::rational::format_rational;
use cdc_core::CdcError;

const SWEEP_COLUMNS: &str = "CSV columns (after '# key=value' config lines):
  K,Q,N,T,s,r        job parameters of the row
  L_uncoded          measured uncoded load (empty with --uncoded false)
  L_coded_formula    closed-form coded load (convex envelope for fractional r)
  L_measured         measured coded load, bits sent / (Q N T)
  lemma_bound        converse bound at the placement used
  messages           coded multicast messages sent
Loads are exact fractions such as 1/6.";

const EXAMPLE_COLUMNS: &str = "CSV columns:
  example,K,T         which worked example and its value size
  messages            multicast messages sent
  message_bits        'count x bits' per message length
  load,expected_load  measured and expected load
  golden_match        log identical to the stored golden log
  content_match       payloads match direct evaluation
  passed              all of the above plus decoding and sizes";

const PLACEMENT_COLUMNS: &str = "CSV columns:
  seed                placement seed
  lemma_bound         converse bound for the drawn placement
  L_coded,L_uncoded   measured loads of both shuffles
  decoded             every reducer output verified
  respects_bound      both loads at or above the bound";

const SORT_COLUMNS: &str = "CSV columns:
  K,r,strategy,records,files,T   run parameters (T is the framed group size)
  total_bits,useful_bits         bits sent, and bits carrying records or frame headers
  load,useful_load               both normalized by Q N T
  matches_oracle                 output equals a single-machine sort";

const BOUNDS_COLUMNS: &str = "CSV columns:
  K,s,r               parameters
  l_uncoded,l_coded   closed-form loads
  bound               converse bound at the canonical placement";

const RUN_COLUMNS: &str = "CSV columns:
  strategy,K,r,s,Q,N,T   run parameters
  total_bits             bits sent in the shuffle
  load_num,load_den      the load as an exact fraction";

/// Coded distributed computing experiments. Results are CSV on stdout or
/// --output. Exit status: 0 success, 1 invalid input, 2 a checked property
/// failed.
#[derive(Parser)]
#[command(name = "cdc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measured coded and uncoded loads over a range of r.
    #[command(after_help = SWEEP_COLUMNS)]
    Sweep(Settings),
    /// Replays the three-node worked example.
    #[command(after_help = EXAMPLE_COLUMNS)]
    Example1(Settings),
    /// Replays the four-node example with two reducers per function.
    #[command(after_help = EXAMPLE_COLUMNS)]
    Example2(Settings),
    /// Replays both worked examples.
    #[command(after_help = EXAMPLE_COLUMNS)]
    Examples(Settings),
    /// Distributed sort of seeded random records, coded and uncoded.
    #[command(after_help = SORT_COLUMNS)]
    Sort(Settings),
    /// Seeded random placements checked against the converse bound.
    #[command(name = "random-placement", after_help = PLACEMENT_COLUMNS)]
    RandomPlacement(Settings),
    /// Closed-form loads and bounds for r = 1..K.
    #[command(after_help = BOUNDS_COLUMNS)]
    Bounds(Settings),
    /// One job at the first r; optionally dumps the binary message log.
    #[command(after_help = RUN_COLUMNS)]
    Run {
        #[command(flatten)]
        settings: Settings,
        #[arg(long, value_enum, default_value = "coded")]
        strategy: StrategyArg,
        /// Where to write the message log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Coded,
    Uncoded,
}

/// Settings shared by every command. A --config file of key=value lines is
/// applied first; flags override it.
#[derive(Args)]
struct Settings {
    /// key=value file (keys: K r s Q N T seed trials records uncoded workers output).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of nodes K.
    #[arg(short = 'K', long = "nodes")]
    nodes: Option<String>,
    /// Computation loads: 3, 5/2, 1..10 or a comma list.
    #[arg(short = 'r', long = "loads")]
    loads: Option<String>,
    /// Nodes reducing each function.
    #[arg(short = 's', long)]
    s: Option<String>,
    /// Number of output functions Q.
    #[arg(short = 'Q', long = "functions")]
    functions: Option<String>,
    /// Number of input files N.
    #[arg(short = 'N', long = "files")]
    files: Option<String>,
    /// Intermediate value size T in bits, or "auto".
    #[arg(short = 'T', long = "value-bits")]
    value_bits: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Random placements to draw.
    #[arg(long)]
    trials: Option<String>,
    /// Records to sort.
    #[arg(long)]
    records: Option<String>,
    /// Also measure the uncoded shuffle in sweeps (true/false).
    #[arg(long)]
    uncoded: Option<String>,
    /// Worker threads, 0 for one per core.
    #[arg(long)]
    workers: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

impl Settings {
    fn resolve(&self, mode: Mode) -> Result<ExperimentConfig, CdcError> {
        let mut c = ExperimentConfig::for_mode(mode);
        if let Some(path) = &self.config {
            c.apply_file(path)?;
            c.mode = mode;
        }
        let flags = [
            ("K", &self.nodes),
            ("r", &self.loads),
            ("s", &self.s),
            ("Q", &self.functions),
            ("N", &self.files),
            ("T", &self.value_bits),
            ("seed", &self.seed),
            ("trials", &self.trials),
            ("records", &self.records),
            ("uncoded", &self.uncoded),
            ("workers", &self.workers),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                c.set(key, v)?;
            }
        }
        if let Some(path) = &self.output {
            c.output = Some(path.clone());
        }
        Ok(c)
    }
}

enum Failure {
    Invalid(CdcError),
    Violated(String),
}

impl From<CdcError> for Failure {
    fn from(e: CdcError) -> Self {
        Failure::Invalid(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.into())
    }
}

fn sink(config: &ExperimentConfig) -> io::Result<Box<dyn Write>> {
    Ok(match &config.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit<T: Serialize>(config: &ExperimentConfig, rows: &[T]) -> Result<(), Failure> {
    write_csv(config, rows, sink(config)?)?;
    Ok(())
}

fn check(failures: Vec<String>) -> Result<(), Failure> {
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violated(failures.join("\n")))
    }
}

fn sweep(config: &ExperimentConfig) -> Result<(), Failure> {
    let points = run_sweep(config)?;
    let rows: Vec<_> = points.iter().map(SweepPoint::row).collect();
    emit(config, &rows)?;
    check(
        points
            .iter()
            .filter(|p| !p.matches_formula() || p.measured < p.bound)
            .map(|p| {
                format!(
                    "r = {}: measured {} vs formula {} and bound {}",
                    format_rational(&p.spec.computation_load),
                    format_rational(&p.measured),
                    format_rational(&p.formula),
                    format_rational(&p.bound)
                )
            })
            .collect(),
    )
}

fn examples(config: &ExperimentConfig, which: Option<Mode>) -> Result<(), Failure> {
    let replays = match which {
        Some(mode) => vec![replay_example(mode)?],
        None => replay_examples()?,
    };
    let rows: Vec<ExampleRow> = replays.iter().map(ExampleRow::from).collect();
    emit(config, &rows)?;
    check(
        replays
            .iter()
            .filter(|e| !e.passed())
            .map(|e| format!("{} does not replay", e.name))
            .collect(),
    )
}

fn random_placement(config: &ExperimentConfig) -> Result<(), Failure> {
    let trials = run_random_placements(config)?;
    let rows: Vec<_> = trials.iter().map(|t| t.row()).collect();
    emit(config, &rows)?;
    check(
        trials
            .iter()
            .filter(|t| !t.decoded || !t.respects_bound())
            .map(|t| format!("seed {}: load below bound or decode failure", t.seed))
            .collect(),
    )
}

fn sort(config: &ExperimentConfig) -> Result<(), Failure> {
    let rows = run_sort(config)?;
    emit(config, &rows)?;
    let mut failures: Vec<String> = rows
        .iter()
        .filter(|row| !row.matches_oracle)
        .map(|row| {
            format!(
                "r = {} {}: output differs from the oracle",
                row.r, row.strategy
            )
        })
        .collect();
    for pair in rows.chunks(2) {
        if let [coded, uncoded] = pair {
            if coded.r >= 2 && coded.useful_bits > uncoded.useful_bits {
                failures.push(format!("r = {}: coded sent more useful bits", coded.r));
            }
        }
    }
    check(failures)
}

fn bounds(config: &ExperimentConfig) -> Result<(), Failure> {
    let rows = bounds_rows(config)?;
    emit(config, &rows)?;
    check(
        rows.iter()
            .filter(|row| row.bound != row.l_coded)
            .map(|row| format!("r = {}: bound {} below {}", row.r, row.bound, row.l_coded))
            .collect(),
    )
}

fn run(
    config: &ExperimentConfig,
    strategy: StrategyArg,
    log: Option<&PathBuf>,
) -> Result<(), Failure> {
    let strategy = match strategy {
        StrategyArg::Coded => Strategy::Coded,
        StrategyArg::Uncoded => Strategy::Uncoded,
    };
    let t = config.value_bits.unwrap_or(8);
    let spec = JobSpec::with_load(
        config.nodes,
        config.functions,
        config.files,
        config.first_load(),
        config.reduce_replication,
        t,
    )?;
    let job = SyntheticJob::new(spec.functions, t);
    let inputs = synthetic_inputs(spec.files, 16, config.seed);
    let mut rc = RunConfig::new(strategy);
    rc.workers = config.workers;
    let out = run_job(&spec, &job, &inputs, &rc)?;
    if let Some(path) = log {
        write_log(&out.messages, BufWriter::new(File::create(path)?))?;
    }
    let mut w = sink(config)?;
    w.write_all(config.header().as_bytes())?;
    write_load_csv([&out.report], w)?;
    match out.oracle {
        Some(o) if !o.passed() => Err(Failure::Violated(format!(
            "reducer output diverges at {:?}",
            o.first_divergence
        ))),
        _ => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(s) => s
            .resolve(Mode::Sweep)
            .map_err(Failure::from)
            .and_then(|c| sweep(&c)),
        Command::Example1(s) => s
            .resolve(Mode::Example1)
            .map_err(Failure::from)
            .and_then(|c| examples(&c, Some(Mode::Example1))),
        Command::Example2(s) => s
            .resolve(Mode::Example2)
            .map_err(Failure::from)
            .and_then(|c| examples(&c, Some(Mode::Example2))),
        Command::Examples(s) => s
            .resolve(Mode::Example1)
            .map_err(Failure::from)
            .and_then(|c| examples(&c, None)),
        Command::Sort(s) => s
            .resolve(Mode::Sort)
            .map_err(Failure::from)
            .and_then(|c| sort(&c)),
        Command::RandomPlacement(s) => s
            .resolve(Mode::RandomPlacement)
            .map_err(Failure::from)
            .and_then(|c| random_placement(&c)),
        Command::Bounds(s) => s
            .resolve(Mode::Bounds)
            .map_err(Failure::from)
            .and_then(|c| bounds(&c)),
        Command::Run {
            settings,
            strategy,
            log,
        } => settings
            .resolve(Mode::Sweep)
            .map_err(Failure::from)
            .and_then(|c| run(&c, *strategy, log.as_ref())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Violated(why)) => {
            eprintln!("check failed: {why}");
            ExitCode::from(2)
        }
    }
}
