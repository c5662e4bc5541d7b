use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList};

use cdc_core::bounds::{self, AProfile};
use cdc_core::engine::{self, PlacementKind, RunConfig, Strategy, SyntheticJob};
use cdc_core::experiments::{self, ExperimentConfig};
use cdc_core::gf2m;
use cdc_core::placement::{assign_split_tasks, JobSpec};
use cdc_core::rational::{parse_rational, Rational};
use cdc_core::sortapp::{self, SortConfig};
use cdc_core::CdcError;

fn err(e: CdcError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fraction<'py>(py: Python<'py>, r: &Rational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((r.numer().clone(), r.denom().clone()))
}

fn load_arg(r: &Bound<'_, PyAny>) -> PyResult<Rational> {
    parse_rational(&r.str()?.to_cow()?).map_err(err)
}

fn strategy(name: &str) -> PyResult<Strategy> {
    match name {
        "coded" => Ok(Strategy::Coded),
        "uncoded" => Ok(Strategy::Uncoded),
        "random_placement_coded" => Ok(Strategy::RandomPlacementCoded),
        other => Err(PyValueError::new_err(format!("unknown strategy {other:?}"))),
    }
}

/// Coded load at integer r with s reducers per function.
#[pyfunction]
fn l_coded<'py>(py: Python<'py>, r: usize, s: usize, nodes: usize) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &bounds::l_coded(r, s, nodes).map_err(err)?)
}

/// 1 - r/K; r may be an int, a Fraction or a string such as "5/2".
#[pyfunction]
fn l_uncoded<'py>(
    py: Python<'py>,
    r: &Bound<'py, PyAny>,
    nodes: usize,
) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &bounds::l_uncoded(&load_arg(r)?, nodes).map_err(err)?)
}

/// Converse bound for a profile `a`, where `a[j-1]` files sit on exactly j nodes.
#[pyfunction]
#[pyo3(signature = (a, s=1))]
fn lower_bound<'py>(py: Python<'py>, a: Vec<u64>, s: usize) -> PyResult<Bound<'py, PyAny>> {
    let profile = AProfile::new(a.len(), a).map_err(err)?;
    let bound = if s == 1 {
        bounds::lower_bound_lemma1(&profile)
    } else {
        bounds::lower_bound_lemma2(&profile, s).map_err(err)?
    };
    fraction(py, &bound)
}

/// (lhs, rhs, holds) of the round-size counting identity.
#[pyfunction]
fn counting_identity(nodes: usize, r: usize, s: usize) -> (u64, u64, bool) {
    bounds::counting_identity(nodes, r, s)
}

/// Nodes mapping each file (1-based) under the canonical placement.
#[pyfunction]
#[pyo3(signature = (nodes, files, r, functions=None, s=1))]
fn placement(
    nodes: usize,
    files: usize,
    r: &Bound<'_, PyAny>,
    functions: Option<usize>,
    s: usize,
) -> PyResult<Vec<Vec<usize>>> {
    let spec = JobSpec::with_load(nodes, functions.unwrap_or(nodes), files, load_arg(r)?, s, 8)
        .map_err(err)?;
    let fa = assign_split_tasks(&spec).map_err(err)?;
    Ok((1..=fa.total_files())
        .map(|n| fa.holders(n).members().to_vec())
        .collect())
}

/// Runs a synthetic job end to end and returns its load report and message log.
#[pyfunction]
#[pyo3(signature = (nodes, functions, files, r, s=1, value_bits=8, strategy="coded", seed=1, random_placement=None))]
#[allow(clippy::too_many_arguments)]
fn run_job<'py>(
    py: Python<'py>,
    nodes: usize,
    functions: usize,
    files: usize,
    r: &Bound<'py, PyAny>,
    s: usize,
    value_bits: usize,
    strategy: &str,
    seed: u64,
    random_placement: Option<u64>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec =
        JobSpec::with_load(nodes, functions, files, load_arg(r)?, s, value_bits).map_err(err)?;
    let job = SyntheticJob::new(functions, value_bits);
    let inputs = engine::synthetic_inputs(files, 16, seed);
    let mut config = RunConfig::new(self::strategy(strategy)?);
    if let Some(seed) = random_placement {
        config.placement = PlacementKind::Random(seed);
    }
    let out = py
        .detach(|| engine::run_job(&spec, &job, &inputs, &config))
        .map_err(err)?;
    let log = cdc_core::codec::encode_log(&out.messages).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("load", fraction(py, &out.report.load())?)?;
    d.set_item("padded_load", fraction(py, &out.report.padded_load())?)?;
    d.set_item("total_bits", out.report.total_bits)?;
    d.set_item("messages", out.report.messages)?;
    d.set_item("message_bits", engine::message_sizes(&out.messages))?;
    d.set_item("verified", out.oracle.is_some_and(|o| o.passed()))?;
    d.set_item("log", PyBytes::new(py, &log))?;
    Ok(d)
}

/// Replays both worked examples against the stored golden logs.
#[pyfunction]
fn replay_examples<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
    let replays = py.detach(experiments::replay_examples).map_err(err)?;
    let out = PyList::empty(py);
    for e in &replays {
        let d = PyDict::new(py);
        d.set_item("name", e.name)?;
        d.set_item("messages", e.messages.len())?;
        d.set_item("message_bits", e.sizes.clone())?;
        d.set_item("load", fraction(py, &e.load)?)?;
        d.set_item("golden_match", e.golden_match)?;
        d.set_item("passed", e.passed())?;
        out.append(d)?;
    }
    Ok(out)
}

/// Load sweep configured by `key=value` lines, as in the CLI config file.
#[pyfunction]
fn sweep<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyList>> {
    let mut c = ExperimentConfig::default();
    c.apply_text(config).map_err(err)?;
    let points = py.detach(|| experiments::run_sweep(&c)).map_err(err)?;
    let out = PyList::empty(py);
    for p in &points {
        let d = PyDict::new(py);
        d.set_item("r", fraction(py, &p.spec.computation_load)?)?;
        d.set_item("T", p.spec.value_bits)?;
        d.set_item("formula", fraction(py, &p.formula)?)?;
        d.set_item("measured", fraction(py, &p.measured)?)?;
        d.set_item("bound", fraction(py, &p.bound)?)?;
        if let Some(u) = &p.uncoded {
            d.set_item("uncoded", fraction(py, u)?)?;
        }
        out.append(d)?;
    }
    Ok(out)
}

/// Sorts seeded random 100-byte records; one dict per strategy.
#[pyfunction]
#[pyo3(signature = (nodes, r, records, seed=1))]
fn coded_sort<'py>(
    py: Python<'py>,
    nodes: usize,
    r: usize,
    records: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyList>> {
    let config = SortConfig::new(nodes, r, records, seed);
    let outcome = py
        .detach(|| sortapp::run_coded_sort(&config))
        .map_err(err)?;
    let out = PyList::empty(py);
    for run in &outcome.runs {
        let d = PyDict::new(py);
        d.set_item("strategy", run.strategy.name())?;
        d.set_item("total_bits", run.report.total_bits)?;
        d.set_item("useful_bits", run.report.useful_bits)?;
        d.set_item("load", fraction(py, &run.report.load())?)?;
        d.set_item("matches_oracle", run.matches_oracle)?;
        out.append(d)?;
    }
    Ok(out)
}

/// GF(2^m) with a fixed irreducible polynomial per m.
#[pyclass(name = "GaloisField", frozen)]
struct PyGaloisField(gf2m::GaloisField);

#[pymethods]
impl PyGaloisField {
    #[new]
    #[pyo3(signature = (m=8))]
    fn new(m: u32) -> PyResult<Self> {
        gf2m::GaloisField::with_degree(m).map(Self).map_err(err)
    }

    #[getter]
    fn degree(&self) -> u32 {
        self.0.degree()
    }

    fn add(&self, a: u64, b: u64) -> PyResult<u32> {
        let (a, b) = (
            self.0.element(a).map_err(err)?,
            self.0.element(b).map_err(err)?,
        );
        Ok(self.0.add(a, b).map_err(err)?.value())
    }

    fn mul(&self, a: u64, b: u64) -> PyResult<u32> {
        let (a, b) = (
            self.0.element(a).map_err(err)?,
            self.0.element(b).map_err(err)?,
        );
        Ok(self.0.mul(a, b).map_err(err)?.value())
    }

    fn inv(&self, a: u64) -> PyResult<u32> {
        let a = self.0.element(a).map_err(err)?;
        Ok(self.0.inv(a).map_err(err)?.value())
    }

    fn pow(&self, a: u64, e: u64) -> PyResult<u32> {
        let a = self.0.element(a).map_err(err)?;
        Ok(self.0.pow(a, e).map_err(err)?.value())
    }

    fn __repr__(&self) -> String {
        format!("GaloisField(m={})", self.0.degree())
    }
}

#[pymodule]
fn cdc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGaloisField>()?;
    m.add_function(wrap_pyfunction!(l_coded, m)?)?;
    m.add_function(wrap_pyfunction!(l_uncoded, m)?)?;
    m.add_function(wrap_pyfunction!(lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(counting_identity, m)?)?;
    m.add_function(wrap_pyfunction!(placement, m)?)?;
    m.add_function(wrap_pyfunction!(run_job, m)?)?;
    m.add_function(wrap_pyfunction!(replay_examples, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(coded_sort, m)?)?;
    Ok(())
}
