//! Python module `matchgate`.
//!
//! Inputs are passed as a bit string (`"0110"`) for computational-basis states or
//! a list of `(theta, phi)` pairs for product states. Measurements are qubit
//! indices (Z basis) or `(qubit, theta, phi)` triples.

use matchgate_sim::format::{parse_circuit, serialize_circuit, CircuitFile, MeasurementPlan};
use matchgate_sim::jw::compose_transfer;
use matchgate_sim::linalg::{Mat2, C64};
use matchgate_sim::model::{
    AdaptiveProgram, BitString, Circuit, InputSpec, Matchgate, Measurement, MeasurementBasis, OutcomeAssignment,
    SingleQubitState,
};
use matchgate_sim::{oracle, prep, strong, weak, Error};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(matchgate, MatchgateError, PyException);
create_exception!(matchgate, InputError, MatchgateError);
create_exception!(matchgate, IntegrityError, MatchgateError);

fn err(e: Error) -> PyErr {
    if e.is_integrity_failure() {
        IntegrityError::new_err(e.to_string())
    } else {
        InputError::new_err(e.to_string())
    }
}

trait OrPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> OrPy<T> for Result<T, Error> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(err)
    }
}

#[derive(FromPyObject)]
enum Input {
    Bits(String),
    Product(Vec<(f64, f64)>),
}

impl Input {
    fn spec(&self) -> PyResult<InputSpec> {
        match self {
            Input::Bits(s) => Ok(InputSpec::Basis(bits(s)?)),
            Input::Product(v) => v
                .iter()
                .map(|&(t, p)| SingleQubitState::new(t, p))
                .collect::<Result<Vec<_>, _>>()
                .map(InputSpec::Product)
                .py_err(),
        }
    }
}

#[derive(FromPyObject)]
enum Measure {
    Z(usize),
    Rotated((usize, f64, f64)),
}

impl Measure {
    fn convert(&self) -> PyResult<Measurement> {
        match *self {
            Measure::Z(q) => Ok(Measurement::computational(q)),
            Measure::Rotated((q, t, p)) => Ok(Measurement {
                qubit: q,
                basis: MeasurementBasis::rotated(t, p).py_err()?,
            }),
        }
    }
}

fn measurements(m: &[Measure]) -> PyResult<Vec<Measurement>> {
    m.iter().map(Measure::convert).collect()
}

fn bits(s: &str) -> PyResult<BitString> {
    s.parse::<BitString>().py_err()
}

fn input_to_py(py: Python<'_>, input: &InputSpec) -> PyResult<Py<PyAny>> {
    Ok(match input {
        InputSpec::Basis(x) => x.to_string().into_pyobject(py)?.into_any().unbind(),
        InputSpec::Product(s) => s
            .iter()
            .map(|q| (q.theta(), q.phi()))
            .collect::<Vec<_>>()
            .into_pyobject(py)?
            .into_any()
            .unbind(),
    })
}

fn measure_to_py(m: &Measurement) -> (usize, Option<(f64, f64)>) {
    match m.basis {
        MeasurementBasis::Computational => (m.qubit, None),
        MeasurementBasis::Rotated(s) => (m.qubit, Some((s.theta(), s.phi()))),
    }
}

/// Two-qubit gate `G(A, B)` with `det A = det B`.
#[pyclass(name = "Matchgate", frozen, from_py_object)]
#[derive(Clone)]
struct PyMatchgate(Matchgate);

#[pymethods]
impl PyMatchgate {
    #[new]
    fn new(a: Mat2, b: Mat2) -> PyResult<Self> {
        Matchgate::new(a, b).map(PyMatchgate).py_err()
    }

    #[staticmethod]
    fn identity() -> Self {
        PyMatchgate(Matchgate::identity())
    }

    #[staticmethod]
    fn fswap() -> Self {
        PyMatchgate(Matchgate::fswap())
    }

    #[staticmethod]
    fn hadamard() -> Self {
        PyMatchgate(Matchgate::hadamard())
    }

    #[staticmethod]
    fn z_rotation(theta: f64) -> Self {
        PyMatchgate(Matchgate::z_rotation_first(theta))
    }

    #[staticmethod]
    fn xx_rotation(theta: f64) -> Self {
        PyMatchgate(Matchgate::xx_rotation(theta))
    }

    #[staticmethod]
    fn hopping(theta: f64) -> Self {
        PyMatchgate(Matchgate::hopping(theta))
    }

    /// 4×4 matrix in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
    fn matrix(&self) -> Vec<Vec<C64>> {
        let m = self.0.matrix();
        (0..4).map(|i| m.row(i).to_vec()).collect()
    }

    #[getter]
    fn number_preserving(&self) -> bool {
        self.0.is_number_preserving()
    }

    fn __repr__(&self) -> String {
        format!("Matchgate(number_preserving={})", self.0.is_number_preserving())
    }
}

#[pyclass(name = "Circuit", from_py_object)]
#[derive(Clone)]
struct PyCircuit(Circuit);

#[pymethods]
impl PyCircuit {
    #[new]
    #[pyo3(signature = (n, pbc = false))]
    fn new(n: usize, pbc: bool) -> PyResult<Self> {
        Circuit::with_boundary(n, pbc).map(PyCircuit).py_err()
    }

    /// Appends `gate` on qubits `(position, position + 1)`.
    fn push(&mut self, gate: &PyMatchgate, position: usize) -> PyResult<()> {
        self.0.push(gate.0.clone(), position).py_err()?;
        Ok(())
    }

    /// Appends `gate` on the wrap-around pair `(n, 1)`.
    fn push_wrap(&mut self, gate: &PyMatchgate) -> PyResult<()> {
        self.0.push_wrap(gate.0.clone()).py_err()?;
        Ok(())
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn pbc(&self) -> bool {
        self.0.pbc()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Circuit file text with the given input and measurements.
    #[pyo3(signature = (input, measure = vec![]))]
    fn to_json(&self, input: Input, measure: Vec<Measure>) -> PyResult<String> {
        Ok(serialize_circuit(&CircuitFile {
            circuit: self.0.clone(),
            input: input.spec()?,
            plan: MeasurementPlan::Fixed(measurements(&measure)?),
        }))
    }

    /// Real `2n × 2n` Majorana transfer matrix of the circuit.
    fn transfer_matrix(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(compose_transfer(&self.0).py_err()?.majorana_matrix())
    }

    fn __repr__(&self) -> String {
        format!("Circuit(n={}, pbc={}, gates={})", self.0.n(), self.0.pbc(), self.0.len())
    }
}

#[pyclass(name = "AdaptiveProgram", frozen, from_py_object)]
#[derive(Clone)]
struct PyProgram(AdaptiveProgram);

#[pymethods]
impl PyProgram {
    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn rounds(&self) -> usize {
        self.0.rounds().len()
    }

    /// Every complete trace, each a list of per-round bit strings.
    fn all_traces(&self) -> Vec<Vec<String>> {
        self.0
            .all_traces()
            .iter()
            .map(|t| t.iter().map(BitString::to_string).collect())
            .collect()
    }
}

/// Parses a circuit file into a dict with `circuit`, `input` and either
/// `measure` or `program`.
#[pyfunction]
fn parse_file<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyDict>> {
    let f = parse_circuit(text).py_err()?;
    let d = PyDict::new(py);
    d.set_item("circuit", PyCircuit(f.circuit))?;
    d.set_item("input", input_to_py(py, &f.input)?)?;
    match f.plan {
        MeasurementPlan::Fixed(m) => d.set_item("measure", m.iter().map(measure_to_py).collect::<Vec<_>>())?,
        MeasurementPlan::Adaptive(p) => d.set_item("program", PyProgram(p))?,
    }
    Ok(d)
}

fn traces(t: &[String]) -> PyResult<Vec<BitString>> {
    t.iter().map(|s| bits(s)).collect()
}

/// Probability of a computational-basis partial outcome `[(qubit, bit), ...]`.
#[pyfunction]
fn prob(circuit: &PyCircuit, input: Input, outcome: Vec<(usize, u8)>) -> PyResult<f64> {
    let a = OutcomeAssignment::computational(&outcome).py_err()?;
    strong::prob_partial(&circuit.0, &input.spec()?, &a).py_err()
}

/// Outcome probabilities over `qubits`, first qubit most significant.
#[pyfunction]
fn marginal_table(circuit: &PyCircuit, input: Input, qubits: Vec<usize>) -> PyResult<Vec<f64>> {
    strong::marginal_table(&circuit.0, &input.spec()?, &qubits).py_err()
}

/// `|⟨y|M|x⟩|²`.
#[pyfunction]
fn prob_full(circuit: &PyCircuit, x: &str, y: &str) -> PyResult<f64> {
    strong::prob_full_basis(&circuit.0, &bits(x)?, &bits(y)?).py_err()
}

/// `⟨y|M|x⟩` for circuits of number-preserving gates.
#[pyfunction]
fn amplitude(circuit: &PyCircuit, x: &str, y: &str) -> PyResult<C64> {
    strong::amplitude(&circuit.0, &bits(x)?, &bits(y)?).py_err()
}

#[pyfunction]
fn expectation_z(circuit: &PyCircuit, input: Input, qubit: usize) -> PyResult<f64> {
    strong::expectation_z(&circuit.0, &input.spec()?, qubit).py_err()
}

/// Seeded samples of `measure`, one bit string per shot.
#[pyfunction]
#[pyo3(signature = (circuit, input, measure, shots, seed = 0))]
fn sample(
    py: Python<'_>,
    circuit: &PyCircuit,
    input: Input,
    measure: Vec<Measure>,
    shots: usize,
    seed: u64,
) -> PyResult<Vec<String>> {
    let (input, measure) = (input.spec()?, measurements(&measure)?);
    let c = &circuit.0;
    let out = py.detach(|| weak::sample(c, &input, &measure, seed, shots)).py_err()?;
    Ok(out.iter().map(BitString::to_string).collect())
}

/// Seeded runs of an adaptive program as `(rounds, trace)` pairs.
#[pyfunction]
#[pyo3(signature = (program, input, shots, seed = 0))]
fn run_adaptive(
    py: Python<'_>,
    program: &PyProgram,
    input: Input,
    shots: usize,
    seed: u64,
) -> PyResult<Vec<(Vec<usize>, Vec<String>)>> {
    let input = input.spec()?;
    let p = &program.0;
    let out = py.detach(|| weak::run_adaptive(p, &input, seed, shots)).py_err()?;
    Ok(out
        .into_iter()
        .map(|s| (s.rounds, s.trace.iter().map(BitString::to_string).collect()))
        .collect())
}

/// Joint probability of an adaptive trace.
#[pyfunction]
fn trace_probability(program: &PyProgram, input: Input, trace: Vec<String>) -> PyResult<f64> {
    strong::adaptive_joint_prob(&program.0, &input.spec()?, &traces(&trace)?).py_err()
}

/// Distribution of the round after `trace`, conditioned on it.
#[pyfunction]
fn next_round_distribution(program: &PyProgram, input: Input, trace: Vec<String>) -> PyResult<Vec<f64>> {
    weak::final_round_distribution(&program.0, &input.spec()?, &traces(&trace)?).py_err()
}

/// Dense state-vector distribution of `measure` (any bases), for small `n`.
#[pyfunction]
fn oracle_distribution(circuit: &PyCircuit, input: Input, measure: Vec<Measure>) -> PyResult<Vec<f64>> {
    let sv = oracle::run_circuit(&circuit.0, &input.spec()?).py_err()?;
    oracle::exact_distribution(&sv, &measurements(&measure)?).py_err()
}

/// Preparation circuit on `n + 1` qubits (catalyst last) for a product state.
#[pyfunction]
fn preparation_circuit(states: Vec<(f64, f64)>) -> PyResult<PyCircuit> {
    let s = states
        .iter()
        .map(|&(t, p)| SingleQubitState::new(t, p))
        .collect::<Result<Vec<_>, _>>()
        .py_err()?;
    Ok(PyCircuit(prep::synthesize_preparation(&s).circuit().clone()))
}

#[pymodule]
fn matchgate(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("MatchgateError", py.get_type::<MatchgateError>())?;
    m.add("InputError", py.get_type::<InputError>())?;
    m.add("IntegrityError", py.get_type::<IntegrityError>())?;
    m.add_class::<PyMatchgate>()?;
    m.add_class::<PyCircuit>()?;
    m.add_class::<PyProgram>()?;
    m.add_function(wrap_pyfunction!(parse_file, m)?)?;
    m.add_function(wrap_pyfunction!(prob, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_table, m)?)?;
    m.add_function(wrap_pyfunction!(prob_full, m)?)?;
    m.add_function(wrap_pyfunction!(amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(expectation_z, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(run_adaptive, m)?)?;
    m.add_function(wrap_pyfunction!(trace_probability, m)?)?;
    m.add_function(wrap_pyfunction!(next_round_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(preparation_circuit, m)?)?;
    Ok(())
}
