//! Command implementations. Each returns its result fields and the seed used.

use crate::args::{parse_measure, parse_outcome, parse_subset, parse_trace};
use crate::report::{sha256_hex, Field};
use matchgate_sim::format::{parse_circuit, CircuitFile, MeasurementPlan};
use matchgate_sim::model::{AdaptiveProgram, BitString, InputSpec, Measurement, OutcomeAssignment};
use matchgate_sim::oracle::{adaptive_trace_probability, exact_distribution, run_circuit, IMPOSSIBLE, MAX_QUBITS};
use matchgate_sim::strong::{
    adaptive_joint_prob, expectation_z, marginal_table, prob_partial_basis, prob_partial_product,
};
use matchgate_sim::weak::{final_round_distribution, run_adaptive, sample};
use matchgate_sim::Error;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug)]
pub enum CliError {
    Sim(Error),
    Input(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Sim(e)
    }
}

impl CliError {
    /// 1 for numerical integrity failures, 2 for everything the user can fix.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Sim(e) if e.is_integrity_failure() => 1,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        if self.exit_code() == 1 {
            "integrity"
        } else {
            "input"
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Input(s) => write!(f, "{s}"),
        }
    }
}

pub type Fields = Vec<(String, Field)>;

/// A parsed circuit file with the digest of its bytes.
pub struct Loaded {
    pub file: CircuitFile,
    pub digest: String,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let file = parse_circuit(text)?;
    Ok(Loaded {
        file,
        digest: sha256_hex(&bytes),
    })
}

/// Flags shared by `prob` and `oracle`.
#[derive(Debug, Default, Clone)]
pub struct Query {
    pub outcome: Option<String>,
    pub all_over: Option<String>,
    pub trace: Option<String>,
    pub measure: Option<String>,
}

fn input_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Input(msg.into()))
}

fn field(name: &str, f: Field) -> (String, Field) {
    (name.to_string(), f)
}

fn join(qubits: &[usize]) -> String {
    qubits.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn table(values: &[f64], k: usize) -> Field {
    Field::Table(
        values
            .iter()
            .enumerate()
            .map(|(i, &p)| (BitString::from_index(i, k).to_string(), p))
            .collect(),
    )
}

fn input_kind(input: &InputSpec) -> &'static str {
    match input {
        InputSpec::Basis(_) => "basis",
        InputSpec::Product(_) => "product",
    }
}

pub fn validate(l: &Loaded) -> Fields {
    let f = &l.file;
    let plan = match &f.plan {
        MeasurementPlan::Fixed(m) => format!("{} measured qubits", m.len()),
        MeasurementPlan::Adaptive(p) => format!("adaptive, {} rounds", p.rounds().len()),
    };
    vec![
        field("status", Field::Text("valid".into())),
        field("qubits", Field::Count(f.circuit.n() as u64)),
        field("periodic", Field::Text(f.circuit.pbc().to_string())),
        field("gates", Field::Count(f.circuit.len() as u64)),
        field("input", Field::Text(input_kind(&f.input).into())),
        field("plan", Field::Text(plan)),
    ]
}

/// Measurements a query refers to when no outcome is given.
fn query_measurements(q: &Query, plan: &[Measurement]) -> Result<Vec<Measurement>, CliError> {
    if let Some(s) = &q.all_over {
        return Ok(parse_subset(s)
            .map_err(CliError::Input)?
            .into_iter()
            .map(Measurement::computational)
            .collect());
    }
    if let Some(s) = &q.measure {
        return parse_measure(s).map_err(CliError::Input);
    }
    if plan.is_empty() {
        return input_err("nothing to evaluate: pass --outcome or --all-over, or add a measure block");
    }
    Ok(plan.to_vec())
}

fn computational_qubits(m: &[Measurement]) -> Result<Vec<usize>, CliError> {
    if m.iter().any(|m| !m.basis.is_computational()) {
        return Err(Error::RotatedBasisUnsupported.into());
    }
    Ok(m.iter().map(|m| m.qubit).collect())
}

fn reject_trace(q: &Query) -> Result<(), CliError> {
    if q.trace.is_some() {
        return input_err("--trace applies to adaptive program files only");
    }
    Ok(())
}

fn adaptive_trace(q: &Query) -> Result<Vec<BitString>, CliError> {
    if q.outcome.is_some() || q.all_over.is_some() || q.measure.is_some() {
        return input_err("adaptive program files take --trace instead of --outcome, --all-over or --measure");
    }
    parse_trace(q.trace.as_deref().unwrap_or("")).map_err(CliError::Input)
}

fn round_qubits(p: &AdaptiveProgram, r: usize) -> Vec<usize> {
    p.rounds()[r].measure.iter().map(|m| m.qubit).collect()
}

pub fn prob(l: &Loaded, q: &Query) -> Result<Fields, CliError> {
    let CircuitFile { circuit, input, plan } = &l.file;
    match plan {
        MeasurementPlan::Adaptive(p) => {
            let trace = adaptive_trace(q)?;
            let joint = adaptive_joint_prob(p, input, &trace)?;
            let mut out = vec![field("trace_probability", Field::Probability(joint))];
            if let Some(r) = p.next_round(&trace)? {
                let dist = final_round_distribution(p, input, &trace)?;
                let qubits = round_qubits(p, r);
                out.push(field("next_round", Field::Count(r as u64)));
                out.push(field("next_round_qubits", Field::Text(join(&qubits))));
                out.push(field("conditional_distribution", table(&dist, qubits.len())));
            }
            Ok(out)
        }
        MeasurementPlan::Fixed(m) => {
            reject_trace(q)?;
            if let Some(o) = &q.outcome {
                let pairs = parse_outcome(o).map_err(CliError::Input)?;
                let a = OutcomeAssignment::computational(&pairs)?;
                let p = match input {
                    InputSpec::Basis(x) => prob_partial_basis(circuit, x, &a)?,
                    InputSpec::Product(s) => prob_partial_product(circuit, s, &a)?,
                };
                return Ok(vec![field("probability", Field::Probability(p))]);
            }
            let qubits = computational_qubits(&query_measurements(q, m)?)?;
            let values = marginal_table(circuit, input, &qubits)?;
            let sum = values.iter().sum();
            Ok(vec![
                field("qubits", Field::Text(join(&qubits))),
                field("table", table(&values, qubits.len())),
                field("sum", Field::Probability(sum)),
            ])
        }
    }
}

fn fixed_only(l: &Loaded, command: &str) -> Result<(), CliError> {
    if matches!(l.file.plan, MeasurementPlan::Adaptive(_)) {
        return input_err(format!("{command} does not apply to adaptive program files"));
    }
    Ok(())
}

fn expectation_fields(z: f64) -> Fields {
    vec![
        field("expectation_z", Field::Real(z)),
        field("p0", Field::Probability(((1.0 + z) / 2.0).clamp(0.0, 1.0))),
        field("p1", Field::Probability(((1.0 - z) / 2.0).clamp(0.0, 1.0))),
    ]
}

pub fn expect(l: &Loaded, qubit: usize) -> Result<Fields, CliError> {
    fixed_only(l, "expect")?;
    let z = expectation_z(&l.file.circuit, &l.file.input, qubit)?;
    Ok(expectation_fields(z))
}

fn counts<'a>(labels: impl Iterator<Item = String> + 'a) -> Field {
    let mut map: BTreeMap<String, u64> = BTreeMap::new();
    for s in labels {
        *map.entry(s).or_default() += 1;
    }
    Field::Counts(map.into_iter().collect())
}

pub fn sample_cmd(l: &Loaded, measure: Option<&str>, shots: usize, seed: u64, list: bool) -> Result<Fields, CliError> {
    let CircuitFile { circuit, input, plan } = &l.file;
    let mut out = vec![field("shots", Field::Count(shots as u64))];
    match plan {
        MeasurementPlan::Adaptive(p) => {
            if measure.is_some() {
                return input_err("--measure does not apply to adaptive program files");
            }
            let runs = run_adaptive(p, input, seed, shots)?;
            let labels: Vec<String> = runs
                .iter()
                .map(|s| {
                    s.rounds
                        .iter()
                        .zip(&s.trace)
                        .map(|(r, b)| format!("r{r}={b}"))
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .collect();
            out.push(field("counts", counts(labels.iter().cloned())));
            if list {
                out.push(field("samples", Field::Samples(labels)));
            }
        }
        MeasurementPlan::Fixed(m) => {
            let measure = match measure {
                Some(s) => parse_measure(s).map_err(CliError::Input)?,
                None if m.is_empty() => (1..=circuit.n()).map(Measurement::computational).collect(),
                None => m.clone(),
            };
            let qubits: Vec<usize> = measure.iter().map(|m| m.qubit).collect();
            let samples = sample(circuit, input, &measure, seed, shots)?;
            let labels: Vec<String> = samples.iter().map(BitString::to_string).collect();
            out.insert(0, field("qubits", Field::Text(join(&qubits))));
            out.push(field("counts", counts(labels.iter().cloned())));
            if list {
                out.push(field("samples", Field::Samples(labels)));
            }
        }
    }
    Ok(out)
}

fn guard(l: &Loaded) -> Result<(), CliError> {
    let n = l.file.circuit.n();
    let requested = match l.file.input {
        InputSpec::Basis(_) => n,
        InputSpec::Product(_) => n + 1,
    };
    if requested > MAX_QUBITS {
        return Err(Error::DimensionGuard {
            requested,
            limit: MAX_QUBITS,
        }
        .into());
    }
    Ok(())
}

fn deviation(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Same queries as `prob` and `expect`, answered by the dense state vector.
pub fn oracle(l: &Loaded, q: &Query, qubit: Option<usize>, compare: bool) -> Result<Fields, CliError> {
    guard(l)?;
    let CircuitFile { circuit, input, plan } = &l.file;
    let sv = run_circuit(circuit, input)?;
    let mut out;
    let dev;
    if let Some(k) = qubit {
        fixed_only(l, "oracle --qubit")?;
        let z = sv.expectation_z(k)?;
        out = expectation_fields(z);
        dev = if compare {
            Some((z - expectation_z(circuit, input, k)?).abs())
        } else {
            None
        };
    } else {
        match plan {
            MeasurementPlan::Adaptive(p) => {
                let trace = adaptive_trace(q)?;
                let joint = adaptive_trace_probability(p, input, &trace)?;
                out = vec![field("trace_probability", Field::Probability(joint))];
                let mut ours = vec![joint];
                let mut fast = Vec::new();
                if compare {
                    fast.push(adaptive_joint_prob(p, input, &trace)?);
                }
                if let Some(r) = p.next_round(&trace)? {
                    if joint < IMPOSSIBLE {
                        return Err(Error::ImpossibleOutcome { probability: joint }.into());
                    }
                    let qubits = round_qubits(p, r);
                    let k = qubits.len();
                    let dist: Vec<f64> = (0..1usize << k)
                        .map(|i| {
                            let mut t = trace.clone();
                            t.push(BitString::from_index(i, k));
                            adaptive_trace_probability(p, input, &t).map(|j| j / joint)
                        })
                        .collect::<Result<_, _>>()?;
                    if compare {
                        fast.extend(final_round_distribution(p, input, &trace)?);
                    }
                    ours.extend(&dist);
                    out.push(field("next_round", Field::Count(r as u64)));
                    out.push(field("next_round_qubits", Field::Text(join(&qubits))));
                    out.push(field("conditional_distribution", table(&dist, k)));
                }
                dev = compare.then(|| deviation(&ours, &fast));
            }
            MeasurementPlan::Fixed(m) => {
                reject_trace(q)?;
                if let Some(o) = &q.outcome {
                    let pairs = parse_outcome(o).map_err(CliError::Input)?;
                    let a = OutcomeAssignment::computational(&pairs)?;
                    a.check_range(circuit.n())?;
                    let measure: Vec<Measurement> = pairs.iter().map(|&(q, _)| Measurement::computational(q)).collect();
                    let idx = pairs.iter().fold(0usize, |acc, &(_, b)| (acc << 1) | b as usize);
                    let p = exact_distribution(&sv, &measure)?[idx];
                    out = vec![field("probability", Field::Probability(p))];
                    dev = if compare {
                        let fast = match input {
                            InputSpec::Basis(x) => prob_partial_basis(circuit, x, &a)?,
                            InputSpec::Product(s) => prob_partial_product(circuit, s, &a)?,
                        };
                        Some((p - fast).abs())
                    } else {
                        None
                    };
                } else {
                    let measure = query_measurements(q, m)?;
                    let values = exact_distribution(&sv, &measure)?;
                    let qubits: Vec<usize> = measure.iter().map(|m| m.qubit).collect();
                    dev = if compare {
                        let fast = marginal_table(circuit, input, &computational_qubits(&measure)?)?;
                        Some(deviation(&values, &fast))
                    } else {
                        None
                    };
                    let sum = values.iter().sum();
                    out = vec![
                        field("qubits", Field::Text(join(&qubits))),
                        field("table", table(&values, qubits.len())),
                        field("sum", Field::Probability(sum)),
                    ];
                }
            }
        }
    }
    if let Some(d) = dev {
        out.push(field("max_deviation", Field::Real(d)));
    }
    Ok(out)
}
