//! JSON circuit files.
//!
//! ```json
//! { "n": 2, "pbc": false,
//!   "gates": [ { "pos": 1, "pbc": false,
//!                "A": [[[1,0],[0,0]],[[0,0],[-1,0]]],
//!                "B": [[[0,0],[1,0]],[[1,0],[0,0]]] } ],
//!   "input": { "type": "basis", "bits": "10" },
//!   "measure": [ { "qubit": 2, "basis": "Z" } ] }
//! ```
//!
//! Adaptive programs replace `measure` with `rounds`; each round has `gates`,
//! `measure` and an optional `branches` object mapping outcome strings (or
//! `"default"`) to a later round index or `null` (stop). A round without
//! `branches` is final. Top-level `gates` run before round 0.

use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64};
use crate::model::{
    check_qubits, AdaptiveProgram, BitString, BranchTable, Circuit, GateApplication, InputSpec, Matchgate,
    Measurement, MeasurementBasis, Round, SingleQubitState,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// What a file asks to measure.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementPlan {
    Fixed(Vec<Measurement>),
    Adaptive(AdaptiveProgram),
}

/// Parsed contents of a circuit file.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitFile {
    pub circuit: Circuit,
    pub input: InputSpec,
    pub plan: MeasurementPlan,
}

type RawMat = [[[f64; 2]; 2]; 2];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    n: usize,
    #[serde(default)]
    pbc: bool,
    #[serde(default)]
    gates: Vec<RawGate>,
    input: RawInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measure: Option<Vec<RawMeasure>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rounds: Option<Vec<RawRound>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    pos: usize,
    #[serde(default)]
    pbc: bool,
    #[serde(rename = "A")]
    a: RawMat,
    #[serde(rename = "B")]
    b: RawMat,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawInput {
    Basis { bits: String },
    Product { qubits: Vec<RawAngles> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAngles {
    theta: f64,
    phi: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawBasis {
    Named(String),
    Rotated(RawAngles),
}

fn z_basis() -> RawBasis {
    RawBasis::Named("Z".into())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeasure {
    qubit: usize,
    #[serde(default = "z_basis")]
    basis: RawBasis,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRound {
    #[serde(default)]
    gates: Vec<RawGate>,
    measure: Vec<RawMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    branches: Option<BTreeMap<String, Option<usize>>>,
}

/// Parses and validates a circuit file.
pub fn parse_circuit(text: &str) -> Result<CircuitFile> {
    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawFile = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.inner();
        Error::schema(
            format!("line {} column {} ({})", inner.line(), inner.column(), path),
            inner.to_string(),
        )
    })?;
    de.end()
        .map_err(|e| Error::schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    from_raw(raw)
}

fn from_raw(raw: RawFile) -> Result<CircuitFile> {
    let n = raw.n;
    let gates = convert_gates(&raw.gates, "gates")?;
    let circuit = Circuit::from_gates(n, raw.pbc, gates)?;

    let input = match raw.input {
        RawInput::Basis { bits } => {
            let b: BitString = bits
                .parse()
                .map_err(|_| Error::schema("input.bits", format!("{bits:?} is not a bit string")))?;
            InputSpec::Basis(b)
        }
        RawInput::Product { qubits } => InputSpec::Product(
            qubits
                .iter()
                .enumerate()
                .map(|(k, q)| angles(q, &format!("input.qubits[{k}]")))
                .collect::<Result<_>>()?,
        ),
    };
    if input.len() != n {
        return Err(Error::schema(
            "input",
            format!("input describes {} qubits, circuit has {n}", input.len()),
        ));
    }

    let plan = match (raw.measure, raw.rounds) {
        (Some(_), Some(_)) => return Err(Error::schema("measure", "use either measure or rounds, not both")),
        (Some(m), None) => MeasurementPlan::Fixed(convert_measure(&m, n, "measure")?),
        (None, None) => MeasurementPlan::Fixed(Vec::new()),
        (None, Some(rounds)) => {
            let mut out = Vec::with_capacity(rounds.len());
            for (r, round) in rounds.iter().enumerate() {
                let path = format!("rounds[{r}]");
                let gates = convert_gates(&round.gates, &format!("{path}.gates"))?;
                let measure = convert_measure(&round.measure, n, &format!("{path}.measure"))?;
                let branches = match &round.branches {
                    None => None,
                    Some(map) => {
                        let mut table = BranchTable::default();
                        for (key, next) in map {
                            if key == "default" {
                                table.default = Some(*next);
                            } else {
                                let bits: BitString = key.parse().map_err(|_| {
                                    Error::schema(format!("{path}.branches.{key}"), "branch key is not a bit string")
                                })?;
                                table.entries.insert(bits, *next);
                            }
                        }
                        Some(table)
                    }
                };
                out.push(Round {
                    gates,
                    measure,
                    branches,
                });
            }
            MeasurementPlan::Adaptive(AdaptiveProgram::new(circuit.clone(), out)?)
        }
    };
    Ok(CircuitFile { circuit, input, plan })
}

fn angles(a: &RawAngles, path: &str) -> Result<SingleQubitState> {
    SingleQubitState::new(a.theta, a.phi).map_err(|e| match e {
        Error::Schema { location, message } => Error::schema(format!("{path}.{location}"), message),
        other => other,
    })
}

fn cmat(raw: &RawMat) -> Mat2 {
    let c = |p: [f64; 2]| C64::new(p[0], p[1]);
    [[c(raw[0][0]), c(raw[0][1])], [c(raw[1][0]), c(raw[1][1])]]
}

fn rawmat(m: &Mat2) -> RawMat {
    let r = |z: C64| [z.re, z.im];
    [[r(m[0][0]), r(m[0][1])], [r(m[1][0]), r(m[1][1])]]
}

fn convert_gates(raw: &[RawGate], path: &str) -> Result<Vec<GateApplication>> {
    raw.iter()
        .enumerate()
        .map(|(k, g)| {
            let gate = Matchgate::validate_at(cmat(&g.a), cmat(&g.b), &format!("{path}[{k}]"))?;
            Ok(GateApplication {
                gate,
                position: g.pos,
                wrap: g.pbc,
            })
        })
        .collect()
}

fn convert_measure(raw: &[RawMeasure], n: usize, path: &str) -> Result<Vec<Measurement>> {
    let out = raw
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let basis = match &m.basis {
                RawBasis::Named(s) if s == "Z" => MeasurementBasis::Computational,
                RawBasis::Named(s) => {
                    return Err(Error::schema(
                        format!("{path}[{k}].basis"),
                        format!("unknown basis {s:?}, expected \"Z\" or {{theta, phi}}"),
                    ))
                }
                RawBasis::Rotated(a) => MeasurementBasis::Rotated(angles(a, &format!("{path}[{k}].basis"))?),
            };
            Ok(Measurement { qubit: m.qubit, basis })
        })
        .collect::<Result<Vec<_>>>()?;
    check_qubits(out.iter().map(|m| m.qubit), n, path)?;
    Ok(out)
}

fn raw_gates(gates: &[GateApplication]) -> Vec<RawGate> {
    gates
        .iter()
        .map(|g| RawGate {
            pos: g.position,
            pbc: g.wrap,
            a: rawmat(g.gate.a()),
            b: rawmat(g.gate.b()),
        })
        .collect()
}

fn raw_measure(m: &[Measurement]) -> Vec<RawMeasure> {
    m.iter()
        .map(|m| RawMeasure {
            qubit: m.qubit,
            basis: match m.basis {
                MeasurementBasis::Computational => z_basis(),
                MeasurementBasis::Rotated(s) => RawBasis::Rotated(RawAngles {
                    theta: s.theta(),
                    phi: s.phi(),
                }),
            },
        })
        .collect()
}

/// Canonical pretty-printed form. `parse_circuit` inverts it exactly.
pub fn serialize_circuit(file: &CircuitFile) -> String {
    let input = match &file.input {
        InputSpec::Basis(b) => RawInput::Basis { bits: b.to_string() },
        InputSpec::Product(q) => RawInput::Product {
            qubits: q
                .iter()
                .map(|s| RawAngles {
                    theta: s.theta(),
                    phi: s.phi(),
                })
                .collect(),
        },
    };
    let (measure, rounds) = match &file.plan {
        MeasurementPlan::Fixed(m) => (Some(raw_measure(m)), None),
        MeasurementPlan::Adaptive(p) => (
            None,
            Some(
                p.rounds()
                    .iter()
                    .map(|r| RawRound {
                        gates: raw_gates(&r.gates),
                        measure: raw_measure(&r.measure),
                        branches: r.branches.as_ref().map(|t| {
                            let mut map: BTreeMap<String, Option<usize>> =
                                t.entries.iter().map(|(k, v)| (k.to_string(), *v)).collect();
                            if let Some(d) = t.default {
                                map.insert("default".into(), d);
                            }
                            map
                        }),
                    })
                    .collect(),
            ),
        ),
    };
    let raw = RawFile {
        n: file.circuit.n(),
        pbc: file.circuit.pbc(),
        gates: raw_gates(file.circuit.gates()),
        input,
        measure,
        rounds,
    };
    let mut s = serde_json::to_string_pretty(&raw).expect("plain data serializes");
    s.push('\n');
    s
}

/// Writes a real `2n × 2n` matrix using the file's number convention.
pub fn matrix_to_json(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> C64) -> String {
    let m: Vec<Vec<[f64; 2]>> = (0..rows)
        .map(|i| (0..cols).map(|j| entry(i, j)).map(|z| [z.re, z.im]).collect())
        .collect();
    serde_json::to_string(&m).expect("plain data serializes")
}
