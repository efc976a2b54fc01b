//! Brute-force state-vector simulation, the ground truth for small circuits.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, Mat2, C64, ONE, ZERO};
use crate::model::{
    AdaptiveProgram, BitString, Circuit, GateApplication, InputSpec, Measurement, MeasurementBasis,
    SingleQubitState,
};

/// Largest register the oracle accepts.
pub const MAX_QUBITS: usize = 14;

/// Below this an outcome is treated as impossible.
pub const IMPOSSIBLE: f64 = 1e-12;

fn guard(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::DimensionGuard {
            requested: n,
            limit: MAX_QUBITS,
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("state needs at least one qubit".into()));
    }
    Ok(())
}

/// Dense `2^n` amplitude vector; qubit 1 is the most significant index bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero_state(n: usize) -> Result<Self> {
        guard(n)?;
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = ONE;
        Ok(StateVector { n, amps })
    }

    pub fn basis(x: &BitString) -> Result<Self> {
        let n = x.len();
        guard(n)?;
        let idx = x.bits().iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        let mut amps = vec![ZERO; 1 << n];
        amps[idx] = ONE;
        Ok(StateVector { n, amps })
    }

    pub fn product(states: &[SingleQubitState]) -> Result<Self> {
        Self::product_amplitudes(&states.iter().map(SingleQubitState::amplitudes).collect::<Vec<_>>())
    }

    /// Product of arbitrary (normalized) single-qubit amplitude pairs.
    pub fn product_amplitudes(factors: &[[C64; 2]]) -> Result<Self> {
        let n = factors.len();
        guard(n)?;
        let mut amps = vec![ONE];
        for f in factors {
            amps = amps.iter().flat_map(|a| [a * f[0], a * f[1]]).collect();
        }
        Ok(StateVector { n, amps })
    }

    pub fn from_input(input: &InputSpec) -> Result<Self> {
        match input {
            InputSpec::Basis(x) => Self::basis(x),
            InputSpec::Product(q) => Self::product(q),
        }
    }

    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        guard(n)?;
        if amps.len() != 1 << n {
            return Err(Error::DimensionMismatch {
                expected: 1 << n,
                found: amps.len(),
            });
        }
        Ok(StateVector { n, amps })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, y: &BitString) -> C64 {
        let idx = y.bits().iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        self.amps[idx]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(C64::norm_sqr).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    fn shift(&self, qubit: usize) -> usize {
        self.n - qubit
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q < 1 || q > self.n {
            return Err(Error::InvalidArgument(format!("qubit {q} outside 1..={}", self.n)));
        }
        Ok(())
    }

    /// Applies a 4×4 unitary to the ordered qubit pair `(first, second)`.
    pub fn apply_two(&mut self, m: &CMatrix, first: usize, second: usize) -> Result<()> {
        self.check_qubit(first)?;
        self.check_qubit(second)?;
        if first == second || m.rows() != 4 || m.cols() != 4 {
            return Err(Error::InvalidArgument("two distinct qubits and a 4×4 matrix required".into()));
        }
        let (bi, bj) = (1usize << self.shift(first), 1usize << self.shift(second));
        for base in 0..self.amps.len() {
            if base & (bi | bj) != 0 {
                continue;
            }
            let idx = [base, base | bj, base | bi, base | bi | bj];
            let v = idx.map(|k| self.amps[k]);
            for (r, &k) in idx.iter().enumerate() {
                self.amps[k] = (0..4).map(|c| m[(r, c)] * v[c]).sum();
            }
        }
        Ok(())
    }

    pub fn apply_single(&mut self, m: &Mat2, qubit: usize) -> Result<()> {
        self.check_qubit(qubit)?;
        let b = 1usize << self.shift(qubit);
        for base in 0..self.amps.len() {
            if base & b != 0 {
                continue;
            }
            let (u, v) = (self.amps[base], self.amps[base | b]);
            self.amps[base] = m[0][0] * u + m[0][1] * v;
            self.amps[base | b] = m[1][0] * u + m[1][1] * v;
        }
        Ok(())
    }

    /// Applies a placed gate of a circuit on `n_circuit` qubits.
    pub fn apply_gate(&mut self, app: &GateApplication, n_circuit: usize) -> Result<()> {
        let m = app.gate.matrix();
        if app.wrap {
            self.apply_two(&m, n_circuit, 1)
        } else {
            self.apply_two(&m, app.position, app.position + 1)
        }
    }

    /// Applies every gate of `circuit`, which may be smaller than the register.
    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n() > self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: circuit.n(),
            });
        }
        for g in circuit.gates() {
            self.apply_gate(g, circuit.n())?;
        }
        Ok(())
    }

    /// `⟨Z_q⟩`.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let b = 1usize << self.shift(qubit);
        Ok(self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| if k & b == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum())
    }

    /// Projects onto `bit` of `qubit` in `basis` without renormalizing.
    pub fn project_unnormalized(&mut self, qubit: usize, bit: u8, basis: &MeasurementBasis) -> Result<()> {
        self.check_qubit(qubit)?;
        let v = outcome_vector(basis, bit);
        let b = 1usize << self.shift(qubit);
        for base in 0..self.amps.len() {
            if base & b != 0 {
                continue;
            }
            let (u, w) = (self.amps[base], self.amps[base | b]);
            let overlap = v[0].conj() * u + v[1].conj() * w;
            self.amps[base] = v[0] * overlap;
            self.amps[base | b] = v[1] * overlap;
        }
        Ok(())
    }
}

/// State of outcome `bit` in `basis`.
pub fn outcome_vector(basis: &MeasurementBasis, bit: u8) -> [C64; 2] {
    let s = basis.outcome_zero_state();
    if bit == 0 {
        s.amplitudes()
    } else {
        s.orthogonal_amplitudes()
    }
}

/// Born-rule table over the `2^k` outcomes of `measure`; the first listed
/// qubit is the most significant bit of the outcome index.
pub fn exact_distribution(sv: &StateVector, measure: &[Measurement]) -> Result<Vec<f64>> {
    let k = measure.len();
    if k > MAX_QUBITS {
        return Err(Error::DimensionGuard {
            requested: k,
            limit: MAX_QUBITS,
        });
    }
    crate::model::check_qubits(measure.iter().map(|m| m.qubit), sv.n, "measure")?;
    let mut rotated = sv.clone();
    for m in measure {
        let v0 = outcome_vector(&m.basis, 0);
        let v1 = outcome_vector(&m.basis, 1);
        let u = [[v0[0].conj(), v0[1].conj()], [v1[0].conj(), v1[1].conj()]];
        rotated.apply_single(&u, m.qubit)?;
    }
    let mut table = vec![0.0; 1 << k];
    for (idx, a) in rotated.amps.iter().enumerate() {
        let mut out = 0usize;
        for m in measure {
            out = (out << 1) | ((idx >> rotated.shift(m.qubit)) & 1);
        }
        table[out] += a.norm_sqr();
    }
    Ok(table)
}

/// Post-measurement state for outcome `bit` of `qubit`, with its probability.
pub fn project_and_renormalize(
    sv: &StateVector,
    qubit: usize,
    bit: u8,
    basis: &MeasurementBasis,
) -> Result<(StateVector, f64)> {
    let mut out = sv.clone();
    out.project_unnormalized(qubit, bit, basis)?;
    let p = out.norm_sqr();
    if p < IMPOSSIBLE {
        return Err(Error::ImpossibleOutcome { probability: p });
    }
    let s = 1.0 / p.sqrt();
    for a in &mut out.amps {
        *a *= s;
    }
    Ok((out, p))
}

/// `M|input⟩` for a circuit on its own register.
pub fn run_circuit(circuit: &Circuit, input: &InputSpec) -> Result<StateVector> {
    input.check_len(circuit.n())?;
    let mut sv = StateVector::from_input(input)?;
    sv.apply_circuit(circuit)?;
    Ok(sv)
}

/// `⟨y|M|x⟩`.
pub fn exact_amplitude(circuit: &Circuit, x: &BitString, y: &BitString) -> Result<C64> {
    let sv = run_circuit(circuit, &InputSpec::Basis(x.clone()))?;
    if y.len() != sv.n() {
        return Err(Error::DimensionMismatch {
            expected: sv.n(),
            found: y.len(),
        });
    }
    Ok(sv.amplitude(y))
}

/// Joint probability of an adaptive trace by explicit projection.
pub fn adaptive_trace_probability(program: &AdaptiveProgram, input: &InputSpec, trace: &[BitString]) -> Result<f64> {
    let path = program.path(trace)?;
    let mut sv = run_circuit(program.prefix(), input)?;
    let n = program.n();
    for (&r, bits) in path.iter().zip(trace) {
        let round = &program.rounds()[r];
        for g in &round.gates {
            sv.apply_gate(g, n)?;
        }
        for (m, &b) in round.measure.iter().zip(bits.bits()) {
            sv.project_unnormalized(m.qubit, b, &m.basis)?;
        }
    }
    Ok(sv.norm_sqr())
}
