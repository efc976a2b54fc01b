//! Exact outcome probabilities and expectation values.
//!
//! Every probability is a vacuum expectation
//! `⟨x| E_1 ⋯ E_{R-1} E_R E_{R-1} ⋯ E_1 |x⟩` where `E_r = C_r† P_r C_r` is a
//! computational-basis projector Heisenberg-evolved through the circuit `C_r`
//! applied before it was measured. Each `P_r` is a product of pairs
//! `a_l a†_l = |0⟩⟨0|_l` or `a†_l a_l = |1⟩⟨1|_l`. Product inputs are
//! prepared from `|0…0⟩|+⟩` by a matchgate circuit, which splits the
//! expectation into two parity branches that never interfere.

use crate::error::{Error, Result};
use crate::jw::{compose_transfer, lower_periodic, pbc_substitute, ModeTransfer, Parity};
use crate::linalg::{C64, I};
use crate::model::{
    check_qubits, AdaptiveProgram, BitString, Circuit, GateApplication, InputSpec, OutcomeAssignment,
    SingleQubitState,
};
use crate::pfaffian::{determinant_amplitude, vacuum_expectation, LinearFermionicOperator};
use crate::prep::synthesize_preparation;
use std::borrow::Cow;

/// Largest imaginary part dropped from a real result.
pub const IMAG_TOLERANCE: f64 = 1e-9;

/// Slack allowed outside `[0, 1]` before a probability is rejected.
pub const RANGE_TOLERANCE: f64 = 1e-9;

/// Real part of `v`, rejecting a large imaginary residue.
pub fn checked_real(v: C64) -> Result<f64> {
    if v.im.abs() > IMAG_TOLERANCE || !v.re.is_finite() {
        return Err(Error::ImaginaryResidual { real: v.re, imag: v.im });
    }
    Ok(v.re)
}

/// Clamps `p` into `[0, 1]` after checking it lies within tolerance.
pub fn checked_probability(p: f64) -> Result<f64> {
    if !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&p) {
        return Err(Error::ProbabilityOutOfRange { value: p });
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Projector onto a computational-basis partial assignment, as operator pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorString {
    ops: Vec<LinearFermionicOperator>,
}

impl ProjectorString {
    pub fn new(modes: usize, outcomes: &[(usize, u8)]) -> Result<Self> {
        check_qubits(outcomes.iter().map(|o| o.0), modes, "assignment")?;
        let mut ops = Vec::with_capacity(2 * outcomes.len());
        for &(l, bit) in outcomes {
            let (a, c) = (
                LinearFermionicOperator::annihilation(modes, l),
                LinearFermionicOperator::creation(modes, l),
            );
            match bit {
                0 => ops.extend([a, c]),
                1 => ops.extend([c, a]),
                _ => return Err(Error::InvalidArgument(format!("bit {bit} for qubit {l}"))),
            }
        }
        Ok(ProjectorString { ops })
    }

    pub fn ops(&self) -> &[LinearFermionicOperator] {
        &self.ops
    }

    /// `C† f C` for every operator, with `t` the transfer of `C`.
    pub fn evolved(&self, t: &ModeTransfer) -> Result<Vec<LinearFermionicOperator>> {
        self.ops.iter().map(|op| t.heisenberg(op)).collect()
    }
}

/// The two parity branches of a product-input expectation.
#[derive(Debug, Clone, PartialEq)]
pub struct ParityBranchQuery {
    /// Evaluated on the vacuum.
    pub vacuum: Vec<LinearFermionicOperator>,
    /// Wrapped as `a_anc … a†_anc`.
    pub wrapped: Vec<LinearFermionicOperator>,
}

impl ParityBranchQuery {
    pub fn new(middle: Vec<LinearFermionicOperator>, ancilla: usize) -> Self {
        let modes = middle.first().map_or(ancilla, LinearFermionicOperator::modes);
        let mut wrapped = Vec::with_capacity(middle.len() + 2);
        wrapped.push(LinearFermionicOperator::annihilation(modes, ancilla));
        wrapped.extend(middle.iter().cloned());
        wrapped.push(LinearFermionicOperator::creation(modes, ancilla));
        ParityBranchQuery { vacuum: middle, wrapped }
    }

    /// Average of the two branch values.
    pub fn evaluate(&self) -> Result<C64> {
        Ok((vacuum_expectation(&self.vacuum)? + vacuum_expectation(&self.wrapped)?) * 0.5)
    }
}

/// A projector applied after the circuit whose transfer is given.
#[derive(Debug, Clone, Copy)]
pub struct Segment<'a> {
    pub transfer: &'a ModeTransfer,
    pub outcomes: &'a [(usize, u8)],
}

#[derive(Debug, Clone, PartialEq)]
enum Initial {
    /// Occupied modes of a basis input.
    Basis(Vec<usize>),
    /// Prepared product state; the ancilla is the last mode.
    Product,
}

/// Input state compiled for repeated nested-projector queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluator {
    n: usize,
    modes: usize,
    initial: Initial,
    base: ModeTransfer,
}

impl Evaluator {
    /// Basis inputs use `n` modes; product inputs add an ancilla mode `n + 1`
    /// and start from the transfer of their preparation circuit.
    pub fn new(n: usize, input: &InputSpec) -> Result<Self> {
        input.check_len(n)?;
        Ok(match input {
            InputSpec::Basis(x) => Evaluator {
                n,
                modes: n,
                initial: Initial::Basis(x.ones()),
                base: ModeTransfer::identity(n),
            },
            InputSpec::Product(states) => Self::product(states)?,
        })
    }

    pub fn product(states: &[SingleQubitState]) -> Result<Self> {
        let n = states.len();
        let prep = synthesize_preparation(states);
        Ok(Evaluator {
            n,
            modes: n + 1,
            initial: Initial::Product,
            base: compose_transfer(prep.circuit())?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `n`, or `n + 1` with the ancilla.
    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn is_product(&self) -> bool {
        self.initial == Initial::Product
    }

    /// Transfer before any circuit gate.
    pub fn base(&self) -> &ModeTransfer {
        &self.base
    }

    /// Transfer after `circuit`, which must have no wrap gates.
    pub fn transfer(&self, circuit: &Circuit) -> Result<ModeTransfer> {
        let mut t = self.base.clone();
        t.apply_circuit(circuit)?;
        Ok(t)
    }

    /// `⟨E_1 ⋯ E_R ⋯ E_1⟩` as a complex number.
    pub fn nested_value(&self, segments: &[Segment<'_>]) -> Result<C64> {
        let mut evolved = Vec::with_capacity(segments.len());
        for s in segments {
            if s.transfer.modes() != self.modes {
                return Err(Error::DimensionMismatch {
                    expected: self.modes,
                    found: s.transfer.modes(),
                });
            }
            evolved.push(ProjectorString::new(self.modes, s.outcomes)?.evolved(s.transfer)?);
        }
        let mut middle: Vec<LinearFermionicOperator> = evolved.iter().flatten().cloned().collect();
        if evolved.len() > 1 {
            for ops in evolved[..evolved.len() - 1].iter().rev() {
                middle.extend(ops.iter().cloned());
            }
        }
        match &self.initial {
            Initial::Basis(ones) => {
                let mut ops = Vec::with_capacity(middle.len() + 2 * ones.len());
                ops.extend(ones.iter().rev().map(|&q| LinearFermionicOperator::annihilation(self.modes, q)));
                ops.extend(middle);
                ops.extend(ones.iter().map(|&q| LinearFermionicOperator::creation(self.modes, q)));
                vacuum_expectation(&ops)
            }
            Initial::Product => ParityBranchQuery::new(middle, self.modes).evaluate(),
        }
    }

    /// Checked joint probability of the nested projectors.
    pub fn nested_probability(&self, segments: &[Segment<'_>]) -> Result<f64> {
        checked_probability(checked_real(self.nested_value(segments)?)?)
    }

    /// Marginal of a computational assignment after a single transfer.
    pub fn probability(&self, transfer: &ModeTransfer, outcomes: &[(usize, u8)]) -> Result<f64> {
        self.nested_probability(&[Segment { transfer, outcomes }])
    }
}

/// `circuit` with wrap gates lowered for the input's parity.
pub fn effective_circuit<'a>(circuit: &'a Circuit, input: &InputSpec) -> Result<Cow<'a, Circuit>> {
    if !circuit.has_wrap_gates() {
        return Ok(Cow::Borrowed(circuit));
    }
    match input {
        InputSpec::Basis(x) => Ok(Cow::Owned(lower_periodic(circuit, Parity::of_bits(x))?)),
        InputSpec::Product(_) => Err(Error::PbcUnsupportedForProductInput),
    }
}

/// Gate list with wrap gates lowered for `parity`.
pub fn lower_gates(gates: &[GateApplication], parity: Parity, n: usize) -> Result<Vec<GateApplication>> {
    let mut out = Vec::with_capacity(gates.len());
    for g in gates {
        out.extend(pbc_substitute(g, parity, n)?);
    }
    Ok(out)
}

fn check_assignment(n: usize, input: &InputSpec, assignment: &OutcomeAssignment) -> Result<Vec<(usize, u8)>> {
    input.check_len(n)?;
    assignment.check_range(n)?;
    assignment.computational_pairs()
}

/// `Pr(ỹ | x)` for a computational-basis input.
pub fn prob_partial_basis(circuit: &Circuit, x: &BitString, assignment: &OutcomeAssignment) -> Result<f64> {
    let input = InputSpec::Basis(x.clone());
    prob_partial(circuit, &input, assignment)
}

/// `Pr(ỹ | ψ)` for a product input; wrap gates are rejected.
pub fn prob_partial_product(
    circuit: &Circuit,
    states: &[SingleQubitState],
    assignment: &OutcomeAssignment,
) -> Result<f64> {
    prob_partial(circuit, &InputSpec::Product(states.to_vec()), assignment)
}

/// Marginal probability of a computational-basis partial assignment.
pub fn prob_partial(circuit: &Circuit, input: &InputSpec, assignment: &OutcomeAssignment) -> Result<f64> {
    let pairs = check_assignment(circuit.n(), input, assignment)?;
    let c = effective_circuit(circuit, input)?;
    let ev = Evaluator::new(circuit.n(), input)?;
    let t = ev.transfer(&c)?;
    ev.probability(&t, &pairs)
}

/// Probabilities of every outcome on `qubits` (first qubit most significant).
pub fn marginal_table(circuit: &Circuit, input: &InputSpec, qubits: &[usize]) -> Result<Vec<f64>> {
    let n = circuit.n();
    input.check_len(n)?;
    check_qubits(qubits.iter().copied(), n, "subset")?;
    if qubits.is_empty() || qubits.len() > 20 {
        return Err(Error::InvalidArgument(format!(
            "subset of {} qubits; between 1 and 20 can be enumerated",
            qubits.len()
        )));
    }
    let c = effective_circuit(circuit, input)?;
    let ev = Evaluator::new(n, input)?;
    let t = ev.transfer(&c)?;
    let k = qubits.len();
    (0..1usize << k)
        .map(|idx| {
            let bits = BitString::from_index(idx, k);
            let pairs: Vec<(usize, u8)> = qubits.iter().copied().zip(bits.bits().iter().copied()).collect();
            ev.probability(&t, &pairs)
        })
        .collect()
}

/// `|⟨y|M|x⟩|²`, by determinant when the circuit conserves particle number.
pub fn prob_full_basis(circuit: &Circuit, x: &BitString, y: &BitString) -> Result<f64> {
    let n = circuit.n();
    let input = InputSpec::Basis(x.clone());
    input.check_len(n)?;
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    let c = effective_circuit(circuit, &input)?;
    let t = compose_transfer(&c)?;
    if t.is_number_preserving() {
        let r = t.number_preserving_block()?;
        return checked_probability(determinant_amplitude(&r, x, y)?.norm_sqr());
    }
    let ev = Evaluator::new(n, &input)?;
    let pairs: Vec<(usize, u8)> = y.bits().iter().enumerate().map(|(k, &b)| (k + 1, b)).collect();
    ev.probability(&t, &pairs)
}

/// Same as [`prob_full_basis`] but always through the Pfaffian.
pub fn prob_full_basis_pfaffian(circuit: &Circuit, x: &BitString, y: &BitString) -> Result<f64> {
    prob_partial_basis(circuit, x, &OutcomeAssignment::full(y)?)
}

/// `⟨y|M|x⟩` for a circuit of number-preserving gates.
pub fn amplitude(circuit: &Circuit, x: &BitString, y: &BitString) -> Result<C64> {
    let input = InputSpec::Basis(x.clone());
    input.check_len(circuit.n())?;
    let c = effective_circuit(circuit, &input)?;
    let mut vacuum_phase = C64::new(1.0, 0.0);
    let mut worst: f64 = 0.0;
    for g in c.gates() {
        let a = g.gate.a();
        worst = worst.max(a[0][1].norm()).max(a[1][0].norm());
        vacuum_phase *= a[0][0];
    }
    if !c.is_number_preserving() {
        return Err(Error::NotNumberPreserving { max_offdiag: worst });
    }
    let r = compose_transfer(&c)?.number_preserving_block()?;
    Ok(vacuum_phase * determinant_amplitude(&r, x, y)?)
}

/// `⟨Z_k⟩` on a product (or basis) input, via the quadratic expansion of
/// `M† Z_k M` and single-qubit Pauli expectations.
pub fn expectation_z(circuit: &Circuit, input: &InputSpec, k: usize) -> Result<f64> {
    let n = circuit.n();
    input.check_len(n)?;
    check_qubits([k], n, "qubit")?;
    let c = effective_circuit(circuit, input)?;
    let t = compose_transfer(&c)?;
    let bloch: Vec<[f64; 3]> = input.to_product().iter().map(SingleQubitState::bloch).collect();
    let (w1, w2) = (t.row(2 * (k - 1)), t.row(2 * (k - 1) + 1));
    let d = 2 * n;
    let mut total = C64::new(w1.iter().zip(w2).map(|(x, y)| x * y).sum(), 0.0);
    for a in 0..d {
        let p = a / 2;
        // c_a c_b for a < b on a later mode: s ⟨σ'_p⟩ ∏ ⟨Z_j⟩ ⟨τ_q⟩
        let head = if a % 2 == 0 {
            -I * bloch[p][1]
        } else {
            I * bloch[p][0]
        };
        if a % 2 == 0 {
            let b = a + 1;
            let coef = w1[a] * w2[b] - w1[b] * w2[a];
            total += I * bloch[p][2] * coef;
        }
        let mut string = 1.0;
        for q in p + 1..n {
            for (b, tau) in [(2 * q, bloch[q][0]), (2 * q + 1, bloch[q][1])] {
                let coef = w1[a] * w2[b] - w1[b] * w2[a];
                if coef != 0.0 {
                    total += head * (string * tau * coef);
                }
            }
            string *= bloch[q][2];
            if string == 0.0 {
                break;
            }
        }
    }
    let z = checked_real(-I * total)?;
    if !(-1.0 - RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(&z) {
        return Err(Error::ProbabilityOutOfRange { value: z });
    }
    Ok(z.clamp(-1.0, 1.0))
}

/// Inputs to an adaptive program with wrap gates lowered.
pub(crate) struct LoweredProgram<'a> {
    pub program: &'a AdaptiveProgram,
    pub prefix: Cow<'a, Circuit>,
    pub parity: Option<Parity>,
}

impl<'a> LoweredProgram<'a> {
    pub fn new(program: &'a AdaptiveProgram, input: &InputSpec) -> Result<Self> {
        input.check_len(program.n())?;
        let has_wrap = program.prefix().has_wrap_gates()
            || program.rounds().iter().any(|r| r.gates.iter().any(|g| g.wrap));
        let parity = if has_wrap {
            match input {
                InputSpec::Basis(x) => Some(Parity::of_bits(x)),
                InputSpec::Product(_) => return Err(Error::PbcUnsupportedForProductInput),
            }
        } else {
            None
        };
        let prefix = match parity {
            Some(p) => Cow::Owned(lower_periodic(program.prefix(), p)?),
            None => Cow::Borrowed(program.prefix()),
        };
        Ok(LoweredProgram { program, prefix, parity })
    }

    /// Applies round `r`'s gates to `t`.
    pub fn advance(&self, t: &mut ModeTransfer, r: usize) -> Result<()> {
        let gates = &self.program.rounds()[r].gates;
        match self.parity {
            Some(p) => {
                for g in lower_gates(gates, p, self.program.n())? {
                    t.apply_application(&g)?;
                }
            }
            None => {
                for g in gates {
                    t.apply_application(g)?;
                }
            }
        }
        Ok(())
    }

    /// `(qubit, bit)` pairs of round `r` for the observed bits.
    pub fn outcomes(&self, r: usize, bits: &BitString) -> Vec<(usize, u8)> {
        self.program.rounds()[r]
            .measure
            .iter()
            .map(|m| m.qubit)
            .zip(bits.bits().iter().copied())
            .collect()
    }
}

/// Joint probability of the per-round outcomes in `trace`.
///
/// A trace shorter than the program gives the marginal of its rounds.
pub fn adaptive_joint_prob(program: &AdaptiveProgram, input: &InputSpec, trace: &[BitString]) -> Result<f64> {
    let path = program.path(trace)?;
    let lowered = LoweredProgram::new(program, input)?;
    let ev = Evaluator::new(program.n(), input)?;
    if path.is_empty() {
        return Ok(1.0);
    }
    let mut t = ev.transfer(&lowered.prefix)?;
    let mut transfers = Vec::with_capacity(path.len());
    let mut outcomes = Vec::with_capacity(path.len());
    for (&r, bits) in path.iter().zip(trace) {
        lowered.advance(&mut t, r)?;
        transfers.push(t.clone());
        outcomes.push(lowered.outcomes(r, bits));
    }
    let segments: Vec<Segment<'_>> = transfers
        .iter()
        .zip(&outcomes)
        .map(|(transfer, o)| Segment { transfer, outcomes: o })
        .collect();
    ev.nested_probability(&segments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BranchTable, Matchgate, Measurement, Round};
    use crate::oracle::{adaptive_trace_probability, exact_distribution, run_circuit, StateVector};
    use crate::random::{
        random_bits, random_circuit, random_matchgate, random_periodic_circuit, random_product, random_subset,
        GateFamily,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn measure(qs: &[usize]) -> Vec<Measurement> {
        qs.iter().map(|&q| Measurement::computational(q)).collect()
    }

    #[test]
    fn identity_circuit_examples() {
        let c = Circuit::new(2).unwrap();
        let one = OutcomeAssignment::computational(&[(2, 1)]).unwrap();
        let zero = OutcomeAssignment::computational(&[(2, 0)]).unwrap();
        assert!((prob_partial_basis(&c, &bits("01"), &one).unwrap() - 1.0).abs() < 1e-15);
        assert!(prob_partial_basis(&c, &bits("01"), &zero).unwrap().abs() < 1e-15);
    }

    #[test]
    fn marginals_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let c = random_circuit(&mut rng, 6, 30, GateFamily::Mixed);
            let x = random_bits(&mut rng, 6);
            let table = marginal_table(&c, &InputSpec::Basis(x.clone()), &[1, 3, 5]).unwrap();
            let sv = run_circuit(&c, &InputSpec::Basis(x)).unwrap();
            let want = exact_distribution(&sv, &measure(&[1, 3, 5])).unwrap();
            assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (a, b) in table.iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn full_probability_paths() {
        let mut c = Circuit::new(2).unwrap();
        c.push(Matchgate::fswap(), 1).unwrap();
        assert!((prob_full_basis(&c, &bits("10"), &bits("01")).unwrap() - 1.0).abs() < 1e-15);
        let amp = amplitude(&c, &bits("10"), &bits("01")).unwrap();
        assert!((amp.norm() - 1.0).abs() < 1e-15);
        assert_eq!(prob_full_basis(&c, &bits("10"), &bits("11")).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..5 {
            let c = random_circuit(&mut rng, 5, 20, GateFamily::NumberPreserving);
            let x = random_bits(&mut rng, 5);
            for idx in 0..32 {
                let y = BitString::from_index(idx, 5);
                let det = prob_full_basis(&c, &x, &y).unwrap();
                let pf = prob_full_basis_pfaffian(&c, &x, &y).unwrap();
                assert!((det - pf).abs() < 1e-9);
                let want = crate::oracle::exact_amplitude(&c, &x, &y).unwrap();
                assert!((amplitude(&c, &x, &y).unwrap() - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn amplitude_rejects_general_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let c = random_circuit(&mut rng, 3, 5, GateFamily::General);
        assert!(matches!(
            amplitude(&c, &bits("100"), &bits("010")),
            Err(Error::NotNumberPreserving { .. })
        ));
    }

    #[test]
    fn expectation_examples() {
        let c = Circuit::new(2).unwrap();
        let input = InputSpec::Product(vec![SingleQubitState::plus(), SingleQubitState::zero()]);
        assert!(expectation_z(&c, &input, 1).unwrap().abs() < 1e-15);
        let mut d = Circuit::new(4).unwrap();
        for p in 1..4 {
            d.push(Matchgate::z_rotation_first(0.3 * p as f64), p).unwrap();
            d.push(Matchgate::z_rotation_second(0.2), p).unwrap();
        }
        let zeros = InputSpec::Basis(BitString::zeros(4));
        for k in 1..=4 {
            assert!((expectation_z(&d, &zeros, k).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn expectation_matches_oracle_and_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..4 {
            let c = random_circuit(&mut rng, 7, 30, GateFamily::General);
            let input = InputSpec::Product(random_product(&mut rng, 7));
            let sv = run_circuit(&c, &input).unwrap();
            for k in 1..=7 {
                let z = expectation_z(&c, &input, k).unwrap();
                assert!((z - sv.expectation_z(k).unwrap()).abs() < 1e-9);
                let p1 = prob_partial(&c, &input, &OutcomeAssignment::computational(&[(k, 1)]).unwrap()).unwrap();
                assert!((z - (1.0 - 2.0 * p1)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn product_marginals_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..5 {
            let c = random_circuit(&mut rng, 6, 25, GateFamily::Mixed);
            let input = InputSpec::Product(random_product(&mut rng, 6));
            let table = marginal_table(&c, &input, &[2, 4]).unwrap();
            let sv = run_circuit(&c, &input).unwrap();
            let want = exact_distribution(&sv, &measure(&[2, 4])).unwrap();
            for (a, b) in table.iter().zip(&want) {
                assert!((a - b).abs() < 1e-9);
            }
            let one = marginal_table(&c, &input, &[3]).unwrap();
            assert!((one[0] + one[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn basis_product_input_reduces_to_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(36);
        let c = random_circuit(&mut rng, 5, 20, GateFamily::General);
        let x = random_bits(&mut rng, 5);
        let product = InputSpec::Product(x.bits().iter().map(|&b| SingleQubitState::basis(b)).collect());
        let a = marginal_table(&c, &InputSpec::Basis(x), &[1, 2, 5]).unwrap();
        let b = marginal_table(&c, &product, &[1, 2, 5]).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn product_input_rejects_wrap_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let c = random_periodic_circuit(&mut rng, 4, 10, 0.5);
        assert!(c.has_wrap_gates());
        let states = random_product(&mut rng, 4);
        let a = OutcomeAssignment::computational(&[(1, 0)]).unwrap();
        assert_eq!(prob_partial_product(&c, &states, &a), Err(Error::PbcUnsupportedForProductInput));
    }

    #[test]
    fn periodic_circuits_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(38);
        for n in 3..=6 {
            let c = random_periodic_circuit(&mut rng, n, 15, 0.3);
            let x = random_bits(&mut rng, n);
            let all: Vec<usize> = (1..=n).collect();
            let table = marginal_table(&c, &InputSpec::Basis(x.clone()), &all).unwrap();
            let sv = run_circuit(&c, &InputSpec::Basis(x)).unwrap();
            let want = exact_distribution(&sv, &measure(&all)).unwrap();
            for (a, b) in table.iter().zip(&want) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn parity_superselection() {
        let mut rng = ChaCha8Rng::seed_from_u64(39);
        for _ in 0..50 {
            let n = rng.random_range(2..7);
            let c = random_circuit(&mut rng, n, 15, GateFamily::General);
            let x = random_bits(&mut rng, n);
            let mut y = random_bits(&mut rng, n);
            if y.parity() == x.parity() {
                let mut b = y.bits().to_vec();
                b[0] ^= 1;
                y = BitString::new(b).unwrap();
            }
            assert!(prob_full_basis(&c, &x, &y).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn rotated_assignment_rejected() {
        let c = Circuit::new(2).unwrap();
        let a = OutcomeAssignment::new(vec![crate::model::AssignedBit {
            qubit: 1,
            bit: 0,
            basis: crate::model::MeasurementBasis::rotated(1.0, 0.0).unwrap(),
        }])
        .unwrap();
        assert_eq!(prob_partial_basis(&c, &bits("00"), &a), Err(Error::RotatedBasisUnsupported));
    }

    fn two_round_program(rng: &mut ChaCha8Rng, n: usize) -> AdaptiveProgram {
        let prefix = random_circuit(rng, n, 10, GateFamily::General);
        let gates = |rng: &mut ChaCha8Rng| {
            (0..6)
                .map(|_| GateApplication::new(random_matchgate(rng), rng.random_range(1..n)))
                .collect::<Vec<_>>()
        };
        let mut table = BranchTable::default();
        table.entries.insert(bits("0"), Some(1));
        table.entries.insert(bits("1"), Some(2));
        let rounds = vec![
            Round {
                gates: gates(rng),
                measure: measure(&[1]),
                branches: Some(table),
            },
            Round {
                gates: gates(rng),
                measure: measure(&[2, n]),
                branches: None,
            },
            Round {
                gates: gates(rng),
                measure: measure(&[n - 1]),
                branches: None,
            },
        ];
        AdaptiveProgram::new(prefix, rounds).unwrap()
    }

    #[test]
    fn adaptive_joint_matches_oracle_and_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for product in [false, true] {
            let p = two_round_program(&mut rng, 4);
            let input = if product {
                InputSpec::Product(random_product(&mut rng, 4))
            } else {
                InputSpec::Basis(random_bits(&mut rng, 4))
            };
            let mut total = 0.0;
            for trace in p.all_traces() {
                let got = adaptive_joint_prob(&p, &input, &trace).unwrap();
                let want = adaptive_trace_probability(&p, &input, &trace).unwrap();
                assert!((got - want).abs() < 1e-9, "{trace:?}: {got} vs {want}");
                total += got;
            }
            assert!((total - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn single_round_reduces_to_marginal() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let c = random_circuit(&mut rng, 4, 12, GateFamily::General);
        let program = AdaptiveProgram::new(
            c.clone(),
            vec![Round {
                gates: vec![],
                measure: measure(&[2, 3]),
                branches: None,
            }],
        )
        .unwrap();
        let input = InputSpec::Basis(bits("1010"));
        for idx in 0..4 {
            let b = BitString::from_index(idx, 2);
            let joint = adaptive_joint_prob(&program, &input, &[b.clone()]).unwrap();
            let a = OutcomeAssignment::computational(&[(2, b.get(1)), (3, b.get(2))]).unwrap();
            assert!((joint - prob_partial(&c, &input, &a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn checked_values() {
        assert!(matches!(checked_real(C64::new(0.5, 1e-6)), Err(Error::ImaginaryResidual { .. })));
        assert_eq!(checked_probability(-1e-10).unwrap(), 0.0);
        assert!(checked_probability(1.1).is_err());
    }

    #[test]
    fn oracle_agrees_on_zero_state() {
        let sv = StateVector::zero_state(3).unwrap();
        assert_eq!(sv.expectation_z(2).unwrap(), 1.0);
    }

    #[test]
    fn random_subsets_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let c = random_circuit(&mut rng, 8, 35, GateFamily::Mixed);
        let input = InputSpec::Product(random_product(&mut rng, 8));
        let s = random_subset(&mut rng, 8, 4);
        let t = marginal_table(&c, &input, &s).unwrap();
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        // marginal consistency with one more qubit
        let extra = (1..=8).find(|q| !s.contains(q)).unwrap();
        let mut bigger = s.clone();
        bigger.push(extra);
        let u = marginal_table(&c, &input, &bigger).unwrap();
        for (idx, p) in t.iter().enumerate() {
            assert!((p - u[2 * idx] - u[2 * idx + 1]).abs() < 1e-9);
        }
    }
}
