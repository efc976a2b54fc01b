//! Circuits, gates, inputs and measurement plans.
//!
//! Qubits are numbered from 1 everywhere in the public API, in files and in
//! messages. A gate at position `i` acts on the ordered pair `(i, i + 1)`;
//! the wrap-around gate of a periodic circuit acts on the ordered pair
//! `(n, 1)`.

use crate::error::{Error, Result};
use crate::linalg::{mat2, mat2_det, CMatrix, Mat2, C64, I, ONE, ZERO};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::fmt;
use std::str::FromStr;

/// Tolerance for unitarity and determinant checks on gate blocks.
pub const GATE_TOLERANCE: f64 = 1e-12;

/// A validated two-qubit matchgate `G(A, B)`.
///
/// `A` acts on the even-parity pair `{|00⟩, |11⟩}` and `B` on the odd-parity
/// pair `{|01⟩, |10⟩}`; both are unitary with `det A = det B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matchgate {
    a: Mat2,
    b: Mat2,
}

impl Matchgate {
    /// Validates `G(A, B)`. Nothing is normalized.
    pub fn new(a: Mat2, b: Mat2) -> Result<Self> {
        Self::validate_at(a, b, "gate")
    }

    /// Same as [`Matchgate::new`] but reports `path` in diagnostics.
    pub fn validate_at(a: Mat2, b: Mat2, path: &str) -> Result<Self> {
        for (name, m) in [("A", &a), ("B", &b)] {
            if m.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::schema(format!("{path}.{name}"), "non-finite entry"));
            }
            let residual = mat2(m).unitarity_residual();
            if residual > GATE_TOLERANCE {
                return Err(Error::NotUnitary {
                    path: format!("{path}.{name}"),
                    residual,
                });
            }
        }
        let difference = (mat2_det(&a) - mat2_det(&b)).norm();
        if difference > GATE_TOLERANCE {
            return Err(Error::DeterminantMismatch {
                path: path.to_string(),
                difference,
            });
        }
        Ok(Matchgate { a, b })
    }

    pub fn a(&self) -> &Mat2 {
        &self.a
    }

    pub fn b(&self) -> &Mat2 {
        &self.b
    }

    /// The 4×4 unitary in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn matrix(&self) -> CMatrix {
        let (a, b) = (&self.a, &self.b);
        CMatrix::from_rows(&[
            vec![a[0][0], ZERO, ZERO, a[0][1]],
            vec![ZERO, b[0][0], b[0][1], ZERO],
            vec![ZERO, b[1][0], b[1][1], ZERO],
            vec![a[1][0], ZERO, ZERO, a[1][1]],
        ])
    }

    /// `A` diagonal, i.e. the gate conserves the Hamming weight.
    pub fn is_number_preserving(&self) -> bool {
        self.a[0][1].norm() <= GATE_TOLERANCE && self.a[1][0].norm() <= GATE_TOLERANCE
    }

    pub fn identity() -> Self {
        Matchgate {
            a: [[ONE, ZERO], [ZERO, ONE]],
            b: [[ONE, ZERO], [ZERO, ONE]],
        }
    }

    /// Fermionic swap `G(Z, X)`.
    pub fn fswap() -> Self {
        Matchgate {
            a: [[ONE, ZERO], [ZERO, -ONE]],
            b: [[ZERO, ONE], [ONE, ZERO]],
        }
    }

    /// `G(-Z, X)`: swaps like [`Matchgate::fswap`] when the first qubit is `|1⟩`.
    pub fn fswap_one() -> Self {
        Matchgate {
            a: [[-ONE, ZERO], [ZERO, ONE]],
            b: [[ZERO, ONE], [ONE, ZERO]],
        }
    }

    /// `G(H, H)`: applies `H` to the first qubit when the second is `|+⟩`.
    pub fn hadamard() -> Self {
        let h = C64::new(FRAC_1_SQRT_2, 0.0);
        let hm = [[h, h], [h, -h]];
        Matchgate { a: hm, b: hm }
    }

    /// `exp(iθ Z ⊗ I)`.
    pub fn z_rotation_first(theta: f64) -> Self {
        let d = [[C64::from_polar(1.0, theta), ZERO], [ZERO, C64::from_polar(1.0, -theta)]];
        Matchgate { a: d, b: d }
    }

    /// `exp(iθ I ⊗ Z)`.
    pub fn z_rotation_second(theta: f64) -> Self {
        let e = C64::from_polar(1.0, theta);
        let a = [[e, ZERO], [ZERO, e.conj()]];
        let b = [[e.conj(), ZERO], [ZERO, e]];
        Matchgate { a, b }
    }

    /// `exp(iθ X ⊗ X)`.
    pub fn xx_rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let m = [[C64::new(c, 0.0), I * s], [I * s, C64::new(c, 0.0)]];
        Matchgate { a: m, b: m }
    }

    /// `exp(iθ (XX + YY) / 2)`, a number-preserving hopping gate.
    pub fn hopping(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Matchgate {
            a: [[ONE, ZERO], [ZERO, ONE]],
            b: [[C64::new(c, 0.0), I * s], [I * s, C64::new(c, 0.0)]],
        }
    }
}

/// A gate placed in a circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateApplication {
    pub gate: Matchgate,
    /// First qubit of the pair (1-based). Equals `n` for the wrap gate.
    pub position: usize,
    /// Acts on the wrap-around pair `(n, 1)`.
    pub wrap: bool,
}

impl GateApplication {
    pub fn new(gate: Matchgate, position: usize) -> Self {
        GateApplication {
            gate,
            position,
            wrap: false,
        }
    }

    /// Wrap-around gate on `(n, 1)` of an `n`-qubit periodic circuit.
    pub fn wrap(gate: Matchgate, n: usize) -> Self {
        GateApplication {
            gate,
            position: n,
            wrap: true,
        }
    }

    /// Checks placement against a circuit of `n` qubits, reporting `path`.
    pub fn check_placement(&self, n: usize, pbc: bool, path: &str) -> Result<()> {
        if self.wrap {
            if !pbc {
                return Err(Error::schema(
                    format!("{path}.pbc"),
                    "wrap gate in a circuit without periodic boundary conditions",
                ));
            }
            if self.position != n {
                return Err(Error::schema(
                    format!("{path}.pos"),
                    format!("wrap gate must sit at position n = {n}, found {}", self.position),
                ));
            }
        } else if self.position < 1 || self.position + 1 > n {
            return Err(Error::schema(
                format!("{path}.pos"),
                format!("position {} outside 1..={}", self.position, n.saturating_sub(1)),
            ));
        }
        Ok(())
    }
}

/// An ordered list of matchgates on a line (or a cycle when `pbc`).
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n: usize,
    pbc: bool,
    gates: Vec<GateApplication>,
}

impl Circuit {
    pub fn new(n: usize) -> Result<Self> {
        Self::with_boundary(n, false)
    }

    pub fn with_boundary(n: usize, pbc: bool) -> Result<Self> {
        if n < 2 {
            return Err(Error::schema("n", format!("need at least 2 qubits, found {n}")));
        }
        Ok(Circuit {
            n,
            pbc,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(n: usize, pbc: bool, gates: Vec<GateApplication>) -> Result<Self> {
        let mut c = Self::with_boundary(n, pbc)?;
        for (k, g) in gates.into_iter().enumerate() {
            g.check_placement(n, pbc, &format!("gates[{k}]"))?;
            c.gates.push(g);
        }
        Ok(c)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pbc(&self) -> bool {
        self.pbc
    }

    pub fn gates(&self) -> &[GateApplication] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Appends `gate` on qubits `(position, position + 1)`.
    pub fn push(&mut self, gate: Matchgate, position: usize) -> Result<&mut Self> {
        self.push_application(GateApplication::new(gate, position))
    }

    /// Appends a wrap-around gate on `(n, 1)`.
    pub fn push_wrap(&mut self, gate: Matchgate) -> Result<&mut Self> {
        self.push_application(GateApplication::wrap(gate, self.n))
    }

    pub fn push_application(&mut self, app: GateApplication) -> Result<&mut Self> {
        app.check_placement(self.n, self.pbc, &format!("gates[{}]", self.gates.len()))?;
        self.gates.push(app);
        Ok(self)
    }

    /// Appends every gate of `other`, which must have the same size.
    pub fn extend(&mut self, other: &Circuit) -> Result<&mut Self> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        for g in &other.gates {
            self.push_application(*g)?;
        }
        Ok(self)
    }

    pub fn has_wrap_gates(&self) -> bool {
        self.gates.iter().any(|g| g.wrap)
    }

    pub fn is_number_preserving(&self) -> bool {
        self.gates.iter().all(|g| g.gate.is_number_preserving())
    }
}

/// `cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleQubitState {
    theta: f64,
    phi: f64,
}

impl SingleQubitState {
    /// Requires `0 ≤ θ ≤ π` and `0 ≤ φ < 2π`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !(0.0..=PI).contains(&theta) {
            return Err(Error::schema("theta", format!("{theta} outside [0, π]")));
        }
        if !phi.is_finite() || !(0.0..TAU).contains(&phi) {
            return Err(Error::schema("phi", format!("{phi} outside [0, 2π)")));
        }
        Ok(SingleQubitState { theta, phi })
    }

    /// Accepts any finite angles and maps them onto the canonical ranges.
    pub fn from_angles(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidArgument("non-finite angle".into()));
        }
        let mut t = theta.rem_euclid(TAU);
        let mut p = phi;
        if t > PI {
            t = TAU - t;
            p += PI;
        }
        p = p.rem_euclid(TAU);
        if p >= TAU {
            p = 0.0;
        }
        Ok(SingleQubitState { theta: t, phi: p })
    }

    pub fn zero() -> Self {
        SingleQubitState { theta: 0.0, phi: 0.0 }
    }

    pub fn one() -> Self {
        SingleQubitState { theta: PI, phi: 0.0 }
    }

    pub fn plus() -> Self {
        SingleQubitState {
            theta: PI / 2.0,
            phi: 0.0,
        }
    }

    pub fn basis(bit: u8) -> Self {
        if bit == 0 {
            Self::zero()
        } else {
            Self::one()
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        [C64::new(c, 0.0), C64::from_polar(s, self.phi)]
    }

    /// The orthogonal state, used as outcome 1 of a rotated measurement.
    pub fn orthogonal_amplitudes(&self) -> [C64; 2] {
        let (s, c) = (self.theta / 2.0).sin_cos();
        [C64::new(s, 0.0), -C64::from_polar(c, self.phi)]
    }

    /// Bloch vector `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)`.
    pub fn bloch(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

/// Measurement basis of a single qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasurementBasis {
    /// Outcome 0 is `|0⟩`.
    Computational,
    /// Outcome 0 is the given state, outcome 1 its orthogonal complement.
    Rotated(SingleQubitState),
}

impl MeasurementBasis {
    pub fn rotated(theta: f64, phi: f64) -> Result<Self> {
        Ok(MeasurementBasis::Rotated(SingleQubitState::new(theta, phi)?))
    }

    /// State associated with outcome 0.
    pub fn outcome_zero_state(&self) -> SingleQubitState {
        match self {
            MeasurementBasis::Computational => SingleQubitState::zero(),
            MeasurementBasis::Rotated(s) => *s,
        }
    }

    pub fn is_computational(&self) -> bool {
        match self {
            MeasurementBasis::Computational => true,
            MeasurementBasis::Rotated(s) => s.theta == 0.0,
        }
    }
}

/// A string of bits, qubit 1 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString(Vec<u8>);

impl BitString {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument("bits must be 0 or 1".into()));
        }
        Ok(BitString(bits))
    }

    pub fn zeros(n: usize) -> Self {
        BitString(vec![0; n])
    }

    pub fn from_index(index: usize, len: usize) -> Self {
        BitString((0..len).map(|k| ((index >> (len - 1 - k)) & 1) as u8).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// `+1` for even Hamming weight, `-1` for odd.
    pub fn parity(&self) -> i8 {
        if self.weight() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// 1-based qubit indices carrying a 1.
    pub fn ones(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(k, _)| k + 1)
            .collect()
    }

    pub fn get(&self, qubit: usize) -> u8 {
        self.0[qubit - 1]
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidArgument(format!("invalid bit {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(BitString)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Input state of a circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSpec {
    Basis(BitString),
    Product(Vec<SingleQubitState>),
}

impl InputSpec {
    pub fn len(&self) -> usize {
        match self {
            InputSpec::Basis(b) => b.len(),
            InputSpec::Product(q) => q.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.len(),
            });
        }
        Ok(())
    }

    /// Product form; basis inputs become `|0⟩`/`|1⟩` factors.
    pub fn to_product(&self) -> Vec<SingleQubitState> {
        match self {
            InputSpec::Basis(b) => b.bits().iter().map(|&x| SingleQubitState::basis(x)).collect(),
            InputSpec::Product(q) => q.clone(),
        }
    }
}

/// Qubit to measure and its basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub qubit: usize,
    pub basis: MeasurementBasis,
}

impl Measurement {
    pub fn computational(qubit: usize) -> Self {
        Measurement {
            qubit,
            basis: MeasurementBasis::Computational,
        }
    }
}

/// Checks 1-based qubit indices are in range and distinct.
pub(crate) fn check_qubits(qubits: impl IntoIterator<Item = usize>, n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n + 1];
    for q in qubits {
        if q < 1 || q > n {
            return Err(Error::schema(what, format!("qubit {q} outside 1..={n}")));
        }
        if seen[q] {
            return Err(Error::schema(what, format!("qubit {q} listed twice")));
        }
        seen[q] = true;
    }
    Ok(())
}

/// A single assigned qubit of an [`OutcomeAssignment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignedBit {
    pub qubit: usize,
    pub bit: u8,
    pub basis: MeasurementBasis,
}

/// Partial assignment `ỹ` of outcomes to distinct qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeAssignment {
    entries: Vec<AssignedBit>,
}

impl OutcomeAssignment {
    pub fn new(entries: Vec<AssignedBit>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("assignment needs at least one qubit".into()));
        }
        if entries.iter().any(|e| e.bit > 1 || e.qubit == 0) {
            return Err(Error::InvalidArgument("bits must be 0/1 and qubits 1-based".into()));
        }
        let mut qs: Vec<usize> = entries.iter().map(|e| e.qubit).collect();
        qs.sort_unstable();
        if qs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("qubit assigned twice".into()));
        }
        Ok(OutcomeAssignment { entries })
    }

    /// Computational-basis assignment from `(qubit, bit)` pairs.
    pub fn computational(pairs: &[(usize, u8)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(qubit, bit)| AssignedBit {
                    qubit,
                    bit,
                    basis: MeasurementBasis::Computational,
                })
                .collect(),
        )
    }

    /// Full computational assignment of every qubit.
    pub fn full(y: &BitString) -> Result<Self> {
        let pairs: Vec<(usize, u8)> = y.bits().iter().enumerate().map(|(k, &b)| (k + 1, b)).collect();
        Self::computational(&pairs)
    }

    /// Assigns `bits` (in order) to the given measurements.
    pub fn from_measurements(measure: &[Measurement], bits: &[u8]) -> Result<Self> {
        if measure.len() != bits.len() {
            return Err(Error::DimensionMismatch {
                expected: measure.len(),
                found: bits.len(),
            });
        }
        Self::new(
            measure
                .iter()
                .zip(bits)
                .map(|(m, &bit)| AssignedBit {
                    qubit: m.qubit,
                    bit,
                    basis: m.basis,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[AssignedBit] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_computational(&self) -> bool {
        self.entries.iter().all(|e| e.basis.is_computational())
    }

    pub fn check_range(&self, n: usize) -> Result<()> {
        check_qubits(self.entries.iter().map(|e| e.qubit), n, "assignment")
    }

    pub(crate) fn computational_pairs(&self) -> Result<Vec<(usize, u8)>> {
        if !self.is_computational() {
            return Err(Error::RotatedBasisUnsupported);
        }
        Ok(self.entries.iter().map(|e| (e.qubit, e.bit)).collect())
    }
}

/// Where to continue after a round.
pub type NextRound = Option<usize>;

/// Maps observed bits of a round to the next round (`None` ends the program).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BranchTable {
    pub entries: BTreeMap<BitString, NextRound>,
    pub default: Option<NextRound>,
}

impl BranchTable {
    /// Table sending every outcome to `next`.
    pub fn always(next: NextRound) -> Self {
        BranchTable {
            entries: BTreeMap::new(),
            default: Some(next),
        }
    }

    pub fn next(&self, bits: &BitString) -> Option<NextRound> {
        self.entries.get(bits).copied().or(self.default)
    }
}

/// One round: gates, then computational measurements, then a branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub gates: Vec<GateApplication>,
    pub measure: Vec<Measurement>,
    /// `None` marks a final round.
    pub branches: Option<BranchTable>,
}

/// A program whose later gates depend on earlier measurement outcomes.
///
/// Execution applies `prefix`, then round 0, and follows branch tables.
/// Branch references may only point to later rounds, so every run ends.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveProgram {
    prefix: Circuit,
    rounds: Vec<Round>,
}

impl AdaptiveProgram {
    pub fn new(prefix: Circuit, rounds: Vec<Round>) -> Result<Self> {
        if rounds.is_empty() {
            return Err(Error::schema("rounds", "program needs at least one round"));
        }
        let (n, pbc) = (prefix.n(), prefix.pbc());
        for (r, round) in rounds.iter().enumerate() {
            let path = format!("rounds[{r}]");
            for (k, g) in round.gates.iter().enumerate() {
                g.check_placement(n, pbc, &format!("{path}.gates[{k}]"))?;
            }
            if round.measure.is_empty() {
                return Err(Error::schema(format!("{path}.measure"), "round measures no qubit"));
            }
            check_qubits(round.measure.iter().map(|m| m.qubit), n, &format!("{path}.measure"))?;
            if round.measure.iter().any(|m| !m.basis.is_computational()) {
                return Err(Error::schema(
                    format!("{path}.measure"),
                    "adaptive rounds measure in the computational basis",
                ));
            }
            if let Some(table) = &round.branches {
                let k = round.measure.len();
                for (bits, next) in &table.entries {
                    if bits.len() != k {
                        return Err(Error::schema(
                            format!("{path}.branches.{bits}"),
                            format!("branch key must have {k} bits"),
                        ));
                    }
                    check_target(*next, r, rounds.len(), &format!("{path}.branches.{bits}"))?;
                }
                if let Some(next) = table.default {
                    check_target(next, r, rounds.len(), &format!("{path}.branches.default"))?;
                } else {
                    if k >= usize::BITS as usize {
                        return Err(Error::schema(format!("{path}.branches"), "too many outcomes"));
                    }
                    for idx in 0..(1usize << k) {
                        let key = BitString::from_index(idx, k);
                        if !table.entries.contains_key(&key) {
                            return Err(Error::schema(
                                format!("{path}.branches"),
                                format!("missing branch for outcome {key} and no default"),
                            ));
                        }
                    }
                }
            }
        }
        Ok(AdaptiveProgram { prefix, rounds })
    }

    pub fn n(&self) -> usize {
        self.prefix.n()
    }

    pub fn pbc(&self) -> bool {
        self.prefix.pbc()
    }

    pub fn prefix(&self) -> &Circuit {
        &self.prefix
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    /// Round indices visited by `trace`, validating each round's bits.
    ///
    /// A trace may stop before the program ends; it may not run past it.
    pub fn path(&self, trace: &[BitString]) -> Result<Vec<usize>> {
        let mut path = Vec::with_capacity(trace.len());
        let mut current = Some(0);
        for (step, bits) in trace.iter().enumerate() {
            let r = current.ok_or_else(|| {
                Error::BranchMismatch(format!("trace has {} rounds, program ended after {step}", trace.len()))
            })?;
            let round = &self.rounds[r];
            if bits.len() != round.measure.len() {
                return Err(Error::BranchMismatch(format!(
                    "round {r} measures {} qubits, trace entry {step} has {} bits",
                    round.measure.len(),
                    bits.len()
                )));
            }
            path.push(r);
            current = match &round.branches {
                None => None,
                Some(table) => table
                    .next(bits)
                    .ok_or_else(|| Error::BranchMismatch(format!("round {r} has no branch for {bits}")))?,
            };
        }
        Ok(path)
    }

    /// Round that follows `trace`, or `None` when the program has ended.
    pub fn next_round(&self, trace: &[BitString]) -> Result<Option<usize>> {
        let path = self.path(trace)?;
        match (path.last(), trace.last()) {
            (None, _) => Ok(Some(0)),
            (Some(&r), Some(bits)) => Ok(match &self.rounds[r].branches {
                None => None,
                Some(t) => t.next(bits).flatten(),
            }),
            _ => unreachable!(),
        }
    }

    /// Every complete trace of the program.
    pub fn all_traces(&self) -> Vec<Vec<BitString>> {
        let mut done = Vec::new();
        let mut stack: Vec<Vec<BitString>> = vec![Vec::new()];
        while let Some(trace) = stack.pop() {
            match self.next_round(&trace).expect("trace built from the program") {
                None => done.push(trace),
                Some(r) => {
                    let k = self.rounds[r].measure.len();
                    for idx in (0..1usize << k).rev() {
                        let mut t = trace.clone();
                        t.push(BitString::from_index(idx, k));
                        stack.push(t);
                    }
                }
            }
        }
        done
    }
}

fn check_target(next: NextRound, from: usize, count: usize, path: &str) -> Result<()> {
    match next {
        Some(t) if t <= from || t >= count => Err(Error::schema(
            path,
            format!("branch target {t} must be a later round (< {count})"),
        )),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(a: C64, b: C64) -> Mat2 {
        [[a, ZERO], [ZERO, b]]
    }

    #[test]
    fn fswap_and_hadamard_are_matchgates() {
        let z = diag(ONE, -ONE);
        let x = [[ZERO, ONE], [ONE, ZERO]];
        assert!(Matchgate::new(z, x).is_ok());
        let h = *Matchgate::hadamard().a();
        assert!(Matchgate::new(h, h).is_ok());
    }

    #[test]
    fn determinant_mismatch_reported() {
        let i2 = diag(ONE, ONE);
        let z = diag(ONE, -ONE);
        match Matchgate::new(i2, z) {
            Err(Error::DeterminantMismatch { difference, .. }) => assert!((difference - 2.0).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_unitary_rejected() {
        let m = diag(C64::new(2.0, 0.0), C64::new(0.5, 0.0));
        assert!(matches!(Matchgate::new(m, m), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn assembled_gates_commute_with_zz() {
        let zz = CMatrix::from_fn(4, 4, |i, j| {
            if i != j {
                ZERO
            } else if i == 0 || i == 3 {
                ONE
            } else {
                -ONE
            }
        });
        for g in [
            Matchgate::fswap(),
            Matchgate::hadamard(),
            Matchgate::xx_rotation(0.3),
            Matchgate::z_rotation_second(1.1),
        ] {
            let m = g.matrix();
            assert!(m.matmul(&zz).sub(&zz.matmul(&m)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn z_rotation_embeddings_act_on_the_intended_qubit() {
        let t = 0.37;
        let first = Matchgate::z_rotation_first(t).matrix();
        let second = Matchgate::z_rotation_second(t).matrix();
        let e = C64::from_polar(1.0, t);
        // basis |q1 q2⟩: first depends on q1, second on q2
        let want_first = [e, e, e.conj(), e.conj()];
        let want_second = [e, e.conj(), e, e.conj()];
        for k in 0..4 {
            assert!((first[(k, k)] - want_first[k]).norm() < 1e-15);
            assert!((second[(k, k)] - want_second[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn placement_bounds() {
        let mut c = Circuit::new(3).unwrap();
        assert!(c.push(Matchgate::fswap(), 2).is_ok());
        assert!(matches!(c.push(Matchgate::fswap(), 3), Err(Error::Schema { .. })));
        assert!(c.push_wrap(Matchgate::fswap()).is_err());
        let mut p = Circuit::with_boundary(3, true).unwrap();
        assert!(p.push_wrap(Matchgate::fswap()).is_ok());
        assert!(Circuit::new(1).is_err());
    }

    #[test]
    fn single_qubit_state_ranges() {
        assert!(SingleQubitState::new(-0.1, 0.0).is_err());
        assert!(SingleQubitState::new(0.2, TAU).is_err());
        let s = SingleQubitState::from_angles(-0.5, 0.0).unwrap();
        assert!((s.theta() - 0.5).abs() < 1e-15 && (s.phi() - PI).abs() < 1e-15);
        let amp = SingleQubitState::new(1.2, 4.0).unwrap().amplitudes();
        assert!((amp[0].norm_sqr() + amp[1].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bitstrings() {
        let b: BitString = "0110".parse().unwrap();
        assert_eq!(b.weight(), 2);
        assert_eq!(b.parity(), 1);
        assert_eq!(b.ones(), vec![2, 3]);
        assert_eq!(b.to_string(), "0110");
        assert_eq!(BitString::from_index(6, 4), b);
        assert!("01a".parse::<BitString>().is_err());
    }

    #[test]
    fn assignment_validation() {
        assert!(OutcomeAssignment::computational(&[(1, 0), (1, 1)]).is_err());
        assert!(OutcomeAssignment::computational(&[]).is_err());
        let a = OutcomeAssignment::computational(&[(2, 1), (4, 0)]).unwrap();
        assert!(a.check_range(3).is_err());
        assert!(a.check_range(4).is_ok());
    }

    fn round(measure: &[usize], branches: Option<BranchTable>) -> Round {
        Round {
            gates: vec![],
            measure: measure.iter().map(|&q| Measurement::computational(q)).collect(),
            branches,
        }
    }

    #[test]
    fn adaptive_branch_coverage_and_paths() {
        let prefix = Circuit::new(3).unwrap();
        let mut partial = BranchTable::default();
        partial.entries.insert("0".parse().unwrap(), Some(1));
        let missing = AdaptiveProgram::new(prefix.clone(), vec![round(&[1], Some(partial.clone())), round(&[2], None)]);
        assert!(matches!(missing, Err(Error::Schema { .. })));

        partial.entries.insert("1".parse().unwrap(), Some(2));
        let p = AdaptiveProgram::new(
            prefix.clone(),
            vec![round(&[1], Some(partial)), round(&[2], None), round(&[2, 3], None)],
        )
        .unwrap();
        assert_eq!(p.path(&["1".parse().unwrap(), "01".parse().unwrap()]).unwrap(), vec![0, 2]);
        assert!(matches!(
            p.path(&["0".parse().unwrap(), "01".parse().unwrap()]),
            Err(Error::BranchMismatch(_))
        ));
        assert_eq!(p.all_traces().len(), 2 + 4);

        let backwards = AdaptiveProgram::new(prefix, vec![round(&[1], Some(BranchTable::always(Some(0))))]);
        assert!(backwards.is_err());
    }
}
