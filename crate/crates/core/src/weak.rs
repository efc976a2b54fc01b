//! Sampling by the chain rule over exact nested-projector probabilities.
//!
//! Shot `s` with seed `seed` draws from ChaCha20 seeded by `seed` on stream
//! `s`, one `f64` per sampled bit; bit 1 is chosen when the draw is below the
//! conditional probability of 1. Streams are therefore independent of thread
//! count and platform.

use crate::error::{Error, Result};
use crate::jw::{lower_periodic, ModeTransfer, Parity};
use crate::model::{
    check_qubits, AdaptiveProgram, BitString, Circuit, InputSpec, Matchgate, Measurement, MeasurementBasis,
};
use crate::prep::{basis_rotation_steps, steps_to_gates};
use crate::strong::{checked_probability, effective_circuit, Evaluator, LoweredProgram, Segment, RANGE_TOLERANCE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::RwLock;

/// Conditioning on a prefix less likely than this is refused.
pub const DEGENERATE_PREFIX: f64 = 1e-12;

/// Upper bound on memoized chain nodes.
pub const MEMO_CAPACITY: usize = 1 << 20;

/// RNG of one shot.
pub fn shot_rng(seed: u64, shot: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

/// Joint probabilities `[Pr(prefix, 0), Pr(prefix, 1)]`, cached by prefix.
struct Chain<F> {
    joint: F,
    memo: RwLock<HashMap<Vec<u8>, [f64; 2]>>,
}

impl<F> Chain<F>
where
    F: Fn(&[u8]) -> Result<[f64; 2]> + Sync,
{
    fn new(joint: F) -> Self {
        Chain {
            joint,
            memo: RwLock::new(HashMap::new()),
        }
    }

    fn children(&self, prefix: &[u8]) -> Result<[f64; 2]> {
        if let Some(v) = self.memo.read().expect("memo lock").get(prefix) {
            return Ok(*v);
        }
        let v = (self.joint)(prefix)?;
        let mut memo = self.memo.write().expect("memo lock");
        if memo.len() < MEMO_CAPACITY {
            memo.insert(prefix.to_vec(), v);
        }
        Ok(v)
    }

    /// Appends one sampled bit to `prefix`, whose probability is `p_prefix`.
    fn step(&self, prefix: &mut Vec<u8>, p_prefix: f64, rng: &mut ChaCha20Rng) -> Result<f64> {
        if p_prefix < DEGENERATE_PREFIX {
            return Err(Error::DegenerateConditional { probability: p_prefix });
        }
        let [j0, j1] = self.children(prefix)?;
        let sum = j0 + j1;
        if (sum - p_prefix).abs() > RANGE_TOLERANCE || sum < DEGENERATE_PREFIX {
            return Err(Error::ProbabilityOutOfRange { value: sum / p_prefix });
        }
        let p1 = checked_probability(j1 / sum)?;
        let u: f64 = rng.random();
        if u < p1 {
            prefix.push(1);
            Ok(j1)
        } else {
            prefix.push(0);
            Ok(j0)
        }
    }
}

fn pairs(qubits: &[usize], bits: &[u8]) -> Vec<(usize, u8)> {
    qubits.iter().copied().zip(bits.iter().copied()).collect()
}

/// Samples the computational-basis outcomes of `subset`, in that order.
pub fn sample_computational(
    circuit: &Circuit,
    input: &InputSpec,
    subset: &[usize],
    seed: u64,
    shots: usize,
) -> Result<Vec<BitString>> {
    let n = circuit.n();
    input.check_len(n)?;
    check_qubits(subset.iter().copied(), n, "subset")?;
    let c = effective_circuit(circuit, input)?;
    let ev = Evaluator::new(n, input)?;
    let t = ev.transfer(&c)?;
    let chain = Chain::new(|prefix: &[u8]| {
        let mut bits = prefix.to_vec();
        let q = &subset[..prefix.len() + 1];
        bits.push(0);
        let j0 = ev.probability(&t, &pairs(q, &bits))?;
        *bits.last_mut().expect("nonempty") = 1;
        let j1 = ev.probability(&t, &pairs(q, &bits))?;
        Ok([j0, j1])
    });
    (0..shots)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(seed, shot as u64);
            let mut bits = Vec::with_capacity(subset.len());
            let mut p = 1.0;
            for _ in subset {
                p = chain.step(&mut bits, p, &mut rng)?;
            }
            BitString::new(bits)
        })
        .collect()
}

/// One measurement step of the rotated-basis walk.
#[derive(Debug, Clone, Copy)]
struct WalkStep {
    qubit: usize,
    /// `None` for an unmeasured qubit whose outcome is discarded.
    basis: Option<MeasurementBasis>,
}

/// Samples `measure` with arbitrary single-qubit bases.
///
/// The input is prepared next to a `|+⟩` ancilla on qubit `n + 1`. Walking
/// down from qubit `n` to the lowest measured qubit, each measured qubit is
/// rotated into the computational basis by Hadamards (against the ancilla) and
/// Z rotations, then measured. Unmeasured qubits on the way are measured in the
/// computational basis and discarded. Once a qubit holds a definite bit `b`,
/// `G(Z, X)` for `b = 0` or `G(-Z, X)` for `b = 1` swaps it with the ancilla,
/// which moves the ancilla next to the following qubit.
pub fn sample_rotated(
    circuit: &Circuit,
    input: &InputSpec,
    measure: &[Measurement],
    seed: u64,
    shots: usize,
) -> Result<Vec<BitString>> {
    let n = circuit.n();
    input.check_len(n)?;
    check_qubits(measure.iter().map(|m| m.qubit), n, "measure")?;
    if measure.is_empty() {
        return Ok(vec![BitString::default(); shots]);
    }
    let lowered = match input {
        InputSpec::Basis(x) if circuit.has_wrap_gates() => lower_periodic(circuit, Parity::of_bits(x))?,
        InputSpec::Product(_) if circuit.has_wrap_gates() => return Err(Error::PbcUnsupportedForProductInput),
        _ => circuit.clone(),
    };
    let ev = Evaluator::product(&input.to_product())?;
    let after_circuit = ev.transfer(&lowered)?;
    let lowest = measure.iter().map(|m| m.qubit).min().expect("nonempty");
    let steps: Vec<WalkStep> = (lowest..=n)
        .rev()
        .map(|q| WalkStep {
            qubit: q,
            basis: measure.iter().find(|m| m.qubit == q).map(|m| m.basis),
        })
        .collect();

    // Transfers just before each step's measurement, given earlier bits.
    let transfers = |bits: &[u8]| -> Result<Vec<ModeTransfer>> {
        let mut t = after_circuit.clone();
        let mut out = Vec::with_capacity(bits.len() + 1);
        for (j, step) in steps.iter().take(bits.len() + 1).enumerate() {
            if j > 0 {
                let prev = steps[j - 1].qubit;
                let swap = if bits[j - 1] == 0 {
                    Matchgate::fswap()
                } else {
                    Matchgate::fswap_one()
                };
                t.apply_gate(&swap, prev)?;
            }
            if let Some(MeasurementBasis::Rotated(state)) = step.basis {
                for g in steps_to_gates(&basis_rotation_steps(&state), step.qubit) {
                    t.apply_application(&g)?;
                }
            }
            out.push(t.clone());
        }
        Ok(out)
    };

    let chain = Chain::new(|prefix: &[u8]| {
        let ts = transfers(prefix)?;
        let mut outcomes: Vec<[(usize, u8); 1]> = steps.iter().zip(prefix).map(|(s, &b)| [(s.qubit, b)]).collect();
        let last = steps[prefix.len()].qubit;
        let mut joint = [0.0; 2];
        for b in 0..2u8 {
            outcomes.push([(last, b)]);
            let segs: Vec<Segment<'_>> = ts
                .iter()
                .zip(&outcomes)
                .map(|(transfer, o)| Segment { transfer, outcomes: o })
                .collect();
            joint[b as usize] = ev.nested_probability(&segs)?;
            outcomes.pop();
        }
        Ok(joint)
    });

    (0..shots)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(seed, shot as u64);
            let mut bits = Vec::with_capacity(steps.len());
            let mut p = 1.0;
            for _ in &steps {
                p = chain.step(&mut bits, p, &mut rng)?;
            }
            let out: Vec<u8> = measure
                .iter()
                .map(|m| bits[n - m.qubit])
                .collect();
            BitString::new(out)
        })
        .collect()
}

/// Samples `measure`, using the rotated walk only when a basis needs it.
pub fn sample(
    circuit: &Circuit,
    input: &InputSpec,
    measure: &[Measurement],
    seed: u64,
    shots: usize,
) -> Result<Vec<BitString>> {
    if measure.iter().all(|m| m.basis.is_computational()) {
        let subset: Vec<usize> = measure.iter().map(|m| m.qubit).collect();
        sample_computational(circuit, input, &subset, seed, shots)
    } else {
        sample_rotated(circuit, input, measure, seed, shots)
    }
}

/// One run of an adaptive program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptiveShot {
    /// Rounds visited, in order.
    pub rounds: Vec<usize>,
    /// Observed bits of each visited round.
    pub trace: Vec<BitString>,
}

impl AdaptiveShot {
    /// Outcome of the last round.
    pub fn final_outcome(&self) -> &BitString {
        self.trace.last().expect("a program has at least one round")
    }
}

/// Evaluates nested projector chains of an adaptive program.
struct AdaptiveModel<'a> {
    lowered: LoweredProgram<'a>,
    ev: Evaluator,
    prefix_transfer: ModeTransfer,
}

impl<'a> AdaptiveModel<'a> {
    fn new(program: &'a AdaptiveProgram, input: &InputSpec) -> Result<Self> {
        let lowered = LoweredProgram::new(program, input)?;
        let ev = Evaluator::new(program.n(), input)?;
        let prefix_transfer = ev.transfer(&lowered.prefix)?;
        Ok(AdaptiveModel {
            lowered,
            ev,
            prefix_transfer,
        })
    }

    fn program(&self) -> &AdaptiveProgram {
        self.lowered.program
    }

    /// Splits flat bits into complete rounds and the partial current round.
    fn split(&self, flat: &[u8]) -> Result<(Vec<usize>, Vec<BitString>, usize, Vec<u8>)> {
        let mut trace = Vec::new();
        let mut path = Vec::new();
        let mut rest = flat;
        loop {
            let r = self
                .program()
                .next_round(&trace)?
                .ok_or_else(|| Error::BranchMismatch("bits run past the end of the program".into()))?;
            let k = self.program().rounds()[r].measure.len();
            if rest.len() < k {
                return Ok((path, trace, r, rest.to_vec()));
            }
            path.push(r);
            trace.push(BitString::new(rest[..k].to_vec())?);
            rest = &rest[k..];
        }
    }

    /// Joint probability of complete rounds followed by a partial round.
    fn joint(&self, path: &[usize], trace: &[BitString], current: Option<(usize, &[u8])>) -> Result<f64> {
        let mut t = self.prefix_transfer.clone();
        let mut transfers = Vec::with_capacity(path.len() + 1);
        let mut outcomes = Vec::with_capacity(path.len() + 1);
        for (&r, bits) in path.iter().zip(trace) {
            self.lowered.advance(&mut t, r)?;
            transfers.push(t.clone());
            outcomes.push(self.lowered.outcomes(r, bits));
        }
        if let Some((r, bits)) = current {
            self.lowered.advance(&mut t, r)?;
            transfers.push(t);
            let qubits: Vec<usize> = self.program().rounds()[r].measure.iter().map(|m| m.qubit).collect();
            outcomes.push(pairs(&qubits, bits));
        }
        if transfers.is_empty() {
            return Ok(1.0);
        }
        let segs: Vec<Segment<'_>> = transfers
            .iter()
            .zip(&outcomes)
            .map(|(transfer, o)| Segment { transfer, outcomes: o })
            .collect();
        self.ev.nested_probability(&segs)
    }
}

/// Runs an adaptive program shot by shot, sampling every round.
pub fn run_adaptive(program: &AdaptiveProgram, input: &InputSpec, seed: u64, shots: usize) -> Result<Vec<AdaptiveShot>> {
    let model = AdaptiveModel::new(program, input)?;
    let chain = Chain::new(|flat: &[u8]| {
        let (path, trace, r, partial) = model.split(flat)?;
        let mut bits = partial;
        bits.push(0);
        let j0 = model.joint(&path, &trace, Some((r, &bits)))?;
        *bits.last_mut().expect("nonempty") = 1;
        let j1 = model.joint(&path, &trace, Some((r, &bits)))?;
        Ok([j0, j1])
    });
    (0..shots)
        .into_par_iter()
        .map(|shot| {
            let mut rng = shot_rng(seed, shot as u64);
            let mut flat = Vec::new();
            let mut trace: Vec<BitString> = Vec::new();
            let mut rounds = Vec::new();
            let mut p = 1.0;
            while let Some(r) = program.next_round(&trace)? {
                let k = program.rounds()[r].measure.len();
                let start = flat.len();
                for _ in 0..k {
                    p = chain.step(&mut flat, p, &mut rng)?;
                }
                rounds.push(r);
                trace.push(BitString::new(flat[start..].to_vec())?);
            }
            Ok(AdaptiveShot { rounds, trace })
        })
        .collect()
}

/// Exact distribution of the round that follows `trace`, conditioned on it.
///
/// Entries are indexed by the round's outcome with its first measured qubit
/// most significant.
pub fn final_round_distribution(program: &AdaptiveProgram, input: &InputSpec, trace: &[BitString]) -> Result<Vec<f64>> {
    let model = AdaptiveModel::new(program, input)?;
    let path = program.path(trace)?;
    let r = program
        .next_round(trace)?
        .ok_or_else(|| Error::BranchMismatch("the program has already ended".into()))?;
    let p = model.joint(&path, trace, None)?;
    if p < DEGENERATE_PREFIX {
        return Err(Error::DegenerateConditional { probability: p });
    }
    let k = program.rounds()[r].measure.len();
    (0..1usize << k)
        .map(|idx| {
            let bits = BitString::from_index(idx, k);
            let j = model.joint(&path, trace, Some((r, bits.bits())))?;
            checked_probability(j / p)
        })
        .collect()
}

/// Relative frequencies of `samples` over `2^k` outcomes (first bit most
/// significant).
pub fn empirical_distribution(samples: &[BitString], k: usize) -> Vec<f64> {
    let mut counts = vec![0.0; 1 << k];
    for s in samples {
        let idx = s.bits().iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        counts[idx] += 1.0;
    }
    let total = samples.len().max(1) as f64;
    counts.iter().map(|c| c / total).collect()
}

/// `½ Σ |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}
