//! Random gates, circuits and inputs for tests and benchmarks.

use crate::linalg::{Mat2, C64};
use crate::model::{BitString, Circuit, GateApplication, Matchgate, SingleQubitState};
use rand::Rng;
use std::f64::consts::{PI, TAU};

/// Random unitary `[[a, b], [-e^{iδ} b*, e^{iδ} a*]]` with determinant `e^{iδ}`.
fn unitary_with_det_phase(rng: &mut impl Rng, delta: f64) -> Mat2 {
    let v: [f64; 4] = std::array::from_fn(|_| gaussian(rng));
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let a = C64::new(v[0], v[1]) / norm;
    let b = C64::new(v[2], v[3]) / norm;
    let e = C64::from_polar(1.0, delta);
    [[a, b], [-e * b.conj(), e * a.conj()]]
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (TAU * v).cos()
}

/// Haar-like random matchgate.
pub fn random_matchgate(rng: &mut impl Rng) -> Matchgate {
    let delta = rng.random_range(0.0..TAU);
    let a = unitary_with_det_phase(rng, delta);
    let b = unitary_with_det_phase(rng, delta);
    Matchgate::new(a, b).expect("determinants matched by construction")
}

/// Random matchgate with diagonal `A`.
pub fn random_number_preserving_gate(rng: &mut impl Rng) -> Matchgate {
    let (x, y) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
    let a = [
        [C64::from_polar(1.0, x), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::from_polar(1.0, y)],
    ];
    let b = unitary_with_det_phase(rng, x + y);
    Matchgate::new(a, b).expect("determinants matched by construction")
}

/// Which gates a random circuit draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateFamily {
    General,
    NumberPreserving,
    /// Each gate independently general or number preserving.
    Mixed,
}

fn draw(rng: &mut impl Rng, family: GateFamily) -> Matchgate {
    match family {
        GateFamily::General => random_matchgate(rng),
        GateFamily::NumberPreserving => random_number_preserving_gate(rng),
        GateFamily::Mixed => {
            if rng.random_bool(0.5) {
                random_matchgate(rng)
            } else {
                random_number_preserving_gate(rng)
            }
        }
    }
}

/// Random open-boundary circuit with uniformly placed gates.
pub fn random_circuit(rng: &mut impl Rng, n: usize, gates: usize, family: GateFamily) -> Circuit {
    let mut c = Circuit::new(n).expect("n >= 2");
    for _ in 0..gates {
        let pos = rng.random_range(1..n);
        c.push(draw(rng, family), pos).expect("valid placement");
    }
    c
}

/// Random periodic circuit; each gate is a wrap gate with probability `wrap_rate`.
pub fn random_periodic_circuit(rng: &mut impl Rng, n: usize, gates: usize, wrap_rate: f64) -> Circuit {
    let mut c = Circuit::with_boundary(n, true).expect("n >= 2");
    for _ in 0..gates {
        let g = random_matchgate(rng);
        let app = if rng.random_bool(wrap_rate) {
            GateApplication::wrap(g, n)
        } else {
            GateApplication::new(g, rng.random_range(1..n))
        };
        c.push_application(app).expect("valid placement");
    }
    c
}

pub fn random_bits(rng: &mut impl Rng, n: usize) -> BitString {
    BitString::new((0..n).map(|_| rng.random_range(0..2u8)).collect()).expect("bits are 0/1")
}

pub fn random_state(rng: &mut impl Rng) -> SingleQubitState {
    let theta = rng.random_range(0.0..=1.0f64).acos() * 2.0;
    SingleQubitState::new(theta.clamp(0.0, PI), rng.random_range(0.0..TAU)).expect("angles in range")
}

pub fn random_product(rng: &mut impl Rng, n: usize) -> Vec<SingleQubitState> {
    (0..n).map(|_| random_state(rng)).collect()
}

/// `k` distinct qubits of `1..=n` in random order.
pub fn random_subset(rng: &mut impl Rng, n: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (1..=n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        all.swap(i, j);
    }
    all.truncate(k.min(n));
    all
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_gates_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            random_matchgate(&mut rng);
            assert!(random_number_preserving_gate(&mut rng).is_number_preserving());
        }
    }

    #[test]
    fn subsets_are_distinct() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut s = random_subset(&mut rng, 8, 5);
        s.sort_unstable();
        s.dedup();
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|&q| (1..=8).contains(&q)));
    }
}
