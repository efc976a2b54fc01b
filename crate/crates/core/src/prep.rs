//! Matchgate preparation of product states with a `|+⟩` catalyst ancilla.
//!
//! Only Hadamards and Z rotations are needed for a single-qubit state. With an
//! ancilla in `|+⟩` on the next qubit, `G(H, H)` acts as `H` on the first
//! qubit and leaves the ancilla alone, and Z rotations are matchgates
//! themselves. Each prepared qubit is then walked up the register with
//! f-SWAPs, which act as plain swaps next to `|0⟩`.

use crate::model::{Circuit, GateApplication, Matchgate, SingleQubitState};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

/// Angles closer than this to a special value are treated as equal to it.
pub const ANGLE_TOLERANCE: f64 = 1e-12;

/// Abstract single-qubit step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EulerStep {
    H,
    /// `diag(e^{-iλ/2}, e^{iλ/2})`.
    Rz(f64),
}

impl EulerStep {
    /// Matchgate realizing the step on `(position, position + 1)` when the
    /// second qubit holds `|+⟩`.
    pub fn matchgate(&self) -> Matchgate {
        match *self {
            EulerStep::H => Matchgate::hadamard(),
            EulerStep::Rz(lambda) => Matchgate::z_rotation_first(-lambda / 2.0),
        }
    }

    pub fn inverse(&self) -> Self {
        match *self {
            EulerStep::H => EulerStep::H,
            EulerStep::Rz(lambda) => EulerStep::Rz(canonical(-lambda)),
        }
    }
}

/// Maps an angle onto `(-π, π]`.
fn canonical(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

fn push_rz(steps: &mut Vec<EulerStep>, angle: f64) {
    let a = canonical(angle);
    if a.abs() > ANGLE_TOLERANCE {
        steps.push(EulerStep::Rz(a));
    }
}

/// Steps (in application order) taking `|0⟩` to `ψ` up to a global phase.
pub fn euler_single_qubit(psi: &SingleQubitState) -> Vec<EulerStep> {
    let (theta, phi) = (psi.theta(), psi.phi());
    let mut steps = Vec::new();
    if theta <= ANGLE_TOLERANCE {
        return steps;
    }
    if (theta - FRAC_PI_2).abs() <= ANGLE_TOLERANCE {
        steps.push(EulerStep::H);
        push_rz(&mut steps, phi);
        return steps;
    }
    steps.push(EulerStep::H);
    push_rz(&mut steps, theta);
    steps.push(EulerStep::H);
    if PI - theta > ANGLE_TOLERANCE {
        push_rz(&mut steps, phi + FRAC_PI_2);
    }
    steps
}

/// Steps rotating `basis` onto `|0⟩` and its orthogonal state onto `|1⟩`,
/// each up to a phase.
pub fn basis_rotation_steps(basis: &SingleQubitState) -> Vec<EulerStep> {
    euler_single_qubit(basis).iter().rev().map(EulerStep::inverse).collect()
}

/// Gates applying `steps` to `qubit` against an ancilla on `qubit + 1`.
pub fn steps_to_gates(steps: &[EulerStep], qubit: usize) -> Vec<GateApplication> {
    steps.iter().map(|s| GateApplication::new(s.matchgate(), qubit)).collect()
}

/// Circuit `U` on `n + 1` qubits with `U|0…0⟩|+⟩ = |ψ_1…ψ_n⟩|+⟩` up to phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparationCircuit {
    circuit: Circuit,
}

impl PreparationCircuit {
    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    /// Qubit carrying the `|+⟩` catalyst.
    pub fn ancilla(&self) -> usize {
        self.circuit.n()
    }

    pub fn len(&self) -> usize {
        self.circuit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circuit.is_empty()
    }
}

/// Prepares `ψ_i` on qubit `n` and moves it to qubit `i`, for `i = 1…n`.
pub fn synthesize_preparation(states: &[SingleQubitState]) -> PreparationCircuit {
    let n = states.len();
    let mut circuit = Circuit::new(n + 1).expect("at least two qubits with the ancilla");
    for (k, psi) in states.iter().enumerate() {
        let steps = euler_single_qubit(psi);
        if steps.is_empty() {
            continue;
        }
        for g in steps_to_gates(&steps, n) {
            circuit.push_application(g).expect("position n is valid on n + 1 qubits");
        }
        let target = k + 1;
        for p in (target..n).rev() {
            circuit.push(Matchgate::fswap(), p).expect("valid position");
        }
    }
    PreparationCircuit { circuit }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Mat2, C64, I, ONE, ZERO};
    use crate::oracle::StateVector;
    use crate::random::random_product;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn step_matrix(s: &EulerStep) -> Mat2 {
        match *s {
            EulerStep::H => {
                let h = C64::new(FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
            EulerStep::Rz(l) => [[C64::from_polar(1.0, -l / 2.0), ZERO], [ZERO, C64::from_polar(1.0, l / 2.0)]],
        }
    }

    fn apply_steps(steps: &[EulerStep], v: [C64; 2]) -> [C64; 2] {
        steps.iter().fold(v, |v, s| {
            let m = step_matrix(s);
            [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
        })
    }

    fn fidelity(a: [C64; 2], b: [C64; 2]) -> f64 {
        (a[0].conj() * b[0] + a[1].conj() * b[1]).norm_sqr()
    }

    #[test]
    fn special_states() {
        assert!(euler_single_qubit(&SingleQubitState::zero()).is_empty());
        assert_eq!(euler_single_qubit(&SingleQubitState::plus()), vec![EulerStep::H]);
        let one = euler_single_qubit(&SingleQubitState::one());
        assert_eq!(one.len(), 3);
        assert!(fidelity(apply_steps(&one, [ONE, ZERO]), [ZERO, ONE]) > 1.0 - 1e-12);
    }

    #[test]
    fn generic_state_by_two_by_two_products() {
        let psi = SingleQubitState::new(PI / 4.0, PI / 3.0).unwrap();
        let steps = euler_single_qubit(&psi);
        let want = [C64::new((PI / 8.0).cos(), 0.0), C64::from_polar((PI / 8.0).sin(), PI / 3.0)];
        assert!(fidelity(apply_steps(&steps, [ONE, ZERO]), want) > 1.0 - 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for psi in random_product(&mut rng, 200) {
            let got = apply_steps(&euler_single_qubit(&psi), [ONE, ZERO]);
            assert!(fidelity(got, psi.amplitudes()) > 1.0 - 1e-12);
            let back = basis_rotation_steps(&psi);
            assert!(fidelity(apply_steps(&back, psi.amplitudes()), [ONE, ZERO]) > 1.0 - 1e-12);
            assert!(fidelity(apply_steps(&back, psi.orthogonal_amplitudes()), [ZERO, ONE]) > 1.0 - 1e-12);
        }
    }

    #[test]
    fn equator_states_use_two_steps() {
        let psi = SingleQubitState::new(FRAC_PI_2, 1.0).unwrap();
        let steps = euler_single_qubit(&psi);
        assert_eq!(steps.len(), 2);
        assert!(fidelity(apply_steps(&steps, [ONE, ZERO]), psi.amplitudes()) > 1.0 - 1e-12);
        let y = [C64::new(FRAC_1_SQRT_2, 0.0), I * FRAC_1_SQRT_2];
        let st = euler_single_qubit(&SingleQubitState::new(FRAC_PI_2, FRAC_PI_2).unwrap());
        assert!(fidelity(apply_steps(&st, [ONE, ZERO]), y) > 1.0 - 1e-12);
    }

    fn prepared_fidelity(states: &[SingleQubitState]) -> f64 {
        let n = states.len();
        let prep = synthesize_preparation(states);
        let mut init = vec![SingleQubitState::zero(); n];
        init.push(SingleQubitState::plus());
        let mut sv = StateVector::product(&init).unwrap();
        sv.apply_circuit(prep.circuit()).unwrap();
        let mut want = states.to_vec();
        want.push(SingleQubitState::plus());
        want_overlap(&sv, &want)
    }

    fn want_overlap(sv: &StateVector, want: &[SingleQubitState]) -> f64 {
        StateVector::product(want).unwrap().inner(sv).norm_sqr()
    }

    #[test]
    fn all_zero_input_needs_no_gates() {
        let prep = synthesize_preparation(&[SingleQubitState::zero(); 4]);
        assert!(prep.is_empty());
        assert_eq!(prep.ancilla(), 5);
    }

    #[test]
    fn single_plus_state() {
        assert!(prepared_fidelity(&[SingleQubitState::plus()]) > 1.0 - 1e-10);
    }

    #[test]
    fn random_products_prepared_densely() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for n in 1..=6 {
            for _ in 0..3 {
                let states = random_product(&mut rng, n);
                let f = prepared_fidelity(&states);
                assert!(f > 1.0 - 1e-10, "n={n} fidelity {f}");
                let prep = synthesize_preparation(&states);
                assert!(prep.len() <= 4 * n + n * n);
            }
        }
    }

    #[test]
    fn parity_branches_of_the_preparation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let states = random_product(&mut rng, 3);
        let prep = synthesize_preparation(&states);
        let mut even = StateVector::zero_state(4).unwrap();
        even.apply_circuit(prep.circuit()).unwrap();
        let mut odd = StateVector::basis(&"0001".parse().unwrap()).unwrap();
        odd.apply_circuit(prep.circuit()).unwrap();
        for (k, (e, o)) in even.amplitudes().iter().zip(odd.amplitudes()).enumerate() {
            let parity = k.count_ones() % 2;
            if parity == 1 {
                assert!(e.norm() < 1e-12);
            } else {
                assert!(o.norm() < 1e-12);
            }
        }
    }
}
