//! Linear action of matchgate circuits on fermionic operators.
//!
//! Majorana operators follow `c_{2k-1} = (∏_{j<k} Z_j) X_k` and
//! `c_{2k} = (∏_{j<k} Z_j) Y_k`. Internally they are indexed from 0, so mode
//! `k` (1-based) owns rows `2k - 2` and `2k - 1`.

use crate::error::{Error, Result};
use crate::linalg::{paulis, CMatrix, C64, I, ONE, ZERO};
use crate::model::{BitString, Circuit, GateApplication, InputSpec, Matchgate, GATE_TOLERANCE};
use crate::pfaffian::LinearFermionicOperator;

/// Weight outside the Majorana span tolerated in a gate expansion.
pub const LINEARITY_TOLERANCE: f64 = 1e-10;

/// Heisenberg action `M† c_a M = Σ_b W[a][b] c_b` of a circuit `M`.
///
/// `W` is real orthogonal. The creation/annihilation blocks `R`, `R'` of
/// `M a†_i M† = Σ_j R_ij a†_j + R'_ij a_j` are derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransfer {
    modes: usize,
    w: Vec<f64>,
}

impl ModeTransfer {
    pub fn identity(modes: usize) -> Self {
        let d = 2 * modes;
        let mut w = vec![0.0; d * d];
        for a in 0..d {
            w[a * d + a] = 1.0;
        }
        ModeTransfer { modes, w }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    fn dim(&self) -> usize {
        2 * self.modes
    }

    /// `W[a][b]`, 0-based Majorana indices.
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.w[a * self.dim() + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        let d = self.dim();
        &self.w[a * d..(a + 1) * d]
    }

    pub fn majorana_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|a| self.row(a).to_vec()).collect()
    }

    /// Appends a gate on `(position, position + 1)`.
    pub fn apply_gate(&mut self, gate: &Matchgate, position: usize) -> Result<()> {
        if position < 1 || position >= self.modes {
            return Err(Error::InvalidArgument(format!(
                "gate position {position} outside 1..={}",
                self.modes.saturating_sub(1)
            )));
        }
        let block = local_block(gate, position)?;
        self.apply_block(&block, position);
        Ok(())
    }

    fn apply_block(&mut self, block: &[[f64; 4]; 4], position: usize) {
        let d = self.dim();
        let base = 2 * (position - 1);
        let old: Vec<f64> = self.w[base * d..(base + 4) * d].to_vec();
        for a in 0..4 {
            let dst = &mut self.w[(base + a) * d..(base + a + 1) * d];
            dst.fill(0.0);
            for (b, &coef) in block[a].iter().enumerate() {
                if coef == 0.0 {
                    continue;
                }
                for (x, y) in dst.iter_mut().zip(&old[b * d..(b + 1) * d]) {
                    *x += coef * y;
                }
            }
        }
    }

    /// Appends every gate of a circuit without wrap gates.
    pub fn apply_circuit(&mut self, circuit: &Circuit) -> Result<()> {
        if circuit.n() > self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                found: circuit.n(),
            });
        }
        for g in circuit.gates() {
            self.apply_application(g)?;
        }
        Ok(())
    }

    pub fn apply_application(&mut self, app: &GateApplication) -> Result<()> {
        if app.wrap {
            return Err(Error::InvalidArgument(
                "wrap gate must be lowered before composing transfers".into(),
            ));
        }
        self.apply_gate(&app.gate, app.position)
    }

    /// Transfer of `later · self` (first `self`'s circuit, then `later`'s).
    pub fn then(&self, later: &ModeTransfer) -> Result<ModeTransfer> {
        if later.modes != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                found: later.modes,
            });
        }
        let d = self.dim();
        let mut w = vec![0.0; d * d];
        for a in 0..d {
            for k in 0..d {
                let coef = later.w[a * d + k];
                if coef == 0.0 {
                    continue;
                }
                for b in 0..d {
                    w[a * d + b] += coef * self.w[k * d + b];
                }
            }
        }
        Ok(ModeTransfer { modes: self.modes, w })
    }

    /// Same action on a larger register; extra modes are untouched.
    pub fn embed(&self, modes: usize) -> ModeTransfer {
        assert!(modes >= self.modes);
        let (d, e) = (self.dim(), 2 * modes);
        let mut w = vec![0.0; e * e];
        for a in 0..e {
            if a < d {
                w[a * e..a * e + d].copy_from_slice(self.row(a));
            } else {
                w[a * e + a] = 1.0;
            }
        }
        ModeTransfer { modes, w }
    }

    /// `max |W Wᵀ - I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                let dot: f64 = self.row(a).iter().zip(self.row(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    pub fn determinant(&self) -> f64 {
        let d = self.dim();
        CMatrix::from_fn(d, d, |a, b| C64::new(self.entry(a, b), 0.0)).determinant().re
    }

    /// `T` with `M f M† = T f` for `f = (a_1…a_n, a†_1…a†_n)`.
    pub fn fermionic(&self) -> CMatrix {
        let n = self.modes;
        let d = self.dim();
        // f = Λ c and c = Λ⁻¹ f; M c M† = Wᵀ c.
        let lambda = CMatrix::from_fn(d, d, |f, c| {
            let (k, creation) = if f < n { (f, false) } else { (f - n, true) };
            if c == 2 * k {
                C64::new(0.5, 0.0)
            } else if c == 2 * k + 1 {
                if creation {
                    C64::new(0.0, -0.5)
                } else {
                    C64::new(0.0, 0.5)
                }
            } else {
                ZERO
            }
        });
        let lambda_inv = CMatrix::from_fn(d, d, |c, f| {
            let (k, creation) = if f < n { (f, false) } else { (f - n, true) };
            if c == 2 * k {
                ONE
            } else if c == 2 * k + 1 {
                if creation {
                    I
                } else {
                    -I
                }
            } else {
                ZERO
            }
        });
        let wt = CMatrix::from_fn(d, d, |a, b| C64::new(self.entry(b, a), 0.0));
        lambda.matmul(&wt).matmul(&lambda_inv)
    }

    /// `(R, R')`.
    pub fn blocks(&self) -> (CMatrix, CMatrix) {
        let n = self.modes;
        let t = self.fermionic();
        let r = CMatrix::from_fn(n, n, |i, j| t[(n + i, n + j)]);
        let rp = CMatrix::from_fn(n, n, |i, j| t[(n + i, j)]);
        (r, rp)
    }

    /// `max |T Ω Tᵀ - Ω|` with `Ω` the anticommutator matrix of `f`.
    pub fn anticommutation_residual(&self) -> f64 {
        let n = self.modes;
        let d = self.dim();
        let omega = CMatrix::from_fn(d, d, |a, b| if (a + n == b) || (b + n == a) { ONE } else { ZERO });
        let t = self.fermionic();
        t.matmul(&omega).matmul(&t.transpose()).sub(&omega).max_abs()
    }

    pub fn is_number_preserving(&self) -> bool {
        self.blocks().1.max_abs() <= GATE_TOLERANCE
    }

    /// `R`, provided `R' = 0`.
    pub fn number_preserving_block(&self) -> Result<CMatrix> {
        let (r, rp) = self.blocks();
        let max_offdiag = rp.max_abs();
        if max_offdiag > GATE_TOLERANCE {
            return Err(Error::NotNumberPreserving { max_offdiag });
        }
        Ok(r)
    }

    /// `M† f M` for a linear operator `f`.
    pub fn heisenberg(&self, op: &LinearFermionicOperator) -> Result<LinearFermionicOperator> {
        if op.modes() != self.modes {
            return Err(Error::DimensionMismatch {
                expected: self.modes,
                found: op.modes(),
            });
        }
        let gamma = op.to_majorana();
        let d = self.dim();
        let mut out = vec![ZERO; d];
        for (a, g) in gamma.iter().enumerate() {
            if *g == ZERO {
                continue;
            }
            for (o, w) in out.iter_mut().zip(self.row(a)) {
                *o += g * w;
            }
        }
        Ok(LinearFermionicOperator::from_majorana(&out))
    }
}

/// Local Majoranas of a pair: `X⊗I, Y⊗I, Z⊗X, Z⊗Y`.
fn local_majoranas() -> [CMatrix; 4] {
    let [id, x, y, z] = paulis();
    [x.kron(&id), y.kron(&id), z.kron(&x), z.kron(&y)]
}

/// `g† m_a g = Σ_b block[a][b] m_b`.
fn local_block(gate: &Matchgate, position: usize) -> Result<[[f64; 4]; 4]> {
    local_block_of(&gate.matrix(), position)
}

fn local_block_of(g: &CMatrix, position: usize) -> Result<[[f64; 4]; 4]> {
    let gd = g.adjoint();
    let m = local_majoranas();
    let mut block = [[0.0; 4]; 4];
    for a in 0..4 {
        let o = gd.matmul(&m[a]).matmul(g);
        let mut rest = o.clone();
        let mut worst_imag: f64 = 0.0;
        for b in 0..4 {
            let c = m[b].matmul(&o).trace() / 4.0;
            rest = rest.sub(&m[b].scale(c));
            worst_imag = worst_imag.max(c.im.abs());
            block[a][b] = c.re;
        }
        let weight = (rest.frobenius_norm() / 2.0).max(worst_imag);
        if weight > LINEARITY_TOLERANCE {
            return Err(Error::NotLinearizable {
                first: position,
                second: position + 1,
                weight,
            });
        }
    }
    Ok(block)
}

/// Transfer of a single gate on `(i, i + 1)` of an `n`-mode register.
pub fn gate_mode_action(gate: &Matchgate, position: usize, n: usize) -> Result<ModeTransfer> {
    let mut t = ModeTransfer::identity(n);
    t.apply_gate(gate, position)?;
    Ok(t)
}

/// Transfer of a whole circuit; wrap gates must already be lowered.
pub fn compose_transfer(circuit: &Circuit) -> Result<ModeTransfer> {
    let mut t = ModeTransfer::identity(circuit.n());
    t.apply_circuit(circuit)?;
    Ok(t)
}

/// A relabeling `j ↦ σ(j)` of the fermionic modes (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModePermutation(Vec<usize>);

impl ModePermutation {
    /// `images[j - 1] = σ(j)`; must be a bijection of `1..=n`.
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n + 1];
        for &s in &images {
            if s < 1 || s > n || seen[s] {
                return Err(Error::InvalidArgument(format!("{images:?} is not a permutation of 1..={n}")));
            }
            seen[s] = true;
        }
        Ok(ModePermutation(images))
    }

    pub fn identity(n: usize) -> Self {
        ModePermutation((1..=n).collect())
    }

    /// Transposition of modes `i` and `j`.
    pub fn swap(n: usize, i: usize, j: usize) -> Result<Self> {
        let mut v: Vec<usize> = (1..=n).collect();
        if i < 1 || j < 1 || i > n || j > n {
            return Err(Error::InvalidArgument(format!("modes {i}, {j} outside 1..={n}")));
        }
        v.swap(i - 1, j - 1);
        Ok(ModePermutation(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn image(&self, j: usize) -> usize {
        self.0[j - 1]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (j, &s) in self.0.iter().enumerate() {
            inv[s - 1] = j + 1;
        }
        ModePermutation(inv)
    }
}

/// Transfer of `P M`, where `P` carries mode `j` of `M`'s output to `σ(j)`.
pub fn permute_modes(t: &ModeTransfer, sigma: &ModePermutation) -> Result<ModeTransfer> {
    if sigma.len() != t.modes {
        return Err(Error::DimensionMismatch {
            expected: t.modes,
            found: sigma.len(),
        });
    }
    let d = t.dim();
    let mut w = vec![0.0; d * d];
    for j in 1..=t.modes {
        let (src, dst) = (2 * (j - 1), 2 * (sigma.image(j) - 1));
        for s in 0..2 {
            w[(dst + s) * d..(dst + s + 1) * d].copy_from_slice(t.row(src + s));
        }
    }
    Ok(ModeTransfer { modes: t.modes, w })
}

/// Fermion-number parity of a definite-parity input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of_bits(x: &BitString) -> Self {
        if x.weight() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `+1` or `-1`.
    pub fn from_sign(sign: i8) -> Result<Self> {
        match sign {
            1 => Ok(Parity::Even),
            -1 => Ok(Parity::Odd),
            _ => Err(Error::IndefiniteParity),
        }
    }

    /// Parity of an input, which must be a computational-basis state.
    pub fn of_input(input: &InputSpec) -> Result<Self> {
        match input {
            InputSpec::Basis(x) => Ok(Self::of_bits(x)),
            InputSpec::Product(qs) => {
                let mut bits = Vec::with_capacity(qs.len());
                for q in qs {
                    let [c, s] = q.amplitudes();
                    if s.norm() <= GATE_TOLERANCE {
                        bits.push(0);
                    } else if c.norm() <= GATE_TOLERANCE {
                        bits.push(1);
                    } else {
                        return Err(Error::IndefiniteParity);
                    }
                }
                Ok(Self::of_bits(&BitString::new(bits)?))
            }
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Replaces a wrap gate on `(n, 1)` by nearest-neighbour matchgates that act
/// identically on the given parity sector.
///
/// The `X_n`/`Y_n` factors of the gate carry a Jordan–Wigner string through
/// qubits `1…n-1`. With the total parity fixed, that string becomes a sign,
/// leaving a quadratic term in modes `1` and `n`. f-SWAPs bring mode `n` next
/// to mode `1`, the substituted gate acts on `(1, 2)`, and the f-SWAPs are
/// undone.
pub fn pbc_substitute(app: &GateApplication, parity: Parity, n: usize) -> Result<Vec<GateApplication>> {
    if !app.wrap {
        return Ok(vec![*app]);
    }
    if n < 2 || app.position != n {
        return Err(Error::InvalidArgument(format!(
            "wrap gate at position {} in a {n}-qubit circuit",
            app.position
        )));
    }
    let (a, b) = (app.gate.a(), app.gate.b());
    let is_identity = |m: &[[C64; 2]; 2]| {
        (m[0][0] - ONE).norm() <= GATE_TOLERANCE
            && (m[1][1] - ONE).norm() <= GATE_TOLERANCE
            && m[0][1].norm() <= GATE_TOLERANCE
            && m[1][0].norm() <= GATE_TOLERANCE
    };
    if is_identity(a) && is_identity(b) {
        return Ok(Vec::new());
    }
    let lowered = substituted_gate(&app.gate, parity, n)?;
    let mut out = Vec::with_capacity(2 * n);
    for p in (2..n).rev() {
        out.push(GateApplication::new(Matchgate::fswap(), p));
    }
    out.push(GateApplication::new(lowered, 1));
    for p in 2..n {
        out.push(GateApplication::new(Matchgate::fswap(), p));
    }
    Ok(out)
}

/// The gate on `(1, 2)` obtained after moving mode `n` to mode `2`.
fn substituted_gate(gate: &Matchgate, parity: Parity, n: usize) -> Result<Matchgate> {
    let g = gate.matrix();
    let p = paulis();
    let m = local_majoranas();
    let sign = C64::new(parity.sign(), 0.0);
    // tensor index of (σ on qubit n, τ on qubit 1); 0 = I, 1 = X, 2 = Y, 3 = Z
    let mut out = CMatrix::zeros(4, 4);
    let mut stray: f64 = 0.0;
    for s in 0..4 {
        for t in 0..4 {
            let coef = p[s].kron(&p[t]).matmul(&g).trace() / 4.0;
            let image = match (s, t) {
                (0 | 3, 0 | 3) => {
                    // Z_1 ↦ Z⊗I and Z_n ↦ I⊗Z in the relabeled frame
                    Some(p[t].kron(&p[s]))
                }
                (1, 1 | 2) => Some(m[3].matmul(&m[t - 1]).scale(I * sign)),
                (2, 1 | 2) => Some(m[2].matmul(&m[t - 1]).scale(-I * sign)),
                _ => None,
            };
            match image {
                Some(op) => out = add(&out, &op.scale(coef)),
                None => stray = stray.max(coef.norm()),
            }
        }
    }
    if stray > LINEARITY_TOLERANCE {
        return Err(Error::NotLinearizable {
            first: n,
            second: 1,
            weight: stray,
        });
    }
    let a = [[out[(0, 0)], out[(0, 3)]], [out[(3, 0)], out[(3, 3)]]];
    let b = [[out[(1, 1)], out[(1, 2)]], [out[(2, 1)], out[(2, 2)]]];
    Matchgate::validate_at(a, b, "wrap gate")
}

fn add(x: &CMatrix, y: &CMatrix) -> CMatrix {
    x.sub(&y.scale(-ONE))
}

/// Open-boundary circuit equal to `circuit` on inputs of the given parity.
pub fn lower_periodic(circuit: &Circuit, parity: Parity) -> Result<Circuit> {
    let n = circuit.n();
    let mut out = Circuit::new(n)?;
    for g in circuit.gates() {
        for lowered in pbc_substitute(g, parity, n)? {
            out.push_application(lowered)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::StateVector;
    use crate::random::{random_circuit, random_matchgate, random_periodic_circuit, GateFamily};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense `c_a` (0-based) on `n` qubits as an explicit Pauli string.
    fn dense_majorana(n: usize, a: usize) -> CMatrix {
        let [id, x, y, z] = paulis();
        let k = a / 2;
        let mut m = CMatrix::identity(1);
        for q in 0..n {
            let f = if q < k {
                &z
            } else if q == k {
                if a % 2 == 0 {
                    &x
                } else {
                    &y
                }
            } else {
                &id
            };
            m = m.kron(f);
        }
        m
    }

    fn dense_circuit(c: &Circuit) -> CMatrix {
        let n = c.n();
        let dim = 1 << n;
        let mut u = CMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut amps = vec![ZERO; dim];
            amps[col] = ONE;
            let mut sv = StateVector::from_amplitudes(n, amps).unwrap();
            sv.apply_circuit(c).unwrap();
            for (r, a) in sv.amplitudes().iter().enumerate() {
                u[(r, col)] = *a;
            }
        }
        u
    }

    /// Checks `M† c_a M = Σ_b W_ab c_b` densely.
    fn check_heisenberg(c: &Circuit, t: &ModeTransfer, tol: f64) {
        let n = c.n();
        let u = dense_circuit(c);
        let ud = u.adjoint();
        for a in 0..2 * n {
            let lhs = ud.matmul(&dense_majorana(n, a)).matmul(&u);
            let mut rhs = CMatrix::zeros(1 << n, 1 << n);
            for b in 0..2 * n {
                rhs = add(&rhs, &dense_majorana(n, b).scale(C64::new(t.entry(a, b), 0.0)));
            }
            let err = lhs.sub(&rhs).max_abs();
            assert!(err < tol, "row {a}: {err}");
        }
    }

    #[test]
    fn identity_gate_is_identity_transfer() {
        let t = gate_mode_action(&Matchgate::identity(), 1, 3).unwrap();
        assert_eq!(t, ModeTransfer::identity(3));
    }

    #[test]
    fn fswap_exchanges_modes() {
        let t = gate_mode_action(&Matchgate::fswap(), 1, 2).unwrap();
        for (a, b) in [(0, 2), (1, 3), (2, 0), (3, 1)] {
            assert!(t.entry(a, b).abs() > 1.0 - 1e-12, "c{a} -> c{b}");
        }
        let mut c = Circuit::new(2).unwrap();
        c.push(Matchgate::fswap(), 1).unwrap();
        check_heisenberg(&c, &t, 1e-12);
    }

    #[test]
    fn xx_rotation_mixes_second_and_third_majorana() {
        let theta = 0.37;
        let t = gate_mode_action(&Matchgate::xx_rotation(theta), 1, 2).unwrap();
        for a in [0, 3] {
            for b in 0..4 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((t.entry(a, b) - want).abs() < 1e-12);
            }
        }
        let (s, c) = (2.0 * theta).sin_cos();
        assert!((t.entry(1, 1) - c).abs() < 1e-12);
        assert!((t.entry(2, 2) - c).abs() < 1e-12);
        assert!((t.entry(1, 2).abs() - s).abs() < 1e-12);
        assert!((t.entry(1, 2) + t.entry(2, 1)).abs() < 1e-12);
        let mut circ = Circuit::new(2).unwrap();
        circ.push(Matchgate::xx_rotation(theta), 1).unwrap();
        check_heisenberg(&circ, &t, 1e-12);
    }

    #[test]
    fn non_matchgate_rejected() {
        let cnot = CMatrix::from_fn(4, 4, |i, j| {
            let target = [0, 1, 3, 2][i];
            if j == target {
                ONE
            } else {
                ZERO
            }
        });
        assert!(matches!(
            local_block_of(&cnot, 2),
            Err(Error::NotLinearizable { first: 2, second: 3, .. })
        ));
    }

    #[test]
    fn empty_and_involution() {
        let c = Circuit::new(4).unwrap();
        assert_eq!(compose_transfer(&c).unwrap(), ModeTransfer::identity(4));
        let mut c = Circuit::new(2).unwrap();
        c.push(Matchgate::fswap(), 1).unwrap().push(Matchgate::fswap(), 1).unwrap();
        let t = compose_transfer(&c).unwrap();
        let id = ModeTransfer::identity(2);
        assert!(t.w.iter().zip(&id.w).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn random_circuits_match_dense_heisenberg() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 2..=5 {
            let c = random_circuit(&mut rng, n, 12, GateFamily::Mixed);
            let t = compose_transfer(&c).unwrap();
            check_heisenberg(&c, &t, 1e-10);
        }
    }

    #[test]
    fn random_six_qubit_transfer_preserves_anticommutators() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let c = random_circuit(&mut rng, 6, 30, GateFamily::General);
        let t = compose_transfer(&c).unwrap();
        assert!(t.anticommutation_residual() < 1e-10);
        assert!(t.orthogonality_residual() < 1e-10);
        assert!((t.determinant().abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn number_preserving_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let c = random_circuit(&mut rng, 5, 25, GateFamily::NumberPreserving);
        let t = compose_transfer(&c).unwrap();
        assert!(t.blocks().1.max_abs() <= 1e-12);
        assert!(t.number_preserving_block().is_ok());
        let g = random_circuit(&mut rng, 5, 25, GateFamily::General);
        assert!(matches!(
            compose_transfer(&g).unwrap().number_preserving_block(),
            Err(Error::NotNumberPreserving { .. })
        ));
    }

    /// `M a†_i M† = Σ_j R_ij a†_j + R'_ij a_j` densely.
    #[test]
    fn creation_blocks_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for n in 2..=4 {
            let c = random_circuit(&mut rng, n, 10, GateFamily::General);
            let (r, rp) = compose_transfer(&c).unwrap().blocks();
            let u = dense_circuit(&c);
            let create = |k: usize| {
                let (x, y) = (dense_majorana(n, 2 * k), dense_majorana(n, 2 * k + 1));
                add(&x, &y.scale(-I)).scale(C64::new(0.5, 0.0))
            };
            let annihilate = |k: usize| create(k).adjoint();
            for i in 0..n {
                let lhs = u.matmul(&create(i)).matmul(&u.adjoint());
                let mut rhs = CMatrix::zeros(1 << n, 1 << n);
                for j in 0..n {
                    rhs = add(&rhs, &create(j).scale(r[(i, j)]));
                    rhs = add(&rhs, &annihilate(j).scale(rp[(i, j)]));
                }
                assert!(lhs.sub(&rhs).max_abs() < 1e-10);
            }
        }
    }

    #[test]
    fn permutation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let c = random_circuit(&mut rng, 4, 12, GateFamily::General);
        let t = compose_transfer(&c).unwrap();
        assert_eq!(permute_modes(&t, &ModePermutation::identity(4)).unwrap(), t);
        let sigma = ModePermutation::swap(2, 1, 2).unwrap();
        let p = permute_modes(&ModeTransfer::identity(2), &sigma).unwrap();
        let f = gate_mode_action(&Matchgate::fswap(), 1, 2).unwrap();
        assert_eq!(p, f);
        let sigma = ModePermutation::new(vec![3, 1, 4, 2]).unwrap();
        let back = permute_modes(&permute_modes(&t, &sigma).unwrap(), &sigma.inverse()).unwrap();
        assert!(back.w.iter().zip(&t.w).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(ModePermutation::new(vec![1, 1]).is_err());
    }

    #[test]
    fn heisenberg_evolution_of_single_operators() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let c = random_circuit(&mut rng, 3, 8, GateFamily::General);
        let t = compose_transfer(&c).unwrap();
        let u = dense_circuit(&c);
        for mode in 1..=3 {
            let op = LinearFermionicOperator::annihilation(3, mode);
            let e = t.heisenberg(&op).unwrap();
            let dense_of = |f: &LinearFermionicOperator| {
                let g = f.to_majorana();
                let mut m = CMatrix::zeros(8, 8);
                for (a, z) in g.iter().enumerate() {
                    m = add(&m, &dense_majorana(3, a).scale(*z));
                }
                m
            };
            let lhs = u.adjoint().matmul(&dense_of(&op)).matmul(&u);
            assert!(lhs.sub(&dense_of(&e)).max_abs() < 1e-10);
        }
    }

    fn sector_error(periodic: &Circuit, parity: Parity) -> f64 {
        let n = periodic.n();
        let lowered = lower_periodic(periodic, parity).unwrap();
        assert!(!lowered.has_wrap_gates());
        let (u, v) = (dense_circuit(periodic), dense_circuit(&lowered));
        let want = if parity == Parity::Even { 0 } else { 1 };
        let mut worst: f64 = 0.0;
        for col in 0..1usize << n {
            if col.count_ones() % 2 != want {
                continue;
            }
            for r in 0..1usize << n {
                worst = worst.max((u[(r, col)] - v[(r, col)]).norm());
            }
        }
        worst
    }

    #[test]
    fn identity_wrap_gate_vanishes() {
        let app = GateApplication::wrap(Matchgate::identity(), 4);
        assert!(pbc_substitute(&app, Parity::Even, 4).unwrap().is_empty());
    }

    #[test]
    fn xx_wrap_gate_on_three_qubits() {
        let theta = 0.41;
        let mut c = Circuit::with_boundary(3, true).unwrap();
        c.push_wrap(Matchgate::xx_rotation(theta)).unwrap();
        assert!(sector_error(&c, Parity::Even) < 1e-10);
        assert!(sector_error(&c, Parity::Odd) < 1e-10);
        // The string generator flips sign between the parity sectors.
        let app = GateApplication::wrap(Matchgate::xx_rotation(theta), 3);
        let even = pbc_substitute(&app, Parity::Even, 3).unwrap();
        let odd = pbc_substitute(&app, Parity::Odd, 3).unwrap();
        let minus = pbc_substitute(&GateApplication::wrap(Matchgate::xx_rotation(-theta), 3), Parity::Even, 3).unwrap();
        assert_eq!(even.len(), 3);
        let (ge, go, gm) = (even[1].gate, odd[1].gate, minus[1].gate);
        assert_ne!(ge, go);
        let d = ge.matrix().sub(&gm.matrix()).max_abs().min(go.matrix().sub(&gm.matrix()).max_abs());
        assert!(d < 1e-12);
    }

    #[test]
    fn random_periodic_circuits_lower_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        for n in 2..=6 {
            let c = random_periodic_circuit(&mut rng, n, 10, 0.4);
            for parity in [Parity::Even, Parity::Odd] {
                let e = sector_error(&c, parity);
                assert!(e < 1e-10, "n={n} {parity:?}: {e}");
            }
        }
    }

    #[test]
    fn parity_of_inputs() {
        use crate::model::SingleQubitState;
        assert_eq!(Parity::of_input(&InputSpec::Basis("011".parse().unwrap())).unwrap(), Parity::Even);
        let qs = vec![SingleQubitState::one(), SingleQubitState::zero()];
        assert_eq!(Parity::of_input(&InputSpec::Product(qs)).unwrap(), Parity::Odd);
        let qs = vec![SingleQubitState::plus(), SingleQubitState::zero()];
        assert_eq!(Parity::of_input(&InputSpec::Product(qs)), Err(Error::IndefiniteParity));
        assert!(Parity::from_sign(0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn composed_transfers_are_orthogonal(seed in 0u64..10_000, n in 2usize..9, len in 0usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_circuit(&mut rng, n, len, GateFamily::Mixed);
            let t = compose_transfer(&c).unwrap();
            prop_assert!(t.orthogonality_residual() < 1e-10);
            prop_assert!((t.determinant().abs() - 1.0).abs() < 1e-8);
        }

        #[test]
        fn composition_is_associative(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.random_range(2..6);
            let parts: Vec<Circuit> = (0..3).map(|_| random_circuit(&mut rng, n, 5, GateFamily::General)).collect();
            let ts: Vec<ModeTransfer> = parts.iter().map(|c| compose_transfer(c).unwrap()).collect();
            let left = ts[0].then(&ts[1]).unwrap().then(&ts[2]).unwrap();
            let right = ts[0].then(&ts[1].then(&ts[2]).unwrap()).unwrap();
            let mut whole = parts[0].clone();
            whole.extend(&parts[1]).unwrap().extend(&parts[2]).unwrap();
            let direct = compose_transfer(&whole).unwrap();
            for ((x, y), z) in left.w.iter().zip(&right.w).zip(&direct.w) {
                prop_assert!((x - y).abs() < 1e-12 && (x - z).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_random_gate_is_linearizable() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for _ in 0..50 {
            assert!(local_block(&random_matchgate(&mut rng), 1).is_ok());
        }
    }
}
