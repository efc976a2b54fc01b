//! Wick contractions, Pfaffians and the determinant fast path.
//!
//! The vacuum expectation of an ordered product of operators that are linear
//! in `a_p, a†_p` is the Pfaffian of the antisymmetric matrix of pairwise
//! contractions `⟨0|f_j f_k|0⟩`, `j < k`.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, I, ONE, ZERO};
use crate::model::BitString;

/// Residual allowed on `A + Aᵀ` before a matrix is rejected.
pub const ANTISYMMETRY_TOLERANCE: f64 = 1e-10;

/// `f = Σ_p alpha_p a_p + beta_p a†_p` over `n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFermionicOperator {
    alpha: Vec<C64>,
    beta: Vec<C64>,
}

impl LinearFermionicOperator {
    pub fn new(alpha: Vec<C64>, beta: Vec<C64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                expected: alpha.len(),
                found: beta.len(),
            });
        }
        Ok(LinearFermionicOperator { alpha, beta })
    }

    /// `a_mode` (1-based mode).
    pub fn annihilation(n: usize, mode: usize) -> Self {
        let mut alpha = vec![ZERO; n];
        alpha[mode - 1] = ONE;
        LinearFermionicOperator {
            alpha,
            beta: vec![ZERO; n],
        }
    }

    /// `a†_mode` (1-based mode).
    pub fn creation(n: usize, mode: usize) -> Self {
        let mut beta = vec![ZERO; n];
        beta[mode - 1] = ONE;
        LinearFermionicOperator {
            alpha: vec![ZERO; n],
            beta,
        }
    }

    /// Operator with the given Majorana coefficients, `f = Σ_a γ_a c_a`,
    /// where `c_{2k-1} = a_k + a†_k` and `c_{2k} = i(a†_k - a_k)`.
    pub fn from_majorana(gamma: &[C64]) -> Self {
        let n = gamma.len() / 2;
        let mut alpha = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        for k in 0..n {
            let (x, y) = (gamma[2 * k], gamma[2 * k + 1]);
            alpha.push(x - I * y);
            beta.push(x + I * y);
        }
        LinearFermionicOperator { alpha, beta }
    }

    pub fn to_majorana(&self) -> Vec<C64> {
        let mut gamma = Vec::with_capacity(2 * self.modes());
        for (a, b) in self.alpha.iter().zip(&self.beta) {
            gamma.push((a + b) * 0.5);
            gamma.push(I * (a - b) * 0.5);
        }
        gamma
    }

    pub fn modes(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[C64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[C64] {
        &self.beta
    }

    pub fn adjoint(&self) -> Self {
        LinearFermionicOperator {
            alpha: self.beta.iter().map(C64::conj).collect(),
            beta: self.alpha.iter().map(C64::conj).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        LinearFermionicOperator {
            alpha: self.alpha.iter().map(|z| z * s).collect(),
            beta: self.beta.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(self, other)?;
        Ok(LinearFermionicOperator {
            alpha: self.alpha.iter().zip(&other.alpha).map(|(a, b)| a + b).collect(),
            beta: self.beta.iter().zip(&other.beta).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.alpha.iter().chain(&self.beta).all(|z| *z == ZERO)
    }
}

fn check_same(f: &LinearFermionicOperator, g: &LinearFermionicOperator) -> Result<()> {
    if f.modes() != g.modes() {
        return Err(Error::DimensionMismatch {
            expected: f.modes(),
            found: g.modes(),
        });
    }
    Ok(())
}

/// `⟨0| f g |0⟩`. Only `a_p` in `f` paired with `a†_p` in `g` survives.
pub fn contract_pair(f: &LinearFermionicOperator, g: &LinearFermionicOperator) -> Result<C64> {
    check_same(f, g)?;
    Ok(raw_contract(f, g))
}

fn raw_contract(f: &LinearFermionicOperator, g: &LinearFermionicOperator) -> C64 {
    f.alpha.iter().zip(&g.beta).map(|(a, b)| a * b).sum()
}

/// Antisymmetric matrix of pairwise vacuum contractions.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionMatrix(CMatrix);

impl ContractionMatrix {
    pub fn build(ops: &[LinearFermionicOperator]) -> Result<Self> {
        if let Some(first) = ops.first() {
            for op in ops {
                check_same(first, op)?;
            }
        }
        let m = ops.len();
        let mut a = CMatrix::zeros(m, m);
        for j in 0..m {
            for k in j + 1..m {
                let v = raw_contract(&ops[j], &ops[k]);
                a[(j, k)] = v;
                a[(k, j)] = -v;
            }
        }
        Ok(ContractionMatrix(a))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn pfaffian(&self) -> C64 {
        pfaffian_unchecked(&self.0)
    }
}

/// `⟨0| f_1 f_2 … f_m |0⟩` by Wick's theorem.
pub fn vacuum_expectation(ops: &[LinearFermionicOperator]) -> Result<C64> {
    if ops.len() % 2 == 1 {
        if let Some(first) = ops.first() {
            for op in ops {
                check_same(first, op)?;
            }
        }
        return Ok(ZERO);
    }
    if ops.iter().any(LinearFermionicOperator::is_zero) {
        if let Some(first) = ops.first() {
            for op in ops {
                check_same(first, op)?;
            }
        }
        return Ok(ZERO);
    }
    Ok(ContractionMatrix::build(ops)?.pfaffian())
}

/// Pfaffian of an antisymmetric matrix; zero in odd dimension.
pub fn pfaffian(a: &CMatrix) -> Result<C64> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let residual = a.antisymmetry_residual();
    if residual > ANTISYMMETRY_TOLERANCE {
        return Err(Error::NotAntisymmetric { residual });
    }
    Ok(pfaffian_unchecked(a))
}

/// Skew-symmetric `L T Lᵀ` elimination with partial pivoting.
fn pfaffian_unchecked(a: &CMatrix) -> C64 {
    let n = a.rows();
    if n % 2 == 1 {
        return ZERO;
    }
    if n == 0 {
        return ONE;
    }
    let mut m = a.as_slice().to_vec();
    let at = |i: usize, j: usize| i * n + j;
    let mut pf = ONE;
    let mut tau = vec![ZERO; n];
    let mut col = vec![ZERO; n];
    for k in (0..n - 1).step_by(2) {
        let mut kp = k + 1;
        let mut best = m[at(k + 1, k)].norm();
        for i in k + 2..n {
            let v = m[at(i, k)].norm();
            if v > best {
                best = v;
                kp = i;
            }
        }
        if kp != k + 1 {
            for j in 0..n {
                m.swap(at(k + 1, j), at(kp, j));
            }
            for i in 0..n {
                m.swap(at(i, k + 1), at(i, kp));
            }
            pf = -pf;
        }
        let pivot = m[at(k, k + 1)];
        if pivot == ZERO {
            return ZERO;
        }
        pf *= pivot;
        if k + 2 < n {
            for j in k + 2..n {
                tau[j] = m[at(k, j)] / pivot;
                col[j] = m[at(j, k + 1)];
            }
            for i in k + 2..n {
                let (ti, ci) = (tau[i], col[i]);
                let row = &mut m[i * n..(i + 1) * n];
                for j in k + 2..n {
                    row[j] += ti * col[j] - ci * tau[j];
                }
            }
        }
    }
    pf
}

/// `det(R_{x,y})`: rows of `R` at the ones of `x`, columns at the ones of `y`.
///
/// Zero when the Hamming weights differ.
pub fn determinant_amplitude(r: &CMatrix, x: &BitString, y: &BitString) -> Result<C64> {
    let n = r.rows();
    for len in [r.cols(), x.len(), y.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    if x.weight() != y.weight() {
        return Ok(ZERO);
    }
    let rows: Vec<usize> = x.ones().into_iter().map(|q| q - 1).collect();
    let cols: Vec<usize> = y.ones().into_iter().map(|q| q - 1).collect();
    Ok(r.select(&rows, &cols).determinant())
}
