//! Pauli strings and real linear combinations of them.
//!
//! Qubit 0 is the most significant bit of a computational basis index, so a
//! string on `n` qubits materializes as `P_0 ⊗ P_1 ⊗ … ⊗ P_{n-1}`.

use std::collections::BTreeMap;
use std::fmt;

use faer::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single-qubit Pauli operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    /// Image of the basis state `bit` as `(flips, amplitude)`.
    #[inline]
    fn act(self, bit: bool) -> (bool, c64) {
        match (self, bit) {
            (Pauli::X, _) => (true, c64::new(1.0, 0.0)),
            (Pauli::Y, false) => (true, c64::new(0.0, 1.0)),
            (Pauli::Y, true) => (true, c64::new(0.0, -1.0)),
            (Pauli::Z, false) => (false, c64::new(1.0, 0.0)),
            (Pauli::Z, true) => (false, c64::new(-1.0, 0.0)),
        }
    }

    /// Single-qubit product `self * other` as `(phase, result)`; `None` is identity.
    fn mul(self, other: Pauli) -> (Phase, Option<Pauli>) {
        use Pauli::*;
        match (self, other) {
            (a, b) if a == b => (Phase::PlusOne, None),
            (X, Y) => (Phase::PlusI, Some(Z)),
            (Y, X) => (Phase::MinusI, Some(Z)),
            (Y, Z) => (Phase::PlusI, Some(X)),
            (Z, Y) => (Phase::MinusI, Some(X)),
            (Z, X) => (Phase::PlusI, Some(Y)),
            (X, Z) => (Phase::MinusI, Some(Y)),
            _ => unreachable!(),
        }
    }

    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        };
        write!(f, "{c}")
    }
}

/// Global phase of a Pauli string, restricted to the fourth roots of unity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    PlusOne,
    MinusOne,
    PlusI,
    MinusI,
}

impl Phase {
    fn power(self) -> u8 {
        match self {
            Phase::PlusOne => 0,
            Phase::PlusI => 1,
            Phase::MinusOne => 2,
            Phase::MinusI => 3,
        }
    }

    fn from_power(p: u8) -> Phase {
        match p % 4 {
            0 => Phase::PlusOne,
            1 => Phase::PlusI,
            2 => Phase::MinusOne,
            _ => Phase::MinusI,
        }
    }

    pub fn value(self) -> c64 {
        match self {
            Phase::PlusOne => c64::new(1.0, 0.0),
            Phase::MinusOne => c64::new(-1.0, 0.0),
            Phase::PlusI => c64::new(0.0, 1.0),
            Phase::MinusI => c64::new(0.0, -1.0),
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, Phase::PlusOne | Phase::MinusOne)
    }

    fn name(self) -> &'static str {
        match self {
            Phase::PlusOne => "+1",
            Phase::MinusOne => "-1",
            Phase::PlusI => "+i",
            Phase::MinusI => "-i",
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase::from_power(self.power() + rhs.power())
    }
}

/// A tensor product of single-qubit Paulis with a phase in `{±1, ±i}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    factors: BTreeMap<usize, Pauli>,
    phase: Phase,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            factors: BTreeMap::new(),
            phase: Phase::PlusOne,
        }
    }

    pub fn new(n_qubits: usize, factors: impl IntoIterator<Item = (usize, Pauli)>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("a Pauli string needs at least one qubit".into()));
        }
        let mut map = BTreeMap::new();
        for (q, p) in factors {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange { index: q, n_qubits });
            }
            if map.insert(q, p).is_some() {
                return Err(Error::InvalidArgument(format!("qubit {q} listed twice")));
            }
        }
        Ok(Self {
            n_qubits,
            factors: map,
            phase: Phase::PlusOne,
        })
    }

    pub fn single(n_qubits: usize, qubit: usize, pauli: Pauli) -> Result<Self> {
        Self::new(n_qubits, [(qubit, pauli)])
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = phase;
        self
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn factors(&self) -> &BTreeMap<usize, Pauli> {
        &self.factors
    }

    pub fn is_identity(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.factors.keys().copied()
    }

    pub fn weight(&self) -> usize {
        self.factors.len()
    }

    /// Hermitian iff the phase is real.
    pub fn is_hermitian(&self) -> bool {
        self.phase.is_real()
    }

    /// Operator product `self * other`.
    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitCountMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        let mut phase = self.phase * other.phase;
        let mut factors = self.factors.clone();
        for (&q, &p) in &other.factors {
            match factors.remove(&q) {
                None => {
                    factors.insert(q, p);
                }
                Some(mine) => {
                    let (ph, res) = mine.mul(p);
                    phase = phase * ph;
                    if let Some(r) = res {
                        factors.insert(q, r);
                    }
                }
            }
        }
        Ok(PauliString {
            n_qubits: self.n_qubits,
            factors,
            phase,
        })
    }

    /// Two Pauli strings commute iff they anticommute on an even number of qubits.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let clashes = self
            .factors
            .iter()
            .filter(|(q, p)| other.factors.get(q).is_some_and(|o| o != *p))
            .count();
        clashes % 2 == 0
    }

    /// Re-express on `new_n` qubits, sending qubit `q` to `map(q)`.
    pub fn relabel(&self, new_n: usize, map: impl Fn(usize) -> Option<usize>) -> Result<PauliString> {
        let mut factors = Vec::with_capacity(self.factors.len());
        for (&q, &p) in &self.factors {
            let target = map(q).ok_or(Error::QubitOutOfRange {
                index: q,
                n_qubits: new_n,
            })?;
            factors.push((target, p));
        }
        Ok(PauliString::new(new_n, factors)?.with_phase(self.phase))
    }

    /// Image of basis state `x`: `P|x> = amp |y>`.
    pub fn apply_basis(&self, x: usize) -> (usize, c64) {
        let n = self.n_qubits;
        let mut y = x;
        let mut amp = self.phase.value();
        for (&q, &p) in &self.factors {
            let shift = n - 1 - q;
            let (flip, a) = p.act((x >> shift) & 1 == 1);
            if flip {
                y ^= 1 << shift;
            }
            amp *= a;
        }
        (y, amp)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.phase != Phase::PlusOne {
            write!(f, "({})", self.phase.name())?;
        }
        if self.factors.is_empty() {
            return write!(f, "I");
        }
        for (q, p) in &self.factors {
            write!(f, "{p}{q}")?;
        }
        Ok(())
    }
}

/// A Hermitian operator `Σ_j c_j P_j` with real coefficients and Hermitian strings.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSum {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl OperatorSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        let mut op = Self::zero(n_qubits);
        for (c, p) in terms {
            op.push(c, p)?;
        }
        Ok(op)
    }

    pub fn push(&mut self, coeff: f64, string: PauliString) -> Result<()> {
        if !coeff.is_finite() {
            return Err(Error::NonFinite(coeff));
        }
        if string.n_qubits != self.n_qubits {
            return Err(Error::QubitCountMismatch {
                expected: self.n_qubits,
                found: string.n_qubits,
            });
        }
        if !string.is_hermitian() {
            return Err(Error::NonHermitianTerm(string.phase.name()));
        }
        self.terms.push((coeff, string));
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sorted, deduplicated set of qubits touched by any term.
    pub fn support(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.terms.iter().flat_map(|(_, p)| p.support()).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Sum of absolute coefficients, an upper bound on the operator norm.
    pub fn one_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::from_terms(self.n_qubits, self.terms.iter().map(|(c, p)| (c * factor, p.clone())))
    }

    /// `a·self + b·other`, concatenating term lists.
    pub fn linear_combination(&self, a: f64, other: &OperatorSum, b: f64) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitCountMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Self::from_terms(
            self.n_qubits,
            self.terms
                .iter()
                .map(|(c, p)| (a * c, p.clone()))
                .chain(other.terms.iter().map(|(c, p)| (b * c, p.clone()))),
        )
    }

    pub fn extend(&mut self, other: &OperatorSum) -> Result<()> {
        for (c, p) in &other.terms {
            self.push(*c, p.clone())?;
        }
        Ok(())
    }

    /// Restrict to the qubits in `sites` (sorted), renumbered `0..sites.len()`.
    pub fn localize(&self, sites: &[usize]) -> Result<Self> {
        let k = sites.len();
        let terms = self
            .terms
            .iter()
            .map(|(c, p)| Ok((*c, p.relabel(k, |q| sites.binary_search(&q).ok())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(k, terms)
    }

    /// Embed into a larger register, sending local qubit `q` to `sites[q]`.
    pub fn embed(&self, n_qubits: usize, sites: &[usize]) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|(c, p)| Ok((*c, p.relabel(n_qubits, |q| sites.get(q).copied())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(n_qubits, terms)
    }
}
