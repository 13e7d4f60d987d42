//! Popcount sectors of a qubit register.

use faer::{c64, MatRef};

use crate::operator::CMat;

/// Basis states of an `n`-qubit register grouped by popcount.
pub(crate) struct Sectors {
    /// `states[m]` lists the basis states with `m` set bits, ascending.
    pub states: Vec<Vec<usize>>,
    /// Position of each basis state inside its sector.
    pub position: Vec<usize>,
}

impl Sectors {
    pub fn new(n: usize) -> Self {
        let mut states = vec![Vec::new(); n + 1];
        let mut position = vec![0; 1 << n];
        for s in 0..1usize << n {
            let m = s.count_ones() as usize;
            position[s] = states[m].len();
            states[m].push(s);
        }
        Self { states, position }
    }
}

/// True when `a` couples only basis states of equal popcount.
pub(crate) fn conserves_popcount(a: MatRef<'_, c64>, tol: f64) -> bool {
    (0..a.ncols()).all(|j| (0..a.nrows()).all(|i| i.count_ones() == j.count_ones() || a[(i, j)].norm() <= tol))
}

/// The rows and columns of `a` listed in `states`.
pub(crate) fn restrict(a: MatRef<'_, c64>, states: &[usize]) -> CMat {
    CMat::from_fn(states.len(), states.len(), |i, j| a[(states[i], states[j])])
}

/// `1 ⊗ g ⊗ 1`, with `g` on the qubits from `first`, restricted to one
/// sector. `g` must conserve popcount itself.
pub(crate) fn restrict_local(g: MatRef<'_, c64>, first: usize, n: usize, states: &[usize], position: &[usize]) -> CMat {
    let k = g.nrows().trailing_zeros() as usize;
    let shift = n - first - k;
    let mask = (1usize << k) - 1;
    let mut by_pop = vec![Vec::new(); k + 1];
    for m in 0..=mask {
        by_pop[m.count_ones() as usize].push(m);
    }
    let mut out = CMat::zeros(states.len(), states.len());
    for (j, &s) in states.iter().enumerate() {
        let mid = (s >> shift) & mask;
        let rest = s & !(mask << shift);
        for &m2 in &by_pop[mid.count_ones() as usize] {
            out[(position[rest | (m2 << shift)], j)] = g[(m2, mid)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{embed_local, materialize, OperatorSum, Pauli, PauliString};

    #[test]
    fn sectors_partition_the_register() {
        let s = Sectors::new(5);
        assert_eq!(s.states.iter().map(Vec::len).collect::<Vec<_>>(), vec![1, 5, 10, 10, 5, 1]);
        for (m, list) in s.states.iter().enumerate() {
            for (p, &st) in list.iter().enumerate() {
                assert_eq!(st.count_ones() as usize, m);
                assert_eq!(s.position[st], p);
            }
        }
    }

    #[test]
    fn local_restriction_matches_embedding() {
        let n = 5;
        let string = |f: &[(usize, Pauli)]| PauliString::new(3, f.iter().copied()).unwrap();
        let op = OperatorSum::from_terms(
            3,
            [
                (0.7, string(&[(0, Pauli::X), (1, Pauli::X)])),
                (0.7, string(&[(0, Pauli::Y), (1, Pauli::Y)])),
                (-0.4, string(&[(1, Pauli::Z), (2, Pauli::Z)])),
                (0.9, string(&[(0, Pauli::Z)])),
            ],
        )
        .unwrap();
        let g = materialize(&op).unwrap();
        assert!(conserves_popcount(g.as_ref(), 1e-14));
        let full = embed_local(g.as_ref(), 1, n);
        let sec = Sectors::new(n);
        for states in &sec.states {
            let direct = restrict(full.as_ref(), states);
            let local = restrict_local(g.as_ref(), 1, n, states, &sec.position);
            assert!((&direct - &local).norm_max() < 1e-15);
        }
        let flip = OperatorSum::from_terms(1, [(1.0, PauliString::new(1, [(0, Pauli::X)]).unwrap())]).unwrap();
        assert!(!conserves_popcount(materialize(&flip).unwrap().as_ref(), 1e-14));
    }
}
