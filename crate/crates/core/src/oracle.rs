//! Exact dense time evolution for small lattices.

use faer::{c64, MatRef};

use crate::error::{Error, Result};
use crate::lattice::{heisenberg_random, LatticeHamiltonian};
use crate::operator::dense::{check_qubits, mat_mul};
use crate::operator::{
    apply_local, embed_local, embed_sites, materialize, spectral_norm, CMat, DenseUnitary, HermitianEigen,
    OperatorSum, Pauli,
};

/// Default midpoint substeps per unit time for slices with coefficient profiles.
pub const DEFAULT_SUBSTEPS_PER_UNIT: usize = 64;

/// Evolution of `hamiltonian` from `t_start` to `t_end`, optionally under
/// `H_Ω = Σ_{X ⊆ Ω} h_X` only.
#[derive(Clone, Debug)]
pub struct EvolutionRequest<'a> {
    pub hamiltonian: &'a LatticeHamiltonian,
    pub t_start: f64,
    pub t_end: f64,
    pub restrict_to: Option<Vec<usize>>,
    pub substeps_per_unit: usize,
}

impl<'a> EvolutionRequest<'a> {
    pub fn new(hamiltonian: &'a LatticeHamiltonian, t_start: f64, t_end: f64) -> Self {
        Self {
            hamiltonian,
            t_start,
            t_end,
            restrict_to: None,
            substeps_per_unit: DEFAULT_SUBSTEPS_PER_UNIT,
        }
    }

    pub fn restricted(mut self, sites: impl IntoIterator<Item = usize>) -> Self {
        self.restrict_to = Some(sites.into_iter().collect());
        self
    }

    pub fn with_substeps(mut self, per_unit: usize) -> Self {
        self.substeps_per_unit = per_unit;
        self
    }
}

/// Result of [`evolve_reported`].
#[derive(Clone, Debug)]
pub struct Evolution {
    pub unitary: DenseUnitary,
    /// Spectral distance to the same evolution at twice the substep count;
    /// zero when every slice is time-independent.
    pub discretization_error: f64,
}

/// `U(t_end, t_start)` on the full register.
pub fn evolve(req: &EvolutionRequest<'_>) -> Result<DenseUnitary> {
    let h = req.hamiltonian;
    let n = h.n_sites();
    check_qubits(n)?;
    match &req.restrict_to {
        None => {
            let all: Vec<usize> = (0..n).collect();
            DenseUnitary::trusted(evolve_sites(h, &all, req.t_start, req.t_end, req.substeps_per_unit)?)
        }
        Some(sites) => {
            let sites = checked_sites(sites, n)?;
            let local = evolve_sites(h, &sites, req.t_start, req.t_end, req.substeps_per_unit)?;
            let contiguous = sites.windows(2).all(|w| w[1] == w[0] + 1);
            let full = if sites.len() == n {
                local
            } else if contiguous {
                embed_local(local.as_ref(), sites[0], n)
            } else {
                embed_sites(local.as_ref(), &sites, n)
            };
            DenseUnitary::trusted(full)
        }
    }
}

/// [`evolve`] plus an estimate of the midpoint discretization error.
pub fn evolve_reported(req: &EvolutionRequest<'_>) -> Result<Evolution> {
    let unitary = evolve(req)?;
    let profiled = req.hamiltonian.slices().iter().any(|s| !s.is_time_independent());
    let discretization_error = if profiled {
        let mut fine = req.clone();
        fine.substeps_per_unit = 2 * req.substeps_per_unit.max(1);
        unitary.distance(&evolve(&fine)?)
    } else {
        0.0
    };
    Ok(Evolution {
        unitary,
        discretization_error,
    })
}

fn checked_sites(sites: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut s = sites.to_vec();
    s.sort_unstable();
    s.dedup();
    if s.is_empty() {
        return Err(Error::InvalidRequest("empty restriction".into()));
    }
    if let Some(&bad) = s.iter().find(|&&q| q >= n) {
        return Err(Error::QubitOutOfRange { index: bad, n_qubits: n });
    }
    Ok(s)
}

/// `U_{H_Ω}(t1, t0)` on the `|Ω|` qubits of `sites` (sorted, distinct), in
/// local qubit order.
pub fn evolve_sites(h: &LatticeHamiltonian, sites: &[usize], t0: f64, t1: f64, substeps_per_unit: usize) -> Result<CMat> {
    check_qubits(sites.len())?;
    if !(t0.is_finite() && t1.is_finite()) || t0 > t1 {
        return Err(Error::InvalidRequest(format!("invalid time window [{t0}, {t1}]")));
    }
    if t0 < h.t_start() || t1 > h.t_end() {
        return Err(Error::InvalidRequest(format!(
            "window [{t0}, {t1}] outside the declared slices [{}, {}]",
            h.t_start(),
            h.t_end()
        )));
    }
    let dim = 1usize << sites.len();
    let mut u = CMat::identity(dim, dim);
    if t0 == t1 {
        return Ok(u);
    }
    for (idx, slice) in h.slices().iter().enumerate() {
        let a = t0.max(slice.t0);
        let b = t1.min(slice.t1);
        if b <= a {
            continue;
        }
        let step = if slice.is_time_independent() {
            let op = h.operator_at(idx, a, Some(sites))?.localize(sites)?;
            exp_local(&op, b - a)?
        } else {
            let k = (((b - a) * substeps_per_unit as f64).ceil() as usize).max(1);
            let dt = (b - a) / k as f64;
            let mut v = CMat::identity(dim, dim);
            for s in 0..k {
                let mid = a + (s as f64 + 0.5) * dt;
                let op = h.operator_at(idx, mid, Some(sites))?.localize(sites)?;
                v = mat_mul(exp_local(&op, dt)?.as_ref(), v.as_ref());
            }
            v
        };
        // Later times act on the left.
        u = mat_mul(step.as_ref(), u.as_ref());
    }
    Ok(u)
}

fn exp_local(op: &OperatorSum, dt: f64) -> Result<CMat> {
    if op.is_empty() {
        let dim = 1usize << op.n_qubits();
        return Ok(CMat::identity(dim, dim));
    }
    let m = materialize(op)?;
    Ok(HermitianEigen::new(m.as_ref())?.exp_matrix(dt))
}

/// Heisenberg-picture dynamics `A(t) = e^{iHt} A e^{-iHt}` of single-site
/// Paulis under a fixed Hamiltonian, diagonalized once.
pub struct PauliDynamics {
    n: usize,
    eig: HermitianEigen,
}

impl PauliDynamics {
    pub fn new(h: &OperatorSum) -> Result<Self> {
        let n = h.n_qubits();
        check_qubits(n)?;
        let m = materialize(h)?;
        Ok(Self {
            n,
            eig: HermitianEigen::new(m.as_ref())?,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// `V† A V` for the Pauli `a` on `site`; reuse across times with
    /// [`Self::evolve_in_eigenbasis`].
    pub fn to_eigenbasis(&self, a: Pauli, site: usize) -> Result<CMat> {
        if site >= self.n {
            return Err(Error::QubitOutOfRange { index: site, n_qubits: self.n });
        }
        let v = self.eig.eigenvectors.as_ref();
        let mut av = v.to_owned();
        apply_local(pauli_matrix(a).as_ref(), site, self.n, av.as_mut());
        Ok(mat_mul(v.adjoint(), av.as_ref()))
    }

    /// `A(t)` from `V† A V`.
    pub fn evolve_in_eigenbasis(&self, a_eig: MatRef<'_, c64>, t: f64) -> CMat {
        let lam = &self.eig.eigenvalues;
        let rotated = CMat::from_fn(a_eig.nrows(), a_eig.ncols(), |i, j| {
            a_eig[(i, j)] * c64::from_polar(1.0, (lam[i] - lam[j]) * t)
        });
        let v = self.eig.eigenvectors.as_ref();
        mat_mul(mat_mul(v, rotated.as_ref()).as_ref(), v.adjoint())
    }

    pub fn heisenberg_operator(&self, a: Pauli, site: usize, t: f64) -> Result<CMat> {
        Ok(self.evolve_in_eigenbasis(self.to_eigenbasis(a, site)?.as_ref(), t))
    }
}

pub(crate) fn pauli_matrix(p: Pauli) -> CMat {
    let z = c64::new(0.0, 0.0);
    let one = c64::new(1.0, 0.0);
    let i = c64::new(0.0, 1.0);
    match p {
        Pauli::X => CMat::from_fn(2, 2, |r, c| if r != c { one } else { z }),
        Pauli::Y => CMat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 1) => -i,
            (1, 0) => i,
            _ => z,
        }),
        Pauli::Z => CMat::from_fn(2, 2, |r, c| match (r, c) {
            (0, 0) => one,
            (1, 1) => -one,
            _ => z,
        }),
    }
}

/// `‖[M, P_site]‖` for Hermitian `M` on `n` qubits.
///
/// In the eigenbasis of `P` the commutator is block off-diagonal, so its norm
/// is twice the norm of the `(+1, −1)` block of `M`.
pub fn commutator_with_pauli(m: MatRef<'_, c64>, p: Pauli, site: usize, n: usize) -> f64 {
    2.0 * spectral_norm(pauli_commutator_block(m, p, site, n).as_ref())
}

/// The `(+1, −1)` block of Hermitian `M` in the eigenbasis of `P_site`, half
/// of the off-diagonal part of `[M, P_site]`.
pub fn pauli_commutator_block(m: MatRef<'_, c64>, p: Pauli, site: usize, n: usize) -> CMat {
    let bit = 1usize << (n - 1 - site);
    let rest: Vec<usize> = (0..1usize << n).filter(|i| i & bit == 0).collect();
    let half = c64::new(0.5, 0.0);
    let minus_i_half = c64::new(0.0, -0.5);
    CMat::from_fn(rest.len(), rest.len(), |i, j| {
        let (r, c) = (rest[i], rest[j]);
        let (m00, m01, m10, m11) = (m[(r, c)], m[(r, c | bit)], m[(r | bit, c)], m[(r | bit, c | bit)]);
        match p {
            Pauli::Z => m01,
            // ⟨+|M|−⟩ and ⟨+i|M|−i⟩ on the site.
            Pauli::X => (m00 - m01 + m10 - m11) * half,
            Pauli::Y => (m00 - m11) * half + (m01 + m10) * minus_i_half,
        }
    })
}

/// `‖[A(t), B]‖` for single-site Paulis `a` on `x_site` and `b` on `y_site`
/// under the open Heisenberg chain with seeded random fields.
pub fn heisenberg_commutator_decay(
    n: usize,
    t: f64,
    x_site: usize,
    y_site: usize,
    a: Pauli,
    b: Pauli,
    seed: u64,
) -> Result<f64> {
    if y_site >= n {
        return Err(Error::QubitOutOfRange { index: y_site, n_qubits: n });
    }
    let h = heisenberg_random(n, seed)?;
    let dyn_ = PauliDynamics::new(&h.operator_at(0, 0.0, None)?)?;
    let at = dyn_.heisenberg_operator(a, x_site, t)?;
    Ok(commutator_with_pauli(at.as_ref(), b, y_site, n))
}
