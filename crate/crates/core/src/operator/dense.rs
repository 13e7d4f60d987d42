//! Dense complex matrices: materialization, norms, Hermitian exponentials and
//! application of few-qubit operators inside a larger register.

use faer::linalg::matmul::matmul;
use faer::traits::Conjugate;
use faer::{c64, Accum, Mat, MatMut, MatRef, Par, Side};

use super::krylov::{largest_singular_value, LinearOperator};
use super::pauli::OperatorSum;
use crate::error::{Error, Result};

/// Largest register the dense kernels will materialize.
pub const MAX_QUBITS: usize = 12;

/// Below this dimension the spectral norm comes from a full SVD.
pub const SVD_DIM_THRESHOLD: usize = 512;

pub type CMat = Mat<c64>;

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::DimensionOverflow {
            qubits: n,
            cap: MAX_QUBITS,
        });
    }
    Ok(())
}

/// Dense matrix of `Σ c_j P_j` in the computational basis.
pub fn materialize(op: &OperatorSum) -> Result<CMat> {
    let n = op.n_qubits();
    check_qubits(n)?;
    let dim = 1usize << n;
    let mut m = CMat::zeros(dim, dim);
    for (c, p) in op.terms() {
        for x in 0..dim {
            let (y, amp) = p.apply_basis(x);
            m[(y, x)] += amp * *c;
        }
    }
    Ok(m)
}

/// Largest absolute entry of `A - A†`.
pub fn hermiticity_error(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut err = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            err = err.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    err
}

/// Spectral norm (largest singular value).
///
/// Full SVD below [`SVD_DIM_THRESHOLD`], Lanczos on `A†A` from a fixed-seed
/// start vector above it.
pub fn spectral_norm(a: MatRef<'_, c64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.nrows().max(a.ncols()) < SVD_DIM_THRESHOLD {
        svd_norm(a)
    } else {
        largest_singular_value(&DenseOperator(a))
    }
}

/// Spectral norm through a full singular value decomposition, at any size.
pub fn svd_norm(a: MatRef<'_, c64>) -> f64 {
    a.singular_values()
        .ok()
        .and_then(|s| s.first().copied())
        .unwrap_or_else(|| largest_singular_value(&DenseOperator(a)))
}

/// Square dense matrix viewed as a [`LinearOperator`].
pub struct DenseOperator<'a>(pub MatRef<'a, c64>);

impl LinearOperator for DenseOperator<'_> {
    fn nrows(&self) -> usize {
        self.0.nrows()
    }
    fn ncols(&self) -> usize {
        self.0.ncols()
    }
    fn apply(&self, x: &[c64], y: &mut [c64]) {
        matvec(self.0, x, y);
    }
    fn apply_adjoint(&self, x: &[c64], y: &mut [c64]) {
        matvec(self.0.adjoint(), x, y);
    }
}

pub(crate) fn matvec<A: Conjugate<Canonical = c64>>(a: MatRef<'_, A>, x: &[c64], y: &mut [c64]) {
    let xr = MatRef::from_column_major_slice(x, a.ncols(), 1);
    let yr = MatMut::from_column_major_slice_mut(y, a.nrows(), 1);
    matmul(yr, Accum::Replace, a, xr, c64::new(1.0, 0.0), Par::Seq);
}

pub(crate) fn mat_mul<A, B>(a: MatRef<'_, A>, b: MatRef<'_, B>) -> CMat
where
    A: Conjugate<Canonical = c64>,
    B: Conjugate<Canonical = c64>,
{
    let mut out = CMat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, c64::new(1.0, 0.0), Par::Seq);
    out
}

/// `‖AB − BA‖` for two operators, computed on their joint support only.
pub fn commutator_norm(a: &OperatorSum, b: &OperatorSum) -> Result<f64> {
    if a.n_qubits() != b.n_qubits() {
        return Err(Error::QubitCountMismatch {
            expected: a.n_qubits(),
            found: b.n_qubits(),
        });
    }
    let mut joint = a.support();
    joint.extend(b.support());
    joint.sort_unstable();
    joint.dedup();
    if joint.is_empty() {
        return Ok(0.0);
    }
    check_qubits(joint.len())?;
    let ma = materialize(&a.localize(&joint)?)?;
    let mb = materialize(&b.localize(&joint)?)?;
    let comm = mat_mul(ma.as_ref(), mb.as_ref()) - mat_mul(mb.as_ref(), ma.as_ref());
    Ok(spectral_norm(comm.as_ref()))
}

/// Operator norm of a Hermitian operator sum, on its own support.
pub fn operator_norm(op: &OperatorSum) -> Result<f64> {
    let support = op.support();
    if support.is_empty() {
        // Pure multiples of the identity.
        return Ok(op.terms().iter().map(|(c, p)| c * p.phase().value().re).sum::<f64>().abs());
    }
    check_qubits(support.len())?;
    let m = materialize(&op.localize(&support)?)?;
    let eig = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    Ok(eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// A unitary matrix whose dimension is a power of two.
#[derive(Clone, Debug)]
pub struct DenseUnitary {
    n_qubits: usize,
    matrix: CMat,
}

/// Tolerance on `‖U†U − 1‖` accepted by [`DenseUnitary::new`].
pub const UNITARITY_TOL: f64 = 1e-10;

impl DenseUnitary {
    /// Checks shape and unitarity.
    pub fn new(matrix: CMat) -> Result<Self> {
        let u = Self::trusted(matrix)?;
        let err = u.unitarity_error();
        if err > UNITARITY_TOL {
            return Err(Error::NotUnitary(err));
        }
        Ok(u)
    }

    /// Shape check only; for products of exact exponentials.
    pub(crate) fn trusted(matrix: CMat) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() || !dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "unitary must be square with power-of-two dimension, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_qubits(n_qubits)?;
        Ok(Self { n_qubits, matrix })
    }

    pub fn identity(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits)?;
        let dim = 1usize << n_qubits;
        Ok(Self {
            n_qubits,
            matrix: CMat::identity(dim, dim),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn adjoint(&self) -> DenseUnitary {
        DenseUnitary {
            n_qubits: self.n_qubits,
            matrix: self.matrix.adjoint().to_owned(),
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &DenseUnitary) -> Result<DenseUnitary> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::QubitCountMismatch {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        Ok(DenseUnitary {
            n_qubits: self.n_qubits,
            matrix: mat_mul(self.matrix.as_ref(), other.matrix.as_ref()),
        })
    }

    /// `‖U†U − 1‖` in spectral norm.
    pub fn unitarity_error(&self) -> f64 {
        let mut g = mat_mul(self.matrix.adjoint(), self.matrix.as_ref());
        for i in 0..g.nrows() {
            g[(i, i)] -= c64::new(1.0, 0.0);
        }
        spectral_norm(g.as_ref())
    }

    /// Spectral distance `‖self − other‖`.
    pub fn distance(&self, other: &DenseUnitary) -> f64 {
        let d = &self.matrix - &other.matrix;
        spectral_norm(d.as_ref())
    }
}

/// Eigendecomposition `H = V diag(λ) V†` of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
}

/// Hermiticity tolerance accepted by the exponential.
pub const HERMITICITY_TOL: f64 = 1e-10;

impl HermitianEigen {
    pub fn new(h: MatRef<'_, c64>) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::InvalidArgument("matrix must be square".into()));
        }
        let err = hermiticity_error(h);
        if err > HERMITICITY_TOL {
            return Err(Error::NotHermitian(err));
        }
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Linalg(format!("{e:?}")))?;
        let eigenvalues = (0..h.nrows()).map(|i| evd.S()[i].re).collect();
        Ok(Self {
            eigenvalues,
            eigenvectors: evd.U().to_owned(),
        })
    }

    /// `exp(−i t H)` as a plain matrix.
    pub fn exp_matrix(&self, t: f64) -> CMat {
        let v = self.eigenvectors.as_ref();
        let mut scaled = v.to_owned();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let phase = c64::from_polar(1.0, -lam * t);
            for i in 0..scaled.nrows() {
                scaled[(i, j)] *= phase;
            }
        }
        mat_mul(scaled.as_ref(), v.adjoint())
    }

    /// `exp(−i t H)`.
    pub fn evolution(&self, t: f64) -> Result<DenseUnitary> {
        DenseUnitary::trusted(self.exp_matrix(t))
    }
}

/// `exp(−i t H)` for Hermitian `H`, via eigendecomposition.
pub fn matrix_exponential_hermitian(h: MatRef<'_, c64>, t: f64) -> Result<DenseUnitary> {
    HermitianEigen::new(h)?.evolution(t)
}

/// Row gather/scatter plan for an operator on qubits `first..first+k` of an
/// `n`-qubit register (qubit 0 most significant).
#[derive(Clone, Copy, Debug)]
struct LocalLayout {
    left: usize,
    mid: usize,
    right: usize,
}

impl LocalLayout {
    fn new(first: usize, k: usize, n: usize) -> Self {
        assert!(first + k <= n, "local operator exceeds register");
        Self {
            left: 1 << first,
            mid: 1 << k,
            right: 1 << (n - first - k),
        }
    }

    #[inline]
    fn row(&self, l: usize, m: usize, r: usize) -> usize {
        (l * self.mid + m) * self.right + r
    }
}

/// In place: `target ← (1 ⊗ op ⊗ 1) · target`, `op` acting on the contiguous
/// qubits starting at `first`.
pub fn apply_local<A: Conjugate<Canonical = c64>>(op: MatRef<'_, A>, first: usize, n: usize, mut target: MatMut<'_, c64>) {
    let k = op.nrows().trailing_zeros() as usize;
    let lay = LocalLayout::new(first, k, n);
    assert_eq!(target.nrows(), 1 << n);
    let cols = target.ncols();
    let width = lay.right * cols;
    let mut gathered = CMat::zeros(lay.mid, width);
    let mut product = CMat::zeros(lay.mid, width);
    for l in 0..lay.left {
        for c in 0..cols {
            for m in 0..lay.mid {
                for r in 0..lay.right {
                    gathered[(m, c * lay.right + r)] = target[(lay.row(l, m, r), c)];
                }
            }
        }
        matmul(
            product.as_mut(),
            Accum::Replace,
            op,
            gathered.as_ref(),
            c64::new(1.0, 0.0),
            Par::Seq,
        );
        for c in 0..cols {
            for m in 0..lay.mid {
                for r in 0..lay.right {
                    target[(lay.row(l, m, r), c)] = product[(m, c * lay.right + r)];
                }
            }
        }
    }
}

/// In place on a state vector: `v ← (1 ⊗ op ⊗ 1) v`.
pub fn apply_local_vec<A: Conjugate<Canonical = c64>>(op: MatRef<'_, A>, first: usize, n: usize, v: &mut [c64]) {
    assert_eq!(v.len(), 1 << n);
    apply_local(op, first, n, MatMut::from_column_major_slice_mut(v, 1 << n, 1));
}

/// `1 ⊗ op ⊗ 1` as a dense matrix.
pub fn embed_local(op: MatRef<'_, c64>, first: usize, n: usize) -> CMat {
    let k = op.nrows().trailing_zeros() as usize;
    let lay = LocalLayout::new(first, k, n);
    let dim = 1usize << n;
    let mut out = CMat::zeros(dim, dim);
    for l in 0..lay.left {
        for r in 0..lay.right {
            for j in 0..lay.mid {
                for i in 0..lay.mid {
                    out[(lay.row(l, i, r), lay.row(l, j, r))] = op[(i, j)];
                }
            }
        }
    }
    out
}

/// `op` acting on the qubits `sites` (sorted, any spacing) of an `n`-qubit
/// register, identity elsewhere.
pub fn embed_sites(op: MatRef<'_, c64>, sites: &[usize], n: usize) -> CMat {
    let k = sites.len();
    assert_eq!(op.nrows(), 1 << k);
    let dim = 1usize << n;
    let masks: Vec<usize> = sites.iter().map(|&q| 1usize << (n - 1 - q)).collect();
    let site_mask: usize = masks.iter().sum();
    let spread = |local: usize| -> usize {
        masks
            .iter()
            .enumerate()
            .filter(|(b, _)| (local >> (k - 1 - b)) & 1 == 1)
            .map(|(_, m)| m)
            .sum()
    };
    let spreads: Vec<usize> = (0..1 << k).map(spread).collect();
    let mut out = CMat::zeros(dim, dim);
    for rest in (0..dim).filter(|r| r & site_mask == 0) {
        for (j, sj) in spreads.iter().enumerate() {
            for (i, si) in spreads.iter().enumerate() {
                out[(rest | si, rest | sj)] = op[(i, j)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::pauli::{Pauli, PauliString};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn heis_pair(n: usize, i: usize, j: usize) -> OperatorSum {
        let mut op = OperatorSum::zero(n);
        for p in Pauli::ALL {
            op.push(1.0, PauliString::new(n, [(i, p), (j, p)]).unwrap()).unwrap();
        }
        op
    }

    pub(crate) fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> CMat {
        CMat::from_fn(dim, dim, |_, _| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    fn max_abs_diff(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> f64 {
        let mut m = 0.0f64;
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                m = m.max((a[(i, j)] - b[(i, j)]).norm());
            }
        }
        m
    }

    #[test]
    fn single_z_materializes_to_diag() {
        let op = OperatorSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Z).unwrap())]).unwrap();
        let m = materialize(&op).unwrap();
        assert_eq!(m[(0, 0)], c64::new(1.0, 0.0));
        assert_eq!(m[(1, 1)], c64::new(-1.0, 0.0));
        assert_eq!(m[(0, 1)], c64::new(0.0, 0.0));
    }

    #[test]
    fn empty_sum_is_zero_matrix() {
        let m = materialize(&OperatorSum::zero(2)).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (4, 4));
        assert_eq!(spectral_norm(m.as_ref()), 0.0);
    }

    #[test]
    fn heisenberg_pair_spectrum() {
        let m = materialize(&heis_pair(2, 0, 1)).unwrap();
        let mut eig = m.self_adjoint_eigenvalues(Side::Lower).unwrap();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [-3.0, 1.0, 1.0, 1.0];
        for (e, x) in eig.iter().zip(expected) {
            assert!((e - x).abs() < 1e-12, "{eig:?}");
        }
        assert!(hermiticity_error(m.as_ref()) <= 1e-12);
    }

    #[test]
    fn materialize_rejects_oversized_registers() {
        let op = OperatorSum::zero(13);
        assert!(matches!(materialize(&op), Err(Error::DimensionOverflow { .. })));
    }

    #[test]
    fn spectral_norm_examples() {
        assert!((spectral_norm(CMat::identity(4, 4).as_ref()) - 1.0).abs() < 1e-14);
        let mut d = CMat::zeros(2, 2);
        d[(0, 0)] = c64::new(3.0, 0.0);
        d[(1, 1)] = c64::new(-5.0, 0.0);
        assert!((spectral_norm(d.as_ref()) - 5.0).abs() < 1e-14);
        let mut n = CMat::zeros(2, 2);
        n[(0, 1)] = c64::new(0.0, 2.0);
        assert!((spectral_norm(n.as_ref()) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lanczos_matches_svd_above_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 600);
        let direct = svd_norm(a.as_ref());
        let iterative = spectral_norm(a.as_ref());
        assert!(((direct - iterative) / direct).abs() < 1e-10, "{direct} vs {iterative}");
    }

    #[test]
    fn lanczos_handles_unitary_differences() {
        // Clustered singular values: the hard case for plain power iteration.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_matrix(&mut rng, 512);
        let h = &a + a.adjoint();
        let eig = HermitianEigen::new(h.as_ref()).unwrap();
        let u = eig.exp_matrix(0.01);
        let v = eig.exp_matrix(0.0105);
        let d = &u - &v;
        let direct = svd_norm(d.as_ref());
        let iterative = spectral_norm(d.as_ref());
        assert!(((direct - iterative) / direct).abs() < 1e-10, "{direct} vs {iterative}");
    }

    #[test]
    fn commutator_norm_examples() {
        let x = OperatorSum::from_terms(3, [(1.0, PauliString::single(3, 0, Pauli::X).unwrap())]).unwrap();
        let y = OperatorSum::from_terms(3, [(1.0, PauliString::single(3, 0, Pauli::Y).unwrap())]).unwrap();
        assert_eq!(commutator_norm(&x, &x).unwrap(), 0.0);
        assert!((commutator_norm(&x, &y).unwrap() - 2.0).abs() < 1e-12);

        // Overlapping Heisenberg bonds against a full 8x8 computation.
        let a = heis_pair(3, 0, 1);
        let b = heis_pair(3, 1, 2);
        let ma = materialize(&a).unwrap();
        let mb = materialize(&b).unwrap();
        let full = mat_mul(ma.as_ref(), mb.as_ref()) - mat_mul(mb.as_ref(), ma.as_ref());
        let oracle = full.singular_values().unwrap()[0];
        let got = commutator_norm(&a, &b).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!((oracle - 4.0 * 3f64.sqrt()).abs() < 1e-10, "oracle = {oracle}");
    }

    #[test]
    fn exponential_examples() {
        let z = materialize(
            &OperatorSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::Z).unwrap())]).unwrap(),
        )
        .unwrap();
        let u = matrix_exponential_hermitian(z.as_ref(), PI / 2.0).unwrap();
        assert!((u.matrix()[(0, 0)] - c64::new(0.0, -1.0)).norm() < 1e-14);
        assert!((u.matrix()[(1, 1)] - c64::new(0.0, 1.0)).norm() < 1e-14);

        let id = matrix_exponential_hermitian(z.as_ref(), 0.0).unwrap();
        assert!(id.distance(&DenseUnitary::identity(1).unwrap()) < 1e-15);

        let x = materialize(
            &OperatorSum::from_terms(1, [(1.0, PauliString::single(1, 0, Pauli::X).unwrap())]).unwrap(),
        )
        .unwrap();
        let u = matrix_exponential_hermitian(x.as_ref(), PI).unwrap();
        // cos(π)·1 − i sin(π)·X = −1
        let minus_id = CMat::from_fn(2, 2, |i, j| if i == j { c64::new(-1.0, 0.0) } else { c64::new(0.0, 0.0) });
        assert!(max_abs_diff(u.matrix(), minus_id.as_ref()) < 1e-14);
        assert!(u.unitarity_error() < 1e-14);
    }

    #[test]
    fn exponential_rejects_non_hermitian() {
        let mut m = CMat::zeros(2, 2);
        m[(0, 1)] = c64::new(1.0, 0.0);
        assert!(matches!(
            matrix_exponential_hermitian(m.as_ref(), 1.0),
            Err(Error::NotHermitian(_))
        ));
    }

    #[test]
    fn scattered_embedding_matches_pauli_materialization() {
        // Z on qubit 0 and X on qubit 2 of three, as a two-qubit operator.
        let local = materialize(
            &OperatorSum::from_terms(
                2,
                [(1.0, PauliString::new(2, [(0, Pauli::Z), (1, Pauli::X)]).unwrap())],
            )
            .unwrap(),
        )
        .unwrap();
        let full = materialize(
            &OperatorSum::from_terms(
                3,
                [(1.0, PauliString::new(3, [(0, Pauli::Z), (2, Pauli::X)]).unwrap())],
            )
            .unwrap(),
        )
        .unwrap();
        let got = embed_sites(local.as_ref(), &[0, 2], 3);
        assert!(max_abs_diff(full.as_ref(), got.as_ref()) < 1e-15);
    }

    #[test]
    fn local_application_matches_kron() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 5;
        for (first, k) in [(0, 2), (1, 3), (3, 2), (0, 5), (2, 1)] {
            let op = random_matrix(&mut rng, 1 << k);
            let mut left = CMat::identity(1 << first, 1 << first);
            if first == 0 {
                left = CMat::identity(1, 1);
            }
            let right_dim = 1 << (n - first - k);
            let full = left.kron(&op).kron(CMat::identity(right_dim, right_dim));
            assert_eq!(full.nrows(), 1 << n);
            let embedded = embed_local(op.as_ref(), first, n);
            assert!(max_abs_diff(full.as_ref(), embedded.as_ref()) < 1e-14);
            let sites: Vec<usize> = (first..first + k).collect();
            let general = embed_sites(op.as_ref(), &sites, n);
            assert!(max_abs_diff(full.as_ref(), general.as_ref()) < 1e-14);

            let target = random_matrix(&mut rng, 1 << n);
            let expected = mat_mul(full.as_ref(), target.as_ref());
            let mut got = target.clone();
            apply_local(op.as_ref(), first, n, got.as_mut());
            assert!(max_abs_diff(expected.as_ref(), got.as_ref()) < 1e-12);

            let v: Vec<c64> = (0..1 << n).map(|i| target[(i, 0)]).collect();
            let mut w = v.clone();
            apply_local_vec(op.as_ref(), first, n, &mut w);
            for i in 0..1 << n {
                assert!((w[i] - expected[(i, 0)]).norm() < 1e-12);
            }
        }
    }
}
