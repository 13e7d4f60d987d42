//! Standard-form encodings and the qubiterate.
//!
//! Register order is ancilla first (most significant), then system. The
//! gadget encoding puts its two coefficient qubits between the index
//! register and the system and treats them as part of the ancilla.

use faer::c64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::dense::{check_qubits, mat_mul};
use crate::operator::{materialize, CMat, DenseUnitary, HermitianEigen, OperatorSum, PauliString, Phase};

/// Tolerance on `O² = 1` and the standard-form identity.
pub const ENCODING_TOL: f64 = 1e-10;

/// `(⟨G| ⊗ 1) O (|G⟩ ⊗ 1) = H/α`.
#[derive(Clone, Debug)]
pub struct StandardFormEncoding {
    pub select: DenseUnitary,
    pub prepare: DenseUnitary,
    pub alpha: f64,
    /// Terms encoded, before padding.
    pub m: usize,
    /// Index register size after padding to a power of two.
    pub padded_m: usize,
    pub ancilla_qubits: usize,
    pub system_qubits: usize,
    /// Multiple of the identity added to the encoded operator by padding.
    pub energy_shift: f64,
    /// Zero-coefficient terms removed before encoding.
    pub dropped_terms: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct EncodingCheck {
    /// Largest entry of `⟨G|O|G⟩ − H/α`.
    pub standard_form_error: f64,
    /// Largest entry of `O² − 1`.
    pub involution_error: f64,
}

impl StandardFormEncoding {
    /// `|G⟩ = G|0⟩`.
    pub fn prepared_state(&self) -> Vec<c64> {
        let g = self.prepare.matrix();
        (0..g.nrows()).map(|i| g[(i, 0)]).collect()
    }

    /// `(⟨G| ⊗ 1) O (|G⟩ ⊗ 1)`.
    pub fn projected(&self) -> CMat {
        let g = self.prepared_state();
        let s = 1usize << self.system_qubits;
        let o = self.select.matrix();
        CMat::from_fn(s, s, |r, c| {
            let mut acc = c64::new(0.0, 0.0);
            for (i, gi) in g.iter().enumerate() {
                if gi.norm_sqr() == 0.0 {
                    continue;
                }
                for (j, gj) in g.iter().enumerate() {
                    if gj.norm_sqr() == 0.0 {
                        continue;
                    }
                    acc += gi.conj() * o[(i * s + r, j * s + c)] * gj;
                }
            }
            acc
        })
    }

    /// Compare the encoding with `h`, which should be the operator it was
    /// built from (shifted by `energy_shift` when padded).
    pub fn check(&self, h: &OperatorSum) -> Result<EncodingCheck> {
        let target = materialize(h)?;
        let proj = self.projected();
        let mut standard_form_error = 0.0f64;
        for r in 0..proj.nrows() {
            for c in 0..proj.ncols() {
                let mut want = target[(r, c)] / self.alpha;
                if r == c {
                    want += c64::new(self.energy_shift / self.alpha, 0.0);
                }
                standard_form_error = standard_form_error.max((proj[(r, c)] - want).norm());
            }
        }
        Ok(EncodingCheck {
            standard_form_error,
            involution_error: self.involution_error(),
        })
    }

    /// Largest entry of `O² − 1`.
    pub fn involution_error(&self) -> f64 {
        let o = self.select.matrix();
        let sq = mat_mul(o, o);
        let mut worst = 0.0f64;
        for r in 0..sq.nrows() {
            for c in 0..sq.ncols() {
                let id = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((sq[(r, c)] - c64::new(id, 0.0)).norm());
            }
        }
        worst
    }
}

/// Positive coefficients with signs folded into the strings, zero terms
/// dropped.
fn fold_signs(h: &OperatorSum) -> (Vec<(f64, PauliString)>, usize) {
    let mut dropped = 0;
    let mut out = Vec::with_capacity(h.terms().len());
    for (c, p) in h.terms() {
        if *c == 0.0 {
            dropped += 1;
        } else if *c < 0.0 {
            let phase = p.phase() * Phase::MinusOne;
            out.push((-c, p.clone().with_phase(phase)));
        } else {
            out.push((*c, p.clone()));
        }
    }
    (out, dropped)
}

/// Unitary whose first column is the unit vector `g`.
fn householder_prep(g: &[c64]) -> Result<DenseUnitary> {
    let dim = g.len();
    // Align the phase of g_0 so that v = e_0 − g maps e_0 to g.
    let phase = if g[0].norm() > 0.0 { g[0] / g[0].norm() } else { c64::new(1.0, 0.0) };
    let h: Vec<c64> = g.iter().map(|x| x / phase).collect();
    let mut v = h.iter().map(|x| -x).collect::<Vec<_>>();
    v[0] += c64::new(1.0, 0.0);
    let vv: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    let m = if vv < 1e-30 {
        CMat::identity(dim, dim)
    } else {
        CMat::from_fn(dim, dim, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            c64::new(id, 0.0) - v[i] * v[j].conj() * (2.0 / vv)
        })
    };
    let m = CMat::from_fn(dim, dim, |i, j| m[(i, j)] * phase);
    DenseUnitary::new(m)
}

/// Block-diagonal select `Σ_j |j⟩⟨j| ⊗ B_j` from dense blocks.
fn block_select(blocks: &[CMat]) -> Result<DenseUnitary> {
    let b = blocks[0].nrows();
    let dim = b * blocks.len();
    let mut o = CMat::zeros(dim, dim);
    for (j, blk) in blocks.iter().enumerate() {
        for r in 0..b {
            for c in 0..b {
                o[(j * b + r, j * b + c)] = blk[(r, c)];
            }
        }
    }
    DenseUnitary::new(o)
}

fn pauli_block(p: &PauliString) -> CMat {
    let dim = 1usize << p.n_qubits();
    let mut m = CMat::zeros(dim, dim);
    for x in 0..dim {
        let (y, amp) = p.apply_basis(x);
        m[(y, x)] = amp;
    }
    m
}

fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    CMat::from_fn(ra * rb, ca * cb, |r, c| a[(r / rb, c / cb)] * b[(r % rb, c % cb)])
}

/// `O = Σ_j |j⟩⟨j| ⊗ P_j`, `|G⟩ = Σ_j √(α_j/α) |j⟩`.
///
/// The index register is padded to a power of two with identity selects of
/// zero weight, so `energy_shift` is zero.
pub fn encode_lcu(h: &OperatorSum) -> Result<StandardFormEncoding> {
    let (terms, dropped_terms) = fold_signs(h);
    if terms.is_empty() {
        return Err(Error::InvalidArgument("operator has no nonzero terms".into()));
    }
    let n = h.n_qubits();
    let m = terms.len();
    let padded_m = m.next_power_of_two();
    let ancilla_qubits = padded_m.trailing_zeros() as usize;
    check_qubits(ancilla_qubits + n)?;
    let alpha: f64 = terms.iter().map(|(c, _)| c).sum();
    let mut g = vec![c64::new(0.0, 0.0); padded_m];
    let mut blocks = Vec::with_capacity(padded_m);
    for (j, (c, p)) in terms.iter().enumerate() {
        g[j] = c64::new((c / alpha).sqrt(), 0.0);
        blocks.push(pauli_block(p));
    }
    let dim = 1usize << n;
    blocks.resize(padded_m, CMat::identity(dim, dim));
    Ok(StandardFormEncoding {
        select: block_select(&blocks)?,
        prepare: householder_prep(&g)?,
        alpha,
        m,
        padded_m,
        ancilla_qubits,
        system_qubits: n,
        energy_shift: 0.0,
        dropped_terms,
    })
}

/// Two-qubit reflection `(1 ⊗ e^{iβX}) SWAP (1 ⊗ e^{−iβX})`, with
/// `⟨00|Q|00⟩ = cos²β` and `Q² = 1`.
pub fn reflection_gadget(beta: f64) -> Result<DenseUnitary> {
    let (c, s) = (beta.cos(), beta.sin());
    let zero = c64::new(0.0, 0.0);
    let rx = |sign: f64| {
        CMat::from_fn(2, 2, |r, col| if r == col { c64::new(c, 0.0) } else { c64::new(0.0, sign * s) })
    };
    let id = CMat::identity(2, 2);
    let swap = CMat::from_fn(4, 4, |r, col| {
        let swapped = ((r & 1) << 1) | (r >> 1);
        if swapped == col {
            c64::new(1.0, 0.0)
        } else {
            zero
        }
    });
    let left = kron(&id, &rx(1.0));
    let right = kron(&id, &rx(-1.0));
    DenseUnitary::new(mat_mul(mat_mul(left.as_ref(), swap.as_ref()).as_ref(), right.as_ref()))
}

/// `O = Σ_j |j⟩⟨j| ⊗ Q_j ⊗ P_j` with uniform `|G⟩ = Σ_j |j⟩|00⟩/√M`.
///
/// Coefficient magnitudes must lie in `[0, 1]`; each becomes `cos²β_j`. The
/// encoded operator is `(1/M) Σ_j c_j P_j`, so `alpha = M` counted after
/// padding. Padding terms use `β = π/2` and contribute nothing.
pub fn encode_lcu_gadget(h: &OperatorSum) -> Result<StandardFormEncoding> {
    let (terms, dropped_terms) = fold_signs(h);
    if terms.is_empty() {
        return Err(Error::InvalidArgument("operator has no nonzero terms".into()));
    }
    if let Some((c, _)) = terms.iter().find(|(c, _)| *c > 1.0) {
        return Err(Error::CoefficientOutOfRange(*c));
    }
    let n = h.n_qubits();
    let m = terms.len();
    let padded_m = m.next_power_of_two();
    let index_qubits = padded_m.trailing_zeros() as usize;
    check_qubits(index_qubits + 2 + n)?;
    let dim = 1usize << n;
    let mut blocks = Vec::with_capacity(padded_m);
    for (c, p) in &terms {
        let beta = c.sqrt().acos();
        let q = if beta == 0.0 {
            CMat::identity(4, 4)
        } else {
            reflection_gadget(beta)?.into_matrix()
        };
        blocks.push(kron(&q, &pauli_block(p)));
    }
    let pad = kron(&reflection_gadget(std::f64::consts::FRAC_PI_2)?.into_matrix(), &CMat::identity(dim, dim));
    blocks.resize(padded_m, pad);
    let amp = c64::new(1.0 / (padded_m as f64).sqrt(), 0.0);
    let mut g = vec![c64::new(0.0, 0.0); 4 * padded_m];
    for j in 0..padded_m {
        g[4 * j] = amp;
    }
    Ok(StandardFormEncoding {
        select: block_select(&blocks)?,
        prepare: householder_prep(&g)?,
        alpha: padded_m as f64,
        m,
        padded_m,
        ancilla_qubits: index_qubits + 2,
        system_qubits: n,
        energy_shift: 0.0,
        dropped_terms,
    })
}

/// `W = −i ((2|G⟩⟨G| − 1) ⊗ 1) O`.
#[derive(Clone, Debug)]
pub struct Qubiterate {
    pub w: DenseUnitary,
    pub alpha: f64,
    prepared: Vec<c64>,
    system_qubits: usize,
}

/// Action of `W` on the plane spanned by `|G⟩|λ⟩` and its image.
#[derive(Clone, Debug, Serialize)]
pub struct SectorPhases {
    pub lambda: f64,
    /// `θ_λ = arcsin(λ/α)`.
    pub theta: f64,
    /// Largest distance between the eigenvalues of `W` on the plane and
    /// `{−e^{iθ}, e^{−iθ}}`, as a phase angle.
    pub phase_error: f64,
    /// Weight of `W` applied to the plane that leaves the plane.
    pub leakage: f64,
    /// `tr(W²)` on the plane.
    pub trace_w2: f64,
}

pub fn build_qubiterate(enc: &StandardFormEncoding) -> Result<Qubiterate> {
    let err = enc.involution_error();
    if err > ENCODING_TOL {
        return Err(Error::NotInvolution(err));
    }
    let g = enc.prepared_state();
    let s = 1usize << enc.system_qubits;
    let o = enc.select.matrix();
    let dim = o.nrows();
    // X = (⟨G| ⊗ 1) O, then W = −i (2 (|G⟩ ⊗ 1) X − O).
    let x = CMat::from_fn(s, dim, |r, c| {
        g.iter()
            .enumerate()
            .filter(|(_, gk)| gk.norm_sqr() > 0.0)
            .map(|(k, gk)| gk.conj() * o[(k * s + r, c)])
            .sum()
    });
    let minus_i = c64::new(0.0, -1.0);
    let w = CMat::from_fn(dim, dim, |r, c| minus_i * (g[r / s] * x[(r % s, c)] * 2.0 - o[(r, c)]));
    Ok(Qubiterate {
        w: DenseUnitary::new(w)?,
        alpha: enc.alpha,
        prepared: g,
        system_qubits: enc.system_qubits,
    })
}

fn phase_gap(a: c64, b: c64) -> f64 {
    (a * b.conj()).arg().abs()
}

impl Qubiterate {
    /// Eigenphases of `W` on the sector of the system eigenvector `v` with
    /// eigenvalue `lambda`.
    pub fn sector(&self, lambda: f64, v: &[c64]) -> SectorPhases {
        let s = 1usize << self.system_qubits;
        let dim = self.prepared.len() * s;
        let w = self.w.matrix();
        let gl: Vec<c64> = (0..dim).map(|i| self.prepared[i / s] * v[i % s]).collect();
        let apply = |x: &[c64]| -> Vec<c64> {
            (0..dim).map(|r| (0..dim).map(|c| w[(r, c)] * x[c]).sum()).collect()
        };
        let dot = |a: &[c64], b: &[c64]| -> c64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
        let wg = apply(&gl);
        let a00 = dot(&gl, &wg);
        let mut perp: Vec<c64> = wg.iter().zip(&gl).map(|(w, g)| w - a00 * g).collect();
        let pn = perp.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let theta = (lambda / self.alpha).clamp(-1.0, 1.0).asin();
        let targets = [-c64::from_polar(1.0, theta), c64::from_polar(1.0, -theta)];
        if pn < 1e-12 {
            // |G⟩|λ⟩ is itself an eigenvector; both targets coincide.
            let phase_error = targets.iter().map(|&t| phase_gap(a00, t)).fold(f64::INFINITY, f64::min);
            return SectorPhases {
                lambda,
                theta,
                phase_error,
                leakage: 0.0,
                trace_w2: (a00 * a00).re * 2.0,
            };
        }
        perp.iter_mut().for_each(|x| *x /= pn);
        let wp = apply(&perp);
        let m = [[a00, dot(&gl, &wp)], [dot(&perp, &wg), dot(&perp, &wp)]];
        let leak: f64 = wp
            .iter()
            .zip(gl.iter().zip(&perp))
            .map(|(x, (g, p))| (x - m[0][1] * g - m[1][1] * p).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let tr = m[0][0] + m[1][1];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let disc = (tr * tr - det * 4.0).sqrt();
        let eig = [(tr + disc) / 2.0, (tr - disc) / 2.0];
        let straight = phase_gap(eig[0], targets[0]).max(phase_gap(eig[1], targets[1]));
        let crossed = phase_gap(eig[0], targets[1]).max(phase_gap(eig[1], targets[0]));
        let w2 = tr * tr - det * 2.0;
        SectorPhases {
            lambda,
            theta,
            phase_error: straight.min(crossed),
            leakage: leak,
            trace_w2: w2.re,
        }
    }

    /// Sector phases for every eigenpair of `h`, the operator encoded.
    pub fn eigenphase_law(&self, h: &OperatorSum) -> Result<Vec<SectorPhases>> {
        let eig = HermitianEigen::new(materialize(h)?.as_ref())?;
        let s = eig.eigenvectors.nrows();
        Ok(eig
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, &lambda)| {
                let v: Vec<c64> = (0..s).map(|i| eig.eigenvectors[(i, k)]).collect();
                self.sector(lambda, &v)
            })
            .collect())
    }
}
