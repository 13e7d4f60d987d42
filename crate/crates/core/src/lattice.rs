//! Lattices, local terms and piecewise time-dependent Hamiltonians.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cheb::ChebyshevExpansion;
use crate::error::{Error, Result};
use crate::operator::{commutator_norm, operator_norm, OperatorSum, Pauli, PauliString};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Sites with Euclidean coordinates. Periodic lattices wrap each coordinate
/// with the stored period.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    dimension: usize,
    sites: Vec<Vec<f64>>,
    boundary: Boundary,
    periods: Vec<f64>,
    scale: f64,
}

impl Lattice {
    /// `n` sites at unit spacing.
    pub fn chain(n: usize, boundary: Boundary) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidLattice("empty chain".into()));
        }
        Ok(Self {
            dimension: 1,
            sites: (0..n).map(|i| vec![i as f64]).collect(),
            boundary,
            periods: vec![n as f64],
            scale: 1.0,
        })
    }

    /// `side × side` square lattice, row-major site order.
    pub fn square(side: usize, boundary: Boundary) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidLattice("empty square lattice".into()));
        }
        let sites = (0..side * side)
            .map(|i| vec![(i / side) as f64, (i % side) as f64])
            .collect();
        Ok(Self {
            dimension: 2,
            sites,
            boundary,
            periods: vec![side as f64; 2],
            scale: 1.0,
        })
    }

    /// Arbitrary open-boundary coordinates in one or two dimensions.
    pub fn from_coordinates(sites: Vec<Vec<f64>>) -> Result<Self> {
        let dimension = sites.first().map_or(0, Vec::len);
        if !(1..=2).contains(&dimension) || sites.iter().any(|s| s.len() != dimension) {
            return Err(Error::InvalidLattice("coordinates must all be 1D or all 2D".into()));
        }
        if sites.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidLattice("non-finite coordinate".into()));
        }
        for (i, a) in sites.iter().enumerate() {
            if sites[..i].contains(a) {
                return Err(Error::InvalidLattice(format!("duplicate site coordinate {a:?}")));
            }
        }
        Ok(Self {
            dimension,
            periods: vec![0.0; dimension],
            sites,
            boundary: Boundary::Open,
            scale: 1.0,
        })
    }

    /// Multiply every distance by `scale`.
    pub fn with_metric_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("metric scale must be positive, got {scale}")));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn metric_scale(&self) -> f64 {
        self.scale
    }

    pub fn coordinates(&self, site: usize) -> &[f64] {
        &self.sites[site]
    }

    /// Unscaled distance between two sites.
    fn raw_distance(&self, a: usize, b: usize) -> f64 {
        let (x, y) = (&self.sites[a], &self.sites[b]);
        x.iter()
            .zip(y)
            .zip(&self.periods)
            .map(|((p, q), &period)| {
                let d = (p - q).abs();
                let d = if self.boundary == Boundary::Periodic && period > 0.0 {
                    d.min(period - d)
                } else {
                    d
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.scale * self.raw_distance(a, b)
    }

    /// `min_{x ∈ xs, y ∈ ys} dist(x, y)`.
    pub fn set_distance(&self, xs: &[usize], ys: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for &x in xs {
            for &y in ys {
                best = best.min(self.distance(x, y));
            }
        }
        best
    }

    pub fn diameter(&self, support: &[usize]) -> f64 {
        self.scale * self.raw_diameter(support)
    }

    fn raw_diameter(&self, support: &[usize]) -> f64 {
        let mut d = 0.0f64;
        for (i, &a) in support.iter().enumerate() {
            for &b in &support[i + 1..] {
                d = d.max(self.raw_distance(a, b));
            }
        }
        d
    }

    /// Largest number of sites inside any closed unit ball centred on a site.
    pub fn max_ball_occupancy(&self) -> usize {
        (0..self.len())
            .map(|a| (0..self.len()).filter(|&b| self.distance(a, b) <= 1.0 + 1e-12).count())
            .max()
            .unwrap_or(0)
    }
}

/// A term `f(t)·h_X` acting on the sites of `support`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    support: Vec<usize>,
    operator: OperatorSum,
    profile: Option<ChebyshevExpansion>,
}

impl LocalTerm {
    /// `operator` acts on the full register; its support must lie inside
    /// `support`.
    pub fn new(mut support: Vec<usize>, operator: OperatorSum) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if support.is_empty() {
            return Err(Error::InvalidLattice("term with empty support".into()));
        }
        if let Some(&q) = operator.support().iter().find(|q| support.binary_search(q).is_err()) {
            return Err(Error::InvalidLattice(format!(
                "operator acts on site {q} outside its declared support {support:?}"
            )));
        }
        if let Some(&last) = support.last() {
            if last >= operator.n_qubits() {
                return Err(Error::QubitOutOfRange {
                    index: last,
                    n_qubits: operator.n_qubits(),
                });
            }
        }
        Ok(Self {
            support,
            operator,
            profile: None,
        })
    }

    pub fn with_profile(mut self, profile: ChebyshevExpansion) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn operator(&self) -> &OperatorSum {
        &self.operator
    }

    pub fn profile(&self) -> Option<&ChebyshevExpansion> {
        self.profile.as_ref()
    }

    /// Profile value at time `t`, or 1 for time-independent terms.
    pub fn coefficient(&self, t: f64) -> Result<f64> {
        self.profile.as_ref().map_or(Ok(1.0), |p| p.evaluate(t))
    }

    /// Upper bound on `sup_t |f(t)|`.
    pub fn profile_bound(&self) -> f64 {
        self.profile.as_ref().map_or(1.0, ChebyshevExpansion::abs_sum)
    }

    pub fn is_within(&self, sites: &[usize]) -> bool {
        self.support.iter().all(|s| sites.contains(s))
    }

    fn scaled(&self, c: f64) -> Result<Self> {
        Ok(Self {
            support: self.support.clone(),
            operator: self.operator.scaled(c)?,
            profile: self.profile.clone(),
        })
    }
}

/// A time interval on which the listed terms are active.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub t0: f64,
    pub t1: f64,
    pub terms: Vec<LocalTerm>,
}

impl Slice {
    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(|t| t.profile.is_none())
    }
}

/// Slices `t_0 < t_1 < … < t_M`; within each the active terms are fixed and
/// may carry coefficient profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeHamiltonian {
    lattice: Lattice,
    slices: Vec<Slice>,
}

impl LatticeHamiltonian {
    /// Terms must act on registers of exactly `lattice.len()` qubits.
    pub fn new(lattice: Lattice, slices: Vec<Slice>) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::InvalidSlices("at least one slice required".into()));
        }
        for s in &slices {
            if s.t0.is_nan() || s.t1.is_nan() {
                return Err(Error::InvalidSlices("NaN slice boundary".into()));
            }
            for term in &s.terms {
                if term.operator.n_qubits() != lattice.len() {
                    return Err(Error::QubitCountMismatch {
                        expected: lattice.len(),
                        found: term.operator.n_qubits(),
                    });
                }
            }
        }
        Ok(Self { lattice, slices })
    }

    /// One slice `[0, ∞)` of time-independent terms.
    pub fn time_independent(lattice: Lattice, terms: Vec<LocalTerm>) -> Result<Self> {
        Self::new(
            lattice,
            vec![Slice {
                t0: 0.0,
                t1: f64::INFINITY,
                terms,
            }],
        )
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.len()
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    pub fn t_start(&self) -> f64 {
        self.slices[0].t0
    }

    pub fn t_end(&self) -> f64 {
        self.slices[self.slices.len() - 1].t1
    }

    /// Index of the slice containing `t` (left-closed; the final slice is
    /// closed on both ends).
    pub fn slice_index(&self, t: f64) -> Option<usize> {
        let last = self.slices.len() - 1;
        self.slices
            .iter()
            .position(|s| t >= s.t0 && t < s.t1)
            .or_else(|| (t == self.slices[last].t1).then_some(last))
    }

    /// Every distinct term appearing in any slice, in first-seen order.
    pub fn all_terms(&self) -> Vec<&LocalTerm> {
        let mut out: Vec<&LocalTerm> = Vec::new();
        for s in &self.slices {
            for t in &s.terms {
                if !out.contains(&t) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// `Σ_{X ⊆ Ω} f_X(t) h_X` for slice `slice` at time `t`, with `Ω = sites`
    /// (all sites when `None`).
    pub fn operator_at(&self, slice: usize, t: f64, sites: Option<&[usize]>) -> Result<OperatorSum> {
        let mut op = OperatorSum::zero(self.n_sites());
        for term in &self.slices[slice].terms {
            if sites.is_some_and(|s| !term.is_within(s)) {
                continue;
            }
            let c = term.coefficient(t)?;
            op = op.linear_combination(1.0, &term.operator, c)?;
        }
        Ok(op)
    }

    /// Every coefficient multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let slices = self
            .slices
            .iter()
            .map(|s| {
                Ok(Slice {
                    t0: s.t0,
                    t1: s.t1,
                    terms: s.terms.iter().map(|t| t.scaled(c)).collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            lattice: self.lattice.clone(),
            slices,
        })
    }

    /// Replace the lattice metric scale.
    pub fn with_metric_scale(mut self, scale: f64) -> Result<Self> {
        self.lattice = self.lattice.with_metric_scale(scale)?;
        Ok(self)
    }

    /// Parse the JSON ingestion document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: HamiltonianDoc = serde_json::from_str(text)?;
        doc.into_hamiltonian()
    }

    /// Emit the JSON ingestion document. All slices must share one term list.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HamiltonianDoc::from_hamiltonian(self)?)?)
    }
}

/// Uniform fields in `[-1, 1]` from a seeded ChaCha8 stream.
pub fn random_fields(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Open Heisenberg chain with bond terms `XX + YY + ZZ + z_j Z_j`.
///
/// The field on the final site has no bond of its own and is attached to the
/// last bond, so the last term carries two field operators.
pub fn build_heisenberg_1d(n: usize, z_fields: &[f64], boundary: Boundary) -> Result<LatticeHamiltonian> {
    if n < 2 {
        return Err(Error::InvalidLattice(format!("Heisenberg chain needs n ≥ 2, got {n}")));
    }
    if z_fields.len() != n {
        return Err(Error::InvalidLattice(format!("{} fields for {n} sites", z_fields.len())));
    }
    if boundary != Boundary::Open {
        return Err(Error::Unsupported("Heisenberg builder supports open boundaries only".into()));
    }
    let lattice = Lattice::chain(n, boundary)?;
    let mut terms = Vec::with_capacity(n - 1);
    for j in 0..n - 1 {
        let mut op = OperatorSum::zero(n);
        for p in Pauli::ALL {
            op.push(1.0, PauliString::new(n, [(j, p), (j + 1, p)])?)?;
        }
        op.push(z_fields[j], PauliString::single(n, j, Pauli::Z)?)?;
        if j == n - 2 {
            op.push(z_fields[n - 1], PauliString::single(n, n - 1, Pauli::Z)?)?;
        }
        terms.push(LocalTerm::new(vec![j, j + 1], op)?);
    }
    LatticeHamiltonian::time_independent(lattice, terms)
}

/// Heisenberg chain with fields from [`random_fields`].
pub fn heisenberg_random(n: usize, seed: u64) -> Result<LatticeHamiltonian> {
    build_heisenberg_1d(n, &random_fields(n, seed), Boundary::Open)
}

/// [`heisenberg_random`] divided by its largest term norm, so that every term
/// has norm at most one. Times on this chain are in units of that norm.
pub fn heisenberg_benchmark(n: usize, seed: u64) -> Result<LatticeHamiltonian> {
    let h = heisenberg_random(n, seed)?;
    let largest = h
        .all_terms()
        .into_iter()
        .map(|t| operator_norm(t.operator()))
        .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))?;
    h.scaled(1.0 / largest)
}

/// Locality and commutator constants of a Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// `max_p Σ_{Z∋p} |Z|·‖h_Z‖`.
    pub zeta0: f64,
    /// `max_x Σ_{X∋x} ‖h_X‖·|X|²·e^{μ·diam X}`.
    pub zeta: f64,
    pub mu: f64,
    /// Normalized pairwise commutator bound, in `[0, 2]`.
    pub eta: f64,
    /// Largest pairwise commutator norm.
    #[serde(rename = "K")]
    pub k: f64,
    /// Interaction-graph degree.
    pub degree: usize,
}

/// Extract [`BoundInputs`] over all slices. Terms with profiles use `Σ|a_j|`
/// as their coefficient bound.
pub fn extract_bound_inputs(h: &LatticeHamiltonian, mu: f64) -> Result<BoundInputs> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    let terms = h.all_terms();
    let scaled_ops: Vec<OperatorSum> = terms
        .iter()
        .map(|t| t.operator.scaled(t.profile_bound()))
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = scaled_ops.iter().map(operator_norm).collect::<Result<_>>()?;
    let lat = h.lattice();

    let mut zeta0_site = vec![0.0; h.n_sites()];
    let mut zeta_site = vec![0.0; h.n_sites()];
    for (term, &norm) in terms.iter().zip(&norms) {
        let size = term.support.len() as f64;
        let decay = (mu * lat.diameter(&term.support)).exp();
        for &p in &term.support {
            zeta0_site[p] += size * norm;
            zeta_site[p] += norm * size * size * decay;
        }
    }

    let mut eta = 0.0f64;
    let mut k = 0.0f64;
    let mut neighbours = vec![0usize; terms.len()];
    for i in 0..terms.len() {
        for j in i + 1..terms.len() {
            if !terms[i].support.iter().any(|s| terms[j].support.contains(s)) {
                continue;
            }
            neighbours[i] += 1;
            neighbours[j] += 1;
            let c = commutator_norm(&scaled_ops[i], &scaled_ops[j])?;
            k = k.max(c);
            let denom = norms[i] * norms[j];
            if denom > 0.0 {
                eta = eta.max(c / denom);
            }
        }
    }
    Ok(BoundInputs {
        zeta0: zeta0_site.into_iter().fold(0.0, f64::max),
        zeta: zeta_site.into_iter().fold(0.0, f64::max),
        mu,
        eta: eta.min(2.0),
        k,
        degree: neighbours.into_iter().max().unwrap_or(0),
    })
}

/// Default cap on sites per unit ball.
pub const DEFAULT_DENSITY_CAP: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DiameterExceeded { term: usize, diameter: f64 },
    NormExceeded { term: usize, norm: f64 },
    SliceOrder { slice: usize },
    SliceTooLong { slice: usize, length: f64 },
    DensityExceeded { occupancy: usize, cap: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrongTerm {
    pub term: usize,
    pub support: Vec<usize>,
    pub norm: f64,
}

/// Outcome of [`validate`]. Term indices refer to [`LatticeHamiltonian::all_terms`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub max_term_norm: f64,
    /// Factor bringing every term norm to at most 1, when one is needed.
    pub suggested_rescale: Option<f64>,
    /// Metric scale in use.
    pub metric_scale: f64,
    /// Scale that would make the widest term have diameter exactly 1.
    pub suggested_metric_scale: f64,
    pub strong_terms: Vec<StrongTerm>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty() && self.strong_terms.is_empty()
    }
}

/// Check the locality, normalization and slicing hypotheses.
///
/// A term is strong when its norm exceeds 1 and twice the median term norm,
/// so a uniformly over-normalized model only triggers a rescale suggestion.
pub fn validate(h: &LatticeHamiltonian) -> Result<ValidationReport> {
    validate_with_cap(h, DEFAULT_DENSITY_CAP)
}

pub fn validate_with_cap(h: &LatticeHamiltonian, density_cap: usize) -> Result<ValidationReport> {
    let lat = h.lattice();
    let terms = h.all_terms();
    let mut violations = Vec::new();
    let mut norms = Vec::with_capacity(terms.len());
    let mut widest = 0.0f64;
    for (i, term) in terms.iter().enumerate() {
        let diameter = lat.diameter(&term.support);
        widest = widest.max(lat.raw_diameter(&term.support));
        if diameter > 1.0 + 1e-12 {
            violations.push(Violation::DiameterExceeded { term: i, diameter });
        }
        let norm = operator_norm(&term.operator)? * term.profile_bound();
        if norm > 1.0 + 1e-12 {
            violations.push(Violation::NormExceeded { term: i, norm });
        }
        norms.push(norm);
    }
    let slices = h.slices();
    for (i, s) in slices.iter().enumerate() {
        let prev_end = if i == 0 { s.t0 } else { slices[i - 1].t1 };
        if !(s.t0 < s.t1) || s.t0 != prev_end {
            violations.push(Violation::SliceOrder { slice: i });
        }
        if slices.len() > 1 && s.t1 - s.t0 > 1.0 + 1e-12 {
            violations.push(Violation::SliceTooLong {
                slice: i,
                length: s.t1 - s.t0,
            });
        }
    }
    let occupancy = lat.max_ball_occupancy();
    if occupancy > density_cap {
        violations.push(Violation::DensityExceeded {
            occupancy,
            cap: density_cap,
        });
    }

    let max_term_norm = norms.iter().cloned().fold(0.0, f64::max);
    let median = median(&norms);
    let strong_terms: Vec<StrongTerm> = terms
        .iter()
        .zip(&norms)
        .enumerate()
        .filter(|(_, (_, &n))| n > 1.0 + 1e-12 && n > 2.0 * median)
        .map(|(i, (t, &norm))| StrongTerm {
            term: i,
            support: t.support.clone(),
            norm,
        })
        .collect();
    Ok(ValidationReport {
        violations,
        max_term_norm,
        suggested_rescale: (max_term_norm > 1.0 + 1e-12).then(|| 1.0 / max_term_norm),
        metric_scale: lat.metric_scale(),
        suggested_metric_scale: if widest > 0.0 { 1.0 / widest } else { 1.0 },
        strong_terms,
    })
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianDoc {
    n: usize,
    dimension: usize,
    boundary: Boundary,
    terms: Vec<TermDoc>,
    slices: Vec<SliceDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDoc {
    support: Vec<usize>,
    paulis: Vec<PauliDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile: Option<ChebyshevExpansion>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PauliDoc {
    coeff: f64,
    /// Site index (as a string) to Pauli label.
    string: BTreeMap<String, Pauli>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceDoc {
    t0: f64,
    t1: f64,
}

impl HamiltonianDoc {
    fn into_hamiltonian(self) -> Result<LatticeHamiltonian> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidLattice("n must be positive".into()));
        }
        let lattice = match self.dimension {
            1 => Lattice::chain(n, self.boundary)?,
            2 => {
                let side = (n as f64).sqrt().round() as usize;
                if side * side != n {
                    return Err(Error::InvalidLattice(format!(
                        "2D lattices must be square; n = {n} is not a perfect square"
                    )));
                }
                Lattice::square(side, self.boundary)?
            }
            d => return Err(Error::InvalidLattice(format!("unsupported dimension {d}"))),
        };
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            let mut op = OperatorSum::zero(n);
            for p in t.paulis {
                let mut factors = Vec::with_capacity(p.string.len());
                for (site, pauli) in p.string {
                    let q: usize = site
                        .parse()
                        .map_err(|_| Error::InvalidLattice(format!("bad site key {site:?}")))?;
                    factors.push((q, pauli));
                }
                op.push(p.coeff, PauliString::new(n, factors)?)?;
            }
            let mut term = LocalTerm::new(t.support, op)?;
            if let Some(profile) = t.profile {
                term = term.with_profile(profile);
            }
            terms.push(term);
        }
        if self.slices.is_empty() {
            return Err(Error::InvalidSlices("at least one slice required".into()));
        }
        let slices = self
            .slices
            .into_iter()
            .map(|s| Slice {
                t0: s.t0,
                t1: s.t1,
                terms: terms.clone(),
            })
            .collect();
        LatticeHamiltonian::new(lattice, slices)
    }

    fn from_hamiltonian(h: &LatticeHamiltonian) -> Result<Self> {
        let first = &h.slices[0].terms;
        if h.slices.iter().any(|s| &s.terms != first) {
            return Err(Error::Unsupported(
                "JSON documents share one term list across slices".into(),
            ));
        }
        if h.slices.iter().any(|s| !s.t0.is_finite() || !s.t1.is_finite()) {
            return Err(Error::Unsupported("JSON slices must have finite ends".into()));
        }
        let terms = first
            .iter()
            .map(|t| {
                let paulis = t
                    .operator
                    .terms()
                    .iter()
                    .map(|(c, p)| {
                        let sign = p.phase().value().re;
                        PauliDoc {
                            coeff: c * sign,
                            string: p.factors().iter().map(|(q, s)| (q.to_string(), *s)).collect(),
                        }
                    })
                    .collect();
                TermDoc {
                    support: t.support.clone(),
                    paulis,
                    profile: t.profile.clone(),
                }
            })
            .collect();
        Ok(Self {
            n: h.n_sites(),
            dimension: h.lattice.dimension,
            boundary: h.lattice.boundary,
            terms,
            slices: h
                .slices
                .iter()
                .map(|s| SliceDoc { t0: s.t0, t1: s.t1 })
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{materialize, spectral_norm};
    use faer::Side;

    fn spectrum(op: &OperatorSum) -> Vec<f64> {
        let mut e = materialize(op).unwrap().self_adjoint_eigenvalues(Side::Lower).unwrap();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn benchmark_chain_has_unit_largest_term() {
        let raw = heisenberg_random(7, 2).unwrap();
        let unit = heisenberg_benchmark(7, 2).unwrap();
        let norms = |h: &LatticeHamiltonian| -> Vec<f64> {
            h.all_terms().into_iter().map(|t| operator_norm(t.operator()).unwrap()).collect()
        };
        let (a, b) = (norms(&raw), norms(&unit));
        let largest = a.iter().copied().fold(0.0, f64::max);
        assert!(largest > 3.0);
        assert!((b.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            assert!((x / largest - y).abs() < 1e-12);
        }
    }

    #[test]
    fn heisenberg_two_sites() {
        let h = build_heisenberg_1d(2, &[0.0, 0.0], Boundary::Open).unwrap();
        assert_eq!(h.slices()[0].terms.len(), 1);
        let e = spectrum(h.slices()[0].terms[0].operator());
        for (a, b) in e.iter().zip([-3.0, 1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn heisenberg_three_sites_norm() {
        let h = build_heisenberg_1d(3, &[0.0; 3], Boundary::Open).unwrap();
        assert_eq!(h.slices()[0].terms.len(), 2);
        let full = materialize(&h.operator_at(0, 0.0, None).unwrap()).unwrap();
        // Oracle: explicit sum of Kronecker products. The spectrum is
        // {2 (x4), 0 (x2), -4 (x2)}, so the norm is 4.
        let c = |re: f64, im: f64| faer::c64::new(re, im);
        let x = faer::Mat::from_fn(2, 2, |i, j| if i != j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let y = faer::Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => c(0.0, -1.0),
            (1, 0) => c(0.0, 1.0),
            _ => c(0.0, 0.0),
        });
        let z = faer::Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(1.0, 0.0),
            (1, 1) => c(-1.0, 0.0),
            _ => c(0.0, 0.0),
        });
        let id = faer::Mat::<faer::c64>::identity(2, 2);
        let mut oracle = faer::Mat::<faer::c64>::zeros(8, 8);
        for p in [&x, &y, &z] {
            oracle += p.kron(p).kron(&id);
            oracle += id.kron(p).kron(p);
        }
        let diff = &full - &oracle;
        assert!(spectral_norm(diff.as_ref()) < 1e-13);
        assert!((spectral_norm(full.as_ref()) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn last_field_is_attached_to_last_bond() {
        let z = [0.1, 0.2, 0.3, 0.4];
        let h = build_heisenberg_1d(4, &z, Boundary::Open).unwrap();
        let terms = &h.slices()[0].terms;
        let field_count = |t: &LocalTerm| t.operator().terms().iter().filter(|(_, p)| p.weight() == 1).count();
        assert_eq!(field_count(&terms[0]), 1);
        assert_eq!(field_count(&terms[1]), 1);
        assert_eq!(field_count(&terms[2]), 2);
        let total: f64 = terms
            .iter()
            .flat_map(|t| t.operator().terms())
            .filter(|(_, p)| p.weight() == 1)
            .map(|(c, _)| c)
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!(build_heisenberg_1d(1, &[0.0], Boundary::Open).is_err());
    }

    #[test]
    fn random_fields_are_reproducible_and_bounded() {
        let a = random_fields(50, 42);
        assert_eq!(a, random_fields(50, 42));
        assert_ne!(a, random_fields(50, 43));
        assert!(a.iter().all(|z| (-1.0..=1.0).contains(z)));
    }

    #[test]
    fn bound_inputs_commuting_and_single_term() {
        let n = 3;
        let mut terms = Vec::new();
        for j in 0..n - 1 {
            let op = OperatorSum::from_terms(n, [(0.5, PauliString::new(n, [(j, Pauli::Z), (j + 1, Pauli::Z)]).unwrap())])
                .unwrap();
            terms.push(LocalTerm::new(vec![j, j + 1], op).unwrap());
        }
        let h = LatticeHamiltonian::time_independent(Lattice::chain(n, Boundary::Open).unwrap(), terms).unwrap();
        let b = extract_bound_inputs(&h, 1.0).unwrap();
        assert_eq!(b.eta, 0.0);
        assert_eq!(b.k, 0.0);
        assert_eq!(b.degree, 1);

        let h = build_heisenberg_1d(2, &[0.3, -0.2], Boundary::Open).unwrap();
        let b = extract_bound_inputs(&h, 1.0).unwrap();
        let norm = operator_norm(h.slices()[0].terms[0].operator()).unwrap();
        assert!((b.zeta0 - 2.0 * norm).abs() < 1e-12);
        assert!((b.zeta - 4.0 * norm * 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn bound_inputs_heisenberg_brute_force() {
        let h = heisenberg_random(5, 42);
        let h = h.unwrap();
        let b = extract_bound_inputs(&h, 1.0).unwrap();
        // Brute force on full 32-dimensional matrices.
        let ops: Vec<_> = h.slices()[0].terms.iter().map(|t| materialize(t.operator()).unwrap()).collect();
        let norms: Vec<f64> = ops.iter().map(|m| spectral_norm(m.as_ref())).collect();
        let mut zeta0: f64 = 0.0;
        let mut zeta: f64 = 0.0;
        for p in 0..5 {
            let (mut s0, mut s) = (0.0, 0.0);
            for (t, nrm) in h.slices()[0].terms.iter().zip(&norms) {
                if t.support().contains(&p) {
                    s0 += 2.0 * nrm;
                    s += nrm * 4.0 * 1f64.exp();
                }
            }
            zeta0 = zeta0.max(s0);
            zeta = zeta.max(s);
        }
        let (mut k, mut eta): (f64, f64) = (0.0, 0.0);
        for i in 0..ops.len() {
            for j in 0..ops.len() {
                if i == j {
                    continue;
                }
                let c = &ops[i] * &ops[j] - &ops[j] * &ops[i];
                let c = spectral_norm(c.as_ref());
                if j.abs_diff(i) > 1 {
                    assert!(c < 1e-12);
                    continue;
                }
                k = k.max(c);
                eta = eta.max(c / (norms[i] * norms[j]));
            }
        }
        assert!((b.zeta0 - zeta0).abs() < 1e-10);
        assert!((b.zeta - zeta).abs() < 1e-10);
        assert!((b.k - k).abs() < 1e-10);
        assert!((b.eta - eta.min(2.0)).abs() < 1e-10);
        assert_eq!(b.degree, 2);
    }

    #[test]
    fn bound_inputs_scale_with_coefficients() {
        let h = heisenberg_random(5, 7).unwrap();
        let b = extract_bound_inputs(&h, 1.0).unwrap();
        let c = 0.37;
        let s = extract_bound_inputs(&h.scaled(c).unwrap(), 1.0).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(s.zeta0, c * b.zeta0) < 1e-12);
        assert!(rel(s.zeta, c * b.zeta) < 1e-12);
        assert!(rel(s.k, c * c * b.k) < 1e-12);
        assert!(rel(s.eta, b.eta) < 1e-12);
    }

    #[test]
    fn validate_examples() {
        let h = heisenberg_random(6, 42).unwrap();
        let r = validate(&h).unwrap();
        assert!(r.strong_terms.is_empty());
        assert!(r.max_term_norm > 1.0 && r.max_term_norm < 4.0);
        let s = r.suggested_rescale.unwrap();
        assert!((0.25..=1.0 / 3.0 + 1e-12).contains(&s), "rescale {s}");
        assert!(r.violations.iter().all(|v| matches!(v, Violation::NormExceeded { .. })));
        assert_eq!(r.metric_scale, 1.0);
        assert_eq!(r.suggested_metric_scale, 1.0);
        // After the suggested rescale every term is within the unit norm.
        let r2 = validate(&h.scaled(s).unwrap()).unwrap();
        assert!(r2.is_clean(), "{r2:?}");

        // One strong term among unit terms.
        let n = 4;
        let mut terms = Vec::new();
        for j in 0..n - 1 {
            let c = if j == 1 { 10.0 } else { 1.0 };
            let op = OperatorSum::from_terms(n, [(c, PauliString::new(n, [(j, Pauli::X), (j + 1, Pauli::X)]).unwrap())])
                .unwrap();
            terms.push(LocalTerm::new(vec![j, j + 1], op).unwrap());
        }
        let h = LatticeHamiltonian::time_independent(Lattice::chain(n, Boundary::Open).unwrap(), terms).unwrap();
        let r = validate(&h).unwrap();
        assert_eq!(r.strong_terms.len(), 1);
        assert!((r.strong_terms[0].norm - 10.0).abs() < 1e-12);
        assert_eq!(r.strong_terms[0].support, vec![1, 2]);

        let empty = LatticeHamiltonian::time_independent(Lattice::chain(3, Boundary::Open).unwrap(), vec![]).unwrap();
        assert!(validate(&empty).unwrap().is_clean());
    }

    #[test]
    fn validate_flags_geometry_and_slices() {
        let n = 4;
        let op = OperatorSum::from_terms(n, [(0.5, PauliString::new(n, [(0, Pauli::Z), (2, Pauli::Z)]).unwrap())]).unwrap();
        let term = LocalTerm::new(vec![0, 2], op).unwrap();
        let lat = Lattice::chain(n, Boundary::Open).unwrap();
        let slices = vec![
            Slice { t0: 0.0, t1: 1.5, terms: vec![term.clone()] },
            Slice { t0: 1.0, t1: 2.0, terms: vec![term] },
        ];
        let h = LatticeHamiltonian::new(lat, slices).unwrap();
        let r = validate(&h).unwrap();
        assert!(r.violations.contains(&Violation::DiameterExceeded { term: 0, diameter: 2.0 }));
        assert!(r.violations.contains(&Violation::SliceTooLong { slice: 0, length: 1.5 }));
        assert!(r.violations.contains(&Violation::SliceOrder { slice: 1 }));
        assert_eq!(r.suggested_metric_scale, 0.5);
        let rescaled = h.with_metric_scale(0.5).unwrap();
        let r = validate(&rescaled).unwrap();
        assert!(!r.violations.iter().any(|v| matches!(v, Violation::DiameterExceeded { .. })));

        let r = validate_with_cap(&heisenberg_random(4, 1).unwrap(), 2).unwrap();
        assert!(r.violations.contains(&Violation::DensityExceeded { occupancy: 3, cap: 2 }));
    }

    #[test]
    fn periodic_distances_wrap() {
        let lat = Lattice::chain(6, Boundary::Periodic).unwrap();
        assert_eq!(lat.distance(0, 5), 1.0);
        assert_eq!(lat.distance(0, 3), 3.0);
        let sq = Lattice::square(4, Boundary::Periodic).unwrap();
        assert_eq!(sq.distance(0, 3), 1.0);
        assert_eq!(sq.distance(0, 12), 1.0);
        let open = Lattice::square(4, Boundary::Open).unwrap();
        assert_eq!(open.distance(0, 15), (18f64).sqrt());
    }

    const DOC: &str = r#"{
        "n": 3, "dimension": 1, "boundary": "open",
        "terms": [
            {"support": [0, 1], "paulis": [{"coeff": 1.0, "string": {"0": "X", "1": "X"}},
                                           {"coeff": -0.5, "string": {"0": "Z"}}]},
            {"support": [1, 2], "paulis": [{"coeff": 0.25, "string": {"1": "Y", "2": "Y"}}]}
        ],
        "slices": [{"t0": 0.0, "t1": 1.0}, {"t0": 1.0, "t1": 2.0}]
    }"#;

    #[test]
    fn json_ingestion_round_trip() {
        let h = LatticeHamiltonian::from_json(DOC).unwrap();
        assert_eq!(h.n_sites(), 3);
        assert_eq!(h.slices().len(), 2);
        assert_eq!(h.slices()[0].terms.len(), 2);
        assert_eq!(h.slice_index(1.0), Some(1));
        assert_eq!(h.slice_index(2.0), Some(1));
        let text = h.to_json().unwrap();
        let again = LatticeHamiltonian::from_json(&text).unwrap();
        assert_eq!(again, h);
        assert_eq!(again.to_json().unwrap(), text);
    }

    #[test]
    fn json_rejects_unknown_and_malformed_fields() {
        let extra = DOC.replacen("\"n\": 3,", "\"n\": 3, \"colour\": 1,", 1);
        assert!(LatticeHamiltonian::from_json(&extra).is_err());
        let term_extra = DOC.replacen("\"support\": [1, 2],", "\"support\": [1, 2], \"weight\": 2,", 1);
        assert!(LatticeHamiltonian::from_json(&term_extra).is_err());
        let outside = DOC.replacen("{\"1\": \"Y\", \"2\": \"Y\"}", "{\"0\": \"Y\", \"2\": \"Y\"}", 1);
        assert!(LatticeHamiltonian::from_json(&outside).is_err());
        let bad_pauli = DOC.replacen("\"Y\"", "\"W\"", 1);
        assert!(LatticeHamiltonian::from_json(&bad_pauli).is_err());
        let not_square = DOC.replacen("\"dimension\": 1", "\"dimension\": 2", 1);
        assert!(LatticeHamiltonian::from_json(&not_square).is_err());
        let renamed = DOC.replacen("\"t0\"", "\"start\"", 1);
        assert!(LatticeHamiltonian::from_json(&renamed).is_err());
    }
}
