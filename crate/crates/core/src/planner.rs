//! Block decompositions of lattice time evolution and their evaluation.
//!
//! A plan is a list of block evolutions in application order: the first step
//! acts first. Forward steps evolve the terms inside their support for
//! `duration`, backward steps undo such an evolution.
//!
//! The 1D recursive pattern puts cuts every `block − ℓ` sites, each cut
//! expanded into an overlap of `ℓ` sites. Forward pieces between consecutive
//! overlaps alternate between a bottom layer (applied first) and a top layer,
//! with all overlaps undone in between. Other interleavings are equally
//! valid; this one keeps every round at three layers.

use std::collections::HashMap;

use faer::linalg::matmul::matmul;
use faer::{c64, Accum, MatMut, MatRef, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{ErrorModel, ErrorSource};
use crate::lattice::{validate, Boundary, LatticeHamiltonian, StrongTerm};
use crate::operator::dense::{check_qubits, mat_mul};
use crate::operator::{
    apply_local, embed_sites, largest_singular_value, materialize, svd_norm, CMat, DenseUnitary,
    HermitianEigen, LinearOperator,
};
use crate::sector::{conserves_popcount, restrict, restrict_local, Sectors};
use crate::oracle::{evolve, evolve_sites, EvolutionRequest, DEFAULT_SUBSTEPS_PER_UNIT};

/// Longest round of the recursive plan.
pub const MAX_ROUND_TIME: f64 = 1.0;

const TELESCOPE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "f")]
    Forward,
    #[serde(rename = "b")]
    Backward,
}

/// Evolution of the terms inside one block over the first `duration` of a
/// slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockStep {
    /// Inclusive site interval `[lo, hi]`; `lo > hi` wraps around a periodic
    /// chain.
    pub support: [usize; 2],
    pub direction: Direction,
    pub duration: f64,
    #[serde(rename = "slice")]
    pub slice_index: usize,
}

impl BlockStep {
    pub fn forward(lo: usize, hi: usize, duration: f64, slice_index: usize) -> Self {
        Self {
            support: [lo, hi],
            direction: Direction::Forward,
            duration,
            slice_index,
        }
    }

    pub fn backward(lo: usize, hi: usize, duration: f64, slice_index: usize) -> Self {
        Self {
            support: [lo, hi],
            direction: Direction::Backward,
            duration,
            slice_index,
        }
    }

    pub fn is_contiguous(&self) -> bool {
        self.support[0] <= self.support[1]
    }

    /// Sites of the block in increasing order.
    pub fn sites(&self, n: usize) -> Vec<usize> {
        let [lo, hi] = self.support;
        if lo <= hi {
            (lo..=hi).collect()
        } else {
            (0..=hi).chain(lo..n).collect()
        }
    }

    fn signed_duration(&self) -> f64 {
        match self.direction {
            Direction::Forward => self.duration,
            Direction::Backward => -self.duration,
        }
    }
}

/// Ordered block steps approximating the evolution of a whole lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionPlan {
    pub ell: usize,
    /// Largest forward block requested when the plan was built.
    #[serde(default)]
    pub block: usize,
    /// Layers per round.
    #[serde(default)]
    pub layers: usize,
    pub steps: Vec<BlockStep>,
    pub predicted_error: f64,
    pub error_source: ErrorSource,
}

impl DecompositionPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        if !(plan.predicted_error >= 0.0 && plan.predicted_error.is_finite()) {
            return Err(Error::InvalidPlan(format!("predicted_error {}", plan.predicted_error)));
        }
        Ok(plan)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Check the plan against `h` and return the net evolution time of each
    /// slice.
    ///
    /// Per slice, forward minus backward durations must agree on every site;
    /// that is the telescoping identity that makes the product approximate
    /// the global evolution.
    pub fn validate(&self, h: &LatticeHamiltonian) -> Result<Vec<f64>> {
        let n = h.n_sites();
        let slices = h.slices();
        let periodic = h.lattice().boundary() == Boundary::Periodic;
        let mut net = vec![vec![0.0f64; n]; slices.len()];
        let mut scale = vec![0.0f64; slices.len()];
        let mut last_slice = 0;
        for (i, step) in self.steps.iter().enumerate() {
            let [lo, hi] = step.support;
            if lo >= n || hi >= n {
                return Err(Error::InvalidPlan(format!("step {i}: support {:?} outside {n} sites", step.support)));
            }
            if lo > hi && !periodic {
                return Err(Error::InvalidPlan(format!("step {i}: wrapped support on an open chain")));
            }
            if step.slice_index >= slices.len() {
                return Err(Error::InvalidPlan(format!("step {i}: no slice {}", step.slice_index)));
            }
            if step.slice_index < last_slice {
                return Err(Error::InvalidPlan(format!("step {i}: slices out of order")));
            }
            last_slice = step.slice_index;
            let s = &slices[step.slice_index];
            if !(step.duration > 0.0 && step.duration.is_finite()) {
                return Err(Error::InvalidPlan(format!("step {i}: duration {}", step.duration)));
            }
            if step.duration > (s.t1 - s.t0) * (1.0 + TELESCOPE_TOL) {
                return Err(Error::InvalidPlan(format!(
                    "step {i}: duration {} exceeds slice length {}",
                    step.duration,
                    s.t1 - s.t0
                )));
            }
            for site in step.sites(n) {
                net[step.slice_index][site] += step.signed_duration();
            }
            scale[step.slice_index] += step.duration;
        }
        let mut totals = Vec::with_capacity(slices.len());
        for (k, row) in net.iter().enumerate() {
            let tol = TELESCOPE_TOL * scale[k].max(1.0);
            let first = row[0];
            if let Some(site) = row.iter().position(|&x| (x - first).abs() > tol) {
                return Err(Error::InvalidPlan(format!(
                    "telescoping violated in slice {k}: site 0 evolves {first}, site {site} evolves {}",
                    row[site]
                )));
            }
            if first < -tol || first > (slices[k].t1 - slices[k].t0) * (1.0 + TELESCOPE_TOL) {
                return Err(Error::InvalidPlan(format!("slice {k}: net time {first} out of range")));
            }
            totals.push(first.max(0.0));
        }
        Ok(totals)
    }
}

/// Forward pieces and overlaps of an open chain of `len` sites, in local
/// site indices.
#[derive(Clone, Debug, PartialEq)]
struct OpenLayout {
    pieces: Vec<(usize, usize)>,
    overlaps: Vec<(usize, usize)>,
}

fn open_layout(len: usize, ell: usize, block: usize) -> OpenLayout {
    if len <= block {
        return OpenLayout {
            pieces: vec![(0, len - 1)],
            overlaps: Vec::new(),
        };
    }
    let spacing = block - ell;
    // Leftover sites stay in the rightmost chunk.
    let chunks = len / spacing;
    let overlaps: Vec<(usize, usize)> = (1..chunks)
        .map(|k| {
            let lo = k * spacing - ell / 2;
            (lo, lo + ell - 1)
        })
        .collect();
    let mut pieces = Vec::with_capacity(chunks);
    pieces.push((0, overlaps[0].1));
    for w in overlaps.windows(2) {
        pieces.push((w[0].0, w[1].1));
    }
    pieces.push((overlaps[overlaps.len() - 1].0, len - 1));
    OpenLayout { pieces, overlaps }
}

impl OpenLayout {
    fn layers(&self) -> usize {
        if self.overlaps.is_empty() {
            1
        } else {
            3
        }
    }

    fn steps(&self, offset: usize, duration: f64, slice: usize) -> Vec<BlockStep> {
        let piece = |&(lo, hi): &(usize, usize)| BlockStep::forward(lo + offset, hi + offset, duration, slice);
        let mut out: Vec<BlockStep> = self.pieces.iter().skip(1).step_by(2).map(piece).collect();
        out.extend(
            self.overlaps
                .iter()
                .map(|&(lo, hi)| BlockStep::backward(lo + offset, hi + offset, duration, slice)),
        );
        out.extend(self.pieces.iter().step_by(2).map(piece));
        out
    }
}

fn require_chain(h: &LatticeHamiltonian) -> Result<()> {
    if h.lattice().dimension() != 1 {
        return Err(Error::Unsupported(format!(
            "1D planner called on a {}-dimensional lattice",
            h.lattice().dimension()
        )));
    }
    Ok(())
}

/// Split `[t_start, t_start + total)` into rounds of at most
/// [`MAX_ROUND_TIME`], one slice at a time.
fn time_rounds(h: &LatticeHamiltonian, total: f64) -> Result<Vec<(usize, f64)>> {
    if !(total >= 0.0 && total.is_finite()) {
        return Err(Error::InvalidRequest(format!("total time {total}")));
    }
    let mut rounds = Vec::new();
    let mut remaining = total;
    for (idx, s) in h.slices().iter().enumerate() {
        if remaining <= TELESCOPE_TOL * total.max(1.0) {
            break;
        }
        let len = (s.t1 - s.t0).min(remaining);
        if s.is_time_independent() {
            let k = ((len / MAX_ROUND_TIME) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            rounds.extend(std::iter::repeat_n((idx, len / k as f64), k));
        } else if len <= MAX_ROUND_TIME * (1.0 + 1e-12) {
            rounds.push((idx, len));
        } else {
            return Err(Error::Unsupported(format!(
                "slice {idx} has a coefficient profile and lasts {len} > {MAX_ROUND_TIME}"
            )));
        }
        remaining -= len;
    }
    if remaining > TELESCOPE_TOL * total.max(1.0) {
        return Err(Error::InvalidRequest(format!("{remaining} of the requested time lies beyond the last slice")));
    }
    Ok(rounds)
}

fn check_window(h: &LatticeHamiltonian, t: f64) -> Result<()> {
    let s = &h.slices()[0];
    if !(t > 0.0 && t <= (s.t1 - s.t0) * (1.0 + TELESCOPE_TOL)) {
        return Err(Error::InvalidRequest(format!(
            "block time {t} must lie in (0, {}]",
            s.t1 - s.t0
        )));
    }
    Ok(())
}

/// Site intervals of the staircase with bond cut `(a, b)`: bonds `j ≥ a`,
/// bonds `a..b`, bonds `j < b`, each as the sites they touch.
fn staircase_blocks(n: usize, a: usize, b: usize) -> [(usize, usize); 3] {
    let top = b.min(n - 1);
    [(a, n - 1), (a, top), (0, top)]
}

fn staircase_is_exact(n: usize, a: usize, b: usize) -> bool {
    a == 0 || b + 1 >= n
}

fn check_cut(h: &LatticeHamiltonian, a: usize, b: usize) -> Result<()> {
    require_chain(h)?;
    if h.lattice().boundary() != Boundary::Open {
        return Err(Error::Unsupported("staircase cuts need an open chain".into()));
    }
    if a >= b || b > h.n_sites() {
        return Err(Error::InvalidCut(format!("need 0 ≤ a < b ≤ {}, got a={a}, b={b}", h.n_sites())));
    }
    Ok(())
}

/// Three-step staircase: forward on bonds `j ≥ a`, backward on bonds
/// `a ≤ j < b`, forward on bonds `j < b`, bond `j` joining sites `j` and
/// `j+1`. The overlap holds `ℓ = b − a + 1` spins.
pub fn plan_staircase_1d(
    h: &LatticeHamiltonian,
    t: f64,
    a: usize,
    b: usize,
    model: &dyn ErrorModel,
) -> Result<DecompositionPlan> {
    check_cut(h, a, b)?;
    check_window(h, t)?;
    let n = h.n_sites();
    let [low, mid, high] = staircase_blocks(n, a, b);
    let ell = b - a + 1;
    Ok(DecompositionPlan {
        ell,
        block: n,
        layers: 3,
        steps: vec![
            BlockStep::forward(low.0, low.1, t, 0),
            BlockStep::backward(mid.0, mid.1, t, 0),
            BlockStep::forward(high.0, high.1, t, 0),
        ],
        predicted_error: if staircase_is_exact(n, a, b) { 0.0 } else { model.epsilon(ell, t) },
        error_source: model.source(),
    })
}

/// `reps` consecutive staircases of time `t`, alternating orientation so that
/// neighbouring stacks meet on the same forward block. With `merged`, those
/// meeting blocks become one step of time `2t`.
pub fn plan_stacks(
    h: &LatticeHamiltonian,
    t: f64,
    a: usize,
    b: usize,
    reps: usize,
    merged: bool,
    model: &dyn ErrorModel,
) -> Result<DecompositionPlan> {
    if reps == 0 {
        return Err(Error::InvalidRequest("at least one repetition required".into()));
    }
    if reps == 1 {
        return plan_staircase_1d(h, t, a, b, model);
    }
    check_cut(h, a, b)?;
    check_window(h, t * if merged { 2.0 } else { 1.0 })?;
    let n = h.n_sites();
    let [low, mid, high] = staircase_blocks(n, a, b);
    let mut steps: Vec<BlockStep> = Vec::with_capacity(3 * reps);
    for k in 0..reps {
        let order = if k % 2 == 0 { [high, mid, low] } else { [low, mid, high] };
        for (i, (lo, hi)) in order.into_iter().enumerate() {
            let step = if i == 1 {
                BlockStep::backward(lo, hi, t, 0)
            } else {
                BlockStep::forward(lo, hi, t, 0)
            };
            match steps.last_mut() {
                Some(prev) if merged && prev.support == step.support && prev.direction == step.direction => {
                    prev.duration += t;
                }
                _ => steps.push(step),
            }
        }
    }
    let ell = b - a + 1;
    Ok(DecompositionPlan {
        ell,
        block: n,
        layers: steps.len(),
        steps,
        predicted_error: if staircase_is_exact(n, a, b) {
            0.0
        } else {
            reps as f64 * model.epsilon(ell, t)
        },
        error_source: model.source(),
    })
}

/// Recursive 1D plan for `total_time`, in rounds of at most
/// [`MAX_ROUND_TIME`].
///
/// No forward block exceeds `block` sites except the rightmost, which takes
/// the sites left over when the chain length is not a multiple of
/// `block − ℓ`. A periodic chain gets one extra block across the wrap,
/// overlapping the open remainder in two components of `ℓ` sites.
///
/// `predicted_error` is `ε_LR(ℓ, t_round)` summed over the cuts of every
/// round, the wrap counting as two.
pub fn plan_recursive_1d(
    h: &LatticeHamiltonian,
    total_time: f64,
    ell: usize,
    block: usize,
    model: &dyn ErrorModel,
) -> Result<DecompositionPlan> {
    require_chain(h)?;
    if ell < 2 || block < 2 * ell {
        return Err(Error::InvalidRequest(format!("need ℓ ≥ 2 and block ≥ 2ℓ, got ℓ={ell}, block={block}")));
    }
    let n = h.n_sites();
    let periodic = h.lattice().boundary() == Boundary::Periodic;
    let mut steps = Vec::new();
    let mut predicted = 0.0;
    let mut layers = 0;
    for (slice, d) in time_rounds(h, total_time)? {
        let (round, cuts, depth) = if periodic {
            let gap = (block - 2 * ell).max(1);
            if n < gap + 2 * ell + 1 {
                return Err(Error::InvalidRequest(format!(
                    "periodic chain of {n} sites too short for ℓ={ell}, block={block}"
                )));
            }
            let inner_len = n - gap;
            let inner = open_layout(inner_len, ell, block);
            let mut round = inner.steps(0, d, slice);
            round.push(BlockStep::backward(inner_len - ell, inner_len - 1, d, slice));
            round.push(BlockStep::backward(0, ell - 1, d, slice));
            round.push(BlockStep::forward(inner_len - ell, ell - 1, d, slice));
            (round, inner.overlaps.len() + 2, inner.layers() + 2)
        } else {
            let layout = open_layout(n, ell, block);
            (layout.steps(0, d, slice), layout.overlaps.len(), layout.layers())
        };
        steps.extend(round);
        predicted += cuts as f64 * model.epsilon(ell, d);
        layers = layers.max(depth);
    }
    Ok(DecompositionPlan {
        ell,
        block,
        layers,
        steps,
        predicted_error: predicted,
        error_source: model.source(),
    })
}

/// Block and layer counts of the hyperplane decomposition in `D` dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneAccounting {
    pub side: usize,
    pub dimension: usize,
    pub ell: usize,
    /// Steps per axis of the 1D pattern with `block = 2ℓ`.
    pub blocks_per_axis: usize,
    pub blocks: u64,
    pub layers: u64,
    /// `e^{−μℓ}·L^D/ℓ` for each of the `D` rounds, zero without cuts.
    pub round_errors: Vec<f64>,
    pub total_error: f64,
}

/// Accounting for the decomposition of an `L^D` lattice into hyperplanes,
/// then recursively into blocks. No matrices are built.
pub fn plan_hyperplane_nd(side: usize, dimension: usize, ell: usize, mu: f64) -> Result<HyperplaneAccounting> {
    if !(1..=3).contains(&dimension) {
        return Err(Error::Unsupported(format!("dimension {dimension}")));
    }
    if ell == 0 || ell > side {
        return Err(Error::InvalidRequest(format!("need 1 ≤ ℓ ≤ L, got ℓ={ell}, L={side}")));
    }
    let layout = open_layout(side, ell, 2 * ell);
    let blocks_per_axis = layout.pieces.len() + layout.overlaps.len();
    let per_round = if layout.overlaps.is_empty() {
        0.0
    } else {
        (-mu * ell as f64).exp() * (side as f64).powi(dimension as i32) / ell as f64
    };
    let round_errors = vec![per_round; dimension];
    Ok(HyperplaneAccounting {
        side,
        dimension,
        ell,
        blocks_per_axis,
        blocks: (blocks_per_axis as u64).pow(dimension as u32),
        layers: 3u64.pow(dimension as u32),
        total_error: round_errors.iter().sum(),
        round_errors,
    })
}

/// Layers per unit time for an `α`-colorable tessellation: `2α − 1`.
pub fn layers_for_coloring(alpha: usize) -> Result<usize> {
    if alpha < 2 {
        return Err(Error::InvalidArgument(format!("colorability must be at least 2, got {alpha}")));
    }
    Ok(2 * alpha - 1)
}

/// Overlaps for a chain with at most one strong term.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrongCut {
    pub strong: Option<StrongTerm>,
    /// Norm of the strong term, 1 when there is none.
    pub j: f64,
    /// `ceil(c·ln(L·T/ε))`.
    pub ell: usize,
    /// `ceil(c·ln(J·L·T/ε))`, for the block holding the strong term.
    pub ell_strong: usize,
    /// Time-step subdivision of the strong block, `ceil(J)`.
    pub substeps: usize,
    /// Staircase bond cut `(a, b)` whose boundary term is the strong one.
    pub cut: Option<(usize, usize)>,
}

/// Place a cut at the single strong term of a 1D chain and enlarge its
/// overlap by `c·ln J`.
pub fn isolate_strong_term(h: &LatticeHamiltonian, eps: f64, total_time: f64, c: f64) -> Result<StrongCut> {
    require_chain(h)?;
    if !(eps > 0.0) || !(total_time > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("need ε, T, c > 0, got {eps}, {total_time}, {c}")));
    }
    let report = validate(h)?;
    if report.strong_terms.len() > 1 {
        return Err(Error::Unsupported(format!(
            "{} strong terms; only one can be isolated",
            report.strong_terms.len()
        )));
    }
    let l = h.n_sites() as f64;
    let overlap = |scale: f64| (c * (scale * l * total_time / eps).ln()).ceil().max(1.0) as usize;
    let ell = overlap(1.0);
    let strong = report.strong_terms.into_iter().next();
    let Some(term) = strong else {
        return Ok(StrongCut {
            strong: None,
            j: 1.0,
            ell,
            ell_strong: ell,
            substeps: 1,
            cut: None,
        });
    };
    let j = term.norm;
    let ell_strong = overlap(j);
    // The boundary term of the staircase is the bond (b, b+1).
    let b = term.support[0];
    let a = (b + 1).saturating_sub(ell_strong);
    Ok(StrongCut {
        j,
        ell,
        ell_strong,
        substeps: j.ceil() as usize,
        cut: Some((a, b)),
        strong: Some(term),
    })
}

/// Product of the exact block unitaries of `plan`, in plan order.
pub fn apply_plan(plan: &DecompositionPlan, h: &LatticeHamiltonian) -> Result<DenseUnitary> {
    plan.validate(h)?;
    let n = h.n_sites();
    check_qubits(n)?;
    let dim = 1usize << n;
    let mut u = CMat::identity(dim, dim);
    let mut cache: HashMap<([usize; 2], usize, u64), CMat> = HashMap::new();
    for step in &plan.steps {
        let key = (step.support, step.slice_index, step.duration.to_bits());
        if !cache.contains_key(&key) {
            let sites = step.sites(n);
            let t0 = h.slices()[step.slice_index].t0;
            let local = evolve_sites(h, &sites, t0, t0 + step.duration, DEFAULT_SUBSTEPS_PER_UNIT)?;
            cache.insert(key, local);
        }
        let forward = &cache[&key];
        let gate = match step.direction {
            Direction::Forward => forward.clone(),
            Direction::Backward => forward.adjoint().to_owned(),
        };
        if step.is_contiguous() {
            apply_local(gate.as_ref(), step.support[0], n, u.as_mut());
        } else {
            let full = embed_sites(gate.as_ref(), &step.sites(n), n);
            u = mat_mul(full.as_ref(), u.as_ref());
        }
    }
    DenseUnitary::trusted(u)
}

/// Exact evolution the plan approximates: each used slice evolved for the
/// plan's net time in it, from the slice start.
pub fn plan_target(plan: &DecompositionPlan, h: &LatticeHamiltonian) -> Result<DenseUnitary> {
    let totals = plan.validate(h)?;
    let mut u = DenseUnitary::identity(h.n_sites())?;
    for (k, &tau) in totals.iter().enumerate() {
        if tau > 0.0 {
            let t0 = h.slices()[k].t0;
            let step = evolve(&EvolutionRequest::new(h, t0, t0 + tau))?;
            u = step.compose(&u)?;
        }
    }
    Ok(u)
}

/// `‖apply_plan − plan_target‖`.
pub fn plan_error(plan: &DecompositionPlan, h: &LatticeHamiltonian) -> Result<f64> {
    Ok(apply_plan(plan, h)?.distance(&plan_target(plan, h)?))
}

/// Exact plan errors for one time-independent Hamiltonian.
///
/// The global Hamiltonian and every block Hamiltonian are diagonalized once
/// and reused across plans. When every term conserves the number of set
/// qubits, the error is the largest over popcount sectors of a dense
/// spectral norm. Otherwise it is the largest singular value of
/// `plan − exact` applied to blocks of vectors.
pub struct ExactBench<'a> {
    h: &'a LatticeHamiltonian,
    n: usize,
    global: Global,
    blocks: HashMap<(usize, usize), HermitianEigen>,
    gates: HashMap<(usize, usize, u64), CMat>,
}

enum Global {
    Full {
        eig: HermitianEigen,
        exact: Option<(u64, CMat)>,
    },
    Sectors {
        sectors: Sectors,
        eig: Vec<HermitianEigen>,
        exact: Option<(u64, Vec<CMat>)>,
    },
}

const GATE_CACHE: usize = 48;
const CONSERVATION_TOL: f64 = 1e-14;

impl<'a> ExactBench<'a> {
    pub fn new(h: &'a LatticeHamiltonian) -> Result<Self> {
        if h.slices().len() != 1 || !h.slices()[0].is_time_independent() {
            return Err(Error::Unsupported("exact bench needs one time-independent slice".into()));
        }
        let n = h.n_sites();
        check_qubits(n)?;
        let mut conserving = true;
        for term in h.all_terms() {
            let local = materialize(&term.operator().localize(term.support())?)?;
            conserving &= conserves_popcount(local.as_ref(), CONSERVATION_TOL);
        }
        let full = materialize(&h.operator_at(0, h.t_start(), None)?)?;
        let global = if conserving {
            let sectors = Sectors::new(n);
            let eig = sectors
                .states
                .iter()
                .map(|st| HermitianEigen::new(restrict(full.as_ref(), st).as_ref()))
                .collect::<Result<_>>()?;
            Global::Sectors {
                sectors,
                eig,
                exact: None,
            }
        } else {
            Global::Full {
                eig: HermitianEigen::new(full.as_ref())?,
                exact: None,
            }
        };
        Ok(Self {
            h,
            n,
            global,
            blocks: HashMap::new(),
            gates: HashMap::new(),
        })
    }

    fn block(&mut self, lo: usize, hi: usize) -> Result<&HermitianEigen> {
        if !self.blocks.contains_key(&(lo, hi)) {
            let sites: Vec<usize> = (lo..=hi).collect();
            let op = self.h.operator_at(0, self.h.t_start(), Some(&sites))?.localize(&sites)?;
            let eig = HermitianEigen::new(materialize(&op)?.as_ref())?;
            self.blocks.insert((lo, hi), eig);
        }
        Ok(&self.blocks[&(lo, hi)])
    }

    /// `‖plan − e^{−iHτ}‖` with `τ` the plan's net time.
    pub fn plan_error(&mut self, plan: &DecompositionPlan) -> Result<f64> {
        let tau = plan.validate(self.h)?[0];
        if let Some(step) = plan.steps.iter().find(|s| !s.is_contiguous()) {
            return Err(Error::Unsupported(format!("wrapped support {:?} in exact bench", step.support)));
        }
        let mut gates = Vec::with_capacity(plan.steps.len());
        for step in &plan.steps {
            let [lo, hi] = step.support;
            self.block(lo, hi)?;
            gates.push((lo, hi, step.signed_duration()));
        }
        match &mut self.global {
            Global::Full { eig, exact } => {
                if exact.as_ref().map(|(bits, _)| *bits) != Some(tau.to_bits()) {
                    *exact = Some((tau.to_bits(), eig.exp_matrix(tau)));
                }
                let op = PlanDifference {
                    n: self.n,
                    gates: gates
                        .iter()
                        .map(|&(lo, hi, t)| SpectralGate::new(&self.blocks[&(lo, hi)], lo, t))
                        .collect(),
                    exact: exact.as_ref().map(|(_, e)| e.as_ref()).expect("cached above"),
                };
                Ok(largest_singular_value(&op))
            }
            Global::Sectors { sectors, eig, exact } => {
                if exact.as_ref().map(|(bits, _)| *bits) != Some(tau.to_bits()) {
                    *exact = Some((tau.to_bits(), eig.iter().map(|e| e.exp_matrix(tau)).collect()));
                }
                let exact = &exact.as_ref().expect("cached above").1;
                if self.gates.len() + gates.len() > GATE_CACHE {
                    self.gates.clear();
                }
                for &(lo, hi, t) in &gates {
                    self.gates
                        .entry((lo, hi, t.to_bits()))
                        .or_insert_with(|| self.blocks[&(lo, hi)].exp_matrix(t));
                }
                let mut worst = 0.0f64;
                for (states, e) in sectors.states.iter().zip(exact) {
                    let mut product = CMat::identity(states.len(), states.len());
                    for &(lo, hi, t) in &gates {
                        let g = &self.gates[&(lo, hi, t.to_bits())];
                        let local = restrict_local(g.as_ref(), lo, self.n, states, &sectors.position);
                        product = mat_mul(local.as_ref(), product.as_ref());
                    }
                    worst = worst.max(svd_norm((&product - e).as_ref()));
                }
                Ok(worst)
            }
        }
    }
}

/// `e^{−iHt} = V diag(e^{−iλt}) V†` on the qubits from `first`.
struct SpectralGate<'e> {
    vectors: MatRef<'e, c64>,
    phases: Vec<c64>,
    first: usize,
}

impl<'e> SpectralGate<'e> {
    fn new(eig: &'e HermitianEigen, first: usize, t: f64) -> Self {
        Self {
            vectors: eig.eigenvectors.as_ref(),
            phases: eig.eigenvalues.iter().map(|&l| c64::from_polar(1.0, -l * t)).collect(),
            first,
        }
    }

    fn apply(&self, n: usize, mut x: MatMut<'_, c64>, adjoint: bool) {
        let k = self.vectors.nrows().trailing_zeros() as usize;
        apply_local(self.vectors.adjoint(), self.first, n, x.as_mut());
        let shift = n - self.first - k;
        let mask = (1usize << k) - 1;
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                let p = self.phases[(i >> shift) & mask];
                x[(i, j)] *= if adjoint { p.conj() } else { p };
            }
        }
        apply_local(self.vectors, self.first, n, x);
    }
}

struct PlanDifference<'e> {
    n: usize,
    gates: Vec<SpectralGate<'e>>,
    exact: MatRef<'e, c64>,
}

impl PlanDifference<'_> {
    fn difference(&self, x: MatRef<'_, c64>, mut y: MatMut<'_, c64>, adjoint: bool) {
        y.copy_from(x);
        if adjoint {
            self.gates.iter().rev().for_each(|g| g.apply(self.n, y.as_mut(), true));
            matmul(y, Accum::Add, self.exact.adjoint(), x, c64::new(-1.0, 0.0), Par::Seq);
        } else {
            self.gates.iter().for_each(|g| g.apply(self.n, y.as_mut(), false));
            matmul(y, Accum::Add, self.exact, x, c64::new(-1.0, 0.0), Par::Seq);
        }
    }
}

impl LinearOperator for PlanDifference<'_> {
    fn nrows(&self) -> usize {
        1 << self.n
    }

    fn ncols(&self) -> usize {
        1 << self.n
    }

    fn apply(&self, x: &[c64], y: &mut [c64]) {
        let d = 1 << self.n;
        self.difference(MatRef::from_column_major_slice(x, d, 1), MatMut::from_column_major_slice_mut(y, d, 1), false);
    }

    fn apply_adjoint(&self, x: &[c64], y: &mut [c64]) {
        let d = 1 << self.n;
        self.difference(MatRef::from_column_major_slice(x, d, 1), MatMut::from_column_major_slice_mut(y, d, 1), true);
    }

    fn apply_block(&self, x: MatRef<'_, c64>, y: MatMut<'_, c64>) {
        self.difference(x, y, false);
    }

    fn apply_adjoint_block(&self, x: MatRef<'_, c64>, y: MatMut<'_, c64>) {
        self.difference(x, y, true);
    }
}
