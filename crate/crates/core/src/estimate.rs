//! Gate-count estimates, error sweeps and plan verification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{solve_budget, BudgetRequest, BudgetSplit, ErrorModel, ErrorSample, ErrorSource};
use crate::lattice::{heisenberg_benchmark, heisenberg_random, LatticeHamiltonian};
use crate::operator::operator_norm;
use crate::planner::{plan_error, plan_staircase_1d, DecompositionPlan, ExactBench};
use crate::qsp::jacobi_anger;

/// Largest chain accepted by [`sweep`].
pub const MAX_SWEEP_SITES: usize = 11;

/// Per-query cost `c_O·M + c_G·(arbitrary_prep ? M : log₂M)` in logical gate
/// units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub c_o: f64,
    pub c_g: f64,
    pub arbitrary_prep: bool,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            c_o: 1.0,
            c_g: 1.0,
            arbitrary_prep: true,
        }
    }
}

impl CostModel {
    pub fn query_cost(&self, m_terms: usize) -> f64 {
        let m = m_terms.max(1) as f64;
        let prep = if self.arbitrary_prep { m } else { m.log2().ceil().max(1.0) };
        self.c_o * m + self.c_g * prep
    }
}

/// One class of identical blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockClass {
    pub sites: usize,
    pub count: u64,
    pub time: f64,
    /// Largest `Σ|coefficient|` over windows of this size.
    pub alpha: f64,
    /// Largest number of Pauli terms over windows of this size.
    pub terms: usize,
    pub queries: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBudget {
    /// `m·ε_LR`.
    pub eps_lr_total: f64,
    /// `m·ε_□`.
    pub eps_block_total: f64,
    /// `ε` minus both totals.
    pub headroom: f64,
}

/// Resources to simulate `e^{−iTH}` to error `ε` with the block
/// decomposition and QSP blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceReport {
    pub n: usize,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub eps: f64,
    pub ell: usize,
    pub merged: bool,
    pub t_block: f64,
    pub m_blocks: u64,
    /// Query order of the largest block class.
    pub q_per_block: usize,
    pub queries_total: u64,
    pub gate_estimate: f64,
    /// Whole-system QSP with the same cost model.
    pub reference_full_qsp: f64,
    pub reference_n_cubed: f64,
    pub blocks: Vec<BlockClass>,
    pub error_budget: ErrorBudget,
    pub error_source: ErrorSource,
    pub split: BudgetSplit,
    pub cost_model: CostModel,
}

impl ResourceReport {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Clone, Debug)]
pub struct EstimateRequest {
    pub total_time: f64,
    pub eps: f64,
    pub ell: usize,
    pub merged: bool,
    pub split: BudgetSplit,
    pub cost: CostModel,
}

impl EstimateRequest {
    pub fn new(total_time: f64, eps: f64, ell: usize) -> Self {
        Self {
            total_time,
            eps,
            ell,
            merged: false,
            split: BudgetSplit::default(),
            cost: CostModel::default(),
        }
    }
}

/// `(Σ|c|, term count)` of every window of `size` consecutive sites, maximized.
fn window_weights(h: &LatticeHamiltonian, size: usize) -> Result<(f64, usize)> {
    let n = h.n_sites();
    let size = size.min(n);
    let mut terms = Vec::new();
    for term in h.all_terms() {
        let s = term.support();
        let one_norm = term.operator().one_norm() * term.profile_bound();
        terms.push((s[0], s[s.len() - 1], one_norm, term.operator().terms().len()));
    }
    let mut best = (0.0f64, 0usize);
    for lo in 0..=n - size {
        let hi = lo + size - 1;
        let (mut alpha, mut count) = (0.0, 0);
        for &(a, b, w, c) in &terms {
            if a >= lo && b <= hi {
                alpha += w;
                count += c;
            }
        }
        best.0 = best.0.max(alpha);
        best.1 = best.1.max(count);
    }
    Ok(best)
}

/// Gate estimate for a 1D Hamiltonian.
///
/// Unmerged, the `m` blocks are half of `ℓ` sites and half of `2ℓ` sites,
/// all for time `t`. Merged, two thirds have `ℓ` sites for `t` and one third
/// `2ℓ` sites for `2t`. Each block is simulated to `ε_□ = split.block·ε/m`.
pub fn estimate(h: &LatticeHamiltonian, req: &EstimateRequest, model: &dyn ErrorModel) -> Result<ResourceReport> {
    if h.lattice().dimension() != 1 {
        return Err(Error::Unsupported("estimates cover 1D chains".into()));
    }
    let n = h.n_sites();
    let budget = solve_budget(
        &BudgetRequest::new(req.total_time, n, req.ell, req.eps)
            .merged(req.merged)
            .with_split(req.split),
        model,
    )?;
    let m = budget.m;
    let eps_lr_total = m as f64 * budget.eps_lr;
    // Rounding m up may eat into the block share when the split leaves no
    // headroom.
    let eps_block = budget.eps_block.min((req.eps - eps_lr_total) / m as f64);
    if !(eps_block > 0.0) {
        return Err(Error::Infeasible(format!("no error left for block simulation at m = {m}")));
    }
    let t = budget.t;
    let classes = if req.merged {
        let small = (2 * m).div_ceil(3);
        vec![(req.ell, small, t), (2 * req.ell, m - small, 2.0 * t)]
    } else {
        let small = m.div_ceil(2);
        vec![(req.ell, small, t), (2 * req.ell, m - small, t)]
    };
    let mut blocks = Vec::new();
    let mut queries_total = 0u64;
    let mut gate_estimate = 0.0;
    for (sites, count, time) in classes {
        if count == 0 {
            continue;
        }
        let (alpha, terms) = window_weights(h, sites)?;
        let queries = jacobi_anger(alpha * time, eps_block)?.order;
        queries_total += count * queries as u64;
        gate_estimate += count as f64 * queries as f64 * req.cost.query_cost(terms);
        blocks.push(BlockClass {
            sites: sites.min(n),
            count,
            time,
            alpha,
            terms,
            queries,
        });
    }
    let (alpha_full, terms_full) = window_weights(h, n)?;
    let q_full = jacobi_anger(alpha_full * req.total_time, req.split.block * req.eps)?.order;
    let q_per_block = blocks.iter().map(|b| b.queries).max().unwrap_or(0);
    Ok(ResourceReport {
        n,
        total_time: req.total_time,
        eps: req.eps,
        ell: req.ell,
        merged: req.merged,
        t_block: t,
        m_blocks: m,
        q_per_block,
        queries_total,
        gate_estimate,
        reference_full_qsp: q_full as f64 * req.cost.query_cost(terms_full),
        reference_n_cubed: (n as f64).powi(3),
        blocks,
        error_budget: ErrorBudget {
            eps_lr_total,
            eps_block_total: m as f64 * eps_block,
            headroom: req.eps - eps_lr_total - m as f64 * eps_block,
        },
        error_source: model.source(),
        split: req.split,
        cost_model: req.cost,
    })
}

/// Grid of staircase errors on a random-field Heisenberg chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub ells: Vec<usize>,
    pub t_grid: Vec<f64>,
    /// Overlap starts `a`; every interior position when absent.
    #[serde(default)]
    pub positions: Option<Vec<usize>>,
    /// Rescale the chain to unit largest term norm, measuring `t` in those
    /// units.
    #[serde(default = "unit_norm_default")]
    pub unit_norm: bool,
}

fn unit_norm_default() -> bool {
    true
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn check(&self) -> Result<()> {
        if self.n > MAX_SWEEP_SITES {
            return Err(Error::DimensionOverflow {
                qubits: self.n,
                cap: MAX_SWEEP_SITES,
            });
        }
        if self.n < 4 {
            return Err(Error::InvalidArgument(format!("sweep needs n ≥ 4, got {}", self.n)));
        }
        if let Some(&t) = self.t_grid.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument(format!("time {t} in grid")));
        }
        if let Some(&ell) = self.ells.iter().find(|&&l| l < 2 || l + 2 > self.n) {
            return Err(Error::InvalidArgument(format!("overlap {ell} does not fit an interior cut of {} sites", self.n)));
        }
        Ok(())
    }
}

/// Staircase error for every `(t, ℓ, a)` of the grid, in that nesting order.
///
/// Interior cuts have `1 ≤ a` and `a + ℓ ≤ n − 1`, so both outer blocks are
/// proper. `t = 0` rows are exact and reported as zero.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<ErrorSample>> {
    cfg.check()?;
    let h = if cfg.unit_norm {
        heisenberg_benchmark(cfg.n, cfg.seed)?
    } else {
        heisenberg_random(cfg.n, cfg.seed)?
    };
    let mut bench = ExactBench::new(&h)?;
    let dummy = crate::fit::FitModel::new(1.0, 1.0, 0.0);
    let mut out = Vec::new();
    for &t in &cfg.t_grid {
        for &ell in &cfg.ells {
            let positions: Vec<usize> = match &cfg.positions {
                Some(p) => p.iter().copied().filter(|&a| a >= 1 && a + ell < cfg.n).collect(),
                None => (1..cfg.n - ell).collect(),
            };
            for a in positions {
                let error = if t == 0.0 {
                    0.0
                } else {
                    bench.plan_error(&plan_staircase_1d(&h, t, a, a + ell - 1, &dummy)?)?
                };
                out.push(ErrorSample { n: cfg.n, t, a, ell, error });
            }
        }
    }
    Ok(out)
}

/// Outcome of [`verify`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n: usize,
    pub steps: usize,
    /// Net evolution time per slice.
    pub slice_times: Vec<f64>,
    pub measured_error: f64,
    pub predicted_error: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Spectral distance between the plan and the exact evolution it targets,
/// checked against `slack·predicted_error`.
pub fn verify(plan: &DecompositionPlan, h: &LatticeHamiltonian, slack: f64) -> Result<VerifyReport> {
    let slice_times = plan.validate(h)?;
    let bench_ok = h.slices().len() == 1
        && h.slices()[0].is_time_independent()
        && plan.steps.iter().all(|s| s.is_contiguous());
    let measured_error = if bench_ok {
        ExactBench::new(h)?.plan_error(plan)?
    } else {
        plan_error(plan, h)?
    };
    Ok(VerifyReport {
        n: h.n_sites(),
        steps: plan.steps.len(),
        slice_times,
        measured_error,
        predicted_error: plan.predicted_error,
        slack,
        passed: measured_error <= slack * plan.predicted_error + 1e-10,
    })
}

/// `max ‖h_X‖` over the terms of `h`.
pub fn max_term_norm(h: &LatticeHamiltonian) -> Result<f64> {
    h.all_terms()
        .into_iter()
        .map(|t| operator_norm(t.operator()).map(|v| v * t.profile_bound()))
        .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
}
