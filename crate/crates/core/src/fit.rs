//! Empirical decomposition-error model and the block-count budget.

use std::io::{Read, Write};

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use serde::{Deserialize, Serialize};

use crate::bounds::ln_factorial;
use crate::error::{Error, Result};
use crate::lattice::LatticeHamiltonian;
use crate::operator::operator_norm;

/// One measured staircase error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub n: usize,
    pub t: f64,
    pub a: usize,
    pub ell: usize,
    pub error: f64,
}

/// Where a predicted error came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSource {
    Fit,
    Analytic,
}

/// Error `ε_LR(ℓ, t)` of one staircase cut with overlap `ℓ` over time `t`.
pub trait ErrorModel {
    fn epsilon(&self, ell: usize, t: f64) -> f64;
    fn source(&self) -> ErrorSource;
}

/// `ε_LR = ampl·(t·vel/(ℓ + offset))^{ℓ + offset}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub ampl: f64,
    pub vel: f64,
    pub offset: f64,
    /// Coefficient of determination of `ln ε` on the fitted samples.
    #[serde(default)]
    pub r2_log: f64,
}

impl FitModel {
    pub fn new(ampl: f64, vel: f64, offset: f64) -> Self {
        Self {
            ampl,
            vel,
            offset,
            r2_log: f64::NAN,
        }
    }

    /// `ln ε_LR(ℓ, t)`.
    pub fn ln_epsilon(&self, ell: usize, t: f64) -> f64 {
        ln_model(self.ampl.ln(), self.vel.ln(), self.offset, ell as f64, t)
    }

    pub fn is_valid_at(&self, ell: usize) -> bool {
        self.ampl > 0.0 && self.vel > 0.0 && ell as f64 + self.offset > 0.0
    }
}

impl ErrorModel for FitModel {
    fn epsilon(&self, ell: usize, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        self.ln_epsilon(ell, t).exp()
    }

    fn source(&self) -> ErrorSource {
        ErrorSource::Fit
    }
}

fn ln_model(ln_ampl: f64, ln_vel: f64, offset: f64, ell: f64, t: f64) -> f64 {
    let p = ell + offset;
    ln_ampl + p * (t.ln() + ln_vel - p.ln())
}

/// Cut error from the strict Lieb-Robinson bound, integrated over the
/// interaction picture of the boundary terms:
/// `w·(2ζ₀)^ℓ·t^{ℓ+1}/(ℓ+1)!`, minimized over overlaps up to `ℓ` and capped
/// at 2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    pub zeta0: f64,
    /// `max_cut Σ_{X crossing the cut} |X|·‖h_X‖`.
    pub boundary_weight: f64,
}

impl AnalyticModel {
    /// Constants of a 1D Hamiltonian: `ζ₀` from the bound inputs and the
    /// heaviest set of terms straddling any cut between neighbouring sites.
    pub fn from_hamiltonian(h: &LatticeHamiltonian) -> Result<Self> {
        let inputs = crate::lattice::extract_bound_inputs(h, 1.0)?;
        let n = h.n_sites();
        let mut weights = vec![0.0f64; n];
        for term in h.all_terms() {
            let sup = term.support();
            let (lo, hi) = (sup[0], sup[sup.len() - 1]);
            let w = sup.len() as f64 * operator_norm(term.operator())? * term.profile_bound();
            for cut in lo + 1..=hi {
                weights[cut] += w;
            }
        }
        Ok(Self {
            zeta0: inputs.zeta0,
            boundary_weight: weights.into_iter().fold(0.0, f64::max),
        })
    }
}

impl ErrorModel for AnalyticModel {
    fn epsilon(&self, ell: usize, t: f64) -> f64 {
        let t = t.abs();
        if t == 0.0 || self.boundary_weight == 0.0 {
            return 0.0;
        }
        let x = 2.0 * self.zeta0;
        let best = (0..=ell)
            .map(|l| {
                let ln = self.boundary_weight.ln() + l as f64 * x.ln() + (l + 1) as f64 * t.ln() - ln_factorial(l + 1);
                ln.exp()
            })
            .fold(f64::INFINITY, f64::min);
        best.min(2.0)
    }

    fn source(&self) -> ErrorSource {
        ErrorSource::Analytic
    }
}

/// Result of [`fit`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub model: FitModel,
    pub samples_used: usize,
    /// Samples dropped for a zero (or non-positive-time) error.
    pub zeros_excluded: usize,
    /// Root-mean-square residual of `ln ε`.
    pub rms_log_residual: f64,
    /// Index into the start grid of the winning start.
    pub start_index: usize,
}

pub const START_AMPL: [f64; 3] = [0.1, 1.0, 10.0];
pub const START_VEL: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const START_OFFSET: [f64; 3] = [0.0, 1.0, 2.0];
pub const MAX_SIMPLEX_ITERATIONS: u64 = 10_000;

struct LogResiduals<'a> {
    points: &'a [(f64, f64, f64)],
    min_ell: f64,
}

impl LogResiduals<'_> {
    fn sse(&self, p: &[f64]) -> f64 {
        let (ln_ampl, ln_vel, offset) = (p[0], p[1], p[2]);
        if !(offset > -self.min_ell) || !p.iter().all(|x| x.is_finite()) {
            return 1e300;
        }
        let s: f64 = self
            .points
            .iter()
            .map(|&(ell, t, ln_err)| {
                let r = ln_model(ln_ampl, ln_vel, offset, ell, t) - ln_err;
                r * r
            })
            .sum();
        if s.is_finite() {
            s
        } else {
            1e300
        }
    }
}

impl CostFunction for LogResiduals<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.sse(p))
    }
}

fn simplex_descent(obj: LogResiduals<'_>, start: [f64; 3]) -> Result<(Vec<f64>, f64)> {
    let steps = [0.5, 0.25, 0.5];
    let mut simplex = vec![start.to_vec()];
    for (i, s) in steps.iter().enumerate() {
        let mut v = start.to_vec();
        v[i] += s;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-15)
        .map_err(|e| Error::NoConvergence(e.to_string()))?;
    let res = Executor::new(obj, solver)
        .configure(|s| s.max_iters(MAX_SIMPLEX_ITERATIONS))
        .run()
        .map_err(|e| Error::NoConvergence(e.to_string()))?;
    let state = res.state();
    let best = state
        .best_param
        .clone()
        .ok_or_else(|| Error::NoConvergence("simplex produced no point".into()))?;
    Ok((best, state.best_cost))
}

/// Log-space least-squares fit of [`FitModel`] by Nelder-Mead from every point
/// of the start grid, followed by one restart from the best vertex.
pub fn fit(samples: &[ErrorSample]) -> Result<FitReport> {
    let points: Vec<(f64, f64, f64)> = samples
        .iter()
        .filter(|s| s.error > 0.0 && s.t > 0.0)
        .map(|s| (s.ell as f64, s.t, s.error.ln()))
        .collect();
    let zeros_excluded = samples.len() - points.len();
    let mut ells: Vec<usize> = samples
        .iter()
        .filter(|s| s.error > 0.0 && s.t > 0.0)
        .map(|s| s.ell)
        .collect();
    ells.sort_unstable();
    ells.dedup();
    if points.len() < 6 || ells.len() < 3 {
        return Err(Error::DegenerateData(format!(
            "need ≥ 6 positive samples over ≥ 3 overlaps, got {} samples over {} overlaps",
            points.len(),
            ells.len()
        )));
    }
    let min_ell = ells[0] as f64;
    let objective = || LogResiduals {
        points: &points,
        min_ell,
    };

    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    let mut index = 0;
    for &a in &START_AMPL {
        for &v in &START_VEL {
            for &o in &START_OFFSET {
                let start = [a.ln(), v.ln(), o];
                if objective().sse(&start) < 1e300 {
                    let (p, c) = simplex_descent(objective(), start)?;
                    if best.as_ref().is_none_or(|b| c < b.1) {
                        best = Some((p, c, index));
                    }
                }
                index += 1;
            }
        }
    }
    let (p, c, start_index) = best.ok_or_else(|| Error::DegenerateData("no feasible start point".into()))?;
    let (p, c) = match simplex_descent(objective(), [p[0], p[1], p[2]])? {
        (q, d) if d < c => (q, d),
        _ => (p, c),
    };

    let mean = points.iter().map(|x| x.2).sum::<f64>() / points.len() as f64;
    let sst: f64 = points.iter().map(|x| (x.2 - mean).powi(2)).sum();
    let r2_log = if sst > 0.0 { 1.0 - c / sst } else { 1.0 };
    Ok(FitReport {
        model: FitModel {
            ampl: p[0].exp(),
            vel: p[1].exp(),
            offset: p[2],
            r2_log,
        },
        samples_used: points.len(),
        zeros_excluded,
        rms_log_residual: (c / points.len() as f64).sqrt(),
        start_index,
    })
}

/// Fractions of the total error assigned to decomposition and to block
/// simulation, per block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSplit {
    pub lr: f64,
    pub block: f64,
}

impl Default for BudgetSplit {
    fn default() -> Self {
        Self {
            lr: 1.0 / 3.0,
            block: 1.0 / 3.0,
        }
    }
}

impl BudgetSplit {
    pub fn new(lr: f64, block: f64) -> Result<Self> {
        if !(lr > 0.0 && block > 0.0 && lr + block <= 1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "budget fractions must be positive with sum ≤ 1, got {lr} and {block}"
            )));
        }
        Ok(Self { lr, block })
    }
}

/// Number of blocks to simulate `T` on `n` sites with block time `t` and
/// overlap `ℓ`: `2Tn/(tℓ)`, or `3Tn/(2tℓ)` with merged stacks.
pub fn block_count(total_time: f64, n: usize, t: f64, ell: usize, merged: bool) -> f64 {
    let c = if merged { 1.5 } else { 2.0 };
    c * total_time * n as f64 / (t * ell as f64)
}

/// Arguments of [`solve_budget`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetRequest {
    pub total_time: f64,
    pub n: usize,
    pub ell: usize,
    pub eps: f64,
    pub merged: bool,
    pub split: BudgetSplit,
    pub t_max: f64,
}

impl BudgetRequest {
    pub fn new(total_time: f64, n: usize, ell: usize, eps: f64) -> Self {
        Self {
            total_time,
            n,
            ell,
            eps,
            merged: false,
            split: BudgetSplit::default(),
            t_max: 1.0,
        }
    }

    pub fn merged(mut self, merged: bool) -> Self {
        self.merged = merged;
        self
    }

    pub fn with_split(mut self, split: BudgetSplit) -> Self {
        self.split = split;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetSolution {
    /// Block evolution time.
    pub t: f64,
    /// `ceil` of the block count.
    pub m: u64,
    /// Block count before rounding; the defining equation uses this value.
    pub m_exact: f64,
    /// `ε_LR(t, ℓ)` per cut.
    pub eps_lr: f64,
    /// Per-block simulation error, `split.block·ε/m`.
    pub eps_block: f64,
}

/// Block time `t` with `ε_LR(t, ℓ) = split.lr·ε/m(t)`, by bisection on
/// `ln t ∈ (0, t_max]`.
pub fn solve_budget(req: &BudgetRequest, model: &dyn ErrorModel) -> Result<BudgetSolution> {
    let BudgetRequest {
        total_time,
        n,
        ell,
        eps,
        merged,
        split,
        t_max,
    } = *req;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("ε must lie in (0, 1), got {eps}")));
    }
    if !(total_time > 0.0 && total_time.is_finite()) || n == 0 || ell == 0 || !(t_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid budget request T={total_time}, n={n}, ℓ={ell}, t_max={t_max}"
        )));
    }
    let target = |t: f64| split.lr * eps / block_count(total_time, n, t, ell, merged);
    let gap = |t: f64| model.epsilon(ell, t).ln() - target(t).ln();
    let t = if gap(t_max) <= 0.0 {
        t_max
    } else {
        let mut lo = t_max * 1e-12;
        if gap(lo) > 0.0 {
            return Err(Error::Infeasible(format!(
                "ε_LR at t = {lo:e} is {:e}, above the per-cut target {:e}",
                model.epsilon(ell, lo),
                target(lo)
            )));
        }
        let mut hi = t_max;
        while hi / lo > 1.0 + 1e-13 {
            let mid = (lo * hi).sqrt();
            if gap(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let m_exact = block_count(total_time, n, t, ell, merged);
    let m = m_exact.ceil().max(1.0) as u64;
    Ok(BudgetSolution {
        t,
        m,
        m_exact,
        eps_lr: model.epsilon(ell, t),
        eps_block: split.block * eps / m as f64,
    })
}

/// Samples as CSV with header `n,t,a,ell,error`.
pub fn write_samples<W: Write>(out: W, samples: &[ErrorSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    if samples.is_empty() {
        w.write_record(["n", "t", "a", "ell", "error"])?;
    }
    w.flush()?;
    Ok(())
}

/// Parse CSV written by [`write_samples`]; the header is mandatory.
pub fn read_samples<R: Read>(input: R) -> Result<Vec<ErrorSample>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let expected = ["n", "t", "a", "ell", "error"];
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::InvalidArgument(format!(
            "CSV header must be n,t,a,ell,error, got {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let samples: Vec<ErrorSample> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if let Some(bad) = samples.iter().find(|s| !(s.error >= 0.0 && s.error <= 2.0 + 1e-9) || !(s.t >= 0.0)) {
        return Err(Error::InvalidArgument(format!("sample out of range: {bad:?}")));
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::heisenberg_random;
    use proptest::prelude::*;

    fn synthetic(model: &FitModel) -> Vec<ErrorSample> {
        let mut out = Vec::new();
        for ell in 2..=7 {
            for t in [0.5, 1.0, 2.0] {
                out.push(ErrorSample {
                    n: 11,
                    t,
                    a: 1,
                    ell,
                    error: model.epsilon(ell, t),
                });
            }
        }
        out
    }

    #[test]
    fn recovers_exact_parameters() {
        let truth = FitModel::new(0.5, 2.0, 1.0);
        let report = fit(&synthetic(&truth)).unwrap();
        let m = report.model;
        assert!(((m.ampl - 0.5) / 0.5).abs() < 1e-4, "{m:?}");
        assert!(((m.vel - 2.0) / 2.0).abs() < 1e-4, "{m:?}");
        assert!((m.offset - 1.0).abs() < 1e-4, "{m:?}");
        assert!(m.r2_log > 0.999_999);
    }

    #[test]
    fn scaling_errors_scales_amplitude() {
        let truth = FitModel::new(0.5, 2.0, 1.0);
        let base = fit(&synthetic(&truth)).unwrap().model;
        let scaled: Vec<ErrorSample> = synthetic(&truth)
            .into_iter()
            .map(|s| ErrorSample { error: s.error * 0.01, ..s })
            .collect();
        let m = fit(&scaled).unwrap().model;
        assert!((m.ampl / base.ampl - 0.01).abs() < 1e-4 * 0.01);
        assert!((m.vel / base.vel - 1.0).abs() < 1e-4);
        assert!((m.offset - base.offset).abs() < 1e-4);
    }

    #[test]
    fn fit_is_reproducible() {
        let truth = FitModel::new(3.0, 0.7, 0.4);
        let mut s = synthetic(&truth);
        for (i, x) in s.iter_mut().enumerate() {
            x.error *= 1.0 + 0.05 * ((i * 7 % 5) as f64 - 2.0);
        }
        let a = fit(&s).unwrap();
        let b = fit(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_inputs() {
        let truth = FitModel::new(0.5, 2.0, 1.0);
        let single_ell: Vec<ErrorSample> = synthetic(&truth).into_iter().filter(|s| s.ell == 3).collect();
        assert!(matches!(fit(&single_ell), Err(Error::DegenerateData(_))));
        let mut with_zero = synthetic(&truth);
        with_zero[0].error = 0.0;
        assert_eq!(fit(&with_zero).unwrap().zeros_excluded, 1);
    }

    #[test]
    fn block_counts() {
        assert_eq!(block_count(10.0, 10, 1.0, 5, true), 30.0);
        assert_eq!(block_count(10.0, 10, 1.0, 5, false), 40.0);
    }

    #[test]
    fn budget_fixed_point() {
        let model = FitModel::new(0.5, 2.0, 1.0);
        let req = BudgetRequest::new(50.0, 50, 8, 1e-3);
        let sol = solve_budget(&req, &model).unwrap();
        assert!(sol.t < 1.0);
        let ratio = model.epsilon(8, sol.t) * 3.0 * sol.m_exact / 1e-3;
        assert!((0.999..=1.001).contains(&ratio), "{ratio}");
        assert_eq!(sol.m, sol.m_exact.ceil() as u64);
        // Budget invariant with the rounded block count.
        assert!(sol.m as f64 * (sol.eps_lr + sol.eps_block) <= 1e-3);

        let merged = solve_budget(&req.merged(true), &model).unwrap();
        assert!((merged.m_exact - block_count(50.0, 50, merged.t, 8, true)).abs() < 1e-9);
    }

    #[test]
    fn slack_budget_hits_time_cap() {
        let model = FitModel::new(1e-12, 0.1, 1.0);
        let sol = solve_budget(&BudgetRequest::new(1.0, 4, 8, 0.5), &model).unwrap();
        assert_eq!(sol.t, 1.0);
        assert_eq!(sol.m, 1);
    }

    #[test]
    fn infeasible_budget() {
        // ℓ + offset < 1: ε_LR shrinks slower than the target as t → 0.
        let model = FitModel::new(10.0, 1.0, -1.7);
        assert!(matches!(
            solve_budget(&BudgetRequest::new(10.0, 10, 2, 1e-3), &model),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn analytic_model_from_heisenberg() {
        let h = heisenberg_random(6, 3).unwrap();
        let m = AnalyticModel::from_hamiltonian(&h).unwrap();
        assert_eq!(m.source(), ErrorSource::Analytic);
        // One bond crosses each cut; ‖XX + YY + ZZ + z Z‖ ≥ 3.
        assert!(m.boundary_weight >= 6.0 && m.boundary_weight <= 2.0 * 6.0);
        assert_eq!(m.epsilon(4, 0.0), 0.0);
        assert!(m.epsilon(4, 1.0) <= 2.0);
        assert!(m.epsilon(30, 0.1) < m.epsilon(3, 0.1));
    }

    #[test]
    fn csv_round_trip() {
        let samples = synthetic(&FitModel::new(0.5, 2.0, 1.0));
        let mut buf = Vec::new();
        write_samples(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n,t,a,ell,error\n"));
        assert_eq!(read_samples(buf.as_slice()).unwrap(), samples);
        assert!(read_samples("n,t,ell,error\n1,1,2,0.1\n".as_bytes()).is_err());
        assert!(read_samples("n,t,a,ell,error\n1,1,0,2,3.5\n".as_bytes()).is_err());
        let mut empty = Vec::new();
        write_samples(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "n,t,a,ell,error\n");
    }

    #[test]
    fn fit_json_shape() {
        let v = serde_json::to_value(FitModel {
            ampl: 1.0,
            vel: 2.0,
            offset: 0.5,
            r2_log: 0.99,
        })
        .unwrap();
        assert_eq!(v, serde_json::json!({"ampl": 1.0, "vel": 2.0, "offset": 0.5, "r2_log": 0.99}));
    }

    proptest! {
        #[test]
        fn larger_budget_never_shortens_blocks(eps in 1e-8f64..0.4, factor in 1.0f64..2.4) {
            let model = FitModel::new(0.5, 2.0, 1.0);
            let a = solve_budget(&BudgetRequest::new(20.0, 30, 6, eps), &model).unwrap();
            let b = solve_budget(&BudgetRequest::new(20.0, 30, 6, (eps * factor).min(0.99)), &model).unwrap();
            prop_assert!(b.t >= a.t);
        }
    }
}
