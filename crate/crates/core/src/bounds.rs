//! Analytic Lieb-Robinson bounds with explicit constants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::BoundInputs;

/// Largest overlap [`solve_overlap`] will try.
pub const MAX_OVERLAP: usize = 10_000;

/// Which quantity a bound controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `‖[A(t), B]‖`.
    Commutator,
    /// `‖A(t; H) − A(t; H_Ω)‖`, with the distance measured to `Ω^c`.
    Restriction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Strict,
    CommutatorAware,
}

/// Arguments shared by the bound evaluators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundQuery {
    pub inputs: BoundInputs,
    pub t: f64,
    /// `⌊dist(X, Y)⌋`.
    pub ell: usize,
    /// `|X|`.
    pub x_size: usize,
    pub norm_a: f64,
    pub norm_b: f64,
    /// `Σ_{x∈X} e^{−μ·dist(x, Y)}`.
    pub sum_exp: f64,
}

impl BoundQuery {
    /// Unit-norm operators with `sum_exp = |X|·e^{−μ·dist}`.
    pub fn from_distance(inputs: BoundInputs, t: f64, distance: f64, x_size: usize) -> Self {
        Self {
            inputs,
            t,
            ell: distance.max(0.0).floor() as usize,
            x_size,
            norm_a: 1.0,
            norm_b: 1.0,
            sum_exp: x_size as f64 * (-inputs.mu * distance.max(0.0)).exp(),
        }
    }

    pub fn with_norms(mut self, norm_a: f64, norm_b: f64) -> Self {
        self.norm_a = norm_a;
        self.norm_b = norm_b;
        self
    }

    pub fn with_sum_exp(mut self, sum_exp: f64) -> Self {
        self.sum_exp = sum_exp;
        self
    }

    /// Same query at overlap `ell`, with `sum_exp` coarsened to `|X|·e^{−μ·ell}`.
    pub fn at_overlap(mut self, ell: usize) -> Self {
        self.ell = ell;
        self.sum_exp = self.x_size as f64 * (-self.inputs.mu * ell as f64).exp();
        self
    }
}

/// `ln k!`.
pub fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `x^k / k!` for `x ≥ 0`, in log space.
fn power_over_factorial(x: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if x == 0.0 {
        return 0.0;
    }
    (k as f64 * x.ln() - ln_factorial(k)).exp()
}

/// `2‖A‖‖B‖·|X|·(2ζ₀|t|)^ℓ/ℓ!` for commutators and `|X|‖A‖·(2ζ₀|t|)^ℓ/ℓ!`
/// for restrictions.
pub fn bound_strict_local(q: &BoundQuery, variant: Variant) -> f64 {
    let prefactor = match variant {
        Variant::Commutator => 2.0 * q.norm_a * q.norm_b,
        Variant::Restriction => q.norm_a,
    } * q.x_size as f64;
    if prefactor == 0.0 {
        return 0.0;
    }
    prefactor * power_over_factorial(2.0 * q.inputs.zeta0 * q.t.abs(), q.ell)
}

/// Minimum of [`bound_strict_local`] over overlaps `0..=ℓ`.
///
/// The series argument holds for every overlap up to `⌊dist⌋`, so this is
/// still a bound, and unlike the single-`ℓ` form it is nonincreasing in `ℓ`.
pub fn bound_strict_local_envelope(q: &BoundQuery, variant: Variant) -> f64 {
    (0..=q.ell)
        .map(|l| bound_strict_local(&BoundQuery { ell: l, ..*q }, variant))
        .fold(f64::INFINITY, f64::min)
}

/// `(2/√η)‖A‖‖B‖(e^{ζ|t|√(8η)} − 1)·sum_exp` for commutators and
/// `(2ζ|t|/√η)‖A‖(e^{ζ|t|√(8η)} − 1)·sum_exp` for restrictions.
///
/// At `η = 0` the removable singularity is replaced by its limit,
/// `(2/√η)(e^{x√η} − 1) → 2x` with `x = ζ|t|√8`.
pub fn bound_commutator_aware(q: &BoundQuery, variant: Variant) -> f64 {
    let eta = q.inputs.eta.clamp(0.0, 2.0);
    let zt = q.inputs.zeta * q.t.abs();
    let x = zt * 8f64.sqrt();
    let growth = if eta == 0.0 {
        2.0 * x
    } else {
        2.0 / eta.sqrt() * (x * eta.sqrt()).exp_m1()
    };
    let prefactor = match variant {
        Variant::Commutator => q.norm_a * q.norm_b,
        Variant::Restriction => zt * q.norm_a,
    };
    if prefactor == 0.0 || q.sum_exp == 0.0 {
        return 0.0;
    }
    prefactor * growth * q.sum_exp
}

/// `2‖B‖·Σ_{n ≥ ⌈dist⌉} (2√K|t|)^n/n!`.
pub fn bound_strict_commutator_tail(k: f64, t: f64, dist: f64, norm_b: f64) -> f64 {
    let x = 2.0 * k.max(0.0).sqrt() * t.abs();
    let start = dist.max(0.0).ceil() as usize;
    2.0 * norm_b * exp_series_tail(x, start)
}

/// `Σ_{n ≥ m} x^n/n!` for `x ≥ 0`, summed forward until the terms vanish
/// against the partial sum.
pub fn exp_series_tail(x: f64, m: usize) -> f64 {
    if m == 0 {
        return x.exp();
    }
    if x == 0.0 {
        return 0.0;
    }
    let mut term = power_over_factorial(x, m);
    let mut sum = 0.0;
    let mut n = m;
    loop {
        sum += term;
        n += 1;
        term *= x / n as f64;
        if (n as f64 > x && term <= f64::EPSILON * 0.25 * sum) || term == 0.0 || !sum.is_finite() {
            return sum;
        }
    }
}

/// Smallest `ℓ` with `bound(ℓ) ≤ ε` for `template` at overlap `ℓ`.
///
/// Both bounds eventually decrease in `ℓ`; the strict one first grows while
/// `ℓ < 2ζ₀|t|`, so the search only stops in its decreasing phase.
pub fn solve_overlap(eps: f64, template: &BoundQuery, kind: BoundKind, variant: Variant) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("target error must be positive, got {eps}")));
    }
    let peak = 2.0 * template.inputs.zeta0 * template.t.abs();
    for ell in 0..=MAX_OVERLAP {
        let q = template.at_overlap(ell);
        let b = match kind {
            BoundKind::Strict => bound_strict_local(&q, variant),
            BoundKind::CommutatorAware => bound_commutator_aware(&q, variant),
        };
        let decreasing = kind == BoundKind::CommutatorAware || ell as f64 + 1.0 >= peak || ell == 0;
        if b <= eps && decreasing {
            return Ok(ell);
        }
    }
    Err(Error::NoConvergence(format!(
        "no overlap up to {MAX_OVERLAP} brings the bound below {eps}"
    )))
}
