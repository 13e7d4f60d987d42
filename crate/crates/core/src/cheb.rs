//! Chebyshev expansions of analytic functions on an interval.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trapezoid nodes per coefficient.
pub const NODES_PER_COEFF: usize = 8;

/// Slack on the domain check in [`ChebyshevExpansion::evaluate`].
const DOMAIN_SLACK: f64 = 1e-12;

/// `Σ_j a_j T_j(x)` on `domain`, mapped affinely onto `[-1, 1]`.
///
/// `rho` and `m` record the caller's analyticity claim: `f` is analytic inside
/// the Bernstein ellipse `E_rho` with `sup |f| = m` there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChebyshevExpansion {
    pub coeffs: Vec<f64>,
    pub rho: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub domain: [f64; 2],
}

/// Expansion of `f` on `[-1, 1]` up to degree `j_max`.
pub fn expand(f: impl Fn(f64) -> f64, rho: f64, m: f64, j_max: usize) -> Result<ChebyshevExpansion> {
    expand_on(f, [-1.0, 1.0], rho, m, j_max)
}

/// Expansion of `f` on `domain` up to degree `j_max`.
///
/// Coefficients come from the trapezoid rule on `θ ∈ [0, 2π)` with
/// `8(j_max + 1)` nodes.
pub fn expand_on(
    f: impl Fn(f64) -> f64,
    domain: [f64; 2],
    rho: f64,
    m: f64,
    j_max: usize,
) -> Result<ChebyshevExpansion> {
    check_claim(rho, m)?;
    if !(domain[0].is_finite() && domain[1].is_finite() && domain[0] < domain[1]) {
        return Err(Error::InvalidArgument(format!("invalid domain {domain:?}")));
    }
    let nodes = NODES_PER_COEFF * (j_max + 1);
    let samples: Vec<(f64, f64)> = (0..nodes)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / nodes as f64;
            let x = theta.cos();
            (theta, f(from_unit(domain, x)))
        })
        .collect();
    if let Some((_, bad)) = samples.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(*bad));
    }
    let coeffs = (0..=j_max)
        .map(|j| {
            let s: f64 = samples.iter().map(|(theta, v)| v * (j as f64 * theta).cos()).sum();
            let a = 2.0 * s / nodes as f64;
            if j == 0 {
                a / 2.0
            } else {
                a
            }
        })
        .collect();
    Ok(ChebyshevExpansion { coeffs, rho, m, domain })
}

fn check_claim(rho: f64, m: f64) -> Result<()> {
    if !(rho > 1.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must exceed 1, got {rho}")));
    }
    if !(m >= 0.0 && m.is_finite()) {
        return Err(Error::InvalidArgument(format!("M must be nonnegative, got {m}")));
    }
    Ok(())
}

fn from_unit(domain: [f64; 2], x: f64) -> f64 {
    domain[0] + (x + 1.0) * 0.5 * (domain[1] - domain[0])
}

fn to_unit(domain: [f64; 2], y: f64) -> f64 {
    (2.0 * y - domain[0] - domain[1]) / (domain[1] - domain[0])
}

impl ChebyshevExpansion {
    /// Constant function `c` on `domain`. Entire, so any `rho` is valid.
    pub fn constant(c: f64, domain: [f64; 2]) -> Self {
        Self {
            coeffs: vec![c],
            rho: 2.0,
            m: c.abs(),
            domain,
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Value at `y` in the expansion's domain, by Clenshaw recurrence.
    pub fn evaluate(&self, y: f64) -> Result<f64> {
        let [lo, hi] = self.domain;
        let slack = DOMAIN_SLACK * (hi - lo).abs().max(1.0);
        if !(y >= lo - slack && y <= hi + slack) {
            return Err(Error::InvalidArgument(format!(
                "{y} outside expansion domain [{lo}, {hi}]"
            )));
        }
        Ok(clenshaw(&self.coeffs, to_unit(self.domain, y).clamp(-1.0, 1.0)))
    }

    /// `Σ |a_j|`, an upper bound on `sup |f|` over the domain.
    pub fn abs_sum(&self) -> f64 {
        self.coeffs.iter().map(|a| a.abs()).sum()
    }

    /// Indices whose coefficient exceeds the decay envelope implied by
    /// `(rho, M)`: `|a_0| ≤ M`, `|a_j| ≤ 2Mρ^{-j}`.
    pub fn decay_violations(&self) -> Vec<usize> {
        let tol = 1e-12 * self.m.max(1.0);
        self.coeffs
            .iter()
            .enumerate()
            .filter(|&(j, a)| a.abs() > decay_envelope(self.rho, self.m, j) + tol)
            .map(|(j, _)| j)
            .collect()
    }

    /// Truncation error bound `2M/(ρ−1)·ρ^{-J}` for the current degree.
    pub fn error_bound(&self) -> f64 {
        truncation_bound(self.rho, self.m, self.degree())
    }
}

fn decay_envelope(rho: f64, m: f64, j: usize) -> f64 {
    if j == 0 {
        m
    } else {
        2.0 * m * rho.powi(-(j as i32))
    }
}

/// `2M/(ρ−1)·ρ^{-J}`.
pub fn truncation_bound(rho: f64, m: f64, j: usize) -> f64 {
    2.0 * m / (rho - 1.0) * rho.powf(-(j as f64))
}

/// Smallest `J ≥ 0` with `2M/(ρ−1)·ρ^{-J} ≤ ε`.
pub fn degree_for_accuracy(rho: f64, m: f64, eps: f64) -> Result<usize> {
    check_claim(rho, m)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("accuracy must be positive, got {eps}")));
    }
    let raw = ((2.0 * m / ((rho - 1.0) * eps)).ln() / rho.ln()).ceil();
    let mut j = if raw.is_finite() && raw > 0.0 { raw as usize } else { 0 };
    // Repair rounding at exact powers.
    while truncation_bound(rho, m, j) > eps {
        j += 1;
    }
    while j > 0 && truncation_bound(rho, m, j - 1) <= eps {
        j -= 1;
    }
    Ok(j)
}

/// `Σ a_j T_j(x)` for `x ∈ [-1, 1]`.
pub fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &a in coeffs.iter().skip(1).rev() {
        let b0 = a + 2.0 * x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + x * b1 - b2
}
