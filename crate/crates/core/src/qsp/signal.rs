//! Jacobi-Anger truncation and phase-sequence transfer functions.

use faer::c64;
use serde::{Deserialize, Serialize};

use super::bessel::bessel_j_all;
use crate::bounds::ln_factorial;
use crate::error::{Error, Result};

/// Truncation of `e^{−iαt sinθ}` to harmonics `0..q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiAngerTruncation {
    pub alpha_t: f64,
    pub order: usize,
    /// `J_0(αt), …, J_{q−1}(αt)`.
    pub coefficients: Vec<f64>,
    /// `32(αt)^q / (2^q q!)`.
    pub error_bound: f64,
    /// `2 Σ_{k ≥ q} |J_k(αt)|`.
    pub tail_bound: f64,
}

/// `32(αt)^q / (2^q q!)`.
pub fn jacobi_anger_bound(alpha_t: f64, q: usize) -> f64 {
    if alpha_t == 0.0 {
        return if q == 0 { 32.0 } else { 0.0 };
    }
    (32f64.ln() + q as f64 * (alpha_t / 2.0).ln() - ln_factorial(q)).exp()
}

/// `2 Σ_{k ≥ q} |J_k(x)|`, summed until the terms are negligible.
pub fn bessel_tail(x: f64, q: usize) -> f64 {
    let top = q + 40 + 2 * x.abs().ceil() as usize;
    2.0 * bessel_j_all(top, x)[q..].iter().map(|v| v.abs()).sum::<f64>()
}

/// Smallest `q ≥ 1` with `32(αt)^q / (2^q q!) ≤ ε`.
pub fn jacobi_anger(alpha_t: f64, eps: f64) -> Result<JacobiAngerTruncation> {
    if !(alpha_t >= 0.0 && alpha_t.is_finite()) {
        return Err(Error::InvalidArgument(format!("αt = {alpha_t}")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε = {eps}")));
    }
    let mut q = 1;
    if alpha_t > 0.0 {
        let step = (alpha_t / 2.0).ln();
        let target = eps.ln();
        let mut ln_bound = jacobi_anger_bound(alpha_t, 1).ln();
        while ln_bound > target {
            q += 1;
            ln_bound += step - (q as f64).ln();
        }
    }
    let coefficients = bessel_j_all(q - 1, alpha_t);
    Ok(JacobiAngerTruncation {
        alpha_t,
        order: q,
        coefficients,
        error_bound: jacobi_anger_bound(alpha_t, q),
        tail_bound: bessel_tail(alpha_t, q),
    })
}

impl JacobiAngerTruncation {
    /// `J_0 + 2 Σ_{even k} J_k cos kθ − 2i Σ_{odd k} J_k sin kθ` over `k < q`.
    pub fn evaluate(&self, theta: f64) -> c64 {
        let mut re = self.coefficients[0];
        let mut im = 0.0;
        for (k, &j) in self.coefficients.iter().enumerate().skip(1) {
            if k % 2 == 0 {
                re += 2.0 * j * (k as f64 * theta).cos();
            } else {
                im -= 2.0 * j * (k as f64 * theta).sin();
            }
        }
        c64::new(re, im)
    }

    /// Largest `|e^{−iαt sinθ} − series|` over `points` angles spanning
    /// `[−π, π]`.
    pub fn sup_error(&self, points: usize) -> f64 {
        theta_grid(points)
            .map(|th| (c64::from_polar(1.0, -self.alpha_t * th.sin()) - self.evaluate(th)).norm())
            .fold(0.0, f64::max)
    }
}

fn theta_grid(points: usize) -> impl Iterator<Item = f64> {
    let pi = std::f64::consts::PI;
    let step = if points > 1 { 2.0 * pi / (points - 1) as f64 } else { 0.0 };
    (0..points).map(move |i| -pi + step * i as f64)
}

/// QSP angles `φ_1 … φ_N`, `N` even. Angles are supplied, not computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PhaseSequence {
    phis: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PhaseSequence {
    type Error = Error;

    fn try_from(phis: Vec<f64>) -> Result<Self> {
        Self::new(phis)
    }
}

impl From<PhaseSequence> for Vec<f64> {
    fn from(p: PhaseSequence) -> Self {
        p.phis
    }
}

impl PhaseSequence {
    pub fn new(phis: Vec<f64>) -> Result<Self> {
        if phis.is_empty() || phis.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "phase sequence needs a positive even length, got {}",
                phis.len()
            )));
        }
        if let Some(&bad) = phis.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite(bad));
        }
        Ok(Self { phis })
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn len(&self) -> usize {
        self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phis.is_empty()
    }

    /// Largest `|transfer(θ) − e^{−iαt sinθ}|` over `points` angles.
    pub fn sup_error_against(&self, alpha_t: f64, points: usize) -> f64 {
        theta_grid(points)
            .map(|th| (transfer_function(self, th) - c64::from_polar(1.0, -alpha_t * th.sin())).norm())
            .fold(0.0, f64::max)
    }
}

type M2 = [[c64; 2]; 2];

fn mul2(a: &M2, b: &M2) -> M2 {
    let mut out = [[c64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// `⟨+| e^{−iθP_{φ_N}/2} ⋯ e^{−iθP_{φ_1}/2} |+⟩` with
/// `P_φ = X cos φ + Y sin φ`.
pub fn transfer_function(phis: &PhaseSequence, theta: f64) -> c64 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut u: M2 = [[c64::new(1.0, 0.0), c64::new(0.0, 0.0)], [c64::new(0.0, 0.0), c64::new(1.0, 0.0)]];
    let minus_is = c64::new(0.0, -s);
    for &phi in &phis.phis {
        // P_φ = [[0, e^{−iφ}], [e^{iφ}, 0]].
        let r: M2 = [
            [c64::new(c, 0.0), minus_is * c64::from_polar(1.0, -phi)],
            [minus_is * c64::from_polar(1.0, phi), c64::new(c, 0.0)],
        ];
        u = mul2(&r, &u);
    }
    (u[0][0] + u[0][1] + u[1][0] + u[1][1]) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn solver_orders() {
        let ja = jacobi_anger(1.0, 1e-3).unwrap();
        assert_eq!(ja.order, 6);
        assert!((jacobi_anger_bound(1.0, 5) - 1.0 / 120.0).abs() < 1e-15);
        assert!((ja.error_bound - 32.0 / (64.0 * 720.0)).abs() < 1e-15);
        let zero = jacobi_anger(0.0, 1e-3).unwrap();
        assert_eq!(zero.order, 1);
        assert_eq!(zero.coefficients, vec![1.0]);
        for th in [-2.0, 0.3, 1.0] {
            assert!((zero.evaluate(th) - c64::new(1.0, 0.0)).norm() < 1e-15);
        }
        assert!(jacobi_anger(-1.0, 1e-3).is_err());
        for at in [0.2, 3.7, 50.0] {
            let brute = (1..).find(|&q| jacobi_anger_bound(at, q) <= 1e-7).unwrap();
            assert_eq!(jacobi_anger(at, 1e-7).unwrap().order, brute);
        }
        let big = jacobi_anger(1e5, 1e-3).unwrap();
        assert!(big.order as f64 > 1e5 * std::f64::consts::E / 2.0);
        assert!(big.error_bound <= 1e-3 && big.tail_bound <= big.error_bound);
    }

    #[test]
    fn truncation_is_sound() {
        for at in [0.5, 1.0, 2.0] {
            for eps in [1e-2, 1e-3, 1e-6, 1e-10] {
                let ja = jacobi_anger(at, eps).unwrap();
                let sup = ja.sup_error(1001);
                assert!(sup <= ja.tail_bound * (1.0 + 1e-9) + 1e-15, "{at} {eps}: {sup} > {}", ja.tail_bound);
                assert!(ja.tail_bound <= ja.error_bound, "{at} {eps}");
            }
        }
    }

    #[test]
    fn transfer_examples() {
        let p = PhaseSequence::new(vec![0.0, 0.0]).unwrap();
        for th in [0.0, 0.4, 2.0] {
            assert!((transfer_function(&p, th) - c64::from_polar(1.0, -th)).norm() < 1e-15);
        }
        let p = PhaseSequence::new(vec![0.3, -1.2, 2.0, 0.7]).unwrap();
        assert!((transfer_function(&p, 0.0) - c64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(PhaseSequence::new(vec![0.1, 0.2, 0.3]).is_err());
        assert!(PhaseSequence::new(vec![]).is_err());
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<PhaseSequence>(&json).unwrap(), p);
        assert!(serde_json::from_str::<PhaseSequence>("[1.0]").is_err());
    }

    #[test]
    fn transfer_harmonic_content() {
        // Discrete Fourier analysis of the transfer function: only harmonics
        // up to N/2, real part even in θ and imaginary part odd.
        let p = PhaseSequence::new(vec![0.4, 1.9, -0.8, 2.6]).unwrap();
        let samples = 64;
        let vals: Vec<c64> = (0..samples)
            .map(|j| transfer_function(&p, 2.0 * std::f64::consts::PI * j as f64 / samples as f64))
            .collect();
        for k in 0..samples / 2 {
            let (mut cos_c, mut sin_c) = (c64::new(0.0, 0.0), c64::new(0.0, 0.0));
            for (j, v) in vals.iter().enumerate() {
                let a = 2.0 * std::f64::consts::PI * (k * j) as f64 / samples as f64;
                cos_c += v * a.cos();
                sin_c += v * a.sin();
            }
            if k > 2 {
                assert!(cos_c.norm() < 1e-12 && sin_c.norm() < 1e-12, "harmonic {k}");
            }
            assert!(cos_c.im.abs() < 1e-12 && sin_c.re.abs() < 1e-12, "parity at {k}");
        }
    }

    #[test]
    fn sup_error_against_target() {
        let p = PhaseSequence::new(vec![0.0, 0.0]).unwrap();
        assert!(p.sup_error_against(0.0, 101) > 0.9);
    }

    proptest! {
        #[test]
        fn transfer_modulus_bounded(phis in proptest::collection::vec(-4.0f64..4.0, 1..6), theta in -4.0f64..4.0) {
            let mut phis = phis;
            if phis.len() % 2 == 1 {
                phis.push(0.0);
            }
            let p = PhaseSequence::new(phis).unwrap();
            prop_assert!(transfer_function(&p, theta).norm() <= 1.0 + 1e-12);
        }
    }
}
