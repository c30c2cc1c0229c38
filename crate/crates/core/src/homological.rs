//! The homological (Lie) equation `{F, H₂} + ∂F/∂t = R` with `H₂ = ωr`.
//!
//! On a single mode `c·r^{n/2}e^{ikθ}e^{imt}` the operator acts as
//! multiplication by `i(m − kω)`, so every mode outside the kernel
//! `(k, m) = (0, 0)` is solved by one division. The closed-form periodic
//! solution written with time integrals is kept as an independent oracle in
//! [`integral_formula_eval`].

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use thiserror::Error;

use crate::quadrature::{self, QuadratureError};
use crate::series::{poisson_bracket, Complex, DegreeWindow, FourierTaylorSeries, MonomialIndex};

/// Divisors `|m − kω|` below this are treated as numerically resonant.
pub const SMALL_DIVISOR_FLOOR: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("resonant kernel mode at {index} cannot be removed by the homological equation")]
    ResonantMode { index: MonomialIndex },
    #[error("small divisor |m - k*omega| = {divisor:e} at {index} is below the floating-point floor")]
    SmallDivisorUnderflow { index: MonomialIndex, divisor: f64 },
    #[error("the integral formula only covers k != 0 modes, found {index}")]
    UnsupportedMode { index: MonomialIndex },
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Solves `{F, ωr} + F_t = R` mode by mode: `c` at `(n, k, m)` becomes
/// `c / (i(m − kω))`. `R` must have no kernel modes.
pub fn solve(rhs: &FourierTaylorSeries, omega: f64) -> Result<FourierTaylorSeries, SolveError> {
    let mut terms = Vec::with_capacity(rhs.len());
    for (idx, c) in rhs.iter() {
        if idx.is_kernel() {
            return Err(SolveError::ResonantMode { index: *idx });
        }
        let divisor = f64::from(idx.m) - f64::from(idx.k) * omega;
        if divisor.abs() < SMALL_DIVISOR_FLOOR {
            return Err(SolveError::SmallDivisorUnderflow { index: *idx, divisor });
        }
        terms.push((*idx, Complex::new(0.0, -1.0) * c / divisor));
    }
    let solved = FourierTaylorSeries::from_terms(terms).with_window(rhs.window());
    debug_assert!(!rhs.real_symmetric() || solved.real_symmetric() || solved.is_empty());
    Ok(solved)
}

/// Defect `{F, ωr} + F_t − R` of a candidate solution.
pub fn residual(f: &FourierTaylorSeries, rhs: &FourierTaylorSeries, omega: f64) -> FourierTaylorSeries {
    let window = DegreeWindow::up_to(f.n_max().max(rhs.n_max()));
    // {F, ωr} keeps every degree of F, so no pole can arise
    let bracket = poisson_bracket(f, &FourierTaylorSeries::h2(omega), window).expect("bracket with the quadratic part never differentiates a half power");
    &(&bracket + &f.deriv_t()) - rhs
}

/// Evaluates the periodic solution given by time integrals,
///
/// ```text
/// F = Σ_{k≠0} e^{ikωt} ( ∫₀ᵗ R_k(s) e^{−ikωs} ds
///                        + (1 − e^{2πikω})⁻¹ ∫_{−2π}⁰ R_k(s) e^{−ikωs} ds ) e^{ikθ},
/// ```
///
/// at a real point by adaptive quadrature. `R` must not contain `k = 0`
/// modes.
pub fn integral_formula_eval(rhs: &FourierTaylorSeries, omega: f64, t: f64, theta: f64, r: f64) -> Result<Complex, SolveError> {
    let sqrt_r = r.max(0.0).sqrt();
    let mut by_k: BTreeMap<i32, Vec<(Complex, i32)>> = BTreeMap::new();
    for (idx, c) in rhs.iter() {
        if idx.k == 0 {
            return Err(SolveError::UnsupportedMode { index: *idx });
        }
        by_k.entry(idx.k).or_default().push((c * sqrt_r.powi(idx.n as i32), idx.m));
    }
    let mut total = Complex::default();
    for (k, modes) in by_k {
        let kw = f64::from(k) * omega;
        let scale: f64 = modes.iter().map(|(a, _)| a.norm()).sum::<f64>() * TAU;
        let integrand = |s: f64| -> Complex {
            let signal: Complex = modes.iter().map(|(a, m)| a * Complex::from_polar(1.0, f64::from(*m) * s)).sum();
            signal * Complex::from_polar(1.0, -kw * s)
        };
        let abs_tol = 1e-14 * scale;
        let forward = quadrature::integrate(integrand, 0.0, t, abs_tol, 1e-12)?;
        let period = quadrature::integrate(integrand, -TAU, 0.0, abs_tol, 1e-12)?;
        let denominator = Complex::new(1.0, 0.0) - Complex::from_polar(1.0, TAU * kw);
        let amplitude = Complex::from_polar(1.0, kw * t) * (forward.value + period.value / denominator);
        total += amplitude * Complex::from_polar(1.0, f64::from(k) * theta);
    }
    Ok(total)
}

/// `4α/|k|^τ`, the lower bound for `|1 − e^{2πikω}|` under the Diophantine
/// condition with constants `(α, τ)`.
pub fn divisor_lower_bound(k: i64, alpha: f64, tau: f64) -> f64 {
    assert!(k != 0, "divisor bound is only defined for k != 0");
    4.0 * alpha / (k.unsigned_abs() as f64).powf(tau)
}

/// First `1 ≤ |k| ≤ k_max` with `|1 − e^{2πikω}| < 4α/|k|^τ`, if any.
pub fn first_divisor_violation(omega: f64, alpha: f64, tau: f64, k_max: i64) -> Option<i64> {
    (1..=k_max).flat_map(|k| [k, -k]).find(|&k| {
        let actual = (Complex::new(1.0, 0.0) - Complex::from_polar(1.0, TAU * k as f64 * omega)).norm();
        actual < divisor_lower_bound(k, alpha, tau)
    })
}
