//! Continued fractions and finite-range estimates of the Diophantine pair
//! `(α, τ)` with `|kω − l| ≥ α/|k|^τ`.
//!
//! Floating point can only ever scan finitely many `k`; `k_verified` records
//! how far a given pair has actually been checked.

use serde::Serialize;

/// `α` values below this mark `ω` as numerically near-resonant.
pub const NEAR_RESONANCE_ALPHA: f64 = 1e-4;

/// Finite-range Diophantine data for a frequency.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiophantineParams {
    pub omega: f64,
    pub alpha: f64,
    pub tau: f64,
    /// Largest `|k|` for which the condition has been checked.
    pub k_verified: u64,
}

impl DiophantineParams {
    /// Parameters with `α` estimated over `1 ≤ k ≤ k_max`; the estimate holds
    /// on that range by construction.
    pub fn estimate(omega: f64, tau: f64, k_max: u64) -> Self {
        Self { omega, alpha: estimate_alpha(omega, tau, k_max), tau, k_verified: k_max }
    }

    pub fn near_resonant(&self) -> bool {
        is_near_resonant(self.alpha)
    }
}

pub fn is_near_resonant(alpha: f64) -> bool {
    alpha < NEAR_RESONANCE_ALPHA
}

/// Partial quotients `[a₀; a₁, a₂, …]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuedFraction {
    pub quotients: Vec<i64>,
    /// The remainder vanished before the requested depth.
    pub terminated_early: bool,
}

impl ContinuedFraction {
    /// Convergents `p_n/q_n` as integer pairs.
    pub fn convergents(&self) -> Vec<(i128, i128)> {
        let (mut p0, mut q0, mut p1, mut q1) = (1i128, 0i128, 0i128, 1i128);
        self.quotients
            .iter()
            .map(|&a| {
                let (p, q) = (i128::from(a) * p0 + p1, i128::from(a) * q0 + q1);
                (p1, q1, p0, q0) = (p0, q0, p, q);
                (p, q)
            })
            .collect()
    }
}

/// Standard continued-fraction expansion of `omega` to at most `depth`
/// quotients.
pub fn continued_fraction(omega: f64, depth: usize) -> ContinuedFraction {
    assert!(depth >= 1, "continued fraction depth must be at least 1");
    let mut quotients = Vec::with_capacity(depth);
    let mut x = omega;
    let mut terminated_early = false;
    loop {
        let a = x.floor();
        quotients.push(a as i64);
        let frac = x - a;
        if quotients.len() == depth {
            break;
        }
        // the remainder carries an error that grows with x², so stop well above ε
        if frac <= 64.0 * f64::EPSILON * x.abs().max(1.0) {
            terminated_early = true;
            break;
        }
        x = 1.0 / frac;
    }
    ContinuedFraction { quotients, terminated_early }
}

/// `dist(x, ℤ) ∈ [0, ½]`.
pub fn dist_to_integer(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// `dist(kω, ℤ)` with the integer part of `ω` removed first.
fn dist_multiple(k: u64, omega_frac: f64) -> f64 {
    dist_to_integer(k as f64 * omega_frac)
}

/// `min_{1≤k≤K} k^τ·dist(kω, ℤ)`.
pub fn estimate_alpha(omega: f64, tau: f64, k_max: u64) -> f64 {
    assert!(k_max >= 1 && tau > 1.0);
    let frac = omega - omega.floor();
    (1..=k_max).map(|k| (k as f64).powf(tau) * dist_multiple(k, frac)).fold(f64::INFINITY, f64::min)
}

/// True iff `k^τ·dist(kω, ℤ) ≥ α` for all `1 ≤ k ≤ K`; raises `k_verified`
/// to `K` on success.
pub fn check_condition(params: &mut DiophantineParams, k_max: u64) -> bool {
    assert!(k_max >= 1);
    let frac = params.omega - params.omega.floor();
    let holds = (1..=k_max).all(|k| (k as f64).powf(params.tau) * dist_multiple(k, frac) >= params.alpha);
    if holds {
        params.k_verified = params.k_verified.max(k_max);
    }
    holds
}
