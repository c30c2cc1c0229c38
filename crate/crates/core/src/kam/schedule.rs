//! Step parameters of the infinite iteration and their feasibility.
//!
//! ```text
//! s_ν = 2^{q+ν} + 1,  σ_ν = 2^{−(ν+4)},  δ_ν = 4(τ+3)(ν+q)·ln2 / s_ν,
//! ρ_{ν+1} = ρ_ν − 4δ_ν,  γ_{ν+1} = γ_ν − 4σ_ν,  ρ₀ = γ₀ = 1,
//! ε_ν = B·c₁·σ_ν^{−τ−3}·e^{−s_ν δ_ν}·δ_ν^{−3},  B = 3/2.
//! ```
//!
//! Feasibility needs `Σδ ≤ 1/8`, `Σσ ≤ 1/8`, `Σε ≤ 1/2` and
//! `c₁σ^{−τ−2}e^{−sδ}δ^{−2} ≤ 1` at every step. Only finitely many steps are
//! computed; the remaining tails are bounded in closed form.

use std::f64::consts::LN_2;

use serde::Serialize;

use super::KamError;

/// Uniform derivative bound of the composed transformations.
pub const B: f64 = 1.5;
/// Largest start exponent tried by [`min_admissible_q`].
pub const MAX_SEARCH_Q: u32 = 64;
/// Fewest computed steps accepted by [`min_admissible_q`].
pub const MIN_SEARCH_HORIZON: usize = 20;

/// Parameters of step `ν`. `rho` and `gamma` are the domain the step starts on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepParams {
    pub nu: usize,
    pub s: f64,
    pub sigma: f64,
    pub delta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// `1 − c₁σ^{−τ−2}e^{−sδ}δ^{−2}`.
    pub step_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KamSchedule {
    pub q: u32,
    pub tau: f64,
    pub c1: f64,
    pub b: f64,
    pub c2: f64,
    pub c3: f64,
    pub steps: Vec<StepParams>,
}

impl KamSchedule {
    /// Evaluates the formulas for `steps` steps without any domain check.
    pub fn compute(q: u32, tau: f64, c1: f64, steps: usize) -> Self {
        let c2 = B * c1;
        let c3 = c2 * (4.0 * (tau + 3.0) * LN_2).powi(-3);
        let mut rho = 1.0;
        let mut gamma = 1.0;
        let mut out = Vec::with_capacity(steps);
        for nu in 0..steps {
            let level = f64::from(q) + nu as f64;
            let s = 2f64.powf(level) + 1.0;
            let sigma = 2f64.powi(-(nu as i32 + 4));
            // s·δ is 4(τ+3)(ν+q)·ln2 by definition; the logs avoid underflow at large q
            let s_delta = 4.0 * (tau + 3.0) * level * LN_2;
            let delta = s_delta / s;
            let ln_sigma = sigma.ln();
            let ln_delta = delta.ln();
            let epsilon = ((B * c1).ln() - (tau + 3.0) * ln_sigma - s_delta - 3.0 * ln_delta).exp();
            let step_factor = (c1.ln() - (tau + 2.0) * ln_sigma - s_delta - 2.0 * ln_delta).exp();
            out.push(StepParams { nu, s, sigma, delta, rho, gamma, epsilon, step_margin: 1.0 - step_factor });
            rho -= 4.0 * delta;
            gamma -= 4.0 * sigma;
        }
        Self { q, tau, c1, b: B, c2, c3, steps: out }
    }

    /// `(ρ, γ)` after all computed steps.
    pub fn final_domain(&self) -> (f64, f64) {
        self.steps.last().map_or((1.0, 1.0), |p| (p.rho - 4.0 * p.delta, p.gamma - 4.0 * p.sigma))
    }

    /// `c₃/(3q)·ν^{−2}`, the closed-form majorant of `ε_ν` for `ν ≥ 1`.
    pub fn epsilon_envelope(&self, nu: usize) -> f64 {
        assert!(nu >= 1);
        self.c3 / (3.0 * f64::from(self.q)) / (nu as f64).powi(2)
    }
}

/// Computes the schedule and rejects it if a domain radius reaches zero.
pub fn build_schedule(q: u32, tau: f64, c1: f64, steps: usize) -> Result<KamSchedule, KamError> {
    if q < 1 || tau <= 1.0 || c1 <= 0.0 || steps < 1 || !tau.is_finite() || !c1.is_finite() {
        return Err(KamError::InvalidParameter(format!("schedule needs q >= 1, tau > 1, c1 > 0, steps >= 1 (got q={q}, tau={tau}, c1={c1}, steps={steps})")));
    }
    let sched = KamSchedule::compute(q, tau, c1, steps);
    let mut domains: Vec<(usize, f64, f64)> = sched.steps.iter().map(|p| (p.nu, p.rho, p.gamma)).collect();
    let (rho_end, gamma_end) = sched.final_domain();
    domains.push((steps, rho_end, gamma_end));
    if let Some(&(nu, rho, gamma)) = domains.iter().find(|(_, r, g)| *r <= 0.0 || *g <= 0.0) {
        return Err(KamError::DomainExhausted { nu, rho, gamma });
    }
    Ok(sched)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleStatus {
    Feasible,
    Infeasible,
    /// Every computed check passes but the tails could not be bounded.
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub q: u32,
    pub horizon: usize,
    pub delta_sum: f64,
    pub delta_tail_bound: Option<f64>,
    pub sigma_sum: f64,
    /// `Σ_{ν≥0} σ_ν`, exactly `1/8`.
    pub sigma_total: f64,
    pub epsilon_sum: f64,
    pub epsilon_tail_bound: Option<f64>,
    pub step_margins: Vec<f64>,
    /// `ε_ν ≤ c₃/(3q)·ν^{−2}` at every computed `ν ≥ 1`.
    pub epsilon_envelope_ok: bool,
    /// Lower bound for `ρ∞ = 1 − 4Σδ`, tails included when available.
    pub rho_inf_bound: f64,
    pub gamma_inf: f64,
    pub delta_ok: bool,
    pub sigma_ok: bool,
    pub epsilon_ok: bool,
    pub step_ok: bool,
    pub status: ScheduleStatus,
    pub diagnostics: Vec<String>,
}

impl ScheduleReport {
    pub fn feasible(&self) -> bool {
        self.status == ScheduleStatus::Feasible
    }
}

/// Checks the summability conditions on the computed steps and bounds the
/// tails `ν ≥ N` with
///
/// ```text
/// Σ_{ν≥N} δ_ν ≤ 4(τ+3)·ln2·(N+q+1)·2^{1−N−q},
/// Σ_{ν≥N} ε_ν ≤ c₃/(3q)·1/(N−1),
/// ```
///
/// the second requiring `q ≥ 4` and `N ≥ 2`.
pub fn verify_schedule(sched: &KamSchedule) -> ScheduleReport {
    let n = sched.steps.len();
    let q = f64::from(sched.q);
    let delta_sum: f64 = sched.steps.iter().map(|p| p.delta).sum();
    let sigma_sum: f64 = sched.steps.iter().map(|p| p.sigma).sum();
    let epsilon_sum: f64 = sched.steps.iter().map(|p| p.epsilon).sum();
    let step_margins: Vec<f64> = sched.steps.iter().map(|p| p.step_margin).collect();
    let epsilon_envelope_ok = sched.steps.iter().skip(1).all(|p| p.epsilon <= sched.epsilon_envelope(p.nu));
    let tails_available = n >= 2 && sched.q >= 4;
    let delta_tail_bound = tails_available.then(|| 4.0 * (sched.tau + 3.0) * LN_2 * (n as f64 + q + 1.0) * 2f64.powf(1.0 - n as f64 - q));
    let epsilon_tail_bound = tails_available.then(|| sched.c3 / (3.0 * q) / (n as f64 - 1.0));

    let mut diagnostics = Vec::new();
    let delta_total = delta_sum + delta_tail_bound.unwrap_or(0.0);
    let delta_ok = delta_total <= 0.125;
    if !delta_ok {
        diagnostics.push(format!("sum of delta is {delta_total:.6e} > 1/8 (delta_0 = {:.6e})", sched.steps.first().map_or(0.0, |p| p.delta)));
    }
    // the σ series sums to exactly 1/8
    let sigma_ok = sigma_sum <= 0.125;
    let epsilon_total = epsilon_sum + epsilon_tail_bound.unwrap_or(0.0);
    let epsilon_ok = epsilon_total <= 0.5;
    if !epsilon_ok {
        diagnostics.push(format!("sum of epsilon is {epsilon_total:.6e} > 1/2"));
    }
    let step_ok = step_margins.iter().all(|m| *m >= 0.0);
    if let Some(p) = sched.steps.iter().find(|p| p.step_margin < 0.0) {
        diagnostics.push(format!("step condition fails first at nu = {} (margin {:.6e})", p.nu, p.step_margin));
    }
    if !epsilon_envelope_ok {
        diagnostics.push("epsilon exceeds c3/(3q)/nu^2 at some computed step".to_string());
    }
    if !tails_available {
        diagnostics.push(format!("tail bounds need q >= 4 and at least 2 steps (q = {}, steps = {n})", sched.q));
    }
    let computed_ok = delta_ok && sigma_ok && epsilon_ok && step_ok && epsilon_envelope_ok;
    let status = match (computed_ok, tails_available) {
        (false, _) => ScheduleStatus::Infeasible,
        (true, true) => ScheduleStatus::Feasible,
        (true, false) => ScheduleStatus::Partial,
    };
    ScheduleReport {
        q: sched.q,
        horizon: n,
        delta_sum,
        delta_tail_bound,
        sigma_sum,
        sigma_total: 0.125,
        epsilon_sum,
        epsilon_tail_bound,
        step_margins,
        epsilon_envelope_ok,
        rho_inf_bound: 1.0 - 4.0 * delta_total,
        gamma_inf: 0.5,
        delta_ok,
        sigma_ok,
        epsilon_ok,
        step_ok,
        status,
        diagnostics,
    }
}

/// Smallest `q ≤ 64` whose `horizon`-step schedule verifies as feasible.
pub fn min_admissible_q(tau: f64, c1: f64, horizon: usize) -> Result<u32, KamError> {
    if horizon < MIN_SEARCH_HORIZON {
        return Err(KamError::InvalidParameter(format!("q search needs a horizon of at least {MIN_SEARCH_HORIZON} steps, got {horizon}")));
    }
    if tau <= 1.0 || c1 <= 0.0 {
        return Err(KamError::InvalidParameter(format!("q search needs tau > 1 and c1 > 0 (got {tau}, {c1})")));
    }
    (1..=MAX_SEARCH_Q).find(|&q| verify_schedule(&KamSchedule::compute(q, tau, c1, horizon)).feasible()).ok_or(KamError::NotFound { max_q: MAX_SEARCH_Q })
}

/// `c₁ = (8/α)·sup_{0<σ≤1/4} σ^{τ+1} Σ_{k≥1} k^τ e^{−kσ}`.
///
/// The supremum is taken over a uniform grid of 256 points in `(0, 1/4]`
/// together with the `σ → 0` limit `Γ(τ+1)`.
pub fn compute_c1(alpha: f64, tau: f64) -> f64 {
    assert!(alpha > 0.0 && tau > 1.0);
    let grid_max = (1..=256).map(|j| 0.25 * f64::from(j) / 256.0).map(|sigma| weighted_sum(sigma, tau)).fold(0.0, f64::max);
    8.0 / alpha * grid_max.max(libm::tgamma(tau + 1.0))
}

// σ^{τ+1} Σ_{k≥1} k^τ e^{−kσ}
fn weighted_sum(sigma: f64, tau: f64) -> f64 {
    let peak = tau / sigma;
    let mut total = 0.0;
    let mut k = 1.0f64;
    loop {
        let term = k.powf(tau) * (-k * sigma).exp();
        total += term;
        if k > peak && term <= 1e-17 * total {
            break;
        }
        k += 1.0;
    }
    sigma.powf(tau + 1.0) * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ladder_values() {
        let s = KamSchedule::compute(4, 2.0, 1.0, 2);
        assert_eq!(s.steps[0].s, 17.0);
        assert_eq!(s.steps[1].s, 33.0);
        assert_eq!(s.steps[0].sigma, 0.0625);
        assert_eq!(s.steps[1].sigma, 0.03125);
        assert_eq!((s.steps[0].rho, s.steps[0].gamma), (1.0, 1.0));
    }

    #[test]
    fn delta_at_q12() {
        let s = KamSchedule::compute(12, 2.0, 1.0, 1);
        assert_relative_eq!(s.steps[0].delta, 4.0 * 5.0 * 12.0 * LN_2 / 4097.0, max_relative = 1e-15);
        assert!((s.steps[0].delta - 0.04061).abs() < 1e-5);
    }

    #[test]
    fn sigma_partial_sums_exact() {
        let s = KamSchedule::compute(12, 2.0, 1.0, 40);
        let mut acc = 0.0;
        for p in &s.steps {
            acc += p.sigma;
            assert!((acc - (0.125 - 2f64.powi(-(p.nu as i32 + 4)))).abs() <= 1e-15);
        }
    }

    #[test]
    fn small_q_exhausts_domain() {
        let err = build_schedule(4, 2.0, 1.0, 3).unwrap_err();
        assert!(matches!(err, KamError::DomainExhausted { nu: 1, .. }));
        let s = KamSchedule::compute(4, 2.0, 1.0, 25);
        assert!((s.steps[0].delta - 3.262).abs() < 1e-3);
        let report = verify_schedule(&s);
        assert!(!report.delta_ok);
        assert_eq!(report.status, ScheduleStatus::Infeasible);
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(build_schedule(0, 2.0, 1.0, 3), Err(KamError::InvalidParameter(_))));
        assert!(matches!(build_schedule(8, 1.0, 1.0, 3), Err(KamError::InvalidParameter(_))));
        assert!(matches!(min_admissible_q(2.0, 1.0, 5), Err(KamError::InvalidParameter(_))));
    }

    #[test]
    fn short_horizon_is_partial() {
        let s = KamSchedule::compute(14, 2.0, 1.0, 1);
        assert_eq!(verify_schedule(&s).status, ScheduleStatus::Partial);
    }

    #[test]
    fn min_q_matches_linear_scan() {
        let c1 = 1.0;
        let q = min_admissible_q(2.0, c1, 30).unwrap();
        for smaller in 1..q {
            assert!(!verify_schedule(&KamSchedule::compute(smaller, 2.0, c1, 30)).feasible());
        }
        let sched = build_schedule(q, 2.0, c1, 30).unwrap();
        let report = verify_schedule(&sched);
        assert!(report.feasible());
        assert!(report.rho_inf_bound >= 0.5);
        let eps: Vec<f64> = sched.steps.iter().map(|p| p.epsilon).collect();
        assert!(eps.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn larger_c1_needs_no_smaller_q() {
        assert!(min_admissible_q(2.0, 1e6, 30).unwrap() >= min_admissible_q(2.0, 1.0, 30).unwrap());
    }

    #[test]
    fn c1_for_tau_two() {
        // σ³Σk²e^{−kσ} increases to Γ(3) = 2 as σ → 0
        let alpha = 0.381_966_011_250_105_1;
        assert_relative_eq!(compute_c1(alpha, 2.0), 16.0 / alpha, max_relative = 1e-9);
        assert_relative_eq!(weighted_sum(0.25, 2.0), 2.0 - 0.25f64.powi(4) / 120.0, max_relative = 1e-6);
    }

    #[test]
    fn c1_dominates_grid_and_limit() {
        for tau in [1.5, 2.5, 3.0] {
            let c1 = compute_c1(1.0, tau);
            assert!(c1 >= 8.0 * libm::tgamma(tau + 1.0));
            assert!(c1 >= 8.0 * weighted_sum(0.1, tau));
        }
    }
}
