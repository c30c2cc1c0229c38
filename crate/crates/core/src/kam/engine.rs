//! Desk-scale execution of the iteration.
//!
//! A step at level `n₀` (degrees in `√r` units) truncates the perturbation
//! to `n₀ ≤ n ≤ 2n₀ − 2`, solves the homological equation for the non-kernel
//! part and transforms, leaving a perturbation that starts at `2n₀ − 2`.
//! Kernel terms strictly below `2n₀ − 2` are twist terms and stop the
//! iteration; kernel terms at `2n₀ − 2` itself are carried into the next
//! step, where they sit below that step's top degree and get tested.

use serde::Serialize;

use super::schedule::compute_c1;
use super::KamError;
use crate::diophantine::DiophantineParams;
use crate::homological;
use crate::lie::{flow_map_endpoint, kam_step_transform, quadratic_part};
use crate::series::{DegreeWindow, FourierTaylorSeries, SeriesError};

/// Kernel coefficients above this multiple of the unit-domain majorant of
/// the perturbation count as genuine twist terms.
pub const KERNEL_TOLERANCE: f64 = 1e-10;
/// Perturbations whose majorant on the norm domain falls below this are done.
pub const NEGLIGIBLE_NORM: f64 = 1e-14;
/// Angular shrink used by steps before the main ladder.
const PREPARATION_SIGMA: f64 = 0.0625;

/// Norm domain and shrink parameters for one step's report.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct StepContext {
    pub nu: usize,
    pub c1: f64,
    pub tau: f64,
    /// Domain on which `F` and the new perturbation are measured.
    pub rho: f64,
    pub gamma: f64,
    /// `R` is measured on `(ρ + δ, γ + σ)`.
    pub delta: f64,
    pub sigma: f64,
    /// Reference size for the kernel test, normally the unit-domain majorant
    /// of the input perturbation. Zero means the current `P` is used.
    pub kernel_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepReport {
    pub nu: usize,
    /// `n₀/2`; half-integral only for preparation steps.
    pub s: f64,
    pub truncation_range: (u32, u32),
    pub n_min: u32,
    #[serde(rename = "norm_R")]
    pub norm_r: f64,
    #[serde(rename = "norm_F")]
    pub norm_f: f64,
    #[serde(rename = "norm_P_next")]
    pub norm_p_next: f64,
    pub kernel_mass: f64,
    #[serde(rename = "lemma41_bound")]
    pub solve_bound: f64,
    pub bound_satisfied: bool,
    pub margin: f64,
}

pub struct StepOutcome {
    pub h_next: FourierTaylorSeries,
    pub f: FourierTaylorSeries,
    pub report: StepReport,
}

/// One step with `R = P` restricted to `2s ≤ n ≤ 2(2s − 1)`.
pub fn kam_step(h: &FourierTaylorSeries, s: u32, window: DegreeWindow, omega: f64, ctx: &StepContext) -> Result<StepOutcome, KamError> {
    if s < 2 {
        return Err(KamError::InvalidParameter(format!("step order s must be at least 2, got {s}")));
    }
    kam_step_degree(h, 2 * s, 2 * (2 * s - 1), window, omega, ctx)
}

/// One step at level `n0` truncating to `n0 ≤ n ≤ top`; `top` may sit below
/// `2n0 − 2` when later degrees are to be left alone.
pub fn kam_step_degree(h: &FourierTaylorSeries, n0: u32, top: u32, window: DegreeWindow, omega: f64, ctx: &StepContext) -> Result<StepOutcome, KamError> {
    assert!(n0 >= 3 && top >= n0 && top <= 2 * n0 - 2);
    let h2 = quadratic_part(h);
    let p = h - &h2;
    let mut report = StepReport {
        nu: ctx.nu,
        s: f64::from(n0) / 2.0,
        truncation_range: (n0, top),
        n_min: p.min_degree().unwrap_or(0),
        norm_r: 0.0,
        norm_f: 0.0,
        norm_p_next: 0.0,
        kernel_mass: 0.0,
        solve_bound: 0.0,
        bound_satisfied: true,
        margin: 0.0,
    };
    let Some(found) = p.min_degree() else {
        return Ok(StepOutcome { h_next: h.clone(), f: FourierTaylorSeries::zero(), report });
    };
    if found < n0 {
        return Err(KamError::Precondition { expected: n0, found });
    }
    let (kernel, range) = p.degree_slice(n0, top).kernel_project();
    // high-degree growth of P must not mask a low-degree kernel term
    let scale = if ctx.kernel_scale > 0.0 { ctx.kernel_scale } else { p.majorant_norm(1.0, 1.0) };
    let deferred = 2 * n0 - 2;
    let mut kernel_mass = 0.0;
    let mut noise = Vec::new();
    for (idx, c) in kernel.iter().filter(|(i, _)| i.n < deferred) {
        if c.norm() > KERNEL_TOLERANCE * scale {
            let mass = kernel.iter().filter(|(i, _)| i.n < deferred).map(|(_, c)| c.norm()).fold(0.0, |a, b| a + b);
            return Err(KamError::NonLinearizable { n: idx.n, coefficient: *c, kernel_mass: mass });
        }
        kernel_mass += c.norm();
        noise.push((*idx, *c));
    }
    let cleaned = h - &FourierTaylorSeries::from_terms(noise);
    let f = homological::solve(&range, omega)?;
    let h_next = kam_step_transform(&cleaned, &f, &range, window)?;

    let s = f64::from(n0) / 2.0;
    report.norm_r = range.majorant_norm(ctx.rho + ctx.delta, ctx.gamma + ctx.sigma);
    report.norm_f = f.majorant_norm(ctx.rho, ctx.gamma);
    report.norm_p_next = (&h_next - &h2).majorant_norm(ctx.rho, ctx.gamma);
    report.kernel_mass = kernel_mass;
    report.solve_bound = report.norm_r * solve_bound_factor(ctx.c1, ctx.tau, ctx.delta, ctx.sigma, s);
    report.bound_satisfied = report.norm_f <= report.solve_bound;
    report.margin = report.solve_bound - report.norm_f;
    Ok(StepOutcome { h_next, f, report })
}

// c₁σ^{−τ−1}e^{−sδ}δ^{−1}
fn solve_bound_factor(c1: f64, tau: f64, delta: f64, sigma: f64, s: f64) -> f64 {
    c1 * sigma.powf(-tau - 1.0) * (-s * delta).exp() / delta
}

/// Generators in the order they were produced, each with the domain
/// `(ρ, γ)` its step was measured on.
#[derive(Clone, Debug, Default)]
pub struct TransformChain {
    pub generators: Vec<FourierTaylorSeries>,
    pub domains: Vec<(f64, f64)>,
}

impl TransformChain {
    pub fn push(&mut self, generator: FourierTaylorSeries, domain: (f64, f64)) {
        self.generators.push(generator);
        self.domains.push(domain);
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Domains never grow along the chain.
    pub fn is_nested(&self) -> bool {
        self.generators.len() == self.domains.len() && self.domains.windows(2).all(|w| w[1].0 <= w[0].0 && w[1].1 <= w[0].1)
    }
}

/// `φ₀∘φ₁∘⋯∘φ_{N−1}` at a point: the last generator's time-1 flow acts first.
pub fn compose_eval(chain: &TransformChain, point: (f64, f64, f64)) -> Result<(f64, f64), SeriesError> {
    let (mut r, mut theta, t) = point;
    for g in chain.generators.iter().rev() {
        (r, theta) = flow_map_endpoint(g, (r, theta, t), 1.0)?;
    }
    Ok((r, theta))
}

/// Central-difference Jacobian `∂(r', θ')/∂(r, θ)` of [`compose_eval`].
pub fn compose_jacobian(chain: &TransformChain, point: (f64, f64, f64), h: f64) -> Result<[[f64; 2]; 2], SeriesError> {
    let (r, theta, t) = point;
    let rp = compose_eval(chain, (r + h, theta, t))?;
    let rm = compose_eval(chain, (r - h, theta, t))?;
    let tp = compose_eval(chain, (r, theta + h, t))?;
    let tm = compose_eval(chain, (r, theta - h, t))?;
    Ok([[(rp.0 - rm.0) / (2.0 * h), (tp.0 - tm.0) / (2.0 * h)], [(rp.1 - rm.1) / (2.0 * h), (tp.1 - tm.1) / (2.0 * h)]])
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxSteps,
    Converged,
    WindowExhausted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KamRunConfig {
    pub s0: u32,
    pub max_steps: usize,
    /// Largest degree kept.
    pub window: u32,
    pub rho_inf: f64,
    pub gamma_inf: f64,
    pub c1: f64,
}

impl KamRunConfig {
    /// Norm domain `(0.25, 0.25)` and `c₁` computed from `params`.
    pub fn new(params: &DiophantineParams, s0: u32, max_steps: usize, window: u32) -> Self {
        Self { s0, max_steps, window, rho_inf: 0.25, gamma_inf: 0.25, c1: compute_c1(params.alpha, params.tau) }
    }

    /// Radial shrink used for every report, `ρ∞/8`.
    pub fn delta(&self) -> f64 {
        self.rho_inf / 8.0
    }
}

#[derive(Clone, Debug, Default)]
pub struct KamRun {
    /// Steps that lift `n_min(P)` to `2s₀` before the ladder starts.
    pub preparation: Vec<StepReport>,
    pub steps: Vec<StepReport>,
    /// All generators, preparation first.
    pub chain: TransformChain,
    /// `s_ν` of each executed ladder step.
    pub ladder: Vec<u32>,
    /// Majorant of the perturbation on the norm domain before any step.
    pub input_norm: f64,
    /// Same, at the start of the ladder.
    pub initial_norm: f64,
    pub final_h: FourierTaylorSeries,
    pub stop: Option<StopReason>,
}

impl KamRun {
    /// `majorant(P_ν)` for `ν = 0, 1, …` on the norm domain.
    pub fn norm_sequence(&self) -> Vec<f64> {
        std::iter::once(self.initial_norm).chain(self.steps.iter().map(|r| r.norm_p_next)).collect()
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct KamFailure {
    pub error: KamError,
    pub partial: Box<KamRun>,
}

/// Runs the iteration with `s_ν = 2^ν(s₀ − 1) + 1`, after preparation steps
/// that raise the perturbation from its starting degree to `2s₀`.
pub fn kam_run(h: &FourierTaylorSeries, omega: f64, params: &DiophantineParams, config: &KamRunConfig) -> Result<KamRun, KamFailure> {
    let mut run = KamRun::default();
    match drive(h, omega, params, config, &mut run) {
        Ok(()) => Ok(run),
        Err(error) => Err(KamFailure { error, partial: Box::new(run) }),
    }
}

fn drive(h: &FourierTaylorSeries, omega: f64, params: &DiophantineParams, config: &KamRunConfig, run: &mut KamRun) -> Result<(), KamError> {
    let delta = config.delta();
    let (rho, gamma) = (config.rho_inf, config.gamma_inf);
    if config.s0 < 2 || rho <= 0.0 || gamma <= 0.0 || rho + delta > 1.0 || gamma + PREPARATION_SIGMA > 1.0 {
        return Err(KamError::InvalidParameter(format!(
            "kam run needs s0 >= 2 and a norm domain with rho + rho/8 <= 1, gamma + 1/16 <= 1 (got s0={}, rho={rho}, gamma={gamma})",
            config.s0
        )));
    }
    let window = DegreeWindow::new(2, config.window.max(3));
    let mut current = h.with_window(window);
    let h2 = quadratic_part(&current);
    let pert_norm = |x: &FourierTaylorSeries| (x - &h2).majorant_norm(rho, gamma);
    run.input_norm = pert_norm(&current);
    // later perturbations may be pure rounding noise; test kernels against the input size
    let kernel_scale = (&current - &h2).majorant_norm(1.0, 1.0);
    run.final_h = current.clone();

    let target = 2 * config.s0;
    let mut prep_index = 0;
    while let Some(n0) = (&current - &h2).min_degree() {
        if n0 >= target {
            break;
        }
        if n0 < 3 {
            return Err(KamError::Precondition { expected: 3, found: n0 });
        }
        let ctx = StepContext { nu: prep_index, c1: config.c1, tau: params.tau, rho, gamma, delta, sigma: PREPARATION_SIGMA, kernel_scale };
        let top = (2 * n0 - 2).min(target - 1);
        let out = kam_step_degree(&current, n0, top, window, omega, &ctx)?;
        run.preparation.push(out.report);
        run.chain.push(out.f, (rho + delta, gamma + PREPARATION_SIGMA));
        current = out.h_next;
        run.final_h = current.clone();
        prep_index += 1;
    }

    run.initial_norm = pert_norm(&current);
    for nu in 0..config.max_steps {
        let s = (config.s0 - 1) * (1 << nu) + 1;
        if 2 * s > window.n_max {
            run.stop = Some(StopReason::WindowExhausted);
            return Ok(());
        }
        if pert_norm(&current) < NEGLIGIBLE_NORM {
            run.stop = Some(StopReason::Converged);
            return Ok(());
        }
        let sigma = 2f64.powi(-(nu as i32 + 4));
        let ctx = StepContext { nu, c1: config.c1, tau: params.tau, rho, gamma, delta, sigma, kernel_scale };
        let out = kam_step(&current, s, window, omega, &ctx)?;
        run.steps.push(out.report);
        run.ladder.push(s);
        run.chain.push(out.f, (rho + delta, gamma + sigma));
        current = out.h_next;
        run.final_h = current.clone();
    }
    run.stop = Some(StopReason::MaxSteps);
    Ok(())
}

/// Shrink parameters for [`verify_solve_bounds`].
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ShrinkDomain {
    pub rho: f64,
    pub gamma: f64,
    pub delta: f64,
    pub sigma: f64,
}

/// Measured majorants of `F`, `F_r`, `F_θ` against the three bounds
/// `c₁σ^{−τ−1}e^{−sδ}δ^{−1}`, `c₁σ^{−τ−1}e^{−sδ}δ^{−2}`, `c₁σ^{−τ−2}e^{−sδ}δ^{−1}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveBoundCheck {
    pub norm_r: f64,
    pub norm_f: f64,
    pub bound_f: f64,
    pub norm_fr: f64,
    pub bound_fr: f64,
    pub norm_ftheta: f64,
    pub bound_ftheta: f64,
}

impl SolveBoundCheck {
    pub fn margins(&self) -> [f64; 3] {
        [self.bound_f - self.norm_f, self.bound_fr - self.norm_fr, self.bound_ftheta - self.norm_ftheta]
    }

    pub fn violations(&self) -> usize {
        self.margins().iter().filter(|m| **m < 0.0).count()
    }
}

/// Solves for `R` and measures `F` on `(ρ−δ, γ−σ)`, `F_r` on `(ρ−2δ, γ−σ)`
/// and `F_θ` on `(ρ−δ, γ−2σ)`. Violations are recorded, not raised.
pub fn verify_solve_bounds(r: &FourierTaylorSeries, omega: f64, tau: f64, c1: f64, domain: ShrinkDomain, s: f64) -> Result<SolveBoundCheck, KamError> {
    let ShrinkDomain { rho, gamma, delta, sigma } = domain;
    let f = homological::solve(r, omega)?;
    let base = c1 * (-s * delta).exp();
    Ok(SolveBoundCheck {
        norm_r: r.majorant_norm(rho, gamma),
        norm_f: f.majorant_norm(rho - delta, gamma - sigma),
        bound_f: base * sigma.powf(-tau - 1.0) / delta,
        norm_fr: f.deriv_r()?.majorant_norm(rho - 2.0 * delta, gamma - sigma),
        bound_fr: base * sigma.powf(-tau - 1.0) / (delta * delta),
        norm_ftheta: f.deriv_theta().majorant_norm(rho - delta, gamma - 2.0 * sigma),
        bound_ftheta: base * sigma.powf(-tau - 2.0) / delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::flow_map_numeric;
    use crate::series::{Complex, MonomialIndex};

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    fn ctx() -> StepContext {
        StepContext { nu: 0, c1: 42.0, tau: 2.0, rho: 0.25, gamma: 0.25, delta: 0.25 / 8.0, sigma: 0.0625, kernel_scale: 0.0 }
    }

    fn params() -> DiophantineParams {
        DiophantineParams::estimate(golden(), 2.0, 1000)
    }

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    #[test]
    fn single_mode_step_leaves_nothing() {
        let w = golden();
        let h = &FourierTaylorSeries::h2(w) + &FourierTaylorSeries::monomial(3, 1, 0, c(1.0));
        let out = kam_step_degree(&h, 3, 4, DegreeWindow::new(2, 24), w, &ctx()).unwrap();
        assert_eq!(out.h_next, FourierTaylorSeries::h2(w));
        assert_eq!(out.report.norm_p_next, 0.0);
        assert!(out.report.bound_satisfied);
    }

    #[test]
    fn quartic_kernel_is_a_twist_term() {
        let w = golden();
        let h = &FourierTaylorSeries::h2(w) + &FourierTaylorSeries::monomial(4, 0, 0, c(1.0));
        let err = kam_step(&h, 2, DegreeWindow::new(2, 12), w, &ctx()).err().unwrap();
        assert_eq!(err.twist_coefficient(), Some((2, c(1.0))));
    }

    #[test]
    fn empty_perturbation_step() {
        let w = golden();
        let h = FourierTaylorSeries::h2(w);
        let out = kam_step(&h, 3, DegreeWindow::new(2, 12), w, &ctx()).unwrap();
        assert_eq!(out.h_next, h);
        assert!(out.f.is_empty());
    }

    #[test]
    fn step_precondition() {
        let w = golden();
        let h = &FourierTaylorSeries::h2(w) + &FourierTaylorSeries::monomial(4, 2, 0, c(1.0));
        assert!(matches!(kam_step(&h, 3, DegreeWindow::new(2, 12), w, &ctx()), Err(KamError::Precondition { expected: 6, found: 4 })));
    }

    #[test]
    fn top_kernel_is_deferred() {
        let w = golden();
        let p = FourierTaylorSeries::from_terms([(MonomialIndex::new(6, 2, 1), c(0.1)), (MonomialIndex::new(10, 0, 0), c(0.5))]);
        let h = &FourierTaylorSeries::h2(w) + &p;
        let out = kam_step(&h, 3, DegreeWindow::new(2, 24), w, &ctx()).unwrap();
        let next = &out.h_next - &FourierTaylorSeries::h2(w);
        assert_eq!(next.min_degree(), Some(10));
        assert_eq!(next.coeff(MonomialIndex::new(10, 0, 0)), c(0.5));
    }

    #[test]
    fn run_on_quadratic_part_is_empty() {
        let w = golden();
        let cfg = KamRunConfig::new(&params(), 3, 5, 24);
        let run = kam_run(&FourierTaylorSeries::h2(w), w, &params(), &cfg).unwrap();
        assert!(run.chain.is_empty());
        assert!(run.steps.is_empty());
        assert_eq!(run.stop, Some(StopReason::Converged));
    }

    #[test]
    fn run_reports_twist_with_partial_chain() {
        let w = golden();
        let h = &FourierTaylorSeries::h2(w) + &FourierTaylorSeries::monomial(4, 0, 0, c(0.7));
        let cfg = KamRunConfig::new(&params(), 3, 5, 24);
        let failure = kam_run(&h, w, &params(), &cfg).unwrap_err();
        assert_eq!(failure.error.twist_coefficient(), Some((2, c(0.7))));
        assert!(failure.partial.steps.is_empty());
    }

    #[test]
    fn zero_steps_keeps_initial_norm() {
        let w = golden();
        let h = &FourierTaylorSeries::h2(w) + &FourierTaylorSeries::monomial(6, 2, 1, c(0.3));
        let cfg = KamRunConfig::new(&params(), 3, 0, 24);
        let run = kam_run(&h, w, &params(), &cfg).unwrap();
        assert!(run.steps.is_empty());
        assert!(run.initial_norm > 0.0);
        assert_eq!(run.stop, Some(StopReason::MaxSteps));
    }

    #[test]
    fn compose_identity_and_single() {
        let chain = TransformChain::default();
        assert_eq!(compose_eval(&chain, (0.1, 0.2, 0.3)).unwrap(), (0.1, 0.2));
        let g = FourierTaylorSeries::from_terms([(MonomialIndex::new(3, 1, -1), c(0.02)), (MonomialIndex::new(3, -1, 1), c(0.02))]);
        let mut chain = TransformChain::default();
        chain.push(g.clone(), (0.3, 0.3));
        let direct = flow_map_numeric(&g, (0.1, 0.2, 0.3), 1.0).unwrap();
        assert_eq!(compose_eval(&chain, (0.1, 0.2, 0.3)).unwrap(), (direct.r, direct.theta));
    }

    #[test]
    fn solve_bounds_on_single_mode_and_zero() {
        let w = golden();
        let c1 = compute_c1(params().alpha, 2.0);
        let dom = ShrinkDomain { rho: 1.0, gamma: 1.0, delta: 0.05, sigma: 0.05 };
        let r = FourierTaylorSeries::monomial(20, 1, 0, c(0.3));
        let check = verify_solve_bounds(&r, w, 2.0, c1, dom, 10.0).unwrap();
        assert_eq!(check.violations(), 0);
        assert!(check.margins().iter().all(|m| *m > 100.0 * check.norm_f));
        let zero = verify_solve_bounds(&FourierTaylorSeries::zero(), w, 2.0, c1, dom, 10.0).unwrap();
        assert_eq!((zero.norm_f, zero.norm_fr, zero.norm_ftheta), (0.0, 0.0, 0.0));
    }
}
