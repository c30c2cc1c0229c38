//! Time-dependent Lie-series transformations and the order-by-order
//! normalization built from them.
//!
//! The flow of a generator `F` is `ṙ = F_θ`, `θ̇ = −F_r` at frozen `t`, so
//! `d/dε (G∘X_F^ε) = {G, F}∘X_F^ε`. In the extended phase space the
//! transformed Hamiltonian is
//!
//! ```text
//! H∘X_F^1 − ∫₀¹ F_t∘X_F^ε dε = Σ_j ad_F^j(H)/j! − Σ_j ad_F^j(F_t)/(j+1)!,
//! ```
//!
//! with `ad_F(G) = {G, F}`. Both sums terminate on a bounded degree window
//! because each application of `ad_F` raises the minimal degree by
//! `n_min(F) − 2 ≥ 1`.

use thiserror::Error;

use crate::homological::{self, SolveError};
use crate::series::{poisson_bracket, Complex, DegreeWindow, FourierTaylorSeries, MonomialIndex, SeriesError};

/// Default number of RK4 steps for [`flow_map_numeric`].
pub const DEFAULT_FLOW_STEPS: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LieError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("generator has minimal degree {n_min}, a near-identity transformation needs at least 3")]
    GeneratorDegree { n_min: u32 },
    #[error("new perturbation starts at degree {found}, expected at least {expected}")]
    DegreeViolation { expected: u32, found: u32 },
    #[error("normalization order must be even and at least 4, got {0}")]
    Order(u32),
    #[error("kernel term at odd degree {n} contradicts the parity of polynomial Hamiltonians")]
    OddKernel { n: u32 },
}

/// Upper bound on the number of `ad_F` applications before a series starting
/// at degree `n_start` leaves a window ending at `n_max`.
pub fn lie_iteration_bound(n_max: u32, n_start: u32, f_min: u32) -> u32 {
    debug_assert!(f_min >= 3);
    let span = (i64::from(n_max) - i64::from(n_start) + 2).max(0) as u32;
    span.div_ceil(f_min - 2)
}

/// Applies the time-dependent Lie transformation generated by `f` to `h`,
/// truncated to `window`.
pub fn lie_series_transform(h: &FourierTaylorSeries, f: &FourierTaylorSeries, window: DegreeWindow) -> Result<FourierTaylorSeries, LieError> {
    let Some(f_min) = f.min_degree() else {
        return Ok(h.with_window(window));
    };
    if f_min < 3 {
        return Err(LieError::GeneratorDegree { n_min: f_min });
    }
    // intermediate terms keep low degrees: later brackets can lift them into the window
    let work = DegreeWindow::up_to(window.n_max);
    let ft = f.deriv_t();
    let mut total = exp_ad(h, f, f_min, work, 0)?;
    let drift = exp_ad(&ft, f, f_min, work, 1)?;
    total = &total - &drift;
    Ok(total.with_window(window))
}

// Σ_j ad_F^j(G)/(j + shift)!
fn exp_ad(g: &FourierTaylorSeries, f: &FourierTaylorSeries, f_min: u32, work: DegreeWindow, shift: u32) -> Result<FourierTaylorSeries, LieError> {
    let Some(g_min) = g.min_degree() else {
        return Ok(FourierTaylorSeries::zero());
    };
    let bound = lie_iteration_bound(work.n_max, g_min, f_min);
    let mut term = g.with_window(work).scale(1.0 / factorial(shift));
    let mut total = term.clone();
    let mut j = 0u32;
    while !term.is_empty() {
        j += 1;
        assert!(j <= bound + 1, "Lie series exceeded its termination bound {bound}");
        term = poisson_bracket(&term, f, work)?.scale(1.0 / f64::from(j + shift));
        total = &total + &term;
    }
    Ok(total)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// One step of the linearization. With `h = H₂ + P` and `f` solving
/// `{F, H₂} + F_t = R` for a truncation `R` of `P`, the transformed
/// Hamiltonian is `H₂ + P₊` with
///
/// ```text
/// P₊ = Σ_j ad_F^j(P)/j! − Σ_j ad_F^j(R)/(j+1)!,
/// ```
///
/// the homological equation having been used to replace `{H₂, F} − F_t` by
/// `−R`. The `j = 0` terms cancel exactly on the degrees covered by `R`, so
/// `n_min(P₊) ≥ min(2·n_min(P) − 2, n_min(P − R))` holds as an integer
/// statement and is checked.
pub fn kam_step_transform(
    h: &FourierTaylorSeries,
    f: &FourierTaylorSeries,
    r: &FourierTaylorSeries,
    window: DegreeWindow,
) -> Result<FourierTaylorSeries, LieError> {
    let h2 = quadratic_part(h);
    let p = h - &h2;
    let Some(f_min) = f.min_degree() else {
        // no generator: R must vanish and nothing moves
        return Ok((&h2 + &(&p - r)).with_window(window));
    };
    if f_min < 3 {
        return Err(LieError::GeneratorDegree { n_min: f_min });
    }
    let work = DegreeWindow::up_to(window.n_max);
    let p_next = &exp_ad(&p, f, f_min, work, 0)? - &exp_ad(r, f, f_min, work, 1)?;
    let next = (&h2 + &p_next).with_window(window);
    if let (Some(n0), Some(found)) = (p.min_degree(), p_next.with_window(window).min_degree()) {
        let mut expected = 2 * n0 - 2;
        if let Some(rest) = (&p - r).min_degree() {
            expected = expected.min(rest);
        }
        if found < expected {
            return Err(LieError::DegreeViolation { expected, found });
        }
    }
    Ok(next)
}

/// The `(2, 0, 0)` term `ωr` of `h`.
pub fn quadratic_part(h: &FourierTaylorSeries) -> FourierTaylorSeries {
    let c = h.coeff(MonomialIndex::new(2, 0, 0));
    if c == Complex::default() {
        FourierTaylorSeries::zero()
    } else {
        FourierTaylorSeries::monomial(2, 0, 0, c)
    }
}

/// Result of [`deprit_normalize`].
#[derive(Clone, Debug)]
pub struct NormalForm {
    /// `(2j, A_{2j})` for `2 ≤ j ≤ order/2`.
    pub coeffs: Vec<(u32, Complex)>,
    /// Generator used at each degree `3..=order`; empty when nothing was removed.
    pub generators: Vec<FourierTaylorSeries>,
    /// `ωr + Σ A_{2j}r^j`.
    pub normal: FourierTaylorSeries,
    /// Non-kernel terms left at degrees `≤ order` after all steps (rounding only).
    pub remainder: FourierTaylorSeries,
}

impl NormalForm {
    /// `A_{2j}` for the given even degree.
    pub fn coefficient(&self, n: u32) -> Complex {
        self.coeffs.iter().find(|(d, _)| *d == n).map(|(_, c)| *c).unwrap_or_default()
    }
}

/// Removes all non-kernel terms up to degree `order` by a sequence of Lie
/// transformations, one per degree. The degree-`n` generator solves the
/// homological equation for the non-kernel part of the current degree-`n`
/// slice, so lower degrees are never touched again.
pub fn deprit_normalize(h: &FourierTaylorSeries, order: u32) -> Result<NormalForm, LieError> {
    if order < 4 || !order.is_multiple_of(2) {
        return Err(LieError::Order(order));
    }
    let omega = h.coeff(MonomialIndex::new(2, 0, 0)).re;
    let window = DegreeWindow::new(2, order);
    let mut current = h.with_window(window);
    let mut generators = Vec::new();
    for n in 3..=order {
        let (kernel, range) = current.degree_slice(n, n).kernel_project();
        if n % 2 == 1 && !kernel.is_empty() {
            return Err(LieError::OddKernel { n });
        }
        let w = homological::solve(&range, omega)?;
        if !w.is_empty() {
            current = lie_series_transform(&current, &w, window)?;
        }
        generators.push(w);
    }
    let (normal, remainder) = current.kernel_project();
    let coeffs = (2..=order / 2).map(|j| (2 * j, normal.coeff(MonomialIndex::new(2 * j, 0, 0)))).collect();
    Ok(NormalForm { coeffs, generators, normal, remainder })
}

/// Image of a point under a flow map, with the step-halving error estimate.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct FlowPoint {
    pub r: f64,
    pub theta: f64,
    pub error_estimate: f64,
}

/// Integrates `ṙ = F_θ`, `θ̇ = −F_r` at frozen `t` from flow time 0 to
/// `epsilon` with [`DEFAULT_FLOW_STEPS`] RK4 steps.
pub fn flow_map_numeric(f: &FourierTaylorSeries, point: (f64, f64, f64), epsilon: f64) -> Result<FlowPoint, SeriesError> {
    flow_map_steps(f, point, epsilon, DEFAULT_FLOW_STEPS)
}

/// End point of the time-`epsilon` flow with [`DEFAULT_FLOW_STEPS`] RK4
/// steps, without the error estimate.
pub fn flow_map_endpoint(f: &FourierTaylorSeries, point: (f64, f64, f64), epsilon: f64) -> Result<(f64, f64), SeriesError> {
    Ok(FlowField::new(f, point.2)?.rk4(point, epsilon, DEFAULT_FLOW_STEPS))
}

/// [`flow_map_numeric`] with an explicit step count. The error estimate is
/// the Richardson difference against a run with half the steps.
pub fn flow_map_steps(f: &FourierTaylorSeries, point: (f64, f64, f64), epsilon: f64, steps: usize) -> Result<FlowPoint, SeriesError> {
    assert!(steps >= 2);
    let field = FlowField::new(f, point.2)?;
    let fine = field.rk4(point, epsilon, steps);
    let coarse = field.rk4(point, epsilon, steps / 2);
    let error_estimate = (fine.0 - coarse.0).hypot(fine.1 - coarse.1) / 15.0;
    Ok(FlowPoint { r: fine.0, theta: fine.1, error_estimate })
}

/// Central-difference Jacobian `∂(r', θ')/∂(r, θ)` of the time-`epsilon` flow.
pub fn flow_jacobian(f: &FourierTaylorSeries, point: (f64, f64, f64), epsilon: f64, h: f64) -> Result<[[f64; 2]; 2], SeriesError> {
    let field = FlowField::new(f, point.2)?;
    let (r, theta, t) = point;
    let map = |dr: f64, dth: f64| field.rk4((r + dr, theta + dth, t), epsilon, DEFAULT_FLOW_STEPS);
    let (rp, rm) = (map(h, 0.0), map(-h, 0.0));
    let (tp, tm) = (map(0.0, h), map(0.0, -h));
    Ok([[(rp.0 - rm.0) / (2.0 * h), (tp.0 - tm.0) / (2.0 * h)], [(rp.1 - rm.1) / (2.0 * h), (tp.1 - tm.1) / (2.0 * h)]])
}

/// Vector field of a generator at one frozen time; the time harmonics are
/// summed once so each evaluation only runs over `(n, k)`.
struct FlowField {
    f_r: FourierTaylorSeries,
    f_theta: FourierTaylorSeries,
}

impl FlowField {
    fn new(f: &FourierTaylorSeries, t: f64) -> Result<Self, SeriesError> {
        Ok(Self { f_r: freeze_time(&f.deriv_r()?, t), f_theta: freeze_time(&f.deriv_theta(), t) })
    }

    fn velocity(&self, r: f64, theta: f64) -> (f64, f64) {
        (self.f_theta.eval_real(r, theta, 0.0).re, -self.f_r.eval_real(r, theta, 0.0).re)
    }

    fn rk4(&self, (r, theta, _): (f64, f64, f64), epsilon: f64, steps: usize) -> (f64, f64) {
        let h = epsilon / steps as f64;
        let (mut y0, mut y1) = (r, theta);
        for _ in 0..steps {
            let k1 = self.velocity(y0, y1);
            let k2 = self.velocity(y0 + 0.5 * h * k1.0, y1 + 0.5 * h * k1.1);
            let k3 = self.velocity(y0 + 0.5 * h * k2.0, y1 + 0.5 * h * k2.1);
            let k4 = self.velocity(y0 + h * k3.0, y1 + h * k3.1);
            y0 += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            y1 += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (y0, y1)
    }
}

// c·e^{imt} folded into the (n, k, 0) coefficient
fn freeze_time(f: &FourierTaylorSeries, t: f64) -> FourierTaylorSeries {
    FourierTaylorSeries::from_terms(f.iter().map(|(i, c)| (MonomialIndex::new(i.n, i.k, 0), c * Complex::from_polar(1.0, f64::from(i.m) * t))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{to_action_angle, CartesianTerm, FourierCoeff, HamiltonianSpec};
    use approx::assert_relative_eq;

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    fn c(re: f64) -> Complex {
        Complex::new(re, 0.0)
    }

    fn cubic(omega: f64) -> FourierTaylorSeries {
        let spec = HamiltonianSpec {
            omega,
            tau: 2.0,
            alpha: None,
            terms: vec![CartesianTerm { mu: 3, nu: 0, fourier: vec![FourierCoeff { m: 0, re: 1.0, im: 0.0 }] }],
        };
        to_action_angle(&spec, 8)
    }

    #[test]
    fn zero_generator_is_identity() {
        let h = &FourierTaylorSeries::h2(0.5) + &FourierTaylorSeries::monomial(3, 1, 1, c(0.2));
        let out = lie_series_transform(&h, &FourierTaylorSeries::zero(), DegreeWindow::new(2, 10)).unwrap();
        assert_eq!(out, h);
    }

    #[test]
    fn low_degree_generator_rejected() {
        let f = FourierTaylorSeries::monomial(2, 0, 1, c(1.0));
        let err = lie_series_transform(&FourierTaylorSeries::h2(0.5), &f, DegreeWindow::up_to(8)).unwrap_err();
        assert_eq!(err, LieError::GeneratorDegree { n_min: 2 });
    }

    #[test]
    fn pure_time_drift_sign() {
        // F = f(t)·r with f = cos t commutes with ωr, leaving only −F_t
        let f = FourierTaylorSeries::from_terms([(MonomialIndex::new(2, 0, 1), c(0.5)), (MonomialIndex::new(2, 0, -1), c(0.5))]);
        let ft = f.deriv_t();
        let out = exp_ad(&ft, &f, 3, DegreeWindow::up_to(6), 1).unwrap();
        assert_eq!(out, ft);
    }

    #[test]
    fn iteration_bound() {
        assert_eq!(lie_iteration_bound(10, 2, 3), 10);
        assert_eq!(lie_iteration_bound(10, 2, 4), 5);
        assert_eq!(lie_iteration_bound(3, 8, 3), 0);
    }

    #[test]
    fn step_removes_truncation_and_doubles_degree() {
        let w = golden();
        let p = FourierTaylorSeries::from_terms([
            (MonomialIndex::new(4, 2, 1), Complex::new(0.1, 0.2)),
            (MonomialIndex::new(4, -2, -1), Complex::new(0.1, -0.2)),
            (MonomialIndex::new(5, 1, 0), Complex::new(0.0, 0.3)),
            (MonomialIndex::new(5, -1, 0), Complex::new(0.0, -0.3)),
        ]);
        let h = &FourierTaylorSeries::h2(w) + &p;
        let f = homological::solve(&p, w).unwrap();
        let window = DegreeWindow::new(2, 16);
        let next = kam_step_transform(&h, &f, &p, window).unwrap();
        let pert = &next - &FourierTaylorSeries::h2(w);
        assert!(pert.min_degree().unwrap() >= 6);
        assert!(pert.reality_check() <= 1e-12 * pert.max_abs_coeff());
    }

    #[test]
    fn single_mode_step_empties_window() {
        let w = golden();
        let p = FourierTaylorSeries::monomial(3, 1, 0, c(1.0));
        let h = &FourierTaylorSeries::h2(w) + &p;
        let f = homological::solve(&p, w).unwrap();
        // brackets of two e^{iθ}r^{3/2} modes vanish identically
        let next = kam_step_transform(&h, &f, &p, DegreeWindow::new(2, 24)).unwrap();
        assert_eq!(next, FourierTaylorSeries::h2(w));
    }

    #[test]
    fn mismatched_generator_is_a_degree_violation() {
        let w = golden();
        let p = FourierTaylorSeries::monomial(4, 2, 1, c(1.0));
        let h = &FourierTaylorSeries::h2(w) + &p;
        // a degree-3 generator cannot solve for a degree-4 truncation
        let f = FourierTaylorSeries::monomial(3, 1, 0, c(0.5));
        let err = kam_step_transform(&h, &f, &p, DegreeWindow::new(2, 8)).unwrap_err();
        assert_eq!(err, LieError::DegreeViolation { expected: 6, found: 5 });
    }

    #[test]
    fn empty_step_is_identity() {
        let w = golden();
        let h = &FourierTaylorSeries::h2(w) + &FourierTaylorSeries::monomial(3, 1, 0, c(1.0));
        let zero = FourierTaylorSeries::zero();
        assert_eq!(kam_step_transform(&h, &zero, &zero, DegreeWindow::new(2, 8)).unwrap(), h);
    }

    #[test]
    fn step_formula_matches_plain_lie_series() {
        let w = golden();
        let p = FourierTaylorSeries::from_terms([
            (MonomialIndex::new(3, 1, 1), Complex::new(0.1, 0.2)),
            (MonomialIndex::new(3, -1, -1), Complex::new(0.1, -0.2)),
            (MonomialIndex::new(4, 0, 0), c(0.3)),
            (MonomialIndex::new(5, 3, -2), Complex::new(0.0, 0.4)),
            (MonomialIndex::new(5, -3, 2), Complex::new(0.0, -0.4)),
        ]);
        let h = &FourierTaylorSeries::h2(w) + &p;
        let (_, r) = p.degree_slice(3, 4).kernel_project();
        let f = homological::solve(&r, w).unwrap();
        let window = DegreeWindow::new(2, 12);
        let exact = kam_step_transform(&h, &f, &r, window).unwrap();
        let plain = lie_series_transform(&h, &f, window).unwrap();
        assert!(exact.max_abs_diff(&plain) <= 1e-14 * plain.max_abs_coeff());
        let pert = &exact - &FourierTaylorSeries::h2(w);
        assert_eq!(pert.min_degree(), Some(4));
    }

    #[test]
    fn normal_form_is_fixed_point() {
        let h = &FourierTaylorSeries::h2(golden()) + &FourierTaylorSeries::monomial(4, 0, 0, c(1.0));
        let nf = deprit_normalize(&h, 6).unwrap();
        assert_eq!(nf.coefficient(4), c(1.0));
        assert_eq!(nf.coefficient(6), Complex::default());
        assert!(nf.generators.iter().all(FourierTaylorSeries::is_empty));
    }

    #[test]
    fn cubic_birkhoff_coefficient() {
        // hand Lie-triangle value for ωr + x³: A₄ = −15/(4ω)
        for omega in [golden(), 0.3, 1.7] {
            let nf = deprit_normalize(&cubic(omega), 4).unwrap();
            let a4 = nf.coefficient(4);
            assert_relative_eq!(a4.re, -15.0 / (4.0 * omega), max_relative = 1e-12);
            assert!(a4.im.abs() <= 1e-12);
        }
    }

    #[test]
    fn normal_form_is_pure_and_real() {
        let nf = deprit_normalize(&cubic(golden()), 8).unwrap();
        assert!(nf.normal.iter().all(|(i, _)| i.is_kernel() && i.n % 2 == 0));
        assert!(nf.remainder.max_abs_coeff() <= 1e-12);
        for (_, a) in &nf.coeffs {
            assert!(a.im.abs() <= 1e-10);
        }
        for g in &nf.generators {
            assert!(g.reality_check() <= 1e-10 * g.max_abs_coeff().max(1.0));
        }
    }

    #[test]
    fn invalid_order() {
        assert_eq!(deprit_normalize(&FourierTaylorSeries::h2(0.5), 5).unwrap_err(), LieError::Order(5));
        assert_eq!(deprit_normalize(&FourierTaylorSeries::h2(0.5), 2).unwrap_err(), LieError::Order(2));
    }

    #[test]
    fn flow_of_zero_and_rotation() {
        let p = flow_map_numeric(&FourierTaylorSeries::zero(), (0.3, 1.0, 0.2), 1.0).unwrap();
        assert_eq!((p.r, p.theta), (0.3, 1.0));
        let rot = FourierTaylorSeries::monomial(2, 0, 0, c(0.7));
        let p = flow_map_numeric(&rot, (0.3, 1.0, 0.2), 0.5).unwrap();
        assert_relative_eq!(p.r, 0.3);
        assert_relative_eq!(p.theta, 1.0 - 0.35, epsilon = 1e-14);
    }

    #[test]
    fn flow_jacobian_of_rotation_is_identity() {
        let rot = FourierTaylorSeries::monomial(2, 0, 0, c(0.7));
        let j = flow_jacobian(&rot, (0.3, 1.0, 0.0), 1.0, 1e-5).unwrap();
        assert_relative_eq!(j[0][0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(j[1][1], 1.0, epsilon = 1e-9);
        assert!(j[0][1].abs() < 1e-9 && j[1][0].abs() < 1e-9);
    }
}
