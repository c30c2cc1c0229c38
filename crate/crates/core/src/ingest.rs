//! Cartesian Hamiltonian input and its action-angle expansion.
//!
//! Inputs describe `H = ω(x² + y²)/2 + Σ h_{μν}(t) x^μ y^ν` with
//! trigonometric-polynomial coefficients `h_{μν}(t) = Σ c_m e^{imt}` and
//! `μ + ν ≥ 3`. The quadratic part is implicit: inputs are expected to have
//! been Floquet-reduced already, so any explicit quadratic term is rejected.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::series::{Complex, DegreeWindow, FourierTaylorSeries, MonomialIndex};

/// Largest denominator probed by the rational-frequency heuristic.
pub const RATIONAL_PROBE_MAX_DENOMINATOR: i64 = 1000;

/// Tolerance for `c_{−m} = conj(c_m)` in the input coefficients.
pub const INPUT_REALITY_TOLERANCE: f64 = 1e-12;

/// Exponent used when the input leaves `tau` unspecified.
pub const DEFAULT_TAU: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
}

/// One Fourier coefficient `c = re + i·im` of `e^{imt}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierCoeff {
    pub m: i32,
    pub re: f64,
    pub im: f64,
}

impl FourierCoeff {
    pub fn value(&self) -> Complex {
        Complex::new(self.re, self.im)
    }
}

/// The coefficient `h_{μν}(t)` of `x^μ y^ν`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartesianTerm {
    pub mu: u32,
    pub nu: u32,
    pub fourier: Vec<FourierCoeff>,
}

impl CartesianTerm {
    pub fn degree(&self) -> u32 {
        self.mu + self.nu
    }
}

/// A validated (or about to be validated) Hamiltonian specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub omega: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    pub terms: Vec<CartesianTerm>,
}

fn default_tau() -> f64 {
    DEFAULT_TAU
}

/// Returns `(p, q)` with `q ≤ 1000` when `ω` equals `p/q` to within a few
/// ulps. Floats cannot certify irrationality; this only catches frequencies
/// that are rational for all practical purposes.
pub fn rational_witness(omega: f64) -> Option<(i64, i64)> {
    (1..=RATIONAL_PROBE_MAX_DENOMINATOR).find_map(|q| {
        let scaled = q as f64 * omega;
        let p = scaled.round();
        let slack = 4.0 * f64::EPSILON * scaled.abs().max(1.0);
        ((scaled - p).abs() <= slack).then_some((p as i64, q))
    })
}

/// Parses and fully validates a specification document.
pub fn parse_spec(text: &str) -> Result<HamiltonianSpec, IngestError> {
    let spec = parse_spec_lenient(text)?;
    check_omega(spec.omega)?;
    Ok(spec)
}

/// Like [`parse_spec`] but skips the rational-frequency heuristic, so callers
/// can report near-resonant inputs instead of rejecting them.
pub fn parse_spec_lenient(text: &str) -> Result<HamiltonianSpec, IngestError> {
    let spec: HamiltonianSpec = serde_json::from_str(text).map_err(|e| IngestError::Parse(e.to_string()))?;
    validate_structure(&spec)?;
    Ok(spec)
}

/// Rejects NaN, infinite and (heuristically) rational frequencies.
pub fn check_omega(omega: f64) -> Result<(), IngestError> {
    if !omega.is_finite() {
        return Err(IngestError::Validation(format!("omega must be finite, got {omega}")));
    }
    if let Some((p, q)) = rational_witness(omega) {
        return Err(IngestError::Validation(format!("omega = {omega} is numerically rational ({p}/{q}); the frequency must be irrational")));
    }
    Ok(())
}

/// The quadratic part must be exactly `ω(x² + y²)/2`, which the schema
/// encodes by forbidding explicit quadratic terms.
pub fn validate_h2(spec: &HamiltonianSpec) -> Result<(), IngestError> {
    match spec.terms.iter().find(|t| t.degree() == 2) {
        Some(t) => Err(IngestError::Validation(format!(
            "explicit quadratic term x^{} y^{} present; the quadratic part must be Floquet-reduced to omega*(x^2+y^2)/2",
            t.mu, t.nu
        ))),
        None => Ok(()),
    }
}

/// Structural validation shared by the strict and lenient parsers.
pub fn validate_structure(spec: &HamiltonianSpec) -> Result<(), IngestError> {
    validate_h2(spec)?;
    if !(spec.tau.is_finite() && spec.tau > 1.0) {
        return Err(IngestError::Validation(format!("tau must exceed 1, got {}", spec.tau)));
    }
    if let Some(alpha) = spec.alpha {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(IngestError::Validation(format!("alpha must be positive, got {alpha}")));
        }
    }
    let mut seen = BTreeSet::new();
    for term in &spec.terms {
        if term.degree() < 3 {
            return Err(IngestError::Validation(format!(
                "term x^{} y^{} has degree {} < 3; constant and linear terms are forbidden",
                term.mu,
                term.nu,
                term.degree()
            )));
        }
        if !seen.insert((term.mu, term.nu)) {
            return Err(IngestError::Validation(format!("duplicate term x^{} y^{}", term.mu, term.nu)));
        }
        let mut by_m = BTreeMap::new();
        for fc in &term.fourier {
            if !(fc.re.is_finite() && fc.im.is_finite()) {
                return Err(IngestError::Validation(format!("non-finite coefficient in term x^{} y^{}", term.mu, term.nu)));
            }
            if by_m.insert(fc.m, fc.value()).is_some() {
                return Err(IngestError::Validation(format!("duplicate harmonic m = {} in term x^{} y^{}", fc.m, term.mu, term.nu)));
            }
        }
        let scale = by_m.values().map(|c| c.norm()).fold(1.0, f64::max);
        for (m, c) in &by_m {
            let partner = by_m.get(&-m).copied().unwrap_or_default();
            if (c - partner.conj()).norm() > INPUT_REALITY_TOLERANCE * scale {
                return Err(IngestError::Validation(format!(
                    "term x^{} y^{} is not real: coefficient at m = {} is not the conjugate of m = {}",
                    term.mu, term.nu, -m, m
                )));
            }
        }
    }
    Ok(())
}

fn binomials(n: u32) -> Vec<f64> {
    let mut row = vec![1.0; n as usize + 1];
    for j in 1..n as usize {
        row[j] = row[j - 1] * f64::from(n + 1 - j as u32) / j as f64;
    }
    row
}

/// `x^μ y^ν` in action-angle form, `(2r)^{(μ+ν)/2} cos^μθ sin^νθ`, as
/// `(k, coefficient of r^{(μ+ν)/2} e^{ikθ})` pairs.
fn monomial_harmonics(mu: u32, nu: u32) -> BTreeMap<i32, Complex> {
    let n = mu + nu;
    // cos = (e^{iθ} + e^{−iθ})/2, sin = (e^{iθ} − e^{−iθ})/(2i)
    let prefactor = Complex::new(2f64.powf(f64::from(n) / 2.0) / 2f64.powi(n as i32), 0.0) * Complex::new(0.0, -1.0).powu(nu);
    let (bmu, bnu) = (binomials(mu), binomials(nu));
    let mut out = BTreeMap::new();
    for a in 0..=mu {
        for b in 0..=nu {
            let k = (2 * a as i32 - mu as i32) + (2 * b as i32 - nu as i32);
            let sign = if (nu - b).is_multiple_of(2) { 1.0 } else { -1.0 };
            *out.entry(k).or_insert_with(Complex::default) += prefactor * (bmu[a as usize] * bnu[b as usize] * sign);
        }
    }
    out.retain(|_, c| *c != Complex::default());
    out
}

/// Expands `H` in action-angle variables `x = √(2r)cosθ, y = √(2r)sinθ`.
///
/// The result carries `H₂ = ωr` at `(2, 0, 0)` and every term with
/// `3 ≤ n ≤ n_max`; the window is `[2, n_max]`.
pub fn to_action_angle(spec: &HamiltonianSpec, n_max: u32) -> FourierTaylorSeries {
    assert!(n_max >= 3, "n_max must be at least 3");
    let mut terms = vec![(MonomialIndex::new(2, 0, 0), Complex::new(spec.omega, 0.0))];
    for term in spec.terms.iter().filter(|t| t.degree() <= n_max) {
        for (k, angular) in monomial_harmonics(term.mu, term.nu) {
            for fc in &term.fourier {
                terms.push((MonomialIndex::new(term.degree(), k, fc.m), angular * fc.value()));
            }
        }
    }
    FourierTaylorSeries::from_terms(terms).with_window(DegreeWindow::new(2, n_max))
}

/// Inverse of [`to_action_angle`]: rewrites `H − ωr` with
/// `r^{1/2}e^{±iθ} = (x ± iy)/√2` as Cartesian terms. The series must obey
/// the polynomial parity rule and have no `n ≤ 2` terms besides `ωr`.
pub fn from_action_angle(series: &FourierTaylorSeries, tau: f64, alpha: Option<f64>) -> Result<HamiltonianSpec, IngestError> {
    let omega = series.coeff(MonomialIndex::new(2, 0, 0)).re;
    let mut acc: BTreeMap<(u32, u32), BTreeMap<i32, Complex>> = BTreeMap::new();
    for (idx, c) in series.iter() {
        if idx.n <= 2 {
            if *idx == MonomialIndex::new(2, 0, 0) {
                continue;
            }
            return Err(IngestError::Validation(format!("term at {idx} has degree below 3")));
        }
        if !idx.obeys_parity() {
            return Err(IngestError::Validation(format!("term at {idx} is not a polynomial in x, y")));
        }
        let a = ((idx.n as i32 + idx.k) / 2) as u32;
        let b = ((idx.n as i32 - idx.k) / 2) as u32;
        let (ba, bb) = (binomials(a), binomials(b));
        let norm = 2f64.powf(-f64::from(idx.n) / 2.0);
        for p in 0..=a {
            for q in 0..=b {
                let weight = Complex::new(0.0, 1.0).powu(a - p) * Complex::new(0.0, -1.0).powu(b - q);
                let value = c * weight * (ba[p as usize] * bb[q as usize] * norm);
                let mu = p + q;
                let nu = idx.n - mu;
                *acc.entry((mu, nu)).or_default().entry(idx.m).or_default() += value;
            }
        }
    }
    let terms = acc
        .into_iter()
        .filter_map(|((mu, nu), by_m)| {
            let fourier: Vec<FourierCoeff> = by_m.into_iter().filter(|(_, c)| c.norm() > 0.0).map(|(m, c)| FourierCoeff { m, re: c.re, im: c.im }).collect();
            (!fourier.is_empty()).then_some(CartesianTerm { mu, nu, fourier })
        })
        .collect();
    Ok(HamiltonianSpec { omega, tau, alpha, terms })
}

/// Direct evaluation of the Cartesian Hamiltonian.
pub fn eval_cartesian(spec: &HamiltonianSpec, x: f64, y: f64, t: f64) -> f64 {
    let quadratic = 0.5 * spec.omega * (x * x + y * y);
    let rest: f64 = spec
        .terms
        .iter()
        .map(|term| {
            let h: Complex = term.fourier.iter().map(|fc| fc.value() * Complex::from_polar(1.0, f64::from(fc.m) * t)).sum();
            h.re * x.powi(term.mu as i32) * y.powi(term.nu as i32)
        })
        .sum();
    quadratic + rest
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const GOLDEN: f64 = 0.6180339887;

    fn x_cubed_doc() -> String {
        format!(r#"{{"omega": {GOLDEN}, "terms": [{{"mu": 3, "nu": 0, "fourier": [{{"m": 0, "re": 1.0, "im": 0.0}}]}}]}}"#)
    }

    #[test]
    fn single_term_passes_through() {
        let spec = parse_spec(&x_cubed_doc()).unwrap();
        assert_eq!(spec.omega, GOLDEN);
        assert_eq!(spec.tau, DEFAULT_TAU);
        assert_eq!(spec.terms.len(), 1);
        assert_eq!((spec.terms[0].mu, spec.terms[0].nu), (3, 0));
    }

    #[test]
    fn linear_term_rejected() {
        let doc = r#"{"omega": 0.6180339887, "terms": [{"mu": 1, "nu": 0, "fourier": [{"m": 0, "re": 1.0, "im": 0.0}]}]}"#;
        assert!(matches!(parse_spec(doc), Err(IngestError::Validation(_))));
    }

    #[test]
    fn non_real_coefficient_rejected() {
        let doc = r#"{"omega": 0.6180339887, "terms": [{"mu": 3, "nu": 0, "fourier": [{"m": 1, "re": 1.0, "im": 0.0}]}]}"#;
        assert!(matches!(parse_spec(doc), Err(IngestError::Validation(_))));
    }

    #[test]
    fn malformed_and_unknown_fields_rejected() {
        assert!(matches!(parse_spec("{ not json"), Err(IngestError::Parse(_))));
        let doc = r#"{"omega": 0.6180339887, "terms": [], "extra": 1}"#;
        assert!(matches!(parse_spec(doc), Err(IngestError::Parse(_))));
    }

    #[test]
    fn rational_frequency_rejected() {
        let doc = r#"{"omega": 0.5, "terms": []}"#;
        assert!(matches!(parse_spec(doc), Err(IngestError::Validation(_))));
        assert!(parse_spec_lenient(doc).is_ok());
        assert_eq!(rational_witness(1.0 / 3.0), Some((1, 3)));
        assert_eq!(rational_witness(GOLDEN), None);
        assert_eq!(rational_witness(0.3333334), None);
    }

    #[test]
    fn quadratic_terms_rejected() {
        let ok = parse_spec(&x_cubed_doc()).unwrap();
        assert!(validate_h2(&ok).is_ok());
        for (mu, nu) in [(2, 0), (1, 1)] {
            let mut spec = ok.clone();
            spec.terms.push(CartesianTerm { mu, nu, fourier: vec![FourierCoeff { m: 0, re: 1.0, im: 0.0 }] });
            assert!(matches!(validate_h2(&spec), Err(IngestError::Validation(_))));
        }
    }

    #[test]
    fn x_cubed_expansion() {
        let spec = parse_spec(&x_cubed_doc()).unwrap();
        let h = to_action_angle(&spec, 6);
        let sqrt2 = 2f64.sqrt();
        assert_relative_eq!(h.coeff(MonomialIndex::new(3, 3, 0)).re, sqrt2 / 4.0, epsilon = 1e-15);
        assert_relative_eq!(h.coeff(MonomialIndex::new(3, 1, 0)).re, 3.0 * sqrt2 / 4.0, epsilon = 1e-15);
        assert_relative_eq!(h.coeff(MonomialIndex::new(3, -1, 0)).re, 3.0 * sqrt2 / 4.0, epsilon = 1e-15);
        assert_relative_eq!(h.coeff(MonomialIndex::new(3, -3, 0)).re, sqrt2 / 4.0, epsilon = 1e-15);
        assert_eq!(h.coeff(MonomialIndex::new(2, 0, 0)).re, GOLDEN);
        assert!(h.polynomial_origin() && h.real_symmetric());
        assert_eq!(h.window(), DegreeWindow::new(2, 6));
    }

    #[test]
    fn action_equals_half_radius_squared() {
        let spec = HamiltonianSpec { omega: 1.0, tau: 2.0, alpha: None, terms: vec![] };
        let h = to_action_angle(&spec, 4);
        assert_eq!(h.coeff(MonomialIndex::new(2, 0, 0)).re, 1.0);
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn cos_t_x2y2_harmonics() {
        let spec = HamiltonianSpec {
            omega: GOLDEN,
            tau: 2.0,
            alpha: None,
            terms: vec![CartesianTerm { mu: 2, nu: 2, fourier: vec![FourierCoeff { m: 1, re: 0.5, im: 0.0 }, FourierCoeff { m: -1, re: 0.5, im: 0.0 }] }],
        };
        let h = to_action_angle(&spec, 4);
        let p = h.degree_slice(3, 4);
        let ks: BTreeSet<i32> = p.iter().map(|(i, _)| i.k).collect();
        let ms: BTreeSet<i32> = p.iter().map(|(i, _)| i.m).collect();
        assert_eq!(ks, BTreeSet::from([-4, 0, 4]));
        assert_eq!(ms, BTreeSet::from([-1, 1]));
        assert!(p.iter().all(|(i, _)| i.n == 4 && i.k % 2 == 0));
        // x²y² = r²(1 − cos 4θ)/2 · ... : the k = ±2 harmonics cancel exactly
        assert_relative_eq!(p.coeff(MonomialIndex::new(4, 0, 1)).re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(p.coeff(MonomialIndex::new(4, 4, 1)).re, -0.125, epsilon = 1e-15);
    }

    #[test]
    fn terms_above_window_discarded() {
        let spec = HamiltonianSpec {
            omega: GOLDEN,
            tau: 2.0,
            alpha: None,
            terms: vec![CartesianTerm { mu: 5, nu: 0, fourier: vec![FourierCoeff { m: 0, re: 1.0, im: 0.0 }] }],
        };
        assert_eq!(to_action_angle(&spec, 4).len(), 1);
    }

    #[test]
    fn roundtrip_through_cartesian() {
        let spec = HamiltonianSpec {
            omega: GOLDEN,
            tau: 2.0,
            alpha: Some(0.3),
            terms: vec![
                CartesianTerm { mu: 1, nu: 2, fourier: vec![FourierCoeff { m: 0, re: -0.7, im: 0.0 }] },
                CartesianTerm { mu: 4, nu: 1, fourier: vec![FourierCoeff { m: 2, re: 0.1, im: 0.3 }, FourierCoeff { m: -2, re: 0.1, im: -0.3 }] },
            ],
        };
        let series = to_action_angle(&spec, 8);
        let back = from_action_angle(&series, 2.0, Some(0.3)).unwrap();
        for (x, y, t) in [(0.1, 0.2, 0.3), (-0.4, 0.05, 2.0), (0.33, -0.21, 5.1)] {
            assert_relative_eq!(eval_cartesian(&back, x, y, t), eval_cartesian(&spec, x, y, t), epsilon = 1e-14);
        }
    }
}
