//! Sparse Fourier–Taylor series in action-angle variables.
//!
//! A series is a finite sum of monomials
//!
//! ```text
//! c · r^{n/2} · e^{ikθ} · e^{imt}
//! ```
//!
//! keyed by the integer triple `(n, k, m)`. Degrees are counted in powers of
//! `√r`, so `O(r^s)` corresponds to `n ≥ 2s`. Expanding a Cartesian monomial
//! `x^μ y^ν` with `μ + ν = n` only produces harmonics with `|k| ≤ n` and
//! `n − k` even; series built that way carry the `polynomial_origin` flag and
//! every operation below preserves it when both inputs carry it.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Complex coefficient type used throughout the crate.
pub type Complex = Complex64;

/// Relative tolerance used when deciding whether a freshly built series is
/// real-symmetric.
pub const REALITY_TOLERANCE: f64 = 1e-12;

/// Exponent triple of the monomial `r^{n/2} e^{ikθ} e^{imt}`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonomialIndex {
    /// Power of `√r`.
    pub n: u32,
    /// Angle harmonic.
    pub k: i32,
    /// Time harmonic.
    pub m: i32,
}

impl MonomialIndex {
    pub const fn new(n: u32, k: i32, m: i32) -> Self {
        Self { n, k, m }
    }

    /// `|k| ≤ n` and `n − k` even.
    pub fn obeys_parity(&self) -> bool {
        self.k.unsigned_abs() <= self.n && (i64::from(self.n) - i64::from(self.k)) % 2 == 0
    }

    /// The `(k, m) = (0, 0)` modes span the kernel of the homological operator.
    pub fn is_kernel(&self) -> bool {
        self.k == 0 && self.m == 0
    }

    /// Index of the complex-conjugate partner `(n, −k, −m)`.
    pub fn conjugate(&self) -> Self {
        Self::new(self.n, -self.k, -self.m)
    }
}

impl fmt::Display for MonomialIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.n, self.k, self.m)
    }
}

/// Inclusive bounds on the degree `n`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct DegreeWindow {
    pub n_min: u32,
    pub n_max: u32,
}

impl DegreeWindow {
    pub fn new(n_min: u32, n_max: u32) -> Self {
        assert!(n_min <= n_max, "empty degree window [{n_min}, {n_max}]");
        Self { n_min, n_max }
    }

    /// Window `[0, n_max]`.
    pub fn up_to(n_max: u32) -> Self {
        Self::new(0, n_max)
    }

    pub fn contains(&self, n: u32) -> bool {
        self.n_min <= n && n <= self.n_max
    }

    fn hull(&self, other: &Self) -> Self {
        Self::new(self.n_min.min(other.n_min), self.n_max.max(other.n_max))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    /// Differentiating in `r` would produce a negative power of `√r`.
    #[error("r-derivative of the monomial at {index} produces a fractional pole")]
    FractionalPole { index: MonomialIndex },
}

/// Result of a truncated product: the kept series and the `ℓ¹` mass of the
/// discarded contributions (an upper bound for the tail majorant at
/// `ρ = 1, γ = 0`).
#[derive(Clone, Debug)]
pub struct Truncated {
    pub series: FourierTaylorSeries,
    pub tail_mass: f64,
}

/// Sparse complex-coefficient series over [`MonomialIndex`].
///
/// Equality compares coefficients only; window and flags are metadata.
#[derive(Clone, Debug)]
pub struct FourierTaylorSeries {
    coeffs: BTreeMap<MonomialIndex, Complex>,
    window: DegreeWindow,
    polynomial_origin: bool,
    real_symmetric: bool,
}

impl PartialEq for FourierTaylorSeries {
    fn eq(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
    }
}

impl Default for FourierTaylorSeries {
    fn default() -> Self {
        Self::zero()
    }
}

impl FourierTaylorSeries {
    /// The empty series. Both flags hold vacuously.
    pub fn zero() -> Self {
        Self { coeffs: BTreeMap::new(), window: DegreeWindow::new(0, 0), polynomial_origin: true, real_symmetric: true }
    }

    /// Builds a series from `(index, coefficient)` pairs, summing duplicates
    /// and dropping exact zeros. The window is the tight hull of the stored
    /// degrees; both flags are detected from the data.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (MonomialIndex, Complex)>,
    {
        let mut coeffs = BTreeMap::new();
        for (idx, c) in terms {
            *coeffs.entry(idx).or_insert_with(Complex::default) += c;
        }
        coeffs.retain(|_, c| *c != Complex::default());
        let window = match (coeffs.keys().map(|i| i.n).min(), coeffs.keys().map(|i| i.n).max()) {
            (Some(lo), Some(hi)) => DegreeWindow::new(lo, hi),
            _ => DegreeWindow::new(0, 0),
        };
        let mut series = Self { coeffs, window, polynomial_origin: true, real_symmetric: true };
        series.polynomial_origin = series.coeffs.keys().all(MonomialIndex::obeys_parity);
        let scale = series.max_abs_coeff();
        series.real_symmetric = series.reality_check() <= REALITY_TOLERANCE * scale.max(f64::MIN_POSITIVE);
        series
    }

    /// Single monomial `c · r^{n/2} e^{ikθ} e^{imt}`.
    pub fn monomial(n: u32, k: i32, m: i32, c: Complex) -> Self {
        Self::from_terms([(MonomialIndex::new(n, k, m), c)])
    }

    /// The quadratic part `H₂ = ωr`.
    pub fn h2(omega: f64) -> Self {
        Self::monomial(2, 0, 0, Complex::new(omega, 0.0))
    }

    fn from_parts(coeffs: BTreeMap<MonomialIndex, Complex>, window: DegreeWindow, polynomial_origin: bool, real_symmetric: bool) -> Self {
        debug_assert!(coeffs.keys().all(|i| window.contains(i.n)));
        Self { coeffs, window, polynomial_origin, real_symmetric }
    }

    fn map_coeffs<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&MonomialIndex, Complex) -> Complex,
    {
        let coeffs = self.coeffs.iter().map(|(i, c)| (*i, f(i, *c))).filter(|(_, c)| *c != Complex::default()).collect();
        Self::from_parts(coeffs, self.window, self.polynomial_origin, self.real_symmetric)
    }

    /// Replaces the window metadata, discarding terms outside it.
    pub fn with_window(&self, window: DegreeWindow) -> Self {
        let coeffs = self.coeffs.iter().filter(|(i, _)| window.contains(i.n)).map(|(i, c)| (*i, *c)).collect();
        Self::from_parts(coeffs, window, self.polynomial_origin, self.real_symmetric)
    }

    /// Terms with `lo ≤ n ≤ hi`; the window becomes `[lo, hi]`.
    pub fn degree_slice(&self, lo: u32, hi: u32) -> Self {
        self.with_window(DegreeWindow::new(lo, hi))
    }

    pub fn coeff(&self, idx: MonomialIndex) -> Complex {
        self.coeffs.get(&idx).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MonomialIndex, &Complex)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn window(&self) -> DegreeWindow {
        self.window
    }

    /// Lower bound of the degree window.
    pub fn n_min(&self) -> u32 {
        self.window.n_min
    }

    /// Upper bound of the degree window.
    pub fn n_max(&self) -> u32 {
        self.window.n_max
    }

    /// Lowest degree actually stored.
    pub fn min_degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|i| i.n).min()
    }

    /// Highest degree actually stored.
    pub fn max_degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|i| i.n).max()
    }

    /// Largest `|m|` among stored terms.
    pub fn max_time_harmonic(&self) -> u32 {
        self.coeffs.keys().map(|i| i.m.unsigned_abs()).max().unwrap_or(0)
    }

    /// Largest `|k|` among stored terms.
    pub fn max_angle_harmonic(&self) -> u32 {
        self.coeffs.keys().map(|i| i.k.unsigned_abs()).max().unwrap_or(0)
    }

    pub fn polynomial_origin(&self) -> bool {
        self.polynomial_origin
    }

    pub fn real_symmetric(&self) -> bool {
        self.real_symmetric
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `Σ|c|`, the majorant at `ρ = 1, γ = 0`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, |a, b| a + b)
    }

    /// Largest coefficient-wise difference to `other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, c) in &self.coeffs {
            worst = worst.max((c - other.coeff(*i)).norm());
        }
        for (i, c) in &other.coeffs {
            if !self.coeffs.contains_key(i) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }

    /// Removes coefficients with `|c| < eps` (`eps = 0` removes nothing that
    /// is stored, since exact zeros are never kept).
    pub fn prune(&self, eps: f64) -> Self {
        let coeffs = self.coeffs.iter().filter(|(_, c)| c.norm() >= eps).map(|(i, c)| (*i, *c)).collect();
        Self::from_parts(coeffs, self.window, self.polynomial_origin, self.real_symmetric)
    }

    /// Multiplies by a real scalar.
    pub fn scale(&self, factor: f64) -> Self {
        self.map_coeffs(|_, c| c * factor)
    }

    /// Multiplies by a complex scalar; the reality flag survives only for
    /// real factors.
    pub fn scale_complex(&self, factor: Complex) -> Self {
        let mut out = self.map_coeffs(|_, c| c * factor);
        out.real_symmetric &= factor.im == 0.0;
        out
    }

    /// `∂/∂r`: `c` at `(n, k, m)` becomes `c·n/2` at `(n − 2, k, m)`.
    /// Terms with `n = 0` vanish; terms with `n = 1` are a fractional pole.
    pub fn deriv_r(&self) -> Result<Self, SeriesError> {
        let mut coeffs = BTreeMap::new();
        for (i, c) in &self.coeffs {
            match i.n {
                0 => continue,
                1 => return Err(SeriesError::FractionalPole { index: *i }),
                n => {
                    coeffs.insert(MonomialIndex::new(n - 2, i.k, i.m), c * (f64::from(n) * 0.5));
                }
            }
        }
        let window = DegreeWindow::new(self.window.n_min.saturating_sub(2), self.window.n_max.saturating_sub(2));
        let polynomial = self.polynomial_origin && coeffs.keys().all(MonomialIndex::obeys_parity);
        Ok(Self::from_parts(coeffs, window, polynomial, self.real_symmetric))
    }

    /// `∂/∂θ`: multiplies each coefficient by `ik`.
    pub fn deriv_theta(&self) -> Self {
        self.map_coeffs(|i, c| Complex::new(0.0, f64::from(i.k)) * c)
    }

    /// `∂/∂t`: multiplies each coefficient by `im`.
    pub fn deriv_t(&self) -> Self {
        self.map_coeffs(|i, c| Complex::new(0.0, f64::from(i.m)) * c)
    }

    /// Splits into the `(k, m) = (0, 0)` part and the rest.
    pub fn kernel_project(&self) -> (Self, Self) {
        let (kernel, range): (BTreeMap<_, _>, BTreeMap<_, _>) = self.coeffs.iter().map(|(i, c)| (*i, *c)).partition(|(i, _)| i.is_kernel());
        (
            Self::from_parts(kernel, self.window, self.polynomial_origin, self.real_symmetric),
            Self::from_parts(range, self.window, self.polynomial_origin, self.real_symmetric),
        )
    }

    /// `max |c(n,k,m) − conj(c(n,−k,−m))|`; zero for series of real functions.
    pub fn reality_check(&self) -> f64 {
        self.coeffs.iter().map(|(i, c)| (c - self.coeff(i.conjugate()).conj()).norm()).fold(0.0, f64::max)
    }

    /// Coefficient majorant `Σ|c|·ρ^{n/2}·e^{|k|γ}`, an upper bound for the
    /// sup-norm over `|r| ≤ ρ`, `|Im θ| ≤ γ`, real `t`.
    pub fn majorant_norm(&self, rho: f64, gamma: f64) -> f64 {
        let sqrt_rho = rho.sqrt();
        self.coeffs.iter().map(|(i, c)| c.norm() * sqrt_rho.powi(i.n as i32) * (f64::from(i.k.unsigned_abs()) * gamma).exp()).fold(0.0, |a, b| a + b)
    }

    /// Evaluates at complex `r`, complex `θ` and real `t`, using the principal
    /// branch of `√r`.
    pub fn eval(&self, r: Complex, theta: Complex, t: f64) -> Complex {
        let sqrt_r = r.sqrt();
        let e_theta = (Complex::i() * theta).exp();
        let e_t = Complex::from_polar(1.0, t);
        self.eval_with(sqrt_r, e_theta, e_t)
    }

    /// Evaluates at a real phase-space point `r ≥ 0`.
    pub fn eval_real(&self, r: f64, theta: f64, t: f64) -> Complex {
        let sqrt_r = Complex::new(r.max(0.0).sqrt(), 0.0);
        self.eval_with(sqrt_r, Complex::from_polar(1.0, theta), Complex::from_polar(1.0, t))
    }

    fn eval_with(&self, sqrt_r: Complex, e_theta: Complex, e_t: Complex) -> Complex {
        let (Some(n_max), k_max, m_max) = (self.max_degree(), self.max_angle_harmonic(), self.max_time_harmonic()) else {
            return Complex::default();
        };
        // power tables replace one powi per factor and term
        let radial = powers(sqrt_r, n_max);
        let angle = SignedPowers::new(e_theta, k_max);
        let time = SignedPowers::new(e_t, m_max);
        self.coeffs.iter().map(|(i, c)| c * radial[i.n as usize] * angle.get(i.k) * time.get(i.m)).fold(Complex::default(), |a, b| a + b)
    }

    /// Sampled sup-norm over `|r| = ρ` (all phases), `Im θ = ±γ`, real parts
    /// of `θ` and `t` on uniform grids. A lower companion of
    /// [`Self::majorant_norm`].
    pub fn grid_supnorm(&self, rho: f64, gamma: f64, samples: usize) -> f64 {
        assert!(samples >= 4, "grid_supnorm needs at least 4 samples per dimension");
        let step = TAU / samples as f64;
        let sqrt_rho = rho.sqrt();
        let mut best: f64 = 0.0;
        for a in 0..samples {
            // principal √r on the circle |r| = ρ
            let sqrt_r = Complex::from_polar(sqrt_rho, 0.5 * a as f64 * step);
            for b in 0..samples {
                let re_theta = b as f64 * step;
                for im_theta in [gamma, -gamma] {
                    let e_theta = (Complex::i() * Complex::new(re_theta, im_theta)).exp();
                    for c in 0..samples {
                        let e_t = Complex::from_polar(1.0, c as f64 * step);
                        best = best.max(self.eval_with(sqrt_r, e_theta, e_t).norm());
                    }
                }
            }
        }
        best
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.coeffs.len().cmp(&other.coeffs.len()).then_with(|| {
            for ((ia, ca), (ib, cb)) in self.coeffs.iter().zip(other.coeffs.iter()) {
                let ord = ia.cmp(ib).then(ca.re.to_bits().cmp(&cb.re.to_bits())).then(ca.im.to_bits().cmp(&cb.im.to_bits()));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
            Ordering::Equal
        })
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        let mut coeffs = self.coeffs.clone();
        for (i, c) in &other.coeffs {
            *coeffs.entry(*i).or_default() += c * sign;
        }
        coeffs.retain(|_, c| *c != Complex::default());
        let window = match (self.is_empty(), other.is_empty()) {
            (true, false) => other.window,
            (false, true) => self.window,
            _ => self.window.hull(&other.window),
        };
        Self::from_parts(coeffs, window, self.polynomial_origin && other.polynomial_origin, self.real_symmetric && other.real_symmetric)
    }
}

impl Add for &FourierTaylorSeries {
    type Output = FourierTaylorSeries;

    fn add(self, rhs: Self) -> FourierTaylorSeries {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &FourierTaylorSeries {
    type Output = FourierTaylorSeries;

    fn sub(self, rhs: Self) -> FourierTaylorSeries {
        self.combine(rhs, -1.0)
    }
}

impl Neg for &FourierTaylorSeries {
    type Output = FourierTaylorSeries;

    fn neg(self) -> FourierTaylorSeries {
        self.map_coeffs(|_, c| -c)
    }
}

fn finish(acc: HashMap<MonomialIndex, Complex>, window: DegreeWindow, polynomial: bool, real: bool) -> FourierTaylorSeries {
    let coeffs = acc.into_iter().filter(|(_, c)| *c != Complex::default()).collect();
    FourierTaylorSeries::from_parts(coeffs, window, polynomial, real)
}

/// `[1, z, z², …, z^n]`.
fn powers(z: Complex, n: u32) -> Vec<Complex> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut acc = Complex::new(1.0, 0.0);
    for _ in 0..=n {
        out.push(acc);
        acc *= z;
    }
    out
}

/// `z^j` for `|j| ≤ n`.
struct SignedPowers {
    positive: Vec<Complex>,
    negative: Vec<Complex>,
}

impl SignedPowers {
    fn new(z: Complex, n: u32) -> Self {
        Self { positive: powers(z, n), negative: powers(z.inv(), n) }
    }

    fn get(&self, j: i32) -> Complex {
        if j >= 0 {
            self.positive[j as usize]
        } else {
            self.negative[j.unsigned_abs() as usize]
        }
    }
}

/// Truncated product: indices add component-wise, results outside `window`
/// are dropped and their mass reported.
pub fn mul(a: &FourierTaylorSeries, b: &FourierTaylorSeries, window: DegreeWindow) -> Truncated {
    let mut acc: HashMap<MonomialIndex, Complex> = HashMap::new();
    let mut tail_mass = 0.0;
    for (ia, ca) in &a.coeffs {
        for (ib, cb) in &b.coeffs {
            let n = ia.n + ib.n;
            let value = ca * cb;
            if window.contains(n) {
                *acc.entry(MonomialIndex::new(n, ia.k + ib.k, ia.m + ib.m)).or_default() += value;
            } else {
                tail_mass += value.norm();
            }
        }
    }
    Truncated { series: finish(acc, window, a.polynomial_origin && b.polynomial_origin, a.real_symmetric && b.real_symmetric), tail_mass }
}

/// Poisson bracket `{F, G} = F_r G_θ − F_θ G_r`, truncated to `window`.
///
/// With this sign `{F, ωr} = −ω F_θ`. Each pair of monomials contributes
/// `i(n_F k_G − k_F n_G)/2 · c_F c_G` at `(n_F + n_G − 2, k_F + k_G, m_F + m_G)`,
/// which never involves a singular `r`-derivative unless the target degree is
/// negative. The pair loop runs in an order that does not depend on argument
/// order, so `{F, G} = −{G, F}` holds bit for bit.
pub fn poisson_bracket(f: &FourierTaylorSeries, g: &FourierTaylorSeries, window: DegreeWindow) -> Result<FourierTaylorSeries, SeriesError> {
    let (outer, inner, sign) = match f.canonical_cmp(g) {
        Ordering::Greater => (g, f, -1.0),
        _ => (f, g, 1.0),
    };
    let mut acc: HashMap<MonomialIndex, Complex> = HashMap::new();
    for (ia, ca) in &outer.coeffs {
        for (ib, cb) in &inner.coeffs {
            let weight = i64::from(ia.n) * i64::from(ib.k) - i64::from(ia.k) * i64::from(ib.n);
            if weight == 0 {
                continue;
            }
            let n = i64::from(ia.n) + i64::from(ib.n) - 2;
            if n < 0 {
                let index = if ia.n < 2 { *ia } else { *ib };
                return Err(SeriesError::FractionalPole { index });
            }
            let n = n as u32;
            if !window.contains(n) {
                continue;
            }
            let factor = Complex::new(0.0, sign * 0.5 * weight as f64);
            *acc.entry(MonomialIndex::new(n, ia.k + ib.k, ia.m + ib.m)).or_default() += factor * (ca * cb);
        }
    }
    Ok(finish(acc, window, f.polynomial_origin && g.polynomial_origin, f.real_symmetric && g.real_symmetric))
}
