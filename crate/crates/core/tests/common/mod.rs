#![allow(dead_code)]

use kamlin::{Complex, FourierTaylorSeries, MonomialIndex};
use rand::Rng;

pub fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Real-symmetric series with `terms` conjugate pairs, degrees in
/// `n_lo..=n_hi`, `|k| ≤ k_max`, `|m| ≤ m_max`, no kernel modes.
pub fn random_real_range<R: Rng>(rng: &mut R, terms: usize, n_lo: u32, n_hi: u32, k_max: i32, m_max: i32) -> FourierTaylorSeries {
    let mut out = Vec::new();
    while out.len() < 2 * terms {
        let n = rng.gen_range(n_lo..=n_hi);
        let kk = k_max.min(n as i32);
        let k = rng.gen_range(-kk..=kk);
        let m = rng.gen_range(-m_max..=m_max);
        let idx = MonomialIndex::new(n, k, m);
        if !idx.obeys_parity() || idx.is_kernel() {
            continue;
        }
        let c = Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        out.push((idx, c));
        out.push((idx.conjugate(), c.conj()));
    }
    FourierTaylorSeries::from_terms(out)
}

/// Arbitrary complex series obeying the parity rule, kernel modes allowed.
pub fn random_complex<R: Rng>(rng: &mut R, terms: usize, n_lo: u32, n_hi: u32, k_max: i32, m_max: i32) -> FourierTaylorSeries {
    FourierTaylorSeries::from_terms((0..terms).map(|_| {
        let n = rng.gen_range(n_lo..=n_hi);
        let j = rng.gen_range(0..=n) as i32;
        let k = (n as i32 - 2 * j).clamp(-k_max, k_max);
        let k = if (n as i32 - k) % 2 == 0 { k } else { k - k.signum() };
        let m = rng.gen_range(-m_max..=m_max);
        (MonomialIndex::new(n, k, m), Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }))
}

/// `max |a − b|` over coefficients relative to `scale`.
pub fn rel_diff(a: &FourierTaylorSeries, b: &FourierTaylorSeries, scale: f64) -> f64 {
    a.max_abs_diff(b) / scale.max(f64::MIN_POSITIVE)
}
