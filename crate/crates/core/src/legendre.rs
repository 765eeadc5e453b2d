//! Fourier–Legendre coherences through spherical Bessel functions:
//! `|⟨p̃_{l+1}, χ_k⟩|² = 2ε (2l+1) j_l(2πεk)²`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::basis::{legendre_fourier_coeff, LegendreIndex};
use crate::coherence::CoherenceProfile;
use crate::error::{Error, Result};

/// `j_0(a), …, j_{lmax}(a)` by downward recurrence normalized with
/// `Σ (2l+1) j_l(a)² = 1`. Signs are fixed against `j_0 = sin a / a`.
pub fn spherical_bessel_all(a: f64, lmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; lmax + 1];
    if a.abs() < 1e-300 {
        out[0] = 1.0;
        return out;
    }
    let start = lmax.max(a.abs().ceil() as usize) + 40 + (8.0 * a.abs().cbrt()) as usize;
    let mut buf = vec![0.0f64; start + 2];
    buf[start] = 1.0;
    for l in (1..=start).rev() {
        let v = (2 * l + 1) as f64 / a * buf[l] - buf[l + 1];
        buf[l - 1] = v;
        if v.abs() > 1e100 {
            for x in buf[l - 1..].iter_mut() {
                *x *= 1e-100;
            }
        }
    }
    let mut sum = 0.0f64;
    for (l, v) in buf.iter().enumerate().take(start + 1) {
        sum += (2 * l + 1) as f64 * v * v;
    }
    let mut norm = 1.0 / sum.sqrt();
    let j0 = if a.abs() < 1e-4 { 1.0 - a * a / 6.0 } else { a.sin() / a };
    if j0 * buf[0] < 0.0 {
        norm = -norm;
    }
    for l in 0..=lmax {
        out[l] = buf[l] * norm;
    }
    out
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 0.45 + 1e-15) {
        return Err(Error::InvalidConfig(format!("eps = {eps} outside (0, 0.45]")));
    }
    Ok(())
}

/// `sup_n |⟨p̃_n, χ_k⟩|²` over all Legendre polynomials.
pub fn legendre_frequency_sup(k: i64, eps: f64) -> f64 {
    let a = 2.0 * PI * eps * k as f64;
    let lmax = a.abs().ceil() as usize + 40 + (8.0 * a.abs().cbrt()) as usize;
    spherical_bessel_all(a, lmax)
        .iter()
        .enumerate()
        .map(|(l, j)| 2.0 * eps * (2 * l + 1) as f64 * j * j)
        .fold(0.0, f64::max)
}

/// `μ(π_N U)` along a list of one-dimensional frequencies.
pub fn legendre_row_profile(freqs: &[i64], eps: f64) -> Result<CoherenceProfile> {
    check_eps(eps)?;
    if freqs.is_empty() {
        return Err(Error::Degenerate("empty ordering".into()));
    }
    let row: Vec<f64> = freqs.par_iter().map(|&k| legendre_frequency_sup(k, eps)).collect();
    Ok(CoherenceProfile::from_row(row, "standard", None))
}

/// Tensor frequencies: the supremum over products is the product of suprema.
pub fn legendre_frequency_sup_tensor(k: &[i64], eps: f64) -> f64 {
    k.iter().map(|&ki| legendre_frequency_sup(ki, eps)).product()
}

#[derive(Clone, Debug)]
pub struct ColumnProfile {
    pub profile: CoherenceProfile,
    /// Ranks whose best frequency sits on the edge of the scan.
    pub boundary_ranks: Vec<usize>,
}

/// `μ(U π_N)` for the natural ordering `N = 1..=n_max`, scanning
/// `|k| ≤ k_max` with `2πε k_max ≥ 2 n_max + 40`.
pub fn legendre_column_profile(n_max: usize, eps: f64) -> Result<ColumnProfile> {
    check_eps(eps)?;
    if n_max == 0 {
        return Err(Error::Degenerate("empty ordering".into()));
    }
    let k_max = ((2 * n_max + 40) as f64 / (2.0 * PI * eps)).ceil() as i64;
    let lmax = n_max - 1;
    let best = (0..=k_max)
        .into_par_iter()
        .fold(
            || (vec![0.0f64; n_max], vec![0i64; n_max]),
            |(mut v, mut arg), k| {
                let js = spherical_bessel_all(2.0 * PI * eps * k as f64, lmax);
                for l in 0..=lmax {
                    let c = 2.0 * eps * (2 * l + 1) as f64 * js[l] * js[l];
                    if c > v[l] {
                        v[l] = c;
                        arg[l] = k;
                    }
                }
                (v, arg)
            },
        )
        .reduce(
            || (vec![0.0f64; n_max], vec![0i64; n_max]),
            |(mut a, mut aa), (b, bb)| {
                for l in 0..a.len() {
                    if b[l] > a[l] || (b[l] == a[l] && bb[l] < aa[l]) {
                        a[l] = b[l];
                        aa[l] = bb[l];
                    }
                }
                (a, aa)
            },
        );
    let boundary_ranks = best.1.iter().enumerate().filter(|(_, &k)| k == k_max).map(|(l, _)| l + 1).collect();
    Ok(ColumnProfile { profile: CoherenceProfile::from_row(best.0, "natural", None), boundary_ranks })
}

/// The same quantity by quadrature, for cross-checks.
pub fn legendre_coherence_by_quadrature(n: usize, k: i64, eps: f64) -> Result<f64> {
    Ok(legendre_fourier_coeff(LegendreIndex(n), k, eps)?.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_low_orders() {
        for &a in &[0.3, 1.0, 7.5, 40.0, 300.0] {
            let j = spherical_bessel_all(a, 3);
            let j0 = a.sin() / a;
            let j1 = a.sin() / (a * a) - a.cos() / a;
            let j2 = (3.0 / (a * a) - 1.0) * a.sin() / a - 3.0 * a.cos() / (a * a);
            assert!((j[0] - j0).abs() < 1e-13, "a={a}");
            assert!((j[1] - j1).abs() < 1e-13, "a={a}");
            assert!((j[2] - j2).abs() < 1e-12, "a={a}");
        }
        assert_eq!(spherical_bessel_all(0.0, 2), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn agrees_with_quadrature() {
        let eps = 0.45;
        for &(n, k) in &[(1usize, 0i64), (1, 5), (2, 3), (10, 7), (40, 30), (150, 90)] {
            let a = 2.0 * PI * eps * k as f64;
            let j = spherical_bessel_all(a, n);
            let l = n - 1;
            let bessel = 2.0 * eps * (2 * l + 1) as f64 * j[l] * j[l];
            let quad = legendre_coherence_by_quadrature(n, k, eps).unwrap();
            assert!((bessel - quad).abs() < 1e-10, "n={n} k={k}: {bessel} vs {quad}");
        }
    }

    #[test]
    fn frequency_sup_at_zero() {
        assert!((legendre_frequency_sup(0, 0.45) - 0.9).abs() < 1e-15);
    }
}
