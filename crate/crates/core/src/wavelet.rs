//! Daubechies filters and pointwise Fourier transforms of φ and ψ.
//!
//! Convention: `Fφ(ω) = ∫ φ(x) e^{-2πiωx} dx`, with the low-pass symbol
//! `m0(ω) = 2^{-1/2} Σ_k h_k e^{-2πikω}` and `Fφ(ω) = Π_{j≥1} m0(ω 2^{-j})`.
//! Filters are indexed so that φ is supported on `[-p+1, p]`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_VANISHING_MOMENTS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveletFamily {
    p: usize,
    /// Low-pass taps `h_k` for `k = -p+1 ..= p`.
    h: Vec<f64>,
}

/// Selects φ (`s = 0`) or ψ (`s = 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Generator {
    Scaling,
    Wavelet,
}

impl Generator {
    pub fn from_bit(s: u8) -> Self {
        if s == 0 {
            Generator::Scaling
        } else {
            Generator::Wavelet
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FtEvalConfig {
    /// Stop the product once `|ω| 2^{-J}` drops below this.
    pub product_tolerance: f64,
    pub max_product_terms: usize,
}

impl Default for FtEvalConfig {
    fn default() -> Self {
        FtEvalConfig {
            product_tolerance: 1e-7,
            max_product_terms: 96,
        }
    }
}

impl FtEvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.product_tolerance > 0.0) || !self.product_tolerance.is_finite() {
            return Err(Error::InvalidConfig(
                "product_tolerance must be positive".into(),
            ));
        }
        if self.max_product_terms < 20 {
            return Err(Error::InvalidConfig(
                "max_product_terms must be at least 20".into(),
            ));
        }
        Ok(())
    }

    fn terms(&self, omega: f64) -> usize {
        let a = omega.abs();
        let need = if a > 0.0 {
            (a / self.product_tolerance).log2().ceil().max(0.0) as usize
        } else {
            0
        };
        need.max(20).min(self.max_product_terms.max(20))
    }
}

pub fn build_family(p: usize) -> Result<WaveletFamily> {
    if p == 0 || p > MAX_VANISHING_MOMENTS {
        return Err(Error::UnsupportedFamily(format!(
            "vanishing moments p = {p} (supported: 1..={MAX_VANISHING_MOMENTS})"
        )));
    }
    if p == 1 {
        return Ok(WaveletFamily {
            p,
            h: vec![1.0 / SQRT_2, 1.0 / SQRT_2],
        });
    }
    // Q(y) = Σ_{k<p} C(p-1+k, k) y^k with y = sin²(πω); each root gives a
    // reciprocal pair in z via z² - (2 - 4y) z + 1 = 0.
    let mut q = Vec::with_capacity(p);
    let mut c = 1.0f64;
    for k in 0..p {
        if k > 0 {
            c = c * (p - 1 + k) as f64 / k as f64;
        }
        q.push(c);
    }
    let roots = poly_roots(&q);
    // H(z) ∝ (1+z)^p Π (1 - r z) with |r| < 1 (energy front-loaded).
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..p {
        poly = poly_mul(&poly, &[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]);
    }
    for y in roots {
        let b = Complex64::new(2.0, 0.0) - 4.0 * y;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) / 2.0;
        let z2 = (b - disc) / 2.0;
        let r = if z1.norm() < z2.norm() { z1 } else { z2 };
        poly = poly_mul(&poly, &[Complex64::new(1.0, 0.0), -r]);
    }
    let mut h: Vec<f64> = poly.iter().map(|c| c.re).collect();
    let s: f64 = h.iter().sum();
    for v in &mut h {
        *v *= SQRT_2 / s;
    }
    Ok(WaveletFamily { p, h })
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_eval(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut v = Complex64::new(0.0, 0.0);
    let mut dv = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        dv = dv * z + v;
        v = v * z + a;
    }
    (v, dv)
}

/// Roots of `Σ c_k y^k` (ascending coefficients) by Aberth iteration and a
/// final Newton polish.
fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[n];
    let radius = c[..n]
        .iter()
        .map(|a| (a / lead).abs())
        .fold(0.0f64, f64::max)
        + 1.0;
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            Complex64::from_polar(0.5 * radius, 2.0 * PI * (k as f64 + 0.25) / n as f64 + 0.4)
        })
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (v, dv) = poly_eval(c, z[i]);
            if v.norm() == 0.0 {
                continue;
            }
            let ratio = v / dv;
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                if j != i {
                    s += 1.0 / (z[i] - z[j]);
                }
            }
            let w = ratio / (1.0 - ratio * s);
            z[i] -= w;
            moved = moved.max(w.norm() / z[i].norm().max(1e-300));
        }
        if moved < 1e-15 {
            break;
        }
    }
    for r in &mut z {
        for _ in 0..3 {
            let (v, dv) = poly_eval(c, *r);
            if dv.norm() > 0.0 {
                *r -= v / dv;
            }
        }
    }
    z
}

impl WaveletFamily {
    pub fn haar() -> Self {
        build_family(1).expect("haar is always available")
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_haar(&self) -> bool {
        self.p == 1
    }

    /// Taps indexed from `first_index()`.
    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn first_index(&self) -> i64 {
        -(self.p as i64 - 1)
    }

    /// High-pass taps `g_k = (-1)^k h_{1-k}` on the same index range.
    pub fn g(&self) -> Vec<f64> {
        let lo = self.first_index();
        let hi = lo + self.h.len() as i64 - 1;
        (lo..=hi)
            .map(|k| {
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                sign * self.h[(1 - k - lo) as usize]
            })
            .collect()
    }

    /// `∫ x φ(x) dx`.
    pub fn first_moment(&self) -> f64 {
        let lo = self.first_index();
        self.h
            .iter()
            .enumerate()
            .map(|(i, h)| (lo + i as i64) as f64 * h)
            .sum::<f64>()
            / SQRT_2
    }

    fn symbol(&self, taps: &[f64], xi: f64) -> Complex64 {
        let (s, c) = (-2.0 * PI * xi).sin_cos();
        let z = Complex64::new(c, s);
        let mut v = Complex64::new(0.0, 0.0);
        for &t in taps.iter().rev() {
            v = v * z + t;
        }
        let shift = Complex64::from_polar(1.0, -2.0 * PI * xi * self.first_index() as f64);
        v * shift / SQRT_2
    }

    pub fn m0(&self, xi: f64) -> Complex64 {
        self.symbol(&self.h, xi)
    }

    pub fn m1(&self, xi: f64) -> Complex64 {
        self.symbol(&self.g(), xi)
    }
}

fn haar_scaling(omega: f64) -> Complex64 {
    // (1 - e^{-2πiω}) / (2πiω) = e^{-iπω} sin(πω)/(πω)
    let x = PI * omega;
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    Complex64::from_polar(1.0, -x) * sinc
}

fn haar_wavelet(omega: f64) -> Complex64 {
    // i e^{-iπω} sin²(πω/2) / (πω/2)
    let x = 0.5 * PI * omega;
    let v = if x.abs() < 1e-8 { x } else { x.sin() * x.sin() / x };
    Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, -PI * omega) * v
}

/// Truncated-product evaluation of Fφ, valid for every family.
pub fn ft_scaling_product(fam: &WaveletFamily, omega: f64, cfg: &FtEvalConfig) -> Complex64 {
    let terms = cfg.terms(omega);
    let mut acc = Complex64::new(1.0, 0.0);
    let mut xi = omega;
    for _ in 0..terms {
        xi *= 0.5;
        acc *= fam.m0(xi);
    }
    // Fφ(ξ) = 1 - 2πi c ξ + O(ξ²) for the residual factor.
    acc * Complex64::from_polar(1.0, -2.0 * PI * fam.first_moment() * xi)
}

pub fn ft_scaling_with(fam: &WaveletFamily, omega: f64, cfg: &FtEvalConfig) -> Complex64 {
    if fam.is_haar() {
        haar_scaling(omega)
    } else {
        ft_scaling_product(fam, omega, cfg)
    }
}

pub fn ft_wavelet_with(fam: &WaveletFamily, omega: f64, cfg: &FtEvalConfig) -> Complex64 {
    if fam.is_haar() {
        haar_wavelet(omega)
    } else {
        fam.m1(0.5 * omega) * ft_scaling_product(fam, 0.5 * omega, cfg)
    }
}

pub fn ft_scaling(fam: &WaveletFamily, omega: f64) -> Complex64 {
    ft_scaling_with(fam, omega, &FtEvalConfig::default())
}

pub fn ft_wavelet(fam: &WaveletFamily, omega: f64) -> Complex64 {
    ft_wavelet_with(fam, omega, &FtEvalConfig::default())
}

pub fn ft(fam: &WaveletFamily, gen: Generator, omega: f64) -> Complex64 {
    match gen {
        Generator::Scaling => ft_scaling(fam, omega),
        Generator::Wavelet => ft_wavelet(fam, omega),
    }
}

/// `|Fφ^s(ω)|²`, the only quantity coherence computations need.
pub fn ft_norm_sqr(fam: &WaveletFamily, gen: Generator, omega: f64) -> f64 {
    ft(fam, gen, omega).norm_sqr().min(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayCheck {
    /// `sup |F(ω)| |ω|^α` over the whole grid.
    pub k: f64,
    pub k_lower_half: f64,
    pub k_upper_half: f64,
    /// Upper-half supremum within 10% of the lower-half one.
    pub plateau: bool,
}

/// Smallest `K` with `|Fφ(ω)| ≤ K |ω|^{-α}` on the grid, plus a plateau
/// flag comparing the high-frequency half of the grid against the low half.
pub fn check_decay(fam: &WaveletFamily, alpha: f64, grid: &[f64]) -> Result<DecayCheck> {
    check_decay_of(fam, Generator::Scaling, alpha, grid)
}

pub fn check_decay_of(
    fam: &WaveletFamily,
    gen: Generator,
    alpha: f64,
    grid: &[f64],
) -> Result<DecayCheck> {
    if grid.is_empty() {
        return Err(Error::Degenerate("empty frequency grid".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig("decay exponent must be positive".into()));
    }
    if grid.iter().any(|w| *w == 0.0 || !w.is_finite()) {
        return Err(Error::InvalidConfig("grid must exclude 0".into()));
    }
    let mut pts: Vec<f64> = grid.to_vec();
    pts.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let vals: Vec<f64> = pts
        .iter()
        .map(|&w| ft(fam, gen, w).norm() * w.abs().powf(alpha))
        .collect();
    let mid = vals.len() / 2;
    let lower = vals[..mid.max(1)].iter().cloned().fold(0.0, f64::max);
    let upper = vals[mid..].iter().cloned().fold(0.0, f64::max);
    Ok(DecayCheck {
        k: lower.max(upper),
        k_lower_half: lower,
        k_upper_half: upper,
        plateau: upper <= 1.1 * lower,
    })
}

pub const BAND_GRID_POINTS: usize = 4096;

/// `inf |Fψ(ω)|` over the dyadic band `[2^{-(q+1)}, 2^{-q}]`, on a uniform grid.
pub fn band_infimum(fam: &WaveletFamily, q: u32) -> f64 {
    let lo = 0.5f64.powi(q as i32 + 1);
    let hi = 2.0 * lo;
    (0..BAND_GRID_POINTS)
        .map(|i| {
            let w = lo + (hi - lo) * i as f64 / (BAND_GRID_POINTS - 1) as f64;
            ft_wavelet(fam, w).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn haar_filter_is_exact() {
        let f = build_family(1).unwrap();
        assert_eq!(f.h(), &[1.0 / SQRT_2, 1.0 / SQRT_2]);
        assert!(build_family(0).is_err());
        assert!(build_family(11).is_err());
    }

    #[test]
    fn db2_matches_closed_form() {
        // (1 ± √3)/(4√2), (3 ± √3)/(4√2)
        let s3 = 3f64.sqrt();
        let d = 4.0 * SQRT_2;
        let want = [(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d];
        let f = build_family(2).unwrap();
        for (a, b) in f.h().iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn filter_invariants_all_p() {
        for p in 1..=MAX_VANISHING_MOMENTS {
            let f = build_family(p).unwrap();
            let h = f.h();
            assert_eq!(h.len(), 2 * p);
            let s: f64 = h.iter().sum();
            assert!((s - SQRT_2).abs() < 1e-12, "p={p} sum {s}");
            for m in 0..p {
                let c: f64 = (0..h.len() - 2 * m).map(|k| h[k] * h[k + 2 * m]).sum();
                let want = if m == 0 { 1.0 } else { 0.0 };
                assert!((c - want).abs() < 1e-10, "p={p} m={m} {c}");
            }
            // p vanishing moments of ψ: Σ (-1)^k k^n h_k = 0 for n < p
            for n in 0..p {
                let v: f64 = h
                    .iter()
                    .enumerate()
                    .map(|(k, x)| if k % 2 == 0 { 1.0 } else { -1.0 } * (k as f64).powi(n as i32) * x)
                    .sum();
                let scale: f64 = h.iter().enumerate().map(|(k, x)| ((k as f64).powi(n as i32) * x).abs()).sum();
                assert!(v.abs() < 1e-9 * scale.max(1.0), "p={p} n={n} {v}");
            }
        }
    }

    #[test]
    fn haar_transform_values() {
        let f = WaveletFamily::haar();
        assert!((ft_scaling(&f, 0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(ft_scaling(&f, 1.0).norm() < 1e-15);
        assert!((ft_scaling(&f, 0.5).norm() - 2.0 / PI).abs() < 1e-14);
        assert!(ft_wavelet(&f, 0.0).norm() < 1e-15);
        assert!((ft_wavelet(&f, 0.5).norm() - 2.0 / PI).abs() < 1e-14);
        // direct integral of 1_[0,1]: (1 - e^{-2πiω}) / (2πiω)
        for &w in &[0.3, -1.7, 4.25] {
            let i2pw = Complex64::new(0.0, 2.0 * PI * w);
            let direct = (1.0 - (-i2pw).exp()) / i2pw;
            assert!((ft_scaling(&f, w) - direct).norm() < 1e-14);
            // ψ = 1_[0,1/2) - 1_[1/2,1)
            let half = (-i2pw * 0.5).exp();
            let direct = ((1.0 - half) - (half - (-i2pw).exp())) / i2pw;
            assert!((ft_wavelet(&f, w) - direct).norm() < 1e-14);
        }
    }

    #[test]
    fn haar_product_path_agrees() {
        let f = WaveletFamily::haar();
        let cfg = FtEvalConfig::default();
        for i in 0..=2000 {
            let w = -50.0 + 0.05 * i as f64;
            let d = (ft_scaling_product(&f, w, &cfg) - haar_scaling(w)).norm();
            assert!(d < 1e-8, "ω={w} diff {d}");
        }
    }

    #[test]
    fn p2_zero_mean_and_unit_dc() {
        let f = build_family(2).unwrap();
        assert!(ft_wavelet(&f, 0.0).norm() < 1e-14);
        assert!((ft_scaling(&f, 0.0).norm() - 1.0).abs() < 1e-14);
        // φ vanishes at nonzero integers (orthonormal shifts)
        for n in 1..5 {
            assert!(ft_scaling(&f, n as f64).norm() < 1e-9);
        }
    }

    #[test]
    fn decay_checks() {
        let f = WaveletFamily::haar();
        let grid: Vec<f64> = (1..=1000).map(|i| 0.1 * i as f64).collect();
        let c = check_decay(&f, 1.0, &grid).unwrap();
        assert!(c.k <= 1.0 / PI + 1e-9 && c.plateau);
        let grid: Vec<f64> = (1..=20000).map(|i| 0.25 + 0.5 * i as f64).collect();
        let c = check_decay(&f, 1.5, &grid).unwrap();
        assert!(!c.plateau);
        let c = check_decay(&f, 1e-9, &grid).unwrap();
        assert!(c.k <= 1.0 + 1e-6);
        assert!(check_decay(&f, 1.0, &[]).is_err());
    }

    #[test]
    fn band_infimum_values() {
        let f = WaveletFamily::haar();
        // |Fψ| increases on [1/4, 1/2], so the infimum sits at the left end
        let want = haar_wavelet(0.25).norm();
        assert!((band_infimum(&f, 1) - want).abs() < 1e-12);
        assert!(band_infimum(&f, 8) > 0.0);
        assert!(band_infimum(&build_family(2).unwrap(), 2) >= 0.0);
    }
}
