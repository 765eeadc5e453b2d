//! Index sets and inner products for the Fourier, separable/tensor wavelet
//! and Legendre bases on `[-1, 1]^d`.
//!
//! `χ_n(x) = ε^{d/2} e^{2πiε n·x}` on `[-1/(2ε), 1/(2ε)]^d`, so that
//! `⟨g, χ_n⟩ = ε^{d/2} Fg(εn)` for any `g` supported in `[-1, 1]^d`.

use std::f64::consts::PI;

use arrayvec::ArrayVec;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, legendre_p};
use crate::wavelet::{ft, Generator, WaveletFamily};
use crate::MAX_DIM;

pub type IVec = ArrayVec<i64, MAX_DIM>;
pub type SVec = ArrayVec<u8, MAX_DIM>;
pub type JVec = ArrayVec<u32, MAX_DIM>;

pub const DEFAULT_MAX_INDICES: usize = 1 << 26;

pub fn ivec(v: &[i64]) -> IVec {
    v.iter().copied().collect()
}

/// Upper end of the admissible ε interval `(0, (2 + 2^{-J+2}(p-1))^{-1}]`.
pub fn eps_upper_bound(j0: u32, p: usize) -> f64 {
    1.0 / (2.0 + 2f64.powi(2 - j0 as i32) * (p as f64 - 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    pub d: usize,
    pub fam: WaveletFamily,
    pub j0: u32,
    pub eps: f64,
    /// Largest number of indices any single enumeration may produce.
    pub max_indices: usize,
}

impl BasisConfig {
    pub fn new(d: usize, fam: WaveletFamily, j0: u32, eps: f64) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidConfig(format!("dimension d = {d} (supported: 1..={MAX_DIM})")));
        }
        if j0 > 40 {
            return Err(Error::InvalidConfig(format!("base level J = {j0} too large")));
        }
        let hi = eps_upper_bound(j0, fam.p());
        if !(eps > 0.0 && eps <= hi * (1.0 + 1e-12)) {
            return Err(Error::InvalidConfig(format!(
                "eps = {eps} outside (0, {hi}] for J = {j0}, p = {}",
                fam.p()
            )));
        }
        Ok(BasisConfig { d, fam, j0, eps, max_indices: DEFAULT_MAX_INDICES })
    }

    /// Largest admissible ε (1/2 for Haar).
    pub fn with_default_eps(d: usize, fam: WaveletFamily, j0: u32) -> Result<Self> {
        let eps = eps_upper_bound(j0, fam.p());
        Self::new(d, fam, j0, eps)
    }

    pub fn with_max_indices(mut self, n: usize) -> Self {
        self.max_indices = n;
        self
    }

    pub fn lattice(&self) -> WaveletLattice {
        WaveletLattice { d: self.d, p: self.fam.p(), j0: self.j0 }
    }
}

/// The combinatorial part of a wavelet basis: dimension, support length and base level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WaveletLattice {
    pub d: usize,
    pub p: usize,
    pub j0: u32,
}

impl WaveletLattice {
    /// Translations `k` whose dilate `φ_{j,k}` meets `(-1, 1)`.
    pub fn k_range(&self, j: u32) -> (i64, i64) {
        let t = 1i64 << j;
        let p = self.p as i64;
        (-t - p + 1, t + p - 2)
    }

    pub fn shifts(&self, j: u32) -> u64 {
        let (lo, hi) = self.k_range(j);
        (hi - lo + 1) as u64
    }

    pub fn separable_level_size(&self, j: u32) -> u64 {
        let types = if j == self.j0 { 1u64 << self.d } else { (1u64 << self.d) - 1 };
        types.saturating_mul(self.shifts(j).saturating_pow(self.d as u32))
    }

    /// Number of tensor elements with the given per-axis scales.
    pub fn tensor_block_size(&self, j: &[u32]) -> u64 {
        j.iter()
            .map(|&ji| {
                let types = if ji == self.j0 { 2 } else { 1 };
                types * self.shifts(ji)
            })
            .fold(1u64, |a, b| a.saturating_mul(b))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FourierIndex {
    pub k: IVec,
}

impl FourierIndex {
    pub fn new(k: &[i64]) -> Self {
        FourierIndex { k: ivec(k) }
    }

    pub fn zero(d: usize) -> Self {
        FourierIndex { k: (0..d).map(|_| 0).collect() }
    }

    pub fn dim(&self) -> usize {
        self.k.len()
    }

    pub fn linf(&self) -> i64 {
        self.k.iter().map(|v| v.abs()).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SeparableWaveletIndex {
    pub s: SVec,
    pub j: u32,
    pub k: IVec,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TensorWaveletIndex {
    pub s: SVec,
    pub j: JVec,
    pub k: IVec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LegendreIndex(pub usize);

fn check_k(lat: &WaveletLattice, j: u32, k: i64) -> Result<()> {
    let (lo, hi) = lat.k_range(j);
    if k < lo || k > hi {
        return Err(Error::InvalidConfig(format!(
            "translation {k} at level {j} outside [{lo}, {hi}]"
        )));
    }
    Ok(())
}

impl SeparableWaveletIndex {
    pub fn validate(&self, lat: &WaveletLattice) -> Result<()> {
        if self.s.len() != lat.d || self.k.len() != lat.d {
            return Err(Error::InvalidConfig("index dimension mismatch".into()));
        }
        if self.j < lat.j0 {
            return Err(Error::InvalidConfig(format!("level {} below base {}", self.j, lat.j0)));
        }
        if self.s.iter().all(|&b| b == 0) && self.j != lat.j0 {
            return Err(Error::InvalidConfig("s = 0 requires j = J".into()));
        }
        for &k in &self.k {
            check_k(lat, self.j, k)?;
        }
        Ok(())
    }
}

impl TensorWaveletIndex {
    pub fn validate(&self, lat: &WaveletLattice) -> Result<()> {
        if self.s.len() != lat.d || self.j.len() != lat.d || self.k.len() != lat.d {
            return Err(Error::InvalidConfig("index dimension mismatch".into()));
        }
        for i in 0..lat.d {
            if self.j[i] < lat.j0 || (self.s[i] == 0 && self.j[i] != lat.j0) {
                return Err(Error::InvalidConfig(format!(
                    "axis {i}: s = {} with j = {} (J = {})",
                    self.s[i], self.j[i], lat.j0
                )));
            }
            check_k(lat, self.j[i], self.k[i])?;
        }
        Ok(())
    }

    pub fn level_sum(&self) -> u32 {
        self.j.iter().sum()
    }
}

/// Odometer over the integer box `lo..=hi` in every axis, last axis fastest.
pub(crate) fn for_each_in_box(d: usize, lo: i64, hi: i64, mut f: impl FnMut(&IVec)) {
    if hi < lo {
        return;
    }
    let mut cur: IVec = (0..d).map(|_| lo).collect();
    loop {
        f(&cur);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            if cur[axis] < hi {
                cur[axis] += 1;
                break;
            }
            cur[axis] = lo;
        }
    }
}

/// All `s ∈ {0,1}^d` in lexicographic order.
pub(crate) fn all_types(d: usize) -> Vec<SVec> {
    (0..1u32 << d)
        .map(|m| (0..d).map(|i| ((m >> (d - 1 - i)) & 1) as u8).collect())
        .collect()
}

/// Every separable index at level `j`, ordered by `s` then `k` lexicographically.
pub fn enumerate_separable_level(cfg: &BasisConfig, j: u32) -> Result<Vec<SeparableWaveletIndex>> {
    let lat = cfg.lattice();
    if j < lat.j0 {
        return Err(Error::InvalidConfig(format!("level {j} below base level {}", lat.j0)));
    }
    if j > 40 {
        return Err(Error::Capacity(format!("level {j}")));
    }
    let size = lat.separable_level_size(j);
    if size > cfg.max_indices as u64 {
        return Err(Error::Capacity(format!(
            "level {j} has {size} indices (budget {})",
            cfg.max_indices
        )));
    }
    let (lo, hi) = lat.k_range(j);
    let mut out = Vec::with_capacity(size as usize);
    for s in all_types(lat.d) {
        if j != lat.j0 && s.iter().all(|&b| b == 0) {
            continue;
        }
        for_each_in_box(lat.d, lo, hi, |k| {
            out.push(SeparableWaveletIndex { s: s.clone(), j, k: k.clone() })
        });
    }
    Ok(out)
}

/// Every tensor index with the given per-axis scale vector, ordered by `s` then `k`.
pub fn enumerate_tensor_block(cfg: &BasisConfig, j: &[u32]) -> Result<Vec<TensorWaveletIndex>> {
    let lat = cfg.lattice();
    if j.len() != lat.d || j.iter().any(|&v| v < lat.j0 || v > 40) {
        return Err(Error::InvalidConfig(format!("scale vector {j:?}")));
    }
    let size = lat.tensor_block_size(j);
    if size > cfg.max_indices as u64 {
        return Err(Error::Capacity(format!("tensor block {j:?} has {size} indices")));
    }
    let jv: JVec = j.iter().copied().collect();
    let mut out = Vec::with_capacity(size as usize);
    for s in all_types(lat.d) {
        if (0..lat.d).any(|i| s[i] == 0 && j[i] != lat.j0) {
            continue;
        }
        // odometer with per-axis ranges
        let ranges: Vec<(i64, i64)> = j.iter().map(|&ji| lat.k_range(ji)).collect();
        let mut cur: IVec = ranges.iter().map(|r| r.0).collect();
        'outer: loop {
            out.push(TensorWaveletIndex { s: s.clone(), j: jv.clone(), k: cur.clone() });
            let mut axis = lat.d;
            loop {
                if axis == 0 {
                    break 'outer;
                }
                axis -= 1;
                if cur[axis] < ranges[axis].1 {
                    cur[axis] += 1;
                    break;
                }
                cur[axis] = ranges[axis].0;
            }
        }
    }
    Ok(out)
}

/// `F(φ^s_{j,k})(ω) = e^{-2πi 2^{-j} k ω} 2^{-j/2} Fφ^s(2^{-j} ω)`.
pub fn dilate_ft(fam: &WaveletFamily, gen: Generator, j: u32, k: i64, omega: f64) -> Complex64 {
    let scale = 0.5f64.powi(j as i32);
    let w = scale * omega;
    let phase = Complex64::from_polar(1.0, -2.0 * PI * ((k as f64) * w).rem_euclid(1.0));
    phase * scale.sqrt() * ft(fam, gen, w)
}

pub fn inner_product_sep(cfg: &BasisConfig, w: &SeparableWaveletIndex, f: &FourierIndex) -> Complex64 {
    debug_assert_eq!(f.dim(), cfg.d);
    let mut acc = Complex64::new(cfg.eps.powf(cfg.d as f64 / 2.0), 0.0);
    for i in 0..cfg.d {
        acc *= dilate_ft(&cfg.fam, Generator::from_bit(w.s[i]), w.j, w.k[i], cfg.eps * f.k[i] as f64);
    }
    acc
}

pub fn inner_product_tensor(cfg: &BasisConfig, w: &TensorWaveletIndex, f: &FourierIndex) -> Complex64 {
    debug_assert_eq!(f.dim(), cfg.d);
    let mut acc = Complex64::new(cfg.eps.powf(cfg.d as f64 / 2.0), 0.0);
    for i in 0..cfg.d {
        acc *= dilate_ft(&cfg.fam, Generator::from_bit(w.s[i]), w.j[i], w.k[i], cfg.eps * f.k[i] as f64);
    }
    acc
}

const LEGENDRE_PANEL_NODES: usize = 24;

fn legendre_panels(n: usize, k: i64, eps: f64, panels: usize, rule: &(Vec<f64>, Vec<f64>)) -> Complex64 {
    let l = n - 1;
    let norm = ((2 * l + 1) as f64 / 2.0).sqrt() * eps.sqrt();
    let omega = 2.0 * PI * eps * k as f64;
    let width = 2.0 / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let a = -1.0 + width * p as f64;
        let mid = a + 0.5 * width;
        let mut part = Complex64::new(0.0, 0.0);
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let t = mid + 0.5 * width * x;
            part += Complex64::from_polar(w * legendre_p(l, t), -omega * t);
        }
        acc += part * (0.5 * width);
    }
    acc * norm
}

/// `⟨p̃_n, χ_k⟩` in one dimension, `p̃_n = √((2n-1)/2) P_{n-1}`, by panel
/// Gauss–Legendre quadrature refined until successive estimates agree to 1e-12.
pub fn legendre_fourier_coeff(n: LegendreIndex, k: i64, eps: f64) -> Result<Complex64> {
    if n.0 == 0 {
        return Err(Error::InvalidConfig("Legendre index is 1-based".into()));
    }
    if !(eps > 0.0 && eps <= 0.45 + 1e-15) {
        return Err(Error::InvalidConfig(format!("eps = {eps} outside (0, 0.45]")));
    }
    let rule = gauss_legendre(LEGENDRE_PANEL_NODES);
    let work = n.0 as f64 + 2.0 * PI * eps * k.unsigned_abs() as f64;
    let mut panels = (work / 12.0).ceil().max(1.0) as usize;
    let mut prev = legendre_panels(n.0, k, eps, panels, &rule);
    for _ in 0..12 {
        panels *= 2;
        let next = legendre_panels(n.0, k, eps, panels, &rule);
        if (next - prev).norm() < 1e-12 {
            return Ok(next);
        }
        prev = next;
    }
    Ok(prev)
}

/// Tensor Legendre coefficient as the product of its axis factors.
pub fn legendre_fourier_coeff_tensor(n: &[LegendreIndex], k: &[i64], eps: f64) -> Result<Complex64> {
    if n.len() != k.len() {
        return Err(Error::InvalidConfig("dimension mismatch".into()));
    }
    n.iter()
        .zip(k)
        .try_fold(Complex64::new(1.0, 0.0), |acc, (ni, ki)| {
            Ok(acc * legendre_fourier_coeff(*ni, *ki, eps)?)
        })
}
