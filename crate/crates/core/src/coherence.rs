//! Per-frequency coherence, row and suffix profiles, local coherence
//! blocks and decay fitting for Fourier rows against wavelet columns.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisConfig, FourierIndex, JVec, SVec, SeparableWaveletIndex, TensorWaveletIndex};
use crate::error::{Error, Result};
use crate::wavelet::{check_decay_of, ft_norm_sqr, Generator, WaveletFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletKind {
    Separable,
    Tensor,
}

/// `|Fφ^s(ε 2^{-j} n)|²` for `|n| ≤ max_n` and `j0 ≤ j < j0 + levels`,
/// falling back to direct evaluation outside.
#[derive(Clone, Debug)]
pub struct AxisTable {
    fam: WaveletFamily,
    eps: f64,
    j0: u32,
    phi: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
}

impl AxisTable {
    pub fn new(fam: &WaveletFamily, eps: f64, j0: u32, max_n: usize, levels: usize) -> Self {
        let build = |gen: Generator| -> Vec<Vec<f64>> {
            (0..levels)
                .into_par_iter()
                .map(|jj| {
                    let scale = eps * 0.5f64.powi((j0 as usize + jj) as i32);
                    (0..=max_n).map(|n| ft_norm_sqr(fam, gen, scale * n as f64)).collect()
                })
                .collect()
        };
        AxisTable { fam: fam.clone(), eps, j0, phi: build(Generator::Scaling), psi: build(Generator::Wavelet) }
    }

    /// Table sized for frequencies up to `max_n` in magnitude.
    pub fn for_extent(cfg: &BasisConfig, max_n: usize) -> Self {
        let levels = ((cfg.eps * max_n as f64).max(1.0).log2().ceil() as usize + 10).min(48);
        Self::new(&cfg.fam, cfg.eps, cfg.j0, max_n, levels)
    }

    #[inline]
    pub fn get(&self, gen: Generator, j: u32, n: i64) -> f64 {
        let tab = match gen {
            Generator::Scaling => &self.phi,
            Generator::Wavelet => &self.psi,
        };
        let a = n.unsigned_abs() as usize;
        if let Some(row) = tab.get((j - self.j0) as usize) {
            if let Some(v) = row.get(a) {
                return *v;
            }
        }
        ft_norm_sqr(&self.fam, gen, self.eps * 0.5f64.powi(j as i32) * n as f64)
    }
}

/// Evaluator of `sup_g |⟨g, χ_n⟩|²` over a whole wavelet basis.
#[derive(Clone, Debug)]
pub struct CoherenceEngine {
    pub cfg: BasisConfig,
    pub kind: WaveletKind,
    table: AxisTable,
}

impl CoherenceEngine {
    pub fn new(cfg: &BasisConfig, kind: WaveletKind, max_n: usize) -> Self {
        CoherenceEngine { cfg: cfg.clone(), kind, table: AxisTable::for_extent(cfg, max_n) }
    }

    /// `|⟨Ψ^s_{j,k}, χ_n⟩|²` (independent of `k`).
    pub fn separable_magnitude(&self, s: &[u8], j: u32, n: &[i64]) -> f64 {
        let d = self.cfg.d;
        let mut v = self.cfg.eps.powi(d as i32) * 0.5f64.powi((d as u32 * j) as i32);
        for i in 0..d {
            v *= self.table.get(Generator::from_bit(s[i]), j, n[i]);
        }
        v
    }

    pub fn tensor_magnitude(&self, s: &[u8], j: &[u32], n: &[i64]) -> f64 {
        let d = self.cfg.d;
        let mut v = self.cfg.eps.powi(d as i32);
        for i in 0..d {
            v *= 0.5f64.powi(j[i] as i32) * self.table.get(Generator::from_bit(s[i]), j[i], n[i]);
        }
        v
    }

    pub fn frequency_coherence(&self, n: &[i64]) -> f64 {
        match self.kind {
            WaveletKind::Separable => self.separable_sup(n),
            WaveletKind::Tensor => self.tensor_sup(n),
        }
    }

    fn separable_sup(&self, n: &[i64]) -> f64 {
        let d = self.cfg.d;
        let j0 = self.cfg.j0;
        let mut best = 0.0f64;
        let mut a = [0.0f64; crate::MAX_DIM];
        let mut b = [0.0f64; crate::MAX_DIM];
        let base = self.cfg.eps.powi(d as i32);
        for j in j0..j0 + 2000 {
            let env = base * 0.5f64.powi((d as u32 * j) as i32);
            if env <= best {
                break;
            }
            for i in 0..d {
                a[i] = self.table.get(Generator::Scaling, j, n[i]);
                b[i] = self.table.get(Generator::Wavelet, j, n[i]);
            }
            let first = if j == j0 { 0u32 } else { 1 };
            let mut m = 0.0f64;
            for mask in first..(1u32 << d) {
                let mut p = 1.0;
                for i in 0..d {
                    p *= if mask >> i & 1 == 1 { b[i] } else { a[i] };
                }
                m = m.max(p);
            }
            best = best.max(env * m);
        }
        best
    }

    /// `sup_{s,j} 2^{-j} |Fφ^s(ε 2^{-j} n)|²` on one axis.
    fn axis_tensor_sup(&self, n: i64) -> f64 {
        let j0 = self.cfg.j0;
        let mut best = 0.5f64.powi(j0 as i32) * self.table.get(Generator::Scaling, j0, n);
        for j in j0..j0 + 2000 {
            let env = 0.5f64.powi(j as i32);
            if env <= best {
                break;
            }
            best = best.max(env * self.table.get(Generator::Wavelet, j, n));
        }
        best
    }

    fn tensor_sup(&self, n: &[i64]) -> f64 {
        n.iter().fold(self.cfg.eps.powi(self.cfg.d as i32), |acc, &ni| acc * self.axis_tensor_sup(ni))
    }
}

/// Coherence of one frequency against the whole separable or tensor basis.
pub fn frequency_coherence(cfg: &BasisConfig, n: &FourierIndex, kind: WaveletKind) -> f64 {
    let engine = CoherenceEngine { cfg: cfg.clone(), kind, table: AxisTable::new(&cfg.fam, cfg.eps, cfg.j0, 0, 0) };
    engine.frequency_coherence(&n.k)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoherenceProfile {
    /// `row[N-1] = μ(π_N U)`.
    pub row: Vec<f64>,
    /// `suffix[N-1] = max_{N ≤ M ≤ horizon} row[M-1]`.
    pub suffix: Vec<f64>,
    pub horizon: usize,
    pub ordering: String,
    /// Upper bound on every coherence beyond the horizon, when one is known.
    pub tail_bound: Option<f64>,
    /// Leading ranks whose suffix provably dominates the unscanned tail.
    pub valid_ranks: usize,
}

impl CoherenceProfile {
    pub fn from_row(row: Vec<f64>, ordering: impl Into<String>, tail_bound: Option<f64>) -> Self {
        let mut suffix = row.clone();
        for i in (0..suffix.len().saturating_sub(1)).rev() {
            suffix[i] = suffix[i].max(suffix[i + 1]);
        }
        let valid_ranks = match tail_bound {
            Some(t) => suffix.iter().take_while(|&&v| v >= t).count(),
            None => 0,
        };
        CoherenceProfile { horizon: row.len(), row, suffix, ordering: ordering.into(), tail_bound, valid_ranks }
    }

    /// 1-based accessors.
    pub fn row_at(&self, n: usize) -> f64 {
        self.row[n - 1]
    }

    pub fn suffix_at(&self, n: usize) -> f64 {
        self.suffix[n - 1]
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "rank,row,suffix")?;
        for (i, (r, s)) in self.row.iter().zip(&self.suffix).enumerate() {
            writeln!(w, "{},{:.17e},{:.17e}", i + 1, r, s)?;
        }
        Ok(())
    }
}

/// `K` with `|Fφ(ω)|, |Fψ(ω)| ≤ min(1, K/|ω|)`; exact for Haar, grid-estimated otherwise.
pub fn decay_constant(fam: &WaveletFamily) -> f64 {
    if fam.is_haar() {
        return 2.0 / std::f64::consts::PI;
    }
    let grid: Vec<f64> = (1..=8192).map(|i| 0.25 * i as f64).collect();
    let a = check_decay_of(fam, Generator::Scaling, 1.0, &grid).map(|c| c.k).unwrap_or(1.0);
    let b = check_decay_of(fam, Generator::Wavelet, 1.0, &grid).map(|c| c.k).unwrap_or(1.0);
    1.05 * a.max(b)
}

/// Upper envelope of `sup_g |⟨g, χ_n⟩|²` over all `n` with `‖n‖_∞ ≥ l`.
pub fn tail_envelope(cfg: &BasisConfig, kind: WaveletKind, l: f64) -> f64 {
    let k = decay_constant(&cfg.fam);
    let d = cfg.d as i32;
    let big = |j: u32| 0.5f64.powi(j as i32) * (k * k * 4f64.powi(j as i32) / (cfg.eps * cfg.eps * l * l)).min(1.0);
    let scan = |f: &dyn Fn(u32) -> f64| (cfg.j0..cfg.j0 + 80).map(f).fold(0.0f64, f64::max);
    match kind {
        WaveletKind::Separable => {
            cfg.eps.powi(d) * scan(&|j| 0.5f64.powi((d - 1) * j as i32) * big(j))
        }
        WaveletKind::Tensor => cfg.eps.powi(d) * 0.5f64.powi((d - 1) * cfg.j0 as i32) * scan(&big),
    }
}

/// Largest `L` such that the whole box `‖n‖_∞ ≤ L` is listed.
pub fn covered_radius(freqs: &[FourierIndex]) -> Option<i64> {
    let d = freqs.first()?.dim() as u32;
    let mut shells: HashMap<i64, u64> = HashMap::new();
    for f in freqs {
        *shells.entry(f.linf()).or_default() += 1;
    }
    let mut l = -1i64;
    loop {
        let r = l + 1;
        let size = if r == 0 { 1 } else { ((2 * r + 1) as u64).pow(d) - ((2 * r - 1) as u64).pow(d) };
        if shells.get(&r).copied().unwrap_or(0) < size {
            return if l < 0 { None } else { Some(l) };
        }
        l = r;
    }
}

pub fn row_profile(cfg: &BasisConfig, freqs: &[FourierIndex], kind: WaveletKind, ordering: &str) -> Result<CoherenceProfile> {
    if freqs.is_empty() {
        return Err(Error::Degenerate("empty ordering".into()));
    }
    if freqs.iter().any(|f| f.dim() != cfg.d) {
        return Err(Error::InvalidConfig("frequency dimension does not match the basis".into()));
    }
    if freqs.len() > cfg.max_indices {
        return Err(Error::Capacity(format!("horizon {} exceeds budget {}", freqs.len(), cfg.max_indices)));
    }
    let max_n = freqs.iter().map(|f| f.linf() as usize).max().unwrap_or(0);
    let engine = CoherenceEngine::new(cfg, kind, max_n.min(1 << 20));
    let row: Vec<f64> = freqs.par_iter().map(|f| engine.frequency_coherence(&f.k)).collect();
    let tail = covered_radius(freqs).map(|l| tail_envelope(cfg, kind, (l + 1) as f64));
    Ok(CoherenceProfile::from_row(row, ordering, tail))
}

/// Wavelet elements in ordering order.
#[derive(Clone, Copy, Debug)]
pub enum WaveletSeq<'a> {
    Separable(&'a [SeparableWaveletIndex]),
    Tensor(&'a [TensorWaveletIndex]),
}

impl WaveletSeq<'_> {
    pub fn len(&self) -> usize {
        match self {
            WaveletSeq::Separable(v) => v.len(),
            WaveletSeq::Tensor(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(s, per-axis j)` of the element at zero-based position `i`.
    pub fn type_of(&self, i: usize) -> (SVec, JVec) {
        match self {
            WaveletSeq::Separable(v) => (v[i].s.clone(), v[i].s.iter().map(|_| v[i].j).collect()),
            WaveletSeq::Tensor(v) => (v[i].s.clone(), v[i].j.clone()),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WaveletRowProfile {
    pub profile: CoherenceProfile,
    /// Ranks (1-based) whose maximizing frequency sits on the scan boundary.
    pub boundary_ranks: Vec<usize>,
}

pub const DEFAULT_SCAN_MULTIPLIER: u64 = 64;

/// `μ(U π_N)`: for each element, the sup over the frequency box of radius
/// `multiplier · 2^{j_i}` per axis.
pub fn wavelet_row_profile(cfg: &BasisConfig, seq: WaveletSeq<'_>, multiplier: u64, strict: bool) -> Result<WaveletRowProfile> {
    if seq.is_empty() {
        return Err(Error::Degenerate("empty ordering".into()));
    }
    let mut axis: BTreeMap<(u8, u32), (f64, bool)> = BTreeMap::new();
    for i in 0..seq.len() {
        let (s, j) = seq.type_of(i);
        for (si, ji) in s.iter().zip(j.iter()) {
            axis.entry((*si, *ji)).or_insert((0.0, false));
        }
    }
    let keys: Vec<(u8, u32)> = axis.keys().copied().collect();
    let sups: Vec<(f64, bool)> = keys
        .par_iter()
        .map(|&(s, j)| {
            let radius = multiplier.saturating_mul(1u64 << j.min(40));
            let scale = cfg.eps * 0.5f64.powi(j as i32);
            let gen = Generator::from_bit(s);
            let mut best = (-1.0f64, 0u64);
            for n in 0..=radius {
                let v = ft_norm_sqr(&cfg.fam, gen, scale * n as f64);
                if v > best.0 {
                    best = (v, n);
                }
            }
            (0.5f64.powi(j as i32) * best.0, best.1 == radius)
        })
        .collect();
    for (k, v) in keys.iter().zip(sups) {
        axis.insert(*k, v);
    }
    let base = cfg.eps.powi(cfg.d as i32);
    let mut row = Vec::with_capacity(seq.len());
    let mut boundary_ranks = Vec::new();
    for i in 0..seq.len() {
        let (s, j) = seq.type_of(i);
        let mut v = base;
        let mut edge = false;
        for (si, ji) in s.iter().zip(j.iter()) {
            let (a, e) = axis[&(*si, *ji)];
            v *= a;
            edge |= e;
        }
        if edge {
            boundary_ranks.push(i + 1);
        }
        row.push(v);
    }
    if strict && !boundary_ranks.is_empty() {
        return Err(Error::BoundaryAttained(boundary_ranks.len()));
    }
    let name = match seq {
        WaveletSeq::Separable(_) => "leveled",
        WaveletSeq::Tensor(_) => "tensor_hyperbolic",
    };
    Ok(WaveletRowProfile { profile: CoherenceProfile::from_row(row, name, None), boundary_ranks })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalCoherenceMatrix {
    pub levels_n: Vec<usize>,
    pub levels_m: Vec<usize>,
    /// `μ(P_{N_k} U P_{M_l})`, row-major `r × r'`.
    pub blocks: Vec<f64>,
    /// `μ(P_{N_k} U)` over the whole wavelet basis.
    pub row_factor: Vec<f64>,
    /// `sqrt(blocks · row_factor)`, row-major.
    pub entries: Vec<f64>,
}

impl LocalCoherenceMatrix {
    /// Zero-based level indices.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[k * self.levels_m.len() + l]
    }

    pub fn block(&self, k: usize, l: usize) -> f64 {
        self.blocks[k * self.levels_m.len() + l]
    }

    pub fn r(&self) -> usize {
        self.levels_n.len()
    }

    pub fn r_m(&self) -> usize {
        self.levels_m.len()
    }
}

fn check_levels(levels: &[usize], available: usize, what: &str) -> Result<()> {
    if levels.is_empty() || levels[0] == 0 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(format!("{what} boundaries must be strictly increasing and positive")));
    }
    if *levels.last().unwrap() > available {
        return Err(Error::Capacity(format!("{what} boundary {} exceeds the {available} listed indices", levels.last().unwrap())));
    }
    Ok(())
}

fn level_ranges(levels: &[usize]) -> Vec<std::ops::Range<usize>> {
    let mut prev = 0;
    levels
        .iter()
        .map(|&b| {
            let r = prev..b;
            prev = b;
            r
        })
        .collect()
}

/// Local coherences from an arbitrary entry function `|U_{ij}|²` (zero-based)
/// and the per-row suprema over the full column set.
pub fn local_coherence_with(
    levels_n: &[usize],
    levels_m: &[usize],
    entry: impl Fn(usize, usize) -> f64 + Sync,
    row_sup: impl Fn(usize) -> f64 + Sync,
) -> Result<LocalCoherenceMatrix> {
    check_levels(levels_n, usize::MAX, "sampling")?;
    check_levels(levels_m, usize::MAX, "sparsity")?;
    let rn = level_ranges(levels_n);
    let rm = level_ranges(levels_m);
    let mut blocks = Vec::with_capacity(rn.len() * rm.len());
    let mut row_factor = Vec::with_capacity(rn.len());
    for a in &rn {
        row_factor.push(a.clone().into_par_iter().map(&row_sup).reduce(|| 0.0, f64::max));
        for b in &rm {
            let v = a
                .clone()
                .into_par_iter()
                .map(|i| b.clone().map(|j| entry(i, j)).fold(0.0, f64::max))
                .reduce(|| 0.0, f64::max);
            blocks.push(v);
        }
    }
    let entries = blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b * row_factor[i / rm.len()]).sqrt())
        .collect();
    Ok(LocalCoherenceMatrix { levels_n: levels_n.to_vec(), levels_m: levels_m.to_vec(), blocks, row_factor, entries })
}

/// Local coherence of Fourier levels against wavelet levels. Block suprema
/// reduce each wavelet level to its distinct `(s, j)` types.
pub fn local_coherence(
    cfg: &BasisConfig,
    freqs: &[FourierIndex],
    levels_n: &[usize],
    wavelets: WaveletSeq<'_>,
    levels_m: &[usize],
) -> Result<LocalCoherenceMatrix> {
    check_levels(levels_n, freqs.len(), "sampling")?;
    check_levels(levels_m, wavelets.len(), "sparsity")?;
    let kind = match wavelets {
        WaveletSeq::Separable(_) => WaveletKind::Separable,
        WaveletSeq::Tensor(_) => WaveletKind::Tensor,
    };
    let used = &freqs[..*levels_n.last().unwrap()];
    let max_n = used.iter().map(|f| f.linf() as usize).max().unwrap_or(0);
    let engine = CoherenceEngine::new(cfg, kind, max_n);
    let rn = level_ranges(levels_n);
    let rm = level_ranges(levels_m);
    let types: Vec<Vec<(SVec, JVec)>> = rm
        .iter()
        .map(|r| {
            let mut t: Vec<(SVec, JVec)> = r.clone().map(|i| wavelets.type_of(i)).collect();
            t.sort();
            t.dedup();
            t
        })
        .collect();
    let mut blocks = Vec::with_capacity(rn.len() * rm.len());
    let mut row_factor = Vec::with_capacity(rn.len());
    for a in &rn {
        let level = &used[a.clone()];
        row_factor.push(level.par_iter().map(|f| engine.frequency_coherence(&f.k)).reduce(|| 0.0, f64::max));
        for tl in &types {
            let v = level
                .par_iter()
                .map(|f| {
                    tl.iter()
                        .map(|(s, j)| match kind {
                            WaveletKind::Separable => engine.separable_magnitude(s, j[0], &f.k),
                            WaveletKind::Tensor => engine.tensor_magnitude(s, j, &f.k),
                        })
                        .fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max);
            blocks.push(v);
        }
    }
    let entries = blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (b * row_factor[i / rm.len()]).sqrt())
        .collect();
    Ok(LocalCoherenceMatrix { levels_n: levels_n.to_vec(), levels_m: levels_m.to_vec(), blocks, row_factor, entries })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum DecayModel {
    /// `N^{-α}`
    Pow { alpha: f64 },
    /// `ln(N+1)^{d-1} N^{-α}`
    PowLog { alpha: f64, d: usize },
}

impl DecayModel {
    pub fn eval(&self, n: f64) -> f64 {
        match *self {
            DecayModel::Pow { alpha } => n.powf(-alpha),
            DecayModel::PowLog { alpha, d } => (n + 1.0).ln().powi(d as i32 - 1) * n.powf(-alpha),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub window: (usize, usize),
}

impl DecayFit {
    pub fn band_ratio(&self) -> f64 {
        self.band_hi / self.band_lo
    }
}

/// Default fit window: drop the first 10% of the horizon.
pub fn default_window(profile: &CoherenceProfile) -> (usize, usize) {
    ((profile.horizon / 10).max(1), profile.horizon)
}

fn window_check(profile: &CoherenceProfile, window: (usize, usize)) -> Result<()> {
    if window.0 == 0 || window.0 >= window.1 || window.1 > profile.horizon {
        return Err(Error::InvalidConfig(format!(
            "fit window {:?} not inside 1..={}",
            window, profile.horizon
        )));
    }
    Ok(())
}

/// `[min, max]` of `values[N-1] / model(N)` over the window.
pub fn band(values: &[f64], model: DecayModel, window: (usize, usize)) -> (f64, f64) {
    (window.0..=window.1)
        .map(|n| values[n - 1] / model.eval(n as f64))
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Log-log least-squares slope of the suffix (the upper envelope of the row)
/// on a geometric grid over the window, and the band of suffix/model.
pub fn fit_decay(profile: &CoherenceProfile, model: DecayModel, window: (usize, usize)) -> Result<DecayFit> {
    window_check(profile, window)?;
    let vals = &profile.suffix;
    if (window.0..=window.1).any(|n| !(vals[n - 1] > 0.0)) {
        return Err(Error::Degenerate("profile has zero entries in the fit window".into()));
    }
    let points = 256usize;
    let (l0, l1) = ((window.0 as f64).ln(), (window.1 as f64).ln());
    let mut ns: Vec<usize> = (0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp().round() as usize)
        .map(|n| n.clamp(window.0, window.1))
        .collect();
    ns.dedup();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = ns.iter().map(|&n| vals[n - 1].ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("fit window too narrow".into()));
    }
    let slope = sxy / sxx;
    let (band_lo, band_hi) = band(vals, model, window);
    Ok(DecayFit { slope, intercept: my - slope * mx, band_lo, band_hi, window })
}

/// Band of `row[N] / model(N)` (per-rank values rather than the envelope).
pub fn row_band(profile: &CoherenceProfile, model: DecayModel, window: (usize, usize)) -> Result<(f64, f64)> {
    window_check(profile, window)?;
    Ok(band(&profile.row, model, window))
}

/// Coherence on the full box `‖n‖_∞ ≤ extent` (row-major, last axis fastest).
pub fn coherence_grid(cfg: &BasisConfig, kind: WaveletKind, extent: usize) -> Vec<f64> {
    let side = 2 * extent + 1;
    let engine = CoherenceEngine::new(cfg, kind, extent);
    let total = side.pow(cfg.d as u32);
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut n = [0i64; crate::MAX_DIM];
            for a in (0..cfg.d).rev() {
                n[a] = (idx % side) as i64 - extent as i64;
                idx /= side;
            }
            engine.frequency_coherence(&n[..cfg.d])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::ivec;
    use crate::wavelet::build_family;

    fn haar(d: usize) -> BasisConfig {
        BasisConfig::with_default_eps(d, WaveletFamily::haar(), 0).unwrap()
    }

    #[test]
    fn frequency_values() {
        let c = haar(1);
        assert!((frequency_coherence(&c, &FourierIndex::new(&[0]), WaveletKind::Separable) - 0.5).abs() < 1e-15);
        let c2 = haar(2);
        for kind in [WaveletKind::Separable, WaveletKind::Tensor] {
            assert!((frequency_coherence(&c2, &FourierIndex::new(&[0, 0]), kind) - 0.25).abs() < 1e-15);
        }
        let a = frequency_coherence(&c, &FourierIndex::new(&[7]), WaveletKind::Separable);
        let b = frequency_coherence(&c, &FourierIndex::new(&[-7]), WaveletKind::Separable);
        assert_eq!(a, b);
    }

    #[test]
    fn profile_invariants() {
        let row = vec![0.3, 0.1, 0.2, 0.05, 0.0];
        let p = CoherenceProfile::from_row(row, "t", Some(0.15));
        assert_eq!(p.suffix, vec![0.3, 0.2, 0.2, 0.05, 0.0]);
        assert_eq!(p.valid_ranks, 3);
    }

    #[test]
    fn fit_synthetic() {
        let row: Vec<f64> = (1..=5000).map(|n| 1.0 / n as f64).collect();
        let p = CoherenceProfile::from_row(row, "t", None);
        let f = fit_decay(&p, DecayModel::Pow { alpha: 1.0 }, default_window(&p)).unwrap();
        assert!((f.slope + 1.0).abs() < 0.01);
        let row: Vec<f64> = (1..=5000).map(|n| ((n + 1) as f64).ln() / n as f64).collect();
        let p = CoherenceProfile::from_row(row, "t", None);
        let f = fit_decay(&p, DecayModel::PowLog { alpha: 1.0, d: 2 }, default_window(&p)).unwrap();
        assert!(f.band_ratio() < 1.1);
        let z = CoherenceProfile::from_row(vec![0.0; 2000], "z", None);
        assert!(fit_decay(&z, DecayModel::Pow { alpha: 1.0 }, default_window(&z)).is_err());
    }

    #[test]
    fn identity_local_coherence() {
        let m = local_coherence_with(&[2], &[2], |i, j| if i == j { 1.0 } else { 0.0 }, |_| 1.0).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert!(local_coherence_with(&[2, 2], &[2], |_, _| 0.0, |_| 0.0).is_err());
    }

    #[test]
    fn tensor_equals_separable_in_1d() {
        let c = BasisConfig::with_default_eps(1, build_family(2).unwrap(), 1).unwrap();
        for n in [-9i64, 0, 3, 40] {
            let f = FourierIndex { k: ivec(&[n]) };
            let a = frequency_coherence(&c, &f, WaveletKind::Separable);
            let b = frequency_coherence(&c, &f, WaveletKind::Tensor);
            assert!((a - b).abs() < 1e-15);
        }
    }
}
