//! Multilevel sampling schemes, per-level measurement estimates and masks.
//!
//! Level `k` (zero-based) draws its ranks from a ChaCha20 stream seeded by
//! the scheme seed with stream id `k`, so levels are independent and
//! reproducible on any platform.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::basis::FourierIndex;
use crate::coherence::LocalCoherenceMatrix;
use crate::error::{Error, Result};
use crate::io::encode_pgm8;
use crate::ordering::{FourierOrdering, OrderingSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityProfile {
    pub m: Vec<usize>,
    pub s: Vec<usize>,
}

impl SparsityProfile {
    pub fn new(m: Vec<usize>, s: Vec<usize>) -> Result<Self> {
        check_boundaries(&m, "sparsity")?;
        if s.len() != m.len() {
            return Err(Error::InvalidConfig("one sparsity per level required".into()));
        }
        let mut prev = 0;
        for (k, (&b, &sk)) in m.iter().zip(&s).enumerate() {
            if sk > b - prev {
                return Err(Error::InvalidConfig(format!("s[{k}] = {sk} exceeds level size {}", b - prev)));
            }
            prev = b;
        }
        Ok(SparsityProfile { m, s })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingScheme {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    /// Sampled ranks, 1-based and increasing.
    pub omega: Vec<usize>,
    pub seed: u64,
}

impl SamplingScheme {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn horizon(&self) -> usize {
        *self.n.last().unwrap_or(&0)
    }
}

fn check_boundaries(n: &[usize], what: &str) -> Result<()> {
    if n.is_empty() || n[0] == 0 || n.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(format!("{what} boundaries must be positive and strictly increasing")));
    }
    Ok(())
}

pub fn build_scheme(n: &[usize], m: &[usize], seed: u64) -> Result<SamplingScheme> {
    check_boundaries(n, "sampling")?;
    if m.len() != n.len() {
        return Err(Error::InvalidConfig(format!("{} counts for {} levels", m.len(), n.len())));
    }
    let mut omega = Vec::with_capacity(m.iter().sum());
    let mut prev = 0usize;
    for (k, (&b, &mk)) in n.iter().zip(m).enumerate() {
        let size = b - prev;
        if mk > size {
            return Err(Error::InvalidConfig(format!("m[{k}] = {mk} exceeds level size {size}")));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut picks = sample(&mut rng, size, mk).into_vec();
        picks.sort_unstable();
        omega.extend(picks.into_iter().map(|i| prev + i + 1));
        prev = b;
    }
    Ok(SamplingScheme { n: n.to_vec(), m: m.to_vec(), omega, seed })
}

/// `m_k = min(|level k|, ⌈|level k| · C · ln(1/ε_f) · Σ_l μ(k,l) s_l · ln N⌉)`.
pub fn estimate_mk(
    local: &LocalCoherenceMatrix,
    sp: &SparsityProfile,
    failure: f64,
    c: f64,
    total_n: usize,
) -> Result<Vec<usize>> {
    if local.levels_m != sp.m {
        return Err(Error::InvalidConfig("sparsity levels differ from the local coherence levels".into()));
    }
    if !(failure > 0.0 && failure < 1.0) || !(c > 0.0) || total_n < 2 {
        return Err(Error::InvalidConfig("need 0 < ε_f < 1, C > 0 and N ≥ 2".into()));
    }
    let mut prev = 0;
    let mut out = Vec::with_capacity(local.r());
    for k in 0..local.r() {
        let size = local.levels_n[k] - prev;
        prev = local.levels_n[k];
        let weight: f64 = (0..local.r_m()).map(|l| local.get(k, l) * sp.s[l] as f64).sum();
        let raw = size as f64 * c * (1.0 / failure).ln() * weight * (total_n as f64).ln();
        // tolerate float noise just above an integer
        let need = (raw - 1e-9 * raw.abs().max(1.0)).ceil().max(0.0);
        out.push((need as usize).min(size));
    }
    Ok(out)
}

/// Boolean grid over the centered box `‖n‖_∞ ≤ extent`, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub d: usize,
    pub extent: usize,
    pub cells: Vec<bool>,
    /// Sampled ranks whose frequency falls outside the box.
    pub outside: Vec<usize>,
}

impl Mask {
    /// Marks the given frequencies; those outside the box are not recorded.
    pub fn from_frequencies(d: usize, extent: usize, freqs: &[FourierIndex]) -> Result<Self> {
        let side = 2 * extent + 1;
        let total = side
            .checked_pow(d as u32)
            .filter(|&t| t <= 1 << 28)
            .ok_or_else(|| Error::Capacity(format!("mask of side {side} in {d} dimensions")))?;
        let mut mask = Mask { d, extent, cells: vec![false; total], outside: Vec::new() };
        for f in freqs {
            if let Some(i) = mask.cell_index(&f.k) {
                mask.cells[i] = true;
            }
        }
        Ok(mask)
    }

    pub fn side(&self) -> usize {
        2 * self.extent + 1
    }

    pub fn cell_index(&self, n: &[i64]) -> Option<usize> {
        let e = self.extent as i64;
        let mut idx = 0usize;
        for &v in n {
            if v.abs() > e {
                return None;
            }
            idx = idx * self.side() + (v + e) as usize;
        }
        Some(idx)
    }

    pub fn frequency_of(&self, mut idx: usize) -> Vec<i64> {
        let mut n = vec![0i64; self.d];
        for a in (0..self.d).rev() {
            n[a] = (idx % self.side()) as i64 - self.extent as i64;
            idx /= self.side();
        }
        n
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// 1-based ranks of the marked cells under `ordering`, increasing.
    pub fn sampled_ranks(&self, ordering: &FourierOrdering) -> Vec<usize> {
        let mut r: Vec<usize> = ordering
            .items
            .iter()
            .enumerate()
            .filter(|(_, f)| self.cell_index(&f.k).is_some_and(|i| self.cells[i]))
            .map(|(i, _)| i + 1)
            .collect();
        r.sort_unstable();
        r
    }

    /// PGM with 0 for skipped and 255 for sampled; rows follow the first axis.
    pub fn to_pgm(&self) -> Result<Vec<u8>> {
        let px: Vec<u8> = self.cells.iter().map(|&c| if c { 255 } else { 0 }).collect();
        match self.d {
            1 => Ok(encode_pgm8(self.side(), 1, &px)),
            2 => Ok(encode_pgm8(self.side(), self.side(), &px)),
            d => Err(Error::InvalidConfig(format!("PGM export needs d ≤ 2, got {d}"))),
        }
    }

    pub fn write_csv<W: Write>(&self, w: &mut W, ordering: &FourierOrdering) -> std::io::Result<()> {
        let head: Vec<String> = (1..=self.d).map(|i| format!("n{i}")).collect();
        writeln!(w, "rank,{}", head.join(","))?;
        for r in self.sampled_ranks(ordering) {
            let f = &ordering.items[r - 1];
            let cols: Vec<String> = f.k.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{r},{}", cols.join(","))?;
        }
        Ok(())
    }
}

pub fn rasterize_mask(scheme: &SamplingScheme, ordering: &FourierOrdering, extent: usize, strict: bool) -> Result<Mask> {
    let d = ordering.items.first().map(|f| f.dim()).ok_or_else(|| Error::Degenerate("empty ordering".into()))?;
    if let Some(&last) = scheme.omega.last() {
        if last > ordering.len() {
            return Err(Error::InvalidConfig(format!("rank {last} beyond the {} ordered frequencies", ordering.len())));
        }
    }
    let side = 2 * extent + 1;
    let cells_total = side
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 28)
        .ok_or_else(|| Error::Capacity(format!("mask of side {side} in {d} dimensions")))?;
    let mut mask = Mask { d, extent, cells: vec![false; cells_total], outside: Vec::new() };
    for &r in &scheme.omega {
        match mask.cell_index(&ordering.items[r - 1].k) {
            Some(i) => mask.cells[i] = true,
            None => mask.outside.push(r),
        }
    }
    if strict && !mask.outside.is_empty() {
        return Err(Error::OutOfExtent(mask.outside.len()));
    }
    Ok(mask)
}

pub const SCHEME_SCHEMA: u32 = 1;

/// JSON description of a sampling pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub schema: u32,
    pub dimension: usize,
    pub ordering: OrderingSpec,
    pub levels: Vec<usize>,
    pub counts: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub extent: Option<usize>,
}

impl SchemeConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: SchemeConfig = serde_json::from_str(text)?;
        if c.schema != SCHEME_SCHEMA {
            return Err(Error::InvalidConfig(format!("schema {} (expected {SCHEME_SCHEMA})", c.schema)));
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::local_coherence_with;
    use crate::ordering::{lattice_prefix, ConsistencyFn, Shape, ShapeDescriptor};

    #[test]
    fn scheme_examples() {
        let s = build_scheme(&[4, 8], &[4, 2], 7).unwrap();
        assert_eq!(&s.omega[..4], &[1, 2, 3, 4]);
        assert_eq!(s.omega.iter().filter(|&&r| r > 4).count(), 2);
        assert!(build_scheme(&[4, 8], &[0, 0], 1).unwrap().is_empty());
        assert_eq!(build_scheme(&[10, 50], &[3, 9], 99).unwrap(), build_scheme(&[10, 50], &[3, 9], 99).unwrap());
        assert!(build_scheme(&[4, 8], &[5, 0], 1).is_err());
        assert!(build_scheme(&[4, 4], &[1, 1], 1).is_err());
    }

    #[test]
    fn level_uniformity() {
        let mut hits = [0usize; 4];
        for seed in 0..2000 {
            let s = build_scheme(&[4, 8], &[1, 1], seed).unwrap();
            hits[s.omega[1] - 5] += 1;
        }
        for h in hits {
            let f = h as f64 / 2000.0;
            assert!((f - 0.25).abs() < 0.03, "{hits:?}");
        }
    }

    fn single(mu: f64, size: usize) -> LocalCoherenceMatrix {
        local_coherence_with(&[size], &[size], |_, _| mu, |_| mu).unwrap()
    }

    #[test]
    fn estimate_examples() {
        let sp = SparsityProfile::new(vec![100], vec![5]).unwrap();
        assert_eq!(estimate_mk(&single(0.01, 100), &sp, 0.05, 1.0, 100).unwrap(), vec![69]);
        let zero = SparsityProfile::new(vec![100], vec![0]).unwrap();
        assert_eq!(estimate_mk(&single(0.01, 100), &zero, 0.05, 1.0, 100).unwrap(), vec![0]);
        let full = SparsityProfile::new(vec![100], vec![100]).unwrap();
        assert_eq!(estimate_mk(&single(1.0, 100), &full, 0.05, 1.0, 100).unwrap(), vec![100]);
        assert!(SparsityProfile::new(vec![10], vec![11]).is_err());
    }

    #[test]
    fn mask_examples() {
        let o = lattice_prefix(&ConsistencyFn::LinearShape(Shape::new(ShapeDescriptor::Linf, 2).unwrap()), 49).unwrap();
        let s = build_scheme(&[9], &[9], 0).unwrap();
        let m = rasterize_mask(&s, &o, 2, true).unwrap();
        for (i, &c) in m.cells.iter().enumerate() {
            let n = m.frequency_of(i);
            assert_eq!(c, n.iter().all(|v| v.abs() <= 1));
        }
        assert_eq!(m.sampled_ranks(&o), s.omega);
        let empty = build_scheme(&[9], &[0], 0).unwrap();
        assert_eq!(rasterize_mask(&empty, &o, 2, true).unwrap().count(), 0);
        let wide = build_scheme(&[49], &[49], 0).unwrap();
        assert!(matches!(rasterize_mask(&wide, &o, 1, true), Err(Error::OutOfExtent(40))));
        assert_eq!(rasterize_mask(&wide, &o, 1, false).unwrap().outside.len(), 40);
    }

    #[test]
    fn scheme_config_parsing() {
        let c = SchemeConfig::from_json(
            r#"{"schema":1,"dimension":2,"ordering":{"name":"hyperbolic"},"levels":[5,20],"counts":[5,4],"seed":3}"#,
        )
        .unwrap();
        assert_eq!(c.ordering, OrderingSpec::Hyperbolic);
        assert!(SchemeConfig::from_json(r#"{"schema":2,"dimension":2,"ordering":{"name":"hyperbolic"},"levels":[5],"counts":[5]}"#).is_err());
    }
}
