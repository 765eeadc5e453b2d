//! Haar synthesis on the dyadic pixel grid of `[-1, 1]^d` with coarsest level 0.
//!
//! Coefficients are stored in transform layout. The separable basis uses the
//! non-standard (square-block) layout and the tensor basis the standard
//! (axis-by-axis) layout. [`HaarLayout::index_at`] names the basis function
//! behind each slot.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::basis::{IVec, JVec, SVec, SeparableWaveletIndex, TensorWaveletIndex};
use crate::coherence::WaveletKind;
use crate::error::{Error, Result};
use crate::recon::grid::for_each_line;
use crate::{Complex64, MAX_DIM};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HaarIndex {
    Separable(SeparableWaveletIndex),
    Tensor(TensorWaveletIndex),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HaarLayout {
    pub d: usize,
    pub side: usize,
    pub kind: WaveletKind,
}

fn forward_stage(line: &mut [Complex64]) {
    let h = line.len() / 2;
    let tmp: Vec<Complex64> = line.to_vec();
    for i in 0..h {
        line[i] = (tmp[2 * i] + tmp[2 * i + 1]) * FRAC_1_SQRT_2;
        line[h + i] = (tmp[2 * i] - tmp[2 * i + 1]) * FRAC_1_SQRT_2;
    }
}

fn inverse_stage(line: &mut [Complex64]) {
    let h = line.len() / 2;
    let tmp: Vec<Complex64> = line.to_vec();
    for i in 0..h {
        line[2 * i] = (tmp[i] + tmp[h + i]) * FRAC_1_SQRT_2;
        line[2 * i + 1] = (tmp[i] - tmp[h + i]) * FRAC_1_SQRT_2;
    }
}

/// One-dimensional slot to `(s, j, k)`.
fn slot_1d(pos: usize) -> (u8, u32, i64) {
    if pos < 2 {
        return (0, 0, pos as i64 - 1);
    }
    let j = pos.ilog2() - 1;
    (1, j, pos as i64 - (1i64 << (j + 1)) - (1i64 << j))
}

fn slot_of_1d(s: u8, j: u32, k: i64) -> Option<usize> {
    let half = 1i64 << j;
    if k < -half || k >= half {
        return None;
    }
    match s {
        0 if j == 0 => Some((k + 1) as usize),
        1 => Some(((1i64 << (j + 1)) + half + k) as usize),
        _ => None,
    }
}

impl HaarLayout {
    pub fn new(d: usize, side: usize, kind: WaveletKind) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidConfig(format!("dimension {d}")));
        }
        if side < 2 || !side.is_power_of_two() {
            return Err(Error::InvalidConfig(format!("grid side {side} must be a power of two ≥ 2")));
        }
        if (side as u128).pow(d as u32) > 1 << 28 {
            return Err(Error::Capacity(format!("grid of side {side} in {d} dimensions")));
        }
        Ok(HaarLayout { d, side, kind })
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Finest wavelet level represented, if any.
    pub fn finest_level(&self) -> Option<u32> {
        (self.side >= 4).then(|| self.side.ilog2() - 2)
    }

    /// `‖pixel indicator‖^{-1}` per basis function value, `(side/2)^{d/2}`.
    fn scale(&self) -> f64 {
        (self.side as f64 / 2.0).powf(self.d as f64 / 2.0)
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.len());
        let (d, side) = (self.d, self.side);
        let stage = if inverse { inverse_stage } else { forward_stage };
        match self.kind {
            WaveletKind::Separable => {
                let mut sizes: Vec<usize> = std::iter::successors(Some(side), |&s| (s > 4).then_some(s / 2)).collect();
                if side == 2 {
                    sizes.clear();
                }
                if inverse {
                    sizes.reverse();
                }
                for s in sizes {
                    for a in 0..d {
                        for_each_line(data, d, side, a, s, s, stage);
                    }
                }
            }
            WaveletKind::Tensor => {
                for a in 0..d {
                    let mut sizes: Vec<usize> = std::iter::successors(Some(side), |&s| (s > 4).then_some(s / 2)).collect();
                    if side == 2 {
                        sizes.clear();
                    }
                    if inverse {
                        sizes.reverse();
                    }
                    for s in sizes {
                        for_each_line(data, d, side, a, s, side, stage);
                    }
                }
            }
        }
    }

    /// Coefficients to pixel values, in place.
    pub fn synthesize(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let c = self.scale();
        data.iter_mut().for_each(|v| *v *= c);
    }

    /// Adjoint of [`synthesize`](Self::synthesize), in place.
    pub fn synthesize_adjoint(&self, data: &mut [Complex64]) {
        self.transform(data, false);
        let c = self.scale();
        data.iter_mut().for_each(|v| *v *= c);
    }

    /// Pixel values to coefficients (the inverse of synthesis).
    pub fn analyze(&self, data: &mut [Complex64]) {
        self.transform(data, false);
        let c = 1.0 / self.scale();
        data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn synthesize_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut v = coeffs.to_vec();
        self.synthesize(&mut v);
        v.into_iter().map(|c| c.re).collect()
    }

    pub fn analyze_real(&self, pixels: &[f64]) -> Vec<Complex64> {
        let mut v: Vec<Complex64> = pixels.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.analyze(&mut v);
        v
    }

    fn coords(&self, mut pos: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        for a in (0..self.d).rev() {
            c[a] = pos % self.side;
            pos /= self.side;
        }
        c
    }

    pub fn index_at(&self, pos: usize) -> HaarIndex {
        let c = self.coords(pos);
        match self.kind {
            WaveletKind::Tensor => {
                let (mut s, mut j, mut k) = (SVec::new(), JVec::new(), IVec::new());
                for &p in &c {
                    let (si, ji, ki) = slot_1d(p);
                    s.push(si);
                    j.push(ji);
                    k.push(ki);
                }
                HaarIndex::Tensor(TensorWaveletIndex { s, j, k })
            }
            WaveletKind::Separable => {
                let m = *c.iter().max().unwrap();
                if m < 2 {
                    let s = c.iter().map(|_| 0u8).collect();
                    let k = c.iter().map(|&p| p as i64 - 1).collect();
                    return HaarIndex::Separable(SeparableWaveletIndex { s, j: 0, k });
                }
                let j = m.ilog2() - 1;
                let size = 1usize << (j + 1);
                let s = c.iter().map(|&p| (p >= size) as u8).collect();
                let k = c.iter().map(|&p| (p % size) as i64 - (1i64 << j)).collect();
                HaarIndex::Separable(SeparableWaveletIndex { s, j, k })
            }
        }
    }

    /// Slot of a basis function, or `None` if the grid does not represent it.
    pub fn position_of(&self, idx: &HaarIndex) -> Option<usize> {
        let mut pos = 0usize;
        match (self.kind, idx) {
            (WaveletKind::Tensor, HaarIndex::Tensor(t)) if t.k.len() == self.d => {
                for a in 0..self.d {
                    let p = slot_of_1d(t.s[a], t.j[a], t.k[a])?;
                    if p >= self.side {
                        return None;
                    }
                    pos = pos * self.side + p;
                }
            }
            (WaveletKind::Separable, HaarIndex::Separable(w)) if w.k.len() == self.d => {
                let half = 1i64 << w.j;
                let size = 2 * half as usize;
                let all_scaling = w.s.iter().all(|&b| b == 0);
                let fits = if all_scaling { w.j == 0 } else { 2 * size <= self.side };
                if !fits {
                    return None;
                }
                for a in 0..self.d {
                    if w.k[a] < -half || w.k[a] >= half {
                        return None;
                    }
                    let p = (w.k[a] + half) as usize + if w.s[a] == 1 { size } else { 0 };
                    pos = pos * self.side + p;
                }
            }
            _ => return None,
        }
        Some(pos)
    }

    /// Level used to group slots: `j` for separable, `Σ j_i` for tensor,
    /// and zero for scaling-only slots.
    pub fn level_of(&self, pos: usize) -> u32 {
        match self.index_at(pos) {
            HaarIndex::Separable(w) => w.j,
            HaarIndex::Tensor(t) => t.j.iter().sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn slot_maps_round_trip() {
        for kind in [WaveletKind::Separable, WaveletKind::Tensor] {
            for (d, side) in [(1, 16), (2, 8), (3, 4)] {
                let l = HaarLayout::new(d, side, kind).unwrap();
                for pos in 0..l.len() {
                    let idx = l.index_at(pos);
                    assert_eq!(l.position_of(&idx), Some(pos), "{kind:?} d={d} pos={pos} {idx:?}");
                }
            }
        }
    }

    #[test]
    fn single_scaling_coefficient() {
        let l = HaarLayout::new(1, 8, WaveletKind::Separable).unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); 8];
        c[1] = Complex64::new(1.0, 0.0);
        let v = l.synthesize_real(&c);
        for (a, b) in v.iter().zip([0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(l.synthesize_real(&vec![Complex64::new(0.0, 0.0); 8]), vec![0.0; 8]);
    }

    #[test]
    fn wavelet_slot_is_the_named_function() {
        // ψ_{1,k} with k = 0 lives on [0, 1/2): +√2 on the left half
        let l = HaarLayout::new(1, 8, WaveletKind::Separable).unwrap();
        let pos = l.position_of(&HaarIndex::Separable(SeparableWaveletIndex {
            s: [1u8].into_iter().collect(),
            j: 1,
            k: [0i64].into_iter().collect(),
        }))
        .unwrap();
        let mut c = vec![Complex64::new(0.0, 0.0); 8];
        c[pos] = Complex64::new(1.0, 0.0);
        let v = l.synthesize_real(&c);
        let r = 2f64.sqrt();
        let want = [0.0, 0.0, 0.0, 0.0, r, -r, 0.0, 0.0];
        for (a, b) in v.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn round_trip_and_adjoint() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for kind in [WaveletKind::Separable, WaveletKind::Tensor] {
            let l = HaarLayout::new(2, 16, kind).unwrap();
            let mut sparse = vec![Complex64::new(0.0, 0.0); l.len()];
            for _ in 0..12 {
                let i = rng.gen_range(0..l.len());
                sparse[i] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            }
            let img = l.synthesize_real(&sparse);
            let back = l.analyze_real(&img);
            for (a, b) in back.iter().zip(&sparse) {
                assert!((a - b).norm() < 1e-10);
            }
            let x: Vec<Complex64> = (0..l.len()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
            let y: Vec<Complex64> = (0..l.len()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
            let mut sx = x.clone();
            l.synthesize(&mut sx);
            let mut aty = y.clone();
            l.synthesize_adjoint(&mut aty);
            let lhs: Complex64 = sx.iter().zip(&y).map(|(a, b)| a * b.conj()).sum();
            let rhs: Complex64 = x.iter().zip(&aty).map(|(a, b)| a * b.conj()).sum();
            assert!((lhs - rhs).norm() < 1e-9 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(HaarLayout::new(2, 12, WaveletKind::Separable).is_err());
        assert!(HaarLayout::new(0, 8, WaveletKind::Separable).is_err());
        assert_eq!(HaarLayout::new(1, 2, WaveletKind::Tensor).unwrap().finest_level(), None);
    }
}
