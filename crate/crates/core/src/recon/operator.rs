//! Measurement operators `P_Ω U P_R` and measurement simulation.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::basis::{inner_product_sep, inner_product_tensor, BasisConfig, FourierIndex};
use crate::error::{Error, Result};
use crate::recon::grid::for_each_line;
use crate::recon::haar::{HaarIndex, HaarLayout};
use crate::recon::phantom::ImageSource;
use crate::Complex64;

pub trait LinearOperator: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[Complex64], out: &mut [Complex64]);
    fn adjoint(&self, y: &[Complex64], out: &mut [Complex64]);
}

/// Row-major explicit matrix.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl DenseOperator {
    pub fn from_fn<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> Complex64 + Sync,
    {
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        data.par_chunks_mut(cols.max(1)).enumerate().for_each(|(r, row)| {
            for (c, v) in row.iter_mut().enumerate() {
                *v = f(r, c);
            }
        });
        DenseOperator { rows, cols, data }
    }

    /// Columns are the basis functions behind the slots of `layout`.
    pub fn haar(cfg: &BasisConfig, layout: &HaarLayout, freqs: &[FourierIndex]) -> Result<Self> {
        if !cfg.fam.is_haar() || cfg.d != layout.d {
            return Err(Error::InvalidConfig("dense Haar operator needs a Haar basis of matching dimension".into()));
        }
        let cols: Vec<HaarIndex> = (0..layout.len()).map(|p| layout.index_at(p)).collect();
        Ok(DenseOperator::from_fn(freqs.len(), cols.len(), |r, c| match &cols[c] {
            HaarIndex::Separable(w) => inner_product_sep(cfg, w, &freqs[r]),
            HaarIndex::Tensor(w) => inner_product_tensor(cfg, w, &freqs[r]),
        }))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn scale_rows(&mut self, s: &[f64]) {
        for (row, &f) in self.data.chunks_mut(self.cols.max(1)).zip(s) {
            row.iter_mut().for_each(|v| *v *= f);
        }
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        out.par_iter_mut().enumerate().for_each(|(r, o)| {
            *o = self.data[r * self.cols..(r + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum();
        });
    }

    fn adjoint(&self, y: &[Complex64], out: &mut [Complex64]) {
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (r, &yr) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(&self.data[r * self.cols..(r + 1) * self.cols]) {
                *o += a.conj() * yr;
            }
        }
    }
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - (PI * t).powi(2) / 6.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// How pixel values stand for the image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PixelModel {
    /// Piecewise constant; integrals are exact.
    Cells,
    /// Point samples at pixel centers (midpoint rule).
    Points,
}

/// `g ↦ (⟨g, χ_n⟩)_n` for pixel images, by one zero-padded FFT of size
/// `M = side/(2ε)` per axis followed by gathers.
pub struct PixelFourier {
    pub d: usize,
    pub side: usize,
    pub eps: f64,
    pub m: usize,
    slots: Vec<usize>,
    weights: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl PixelFourier {
    pub fn new(d: usize, side: usize, eps: f64, freqs: &[FourierIndex], model: PixelModel) -> Result<Self> {
        let mf = side as f64 / (2.0 * eps);
        let m = mf.round() as usize;
        if !(eps > 0.0 && eps <= 0.5) || (mf - m as f64).abs() > 1e-9 * mf || m < side {
            return Err(Error::InvalidConfig(format!("ε = {eps} needs side/(2ε) to be an integer ≥ side")));
        }
        if (m as u128).pow(d as u32) > 1 << 28 {
            return Err(Error::Capacity(format!("FFT grid {m}^{d}")));
        }
        let w = 2.0 / side as f64;
        let axis_weight = |n: i64| {
            let nu = eps * n as f64;
            let amp = eps.sqrt() * w * if model == PixelModel::Cells { sinc(nu * w) } else { 1.0 };
            // e^{2πiν}·e^{-iπνw}: grid starts at −1, pixel centers sit half a pixel in
            let phase = 2.0 * PI * (nu - 0.5 * nu * w).rem_euclid(1.0);
            Complex64::from_polar(amp, phase)
        };
        let mut slots = Vec::with_capacity(freqs.len());
        let mut weights = Vec::with_capacity(freqs.len());
        for f in freqs {
            if f.dim() != d {
                return Err(Error::InvalidConfig(format!("frequency {:?} is not {d}-dimensional", f.k)));
            }
            let mut slot = 0usize;
            let mut wt = Complex64::new(1.0, 0.0);
            for &n in &f.k {
                slot = slot * m + n.rem_euclid(m as i64) as usize;
                wt *= axis_weight(n);
            }
            slots.push(slot);
            weights.push(wt);
        }
        let mut planner = FftPlanner::new();
        Ok(PixelFourier {
            d,
            side,
            eps,
            m,
            slots,
            weights,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        })
    }

    pub fn rows(&self) -> usize {
        self.slots.len()
    }

    pub fn weight(&self, i: usize) -> Complex64 {
        self.weights[i]
    }

    fn embed(&self, pixels: &[Complex64]) -> Vec<Complex64> {
        if self.m == self.side {
            return pixels.to_vec();
        }
        let mut grid = vec![Complex64::new(0.0, 0.0); self.m.pow(self.d as u32)];
        for (i, &v) in pixels.iter().enumerate() {
            grid[self.remap(i)] = v;
        }
        grid
    }

    fn remap(&self, mut i: usize) -> usize {
        let mut out = 0;
        let mut mul = 1;
        for _ in 0..self.d {
            out += (i % self.side) * mul;
            i /= self.side;
            mul *= self.m;
        }
        out
    }

    fn fft_all(&self, grid: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        for a in 0..self.d {
            for_each_line(grid, self.d, self.m, a, self.m, self.m, |line| plan.process(line));
        }
    }

    pub fn forward(&self, pixels: &[Complex64], out: &mut [Complex64]) {
        let mut grid = self.embed(pixels);
        self.fft_all(&mut grid, &self.fwd);
        for ((o, &s), &w) in out.iter_mut().zip(&self.slots).zip(&self.weights) {
            *o = grid[s] * w;
        }
    }

    pub fn adjoint(&self, y: &[Complex64], pixels: &mut [Complex64]) {
        let mut grid = vec![Complex64::new(0.0, 0.0); self.m.pow(self.d as u32)];
        for ((&yi, &s), &w) in y.iter().zip(&self.slots).zip(&self.weights) {
            grid[s] += w.conj() * yi;
        }
        self.fft_all(&mut grid, &self.inv);
        if self.m == self.side {
            pixels.copy_from_slice(&grid);
        } else {
            for (i, p) in pixels.iter_mut().enumerate() {
                *p = grid[self.remap(i)];
            }
        }
    }
}

/// Haar synthesis followed by the pixel Fourier transform, with optional row scaling.
pub struct FourierHaarOperator {
    pub layout: HaarLayout,
    pixel: PixelFourier,
    row_scale: Vec<f64>,
}

impl FourierHaarOperator {
    pub fn new(layout: HaarLayout, eps: f64, freqs: &[FourierIndex]) -> Result<Self> {
        let pixel = PixelFourier::new(layout.d, layout.side, eps, freqs, PixelModel::Cells)?;
        let row_scale = vec![1.0; freqs.len()];
        Ok(FourierHaarOperator { layout, pixel, row_scale })
    }

    /// Rescale every row to unit norm and return the factors; measurements
    /// must be multiplied by the same factors. With `ε = 1/2` the rows are
    /// then orthonormal.
    pub fn normalize_rows(&mut self) -> Vec<f64> {
        let g = self.layout.side as f64;
        let w = 2.0 / g;
        let c = (g / w).powf(self.layout.d as f64 / 2.0);
        self.row_scale = (0..self.pixel.rows()).map(|i| 1.0 / (self.pixel.weight(i).norm() * c)).collect();
        self.row_scale.clone()
    }

    pub fn row_scale(&self) -> &[f64] {
        &self.row_scale
    }
}

impl LinearOperator for FourierHaarOperator {
    fn rows(&self) -> usize {
        self.pixel.rows()
    }

    fn cols(&self) -> usize {
        self.layout.len()
    }

    fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        let mut v = x.to_vec();
        self.layout.synthesize(&mut v);
        self.pixel.forward(&v, out);
        for (o, &s) in out.iter_mut().zip(&self.row_scale) {
            *o *= s;
        }
    }

    fn adjoint(&self, y: &[Complex64], out: &mut [Complex64]) {
        let ys: Vec<Complex64> = y.iter().zip(&self.row_scale).map(|(v, &s)| v * s).collect();
        self.pixel.adjoint(&ys, out);
        self.layout.synthesize_adjoint(out);
    }
}

/// `⟨f, χ_n⟩` from a grid `oversample` times finer than `side`.
///
/// Block phantoms and rasters are integrated exactly as piecewise-constant
/// images. Lorentzian spectra use midpoint samples. Every component of `n`
/// must lie inside the band `|n_i| < M/2` of the fine grid.
pub fn simulate_measurements(
    source: ImageSource<'_>,
    freqs: &[FourierIndex],
    eps: f64,
    side: usize,
    oversample: usize,
) -> Result<Vec<Complex64>> {
    if oversample < 2 {
        return Err(Error::InvalidConfig(format!("oversample {oversample} < 2")));
    }
    let fine = match source {
        ImageSource::Raster(r) => r.side * oversample,
        _ => side * oversample,
    };
    let d = source.dim();
    let (model, pixels) = match source {
        ImageSource::Lorentzian(m) => {
            let w = 2.0 / fine as f64;
            let n = fine.pow(d as u32);
            let px: Vec<Complex64> = (0..n)
                .into_par_iter()
                .map(|mut i| {
                    let mut x = [0.0; crate::MAX_DIM];
                    for a in (0..d).rev() {
                        x[a] = -1.0 + ((i % fine) as f64 + 0.5) * w;
                        i /= fine;
                    }
                    Complex64::new(crate::recon::phantom::eval_spectrum(m, &x[..d]), 0.0)
                })
                .collect();
            (PixelModel::Points, px)
        }
        _ => {
            let r = source.cell_averages(fine)?;
            (PixelModel::Cells, r.data.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
        }
    };
    let pf = PixelFourier::new(d, fine, eps, freqs, model)?;
    let half = pf.m as i64 / 2;
    if let Some(f) = freqs.iter().find(|f| f.k.iter().any(|&n| n.abs() >= half)) {
        return Err(Error::OutOfBand(f.k.to_vec()));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); freqs.len()];
    pf.forward(&pixels, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{ivec, SeparableWaveletIndex};
    use crate::coherence::WaveletKind;
    use crate::recon::phantom::Raster;
    use crate::wavelet::WaveletFamily;
    use rand::{Rng, SeedableRng};

    fn box_freqs(d: usize, r: i64) -> Vec<FourierIndex> {
        let mut out = Vec::new();
        let side = 2 * r + 1;
        for i in 0..side.pow(d as u32) {
            let mut k = vec![0i64; d];
            let mut t = i;
            for a in (0..d).rev() {
                k[a] = t % side - r;
                t /= side;
            }
            out.push(FourierIndex::new(&k));
        }
        out
    }

    #[test]
    fn constant_and_zero_images() {
        let r = Raster { d: 2, side: 8, data: vec![3.0; 64] };
        let y = simulate_measurements(ImageSource::Raster(&r), &[FourierIndex::zero(2)], 0.5, 8, 2).unwrap();
        assert!((y[0] - Complex64::new(6.0, 0.0)).norm() < 1e-12);
        let z = Raster::zeros(2, 8);
        let y = simulate_measurements(ImageSource::Raster(&z), &box_freqs(2, 3), 0.5, 8, 2).unwrap();
        assert!(y.iter().all(|v| v.norm() == 0.0));
        assert!(matches!(
            simulate_measurements(ImageSource::Raster(&r), &[FourierIndex::new(&[0, 8])], 0.5, 8, 2),
            Err(Error::OutOfBand(_))
        ));
        assert!(simulate_measurements(ImageSource::Raster(&r), &[FourierIndex::zero(2)], 0.5, 8, 1).is_err());
    }

    #[test]
    fn haar_scaling_image_matches_inner_products() {
        let cfg = BasisConfig::new(1, WaveletFamily::haar(), 0, 0.5).unwrap();
        // φ_{0,0} is the indicator of [0, 1)
        let r = Raster { d: 1, side: 16, data: (0..16).map(|i| if i >= 8 { 1.0 } else { 0.0 }).collect() };
        let freqs = box_freqs(1, 15);
        let y = simulate_measurements(ImageSource::Raster(&r), &freqs, 0.5, 16, 2).unwrap();
        let w = SeparableWaveletIndex { s: [0u8].into_iter().collect(), j: 0, k: ivec(&[0]) };
        for (f, v) in freqs.iter().zip(&y) {
            assert!((inner_product_sep(&cfg, &w, f) - v).norm() < 1e-6, "{:?}", f.k);
        }
    }

    #[test]
    fn fast_matches_dense() {
        for (d, side, eps) in [(1usize, 16usize, 0.5), (1, 16, 0.25), (2, 8, 0.5)] {
            let cfg = BasisConfig::new(d, WaveletFamily::haar(), 0, eps).unwrap();
            for kind in [WaveletKind::Separable, WaveletKind::Tensor] {
                let layout = HaarLayout::new(d, side, kind).unwrap();
                let freqs = box_freqs(d, if d == 1 { 20 } else { 6 });
                let dense = DenseOperator::haar(&cfg, &layout, &freqs).unwrap();
                let fast = FourierHaarOperator::new(layout.clone(), eps, &freqs).unwrap();
                for c in 0..layout.len() {
                    let mut e = vec![Complex64::new(0.0, 0.0); layout.len()];
                    e[c] = Complex64::new(1.0, 0.0);
                    let mut col = vec![Complex64::new(0.0, 0.0); freqs.len()];
                    fast.apply(&e, &mut col);
                    for r in 0..freqs.len() {
                        let diff = (col[r] - dense.get(r, c)).norm();
                        assert!(diff < 1e-8, "d={d} eps={eps} {kind:?} r={r} c={c}: {} vs {}", col[r], dense.get(r, c));
                    }
                }
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for eps in [0.5, 0.25] {
            let layout = HaarLayout::new(2, 32, WaveletKind::Separable).unwrap();
            let freqs: Vec<FourierIndex> = box_freqs(2, 20).into_iter().filter(|_| rng.gen_bool(0.3)).collect();
            let mut op = FourierHaarOperator::new(layout, eps, &freqs).unwrap();
            op.normalize_rows();
            let x: Vec<Complex64> = (0..op.cols()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
            let y: Vec<Complex64> = (0..op.rows()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
            let mut ax = vec![Complex64::new(0.0, 0.0); op.rows()];
            op.apply(&x, &mut ax);
            let mut aty = vec![Complex64::new(0.0, 0.0); op.cols()];
            op.adjoint(&y, &mut aty);
            let lhs: Complex64 = ax.iter().zip(&y).map(|(a, b)| a * b.conj()).sum();
            let rhs: Complex64 = x.iter().zip(&aty).map(|(a, b)| a * b.conj()).sum();
            let nx = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!((lhs - rhs).norm() <= 1e-8 * nx * ny);
        }
    }

    #[test]
    fn normalized_rows_are_orthonormal_at_half() {
        let layout = HaarLayout::new(2, 16, WaveletKind::Tensor).unwrap();
        let freqs = box_freqs(2, 5);
        let mut op = FourierHaarOperator::new(layout, 0.5, &freqs).unwrap();
        op.normalize_rows();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let y: Vec<Complex64> = (0..op.rows()).map(|_| Complex64::new(rng.gen(), rng.gen())).collect();
        let mut aty = vec![Complex64::new(0.0, 0.0); op.cols()];
        op.adjoint(&y, &mut aty);
        let mut back = vec![Complex64::new(0.0, 0.0); op.rows()];
        op.apply(&aty, &mut back);
        for (a, b) in back.iter().zip(&y) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
