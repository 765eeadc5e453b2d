//! Test images on `[-1, 1]^d`: Lorentzian spectra, block phantoms and rasters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{encode_pgm16, linear_scaled_u16};
use crate::{Complex64, MAX_DIM};

/// `s / (s² + (x − p)²)`.
pub fn lorentzian(p: f64, s: f64, x: f64) -> f64 {
    s / (s * s + (x - p) * (x - p))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianPeak {
    pub position: Vec<f64>,
    pub width: Vec<f64>,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzianSpectrum {
    pub peaks: Vec<LorentzianPeak>,
}

impl LorentzianSpectrum {
    pub fn new(peaks: Vec<LorentzianPeak>) -> Result<Self> {
        let s = LorentzianSpectrum { peaks };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.peaks.first().ok_or_else(|| Error::InvalidConfig("spectrum needs a peak".into()))?;
        let d = first.position.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidConfig(format!("dimension {d}")));
        }
        for pk in &self.peaks {
            if pk.position.len() != d || pk.width.len() != d {
                return Err(Error::InvalidConfig("peak dimensions disagree".into()));
            }
            if pk.width.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
                return Err(Error::InvalidConfig("peak widths must be positive".into()));
            }
            if pk.position.iter().any(|p| !p.is_finite()) || !pk.amplitude.is_finite() {
                return Err(Error::InvalidConfig("non-finite peak".into()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.peaks[0].position.len()
    }
}

pub fn eval_spectrum(model: &LorentzianSpectrum, x: &[f64]) -> f64 {
    model
        .peaks
        .iter()
        .map(|pk| {
            pk.amplitude * pk.position.iter().zip(&pk.width).zip(x).map(|((&p, &s), &xi)| lorentzian(p, s, xi)).product::<f64>()
        })
        .sum()
}

/// Mean of `L_{p,s}` over `[a, b]`.
fn lorentzian_mean(p: f64, s: f64, a: f64, b: f64) -> f64 {
    (((b - p) / s).atan() - ((a - p) / s).atan()) / (b - a)
}

/// `∫_a^b e^{-2πiνx} dx`.
fn exp_integral(nu: f64, a: f64, b: f64) -> Complex64 {
    let t = PI * nu * (b - a);
    let sinc = if t.abs() < 1e-8 { 1.0 - t * t / 6.0 } else { t.sin() / t };
    Complex64::from_polar((b - a) * sinc, -PI * nu * (a + b))
}

/// One-dimensional factor of a block phantom term.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Profile {
    Box { lo: f64, hi: f64 },
    /// `(−1)^{⌊(x − lo)/cell⌋}` on `[lo, hi)`.
    Alternating { lo: f64, hi: f64, cell: f64 },
}

impl Profile {
    fn cells(lo: f64, hi: f64, cell: f64) -> impl Iterator<Item = (f64, f64, f64)> {
        let n = ((hi - lo) / cell - 1e-9).ceil().max(0.0) as usize;
        (0..n).map(move |c| {
            let a = lo + c as f64 * cell;
            let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
            (a, (a + cell).min(hi), sign)
        })
    }

    fn value(&self, x: f64) -> f64 {
        match *self {
            Profile::Box { lo, hi } => (lo <= x && x < hi) as u8 as f64,
            Profile::Alternating { lo, hi, cell } => {
                if lo <= x && x < hi {
                    if ((x - lo) / cell).floor() as i64 % 2 == 0 { 1.0 } else { -1.0 }
                } else {
                    0.0
                }
            }
        }
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        let overlap = |lo: f64, hi: f64| (b.min(hi) - a.max(lo)).max(0.0);
        match *self {
            Profile::Box { lo, hi } => overlap(lo, hi),
            Profile::Alternating { lo, hi, cell } => {
                if b <= lo || a >= hi {
                    return 0.0;
                }
                let first = (((a - lo) / cell).floor().max(0.0)) as usize;
                let mut acc = 0.0;
                for (c0, c1, sign) in Profile::cells(lo, hi, cell).skip(first) {
                    if c0 >= b {
                        break;
                    }
                    acc += sign * overlap(c0, c1);
                }
                acc
            }
        }
    }

    fn fourier(&self, nu: f64) -> Complex64 {
        match *self {
            Profile::Box { lo, hi } => exp_integral(nu, lo, hi),
            Profile::Alternating { lo, hi, cell } => {
                Profile::cells(lo, hi, cell).map(|(a, b, sign)| exp_integral(nu, a, b) * sign).sum()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub value: f64,
}

/// Alternating `±contrast` cells filling `[lo, hi)`, starting positive at `lo`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkerboard {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cell: f64,
    pub contrast: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockPhantom {
    pub rects: Vec<Rect>,
    #[serde(default)]
    pub checkerboard: Option<Checkerboard>,
}

type Term = (f64, Vec<Profile>);

impl BlockPhantom {
    pub fn new(rects: Vec<Rect>, checkerboard: Option<Checkerboard>) -> Result<Self> {
        let b = BlockPhantom { rects, checkerboard };
        b.validate()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.rects
            .first()
            .map(|r| r.lo.len())
            .or_else(|| self.checkerboard.as_ref().map(|c| c.lo.len()))
            .unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidConfig("block phantom needs at least one rectangle".into()));
        }
        let in_domain = |lo: &[f64], hi: &[f64]| {
            lo.len() == d && hi.len() == d && lo.iter().zip(hi).all(|(&a, &b)| -1.0 <= a && a < b && b <= 1.0)
        };
        for r in &self.rects {
            if !in_domain(&r.lo, &r.hi) || !r.value.is_finite() {
                return Err(Error::InvalidConfig(format!("rectangle {:?}..{:?} not inside [-1, 1]^{d}", r.lo, r.hi)));
            }
        }
        if let Some(c) = &self.checkerboard {
            if !in_domain(&c.lo, &c.hi) || !(c.cell > 0.0) || !c.contrast.is_finite() {
                return Err(Error::InvalidConfig("checkerboard patch invalid".into()));
            }
        }
        Ok(())
    }

    fn terms(&self) -> Vec<Term> {
        let mut out: Vec<Term> = self
            .rects
            .iter()
            .map(|r| (r.value, r.lo.iter().zip(&r.hi).map(|(&lo, &hi)| Profile::Box { lo, hi }).collect()))
            .collect();
        if let Some(c) = &self.checkerboard {
            out.push((
                c.contrast,
                c.lo.iter().zip(&c.hi).map(|(&lo, &hi)| Profile::Alternating { lo, hi, cell: c.cell }).collect(),
            ));
        }
        out
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms().iter().map(|(a, prof)| a * prof.iter().zip(x).map(|(p, &xi)| p.value(xi)).product::<f64>()).sum()
    }

    /// Exact `⟨f, χ_n⟩` with `χ_n = ε^{d/2} e^{2πiε n·x}`.
    pub fn fourier(&self, n: &[i64], eps: f64) -> Complex64 {
        let norm = eps.powf(n.len() as f64 / 2.0);
        self.terms()
            .iter()
            .map(|(a, prof)| {
                prof.iter().zip(n).map(|(p, &ni)| p.fourier(eps * ni as f64)).product::<Complex64>() * *a
            })
            .sum::<Complex64>()
            * norm
    }
}

/// Samples on the uniform grid of `side^d` pixels over `[-1, 1]^d`, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub d: usize,
    pub side: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn zeros(d: usize, side: usize) -> Self {
        Raster { d, side, data: vec![0.0; side.pow(d as u32)] }
    }

    pub fn pixel_width(&self) -> f64 {
        2.0 / self.side as f64
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.d];
        for a in (0..self.d).rev() {
            c[a] = idx % self.side;
            idx /= self.side;
        }
        c
    }

    /// Pixels whose centers lie in `[lo, hi]`.
    pub fn region(&self, lo: &[f64], hi: &[f64]) -> Vec<usize> {
        let w = self.pixel_width();
        (0..self.data.len())
            .filter(|&i| {
                self.coords(i).iter().enumerate().all(|(a, &c)| {
                    let x = -1.0 + (c as f64 + 0.5) * w;
                    lo[a] <= x && x <= hi[a]
                })
            })
            .collect()
    }

    pub fn to_pgm16(&self) -> Result<Vec<u8>> {
        let px = linear_scaled_u16(&self.data);
        match self.d {
            1 => Ok(encode_pgm16(self.side, 1, &px)),
            2 => Ok(encode_pgm16(self.side, self.side, &px)),
            d => Err(Error::InvalidConfig(format!("PGM export needs d ≤ 2, got {d}"))),
        }
    }
}

/// Outer product of per-axis vectors, accumulated into `out`.
fn add_outer(out: &mut [f64], side: usize, axes: &[Vec<f64>], scale: f64) {
    for (i, v) in out.iter_mut().enumerate() {
        let mut idx = i;
        let mut p = scale;
        for a in (0..axes.len()).rev() {
            p *= axes[a][idx % side];
            idx /= side;
        }
        *v += p;
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ImageSource<'a> {
    Lorentzian(&'a LorentzianSpectrum),
    Block(&'a BlockPhantom),
    Raster(&'a Raster),
}

impl ImageSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            ImageSource::Lorentzian(m) => m.dim(),
            ImageSource::Block(b) => b.dim(),
            ImageSource::Raster(r) => r.d,
        }
    }

    /// Exact pixel averages on a `side^d` grid. Rasters are resampled by
    /// replication, which requires `side` to be a multiple of their own side.
    pub fn cell_averages(&self, side: usize) -> Result<Raster> {
        let d = self.dim();
        if side == 0 || (side as u128).pow(d as u32) > 1 << 28 {
            return Err(Error::Capacity(format!("raster of side {side} in {d} dimensions")));
        }
        let mut out = Raster::zeros(d, side);
        let w = 2.0 / side as f64;
        let edge = |i: usize| -1.0 + i as f64 * w;
        match self {
            ImageSource::Lorentzian(m) => {
                for pk in &m.peaks {
                    let axes: Vec<Vec<f64>> = (0..d)
                        .map(|a| {
                            (0..side).map(|i| lorentzian_mean(pk.position[a], pk.width[a], edge(i), edge(i + 1))).collect()
                        })
                        .collect();
                    add_outer(&mut out.data, side, &axes, pk.amplitude);
                }
            }
            ImageSource::Block(b) => {
                for (amp, prof) in b.terms() {
                    let axes: Vec<Vec<f64>> =
                        prof.iter().map(|p| (0..side).map(|i| p.integral(edge(i), edge(i + 1)) / w).collect()).collect();
                    add_outer(&mut out.data, side, &axes, amp);
                }
            }
            ImageSource::Raster(r) => {
                if side % r.side != 0 {
                    return Err(Error::InvalidConfig(format!("cannot resample side {} to {side}", r.side)));
                }
                let f = side / r.side;
                for (i, v) in out.data.iter_mut().enumerate() {
                    let src = out_coords(i, side, d).iter().fold(0usize, |acc, &c| acc * r.side + c / f);
                    *v = r.data[src];
                }
            }
        }
        Ok(out)
    }
}

fn out_coords(mut idx: usize, side: usize, d: usize) -> Vec<usize> {
    let mut c = vec![0; d];
    for a in (0..d).rev() {
        c[a] = idx % side;
        idx /= side;
    }
    c
}

/// `Σ|a − b| / Σ|b|`.
pub fn l1_error(recon: &Raster, reference: &Raster) -> Result<f64> {
    if recon.d != reference.d || recon.side != reference.side {
        return Err(Error::InvalidConfig("raster shapes differ".into()));
    }
    let denom: f64 = reference.data.iter().map(|v| v.abs()).sum();
    if denom == 0.0 {
        return Err(Error::Degenerate("zero reference image".into()));
    }
    let num: f64 = recon.data.iter().zip(&reference.data).map(|(a, b)| (a - b).abs()).sum();
    Ok(num / denom)
}

/// Pearson correlation over the listed pixels; zero when either side is constant.
pub fn correlation(a: &Raster, b: &Raster, pixels: &[usize]) -> f64 {
    let n = pixels.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let ma = pixels.iter().map(|&i| a.data[i]).sum::<f64>() / n;
    let mb = pixels.iter().map(|&i| b.data[i]).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &i in pixels {
        let (x, y) = (a.data[i] - ma, b.data[i] - mb);
        sab += x * y;
        saa += x * x;
        sbb += y * y;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak(p: &[f64], s: &[f64]) -> LorentzianPeak {
        LorentzianPeak { position: p.to_vec(), width: s.to_vec(), amplitude: 1.0 }
    }

    #[test]
    fn spectrum_values() {
        let m = LorentzianSpectrum::new(vec![peak(&[0.3], &[0.05])]).unwrap();
        assert!((eval_spectrum(&m, &[0.3]) - 20.0).abs() < 1e-12);
        assert_eq!(lorentzian(0.0, 1.0, 1.0), 0.5);
        let m2 = LorentzianSpectrum::new(vec![peak(&[0.1, -0.2], &[0.5, 0.25])]).unwrap();
        assert!((eval_spectrum(&m2, &[0.1, -0.2]) - 8.0).abs() < 1e-12);
        assert!(LorentzianSpectrum::new(vec![peak(&[0.0], &[0.0])]).is_err());
        assert!(LorentzianSpectrum::new(vec![]).is_err());
    }

    #[test]
    fn block_averages_and_fourier() {
        let b = BlockPhantom::new(
            vec![Rect { lo: vec![-0.5, -0.5], hi: vec![0.25, 0.5], value: 2.0 }],
            Some(Checkerboard { lo: vec![0.0, 0.0], hi: vec![0.5, 0.5], cell: 0.125, contrast: 1.0 }),
        )
        .unwrap();
        let r = ImageSource::Block(&b).cell_averages(16).unwrap();
        // aligned grid: averages equal point values at centers
        for (i, &v) in r.data.iter().enumerate() {
            let x: Vec<f64> = r.coords(i).iter().map(|&c| -1.0 + (c as f64 + 0.5) / 8.0).collect();
            assert!((v - b.value(&x)).abs() < 1e-12);
        }
        // Fourier against a fine midpoint sum
        let eps = 0.5;
        let k = 1024;
        let w = 2.0 / k as f64;
        for n in [[0i64, 0], [3, -5], [16, 16]] {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    let x = [-1.0 + (i as f64 + 0.5) * w, -1.0 + (j as f64 + 0.5) * w];
                    let v = b.value(&x);
                    if v != 0.0 {
                        let ph = -2.0 * PI * eps * (n[0] as f64 * x[0] + n[1] as f64 * x[1]);
                        acc += Complex64::from_polar(v * w * w, ph);
                    }
                }
            }
            acc *= eps;
            let exact = b.fourier(&n, eps);
            assert!((acc - exact).norm() < 2e-3 * (1.0 + exact.norm()), "{n:?}: {acc} vs {exact}");
        }
        assert!(BlockPhantom::new(vec![Rect { lo: vec![-2.0], hi: vec![0.0], value: 1.0 }], None).is_err());
    }

    #[test]
    fn lorentzian_averages() {
        let m = LorentzianSpectrum::new(vec![peak(&[0.1], &[0.2])]).unwrap();
        let r = ImageSource::Lorentzian(&m).cell_averages(4).unwrap();
        // midpoint rule with many points per cell
        for (c, &v) in r.data.iter().enumerate() {
            let a = -1.0 + c as f64 * 0.5;
            let k = 20000;
            let mid: f64 = (0..k).map(|i| eval_spectrum(&m, &[a + (i as f64 + 0.5) * 0.5 / k as f64])).sum::<f64>() / k as f64;
            assert!((v - mid).abs() < 1e-8);
        }
    }

    #[test]
    fn error_metric() {
        let r = Raster { d: 1, side: 4, data: vec![1.0, -2.0, 3.0, 0.5] };
        assert_eq!(l1_error(&r, &r).unwrap(), 0.0);
        let twice = Raster { data: r.data.iter().map(|v| 2.0 * v).collect(), ..r.clone() };
        assert!((l1_error(&twice, &r).unwrap() - 1.0).abs() < 1e-15);
        let shifted = Raster { data: r.data.iter().map(|v| v + 0.1).collect(), ..r.clone() };
        assert!((l1_error(&shifted, &r).unwrap() - 0.4 / 6.5).abs() < 1e-15);
        assert!(l1_error(&r, &Raster::zeros(1, 4)).is_err());
        assert!((correlation(&twice, &r, &[0, 1, 2, 3]) - 1.0).abs() < 1e-12);
    }
}
