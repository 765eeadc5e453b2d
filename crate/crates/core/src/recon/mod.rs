//! Truncated basis pursuit reconstruction from Fourier samples.

pub mod experiment;
pub(crate) mod grid;
pub mod haar;
pub mod operator;
pub mod phantom;
pub mod solver;

pub use haar::{HaarIndex, HaarLayout};
pub use operator::{simulate_measurements, DenseOperator, FourierHaarOperator, LinearOperator, PixelFourier, PixelModel};
pub use phantom::{
    correlation, eval_spectrum, l1_error, lorentzian, BlockPhantom, Checkerboard, ImageSource, LorentzianPeak,
    LorentzianSpectrum, Raster, Rect,
};
pub use solver::{basis_pursuit, basis_pursuit_report, SolverConfig, SolverReport};
