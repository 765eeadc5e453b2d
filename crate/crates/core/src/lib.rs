//! Coherence structure of Fourier sampling against wavelet and Legendre
//! reconstruction bases: filters, index sets, orderings, coherence profiles,
//! multilevel sampling and a basis pursuit reconstruction pipeline.

pub mod basis;
pub mod coherence;
pub mod error;
pub mod io;
pub mod legendre;
pub mod ordering;
pub mod quadrature;
pub mod recon;
pub mod sampling;
pub mod wavelet;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 5;
