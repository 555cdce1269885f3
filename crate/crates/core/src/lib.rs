//! Numerical laboratory for bilinear Fourier multipliers of limited
//! smoothness: periodic-grid operators, Daubechies wavelet decompositions of
//! symbols, Sobolev, Triebel-Lizorkin and Hormander norms, and Rademacher
//! scaling experiments.

pub mod bumps;
pub mod counterexamples;
pub mod decomposition;
pub mod error;
pub mod families;
pub mod grid;
pub mod multiplier;
pub mod norms;
pub mod symbol;
pub mod wavelets;

pub use error::{LabError, Result};
pub use grid::{dft_forward, dft_inverse, lp_norm, SampledFunction, Side, TorusGrid};
pub use num_complex::Complex64;
pub use symbol::{IndexBox, MultiSymbol, Symbol};
