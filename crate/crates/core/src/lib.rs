//! Positional encodings on a real-DFT lattice.
//!
//! - [`dft`]: real discrete Fourier transform with an orthonormal sine/cosine basis.
//! - [`encoders`]: the sinusoidal encoding and the DFT encoding.
//! - [`spectral`]: KDE frequency distributions and low-pass analysis.
//! - [`reconstruction`]: spectral reweighting of reference functions, faithfulness check.
//! - [`attention`]: multi-head self-attention with reverse-mode gradients.
//! - [`experiments`]: synthetic position-sensitive classification and metrics.
//! - [`cli`]: command-line front end.

pub mod attention;
pub mod cli;
pub mod dft;
pub mod encoders;
pub mod error;
pub mod experiments;
pub mod reconstruction;
pub mod selftest;
pub mod spectral;

pub use dft::{dft_forward, dft_inverse, Lattice, RealDft, Signal, Spectrum};
pub use encoders::{build_encoding_matrix, EncodingKind, EncodingMatrix, PeConfig};
pub use error::{Error, Result};
pub use spectral::{dft_distribution, kde_distribution, FrequencyDistribution, KdeConfig};
