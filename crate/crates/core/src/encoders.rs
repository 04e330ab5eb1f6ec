//! Positional encoders: the sinusoidal encoding with geometric frequencies
//! `w_k = ρ^{-k/d}` and the DFT encoding, whose column `s` is the real-DFT
//! spectrum of the position function `δ_{s,t}`.
//!
//! Positions are 0-based: position `s` corresponds to lattice point `t = s`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::dft::Lattice;
use crate::error::{shape_err, Error, Result};

pub const DEFAULT_RHO: f64 = 10_000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeConfig {
    d: usize,
    seq_len: usize,
    rho: f64,
}

impl PeConfig {
    pub fn new(d: usize, seq_len: usize, rho: f64) -> Result<Self> {
        Lattice::new(d)?;
        if seq_len == 0 {
            return Err(Error::Validation("sequence length must be >= 1".into()));
        }
        if !(rho.is_finite() && rho > 0.0) {
            return Err(Error::Validation(format!("rho={rho} must be positive")));
        }
        Ok(Self { d, seq_len, rho })
    }

    pub fn with_default_rho(d: usize, seq_len: usize) -> Result<Self> {
        Self::new(d, seq_len, DEFAULT_RHO)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.d).expect("validated at construction")
    }

    /// Sinusoidal frequency `w_k = ρ^{-k/d}` for even `k`.
    pub fn frequency(&self, k: usize) -> f64 {
        self.rho.powf(-(k as f64) / self.d as f64)
    }

    /// All sinusoidal frequencies `w_0, w_2, .., w_{d-2}`.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.d).step_by(2).map(|k| self.frequency(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingKind {
    /// Interleaved `(sin(w_k s), cos(w_k s))` pairs.
    Original,
    /// Real-DFT coefficients of the one-hot position function.
    Dft,
    /// All-zero encoding; the no-PE baseline.
    None,
}

impl EncodingKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EncodingKind::Original => "original",
            EncodingKind::Dft => "dft",
            EncodingKind::None => "none",
        }
    }
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" | "sinusoidal" => Ok(EncodingKind::Original),
            "dft" => Ok(EncodingKind::Dft),
            "none" | "zero" => Ok(EncodingKind::None),
            other => Err(Error::Validation(format!(
                "unknown encoding '{other}' (expected original, dft or none)"
            ))),
        }
    }
}

/// Sinusoidal encoding of position `s`:
/// `(sin(w_0 s), cos(w_0 s), sin(w_2 s), cos(w_2 s), ..)`.
pub fn original_pe_vector(s: usize, config: &PeConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(config.d);
    for k in (0..config.d).step_by(2) {
        let angle = config.frequency(k) * s as f64;
        out.push(angle.sin());
        out.push(angle.cos());
    }
    out
}

/// DFT encoding of position `s` in canonical spectrum order
/// `(a_0, a_1..a_K, b_1..b_K, b_0)`. Positions `s >= d` alias onto `s mod d`.
pub fn dft_pe_vector(s: usize, lattice: Lattice) -> Vec<f64> {
    let d = lattice.d();
    let k_max = lattice.k_max();
    let s = s % d;
    let scale = (2.0 / d as f64).sqrt();
    let angle = |k: usize| 2.0 * PI * ((k * s) % d) as f64 / d as f64;

    let mut out = Vec::with_capacity(d);
    out.push(1.0 / (d as f64).sqrt());
    out.extend((1..=k_max).map(|k| scale * angle(k).cos()));
    out.extend((1..=k_max).map(|k| scale * angle(k).sin()));
    let sign = if s.is_multiple_of(2) { 1.0 } else { -1.0 };
    out.push(sign / (d as f64).sqrt());
    out
}

/// A `d×S` matrix whose column `s` is the encoding of position `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingMatrix {
    columns: Array2<f64>,
    kind: EncodingKind,
    config: PeConfig,
    aliasing_warning: bool,
}

impl EncodingMatrix {
    pub fn build(kind: EncodingKind, config: PeConfig) -> Self {
        let (d, len) = (config.d, config.seq_len);
        let mut columns = Array2::zeros((d, len));
        for s in 0..len {
            let col = match kind {
                EncodingKind::Original => original_pe_vector(s, &config),
                EncodingKind::Dft => dft_pe_vector(s, config.lattice()),
                EncodingKind::None => continue,
            };
            columns.column_mut(s).assign(&ndarray::Array1::from(col));
        }
        Self {
            columns,
            kind,
            config,
            aliasing_warning: kind == EncodingKind::Dft && len > d,
        }
    }

    pub fn columns(&self) -> &Array2<f64> {
        &self.columns
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    pub fn config(&self) -> &PeConfig {
        &self.config
    }

    /// Set when a DFT encoding has more positions than lattice points.
    pub fn aliasing_warning(&self) -> bool {
        self.aliasing_warning
    }

    /// Position-by-position inner products `EᵀE`.
    pub fn gram(&self) -> Array2<f64> {
        self.columns.t().dot(&self.columns)
    }

    /// `x^(s) <- x^(s) + e^(s)` for every column.
    pub fn inject(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        inject(x, self)
    }
}

pub fn build_encoding_matrix(kind: EncodingKind, config: PeConfig) -> EncodingMatrix {
    EncodingMatrix::build(kind, config)
}

pub fn inject(x: &Array2<f64>, enc: &EncodingMatrix) -> Result<Array2<f64>> {
    if x.dim() != enc.columns.dim() {
        return Err(shape_err("inject", enc.columns.dim(), x.dim()));
    }
    Ok(x + &enc.columns)
}
