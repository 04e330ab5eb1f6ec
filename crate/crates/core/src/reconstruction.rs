//! Reference-function reconstruction through a frequency weighting, and the
//! constructive faithfulness check of an encoder.

use crate::dft::{l2_norm, max_abs_diff, Lattice, RealDft, Signal, Spectrum};
use crate::encoders::{build_encoding_matrix, EncodingKind, PeConfig, DEFAULT_RHO};
use crate::error::{shape_err, Error, Result};
use crate::spectral::FrequencyDistribution;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionReport {
    pub reference: Signal,
    pub reconstructed: Signal,
    pub l2_error: f64,
    pub argmax_position: usize,
    /// Lattice points with value >= half the peak value.
    pub peak_width: usize,
}

/// Scale a spectrum per frequency: `a_0` by `g[0]`, `b_0` by `g[d/2]`, and
/// both `a_k`, `b_k` by `g[k]` for `k = 1..=K`.
pub fn weight_spectrum(c: &Spectrum, g: &FrequencyDistribution) -> Result<Vec<f64>> {
    let lattice = c.lattice();
    let (d, k_max) = (lattice.d(), lattice.k_max());
    let w = g.weights();
    if w.len() != d / 2 + 1 {
        return Err(shape_err("weight_spectrum grid", d / 2 + 1, w.len()));
    }
    let mut out = c.coeffs().to_vec();
    out[0] *= w[0];
    for k in 1..=k_max {
        out[k] *= w[k];
        out[k_max + k] *= w[k];
    }
    out[d - 1] *= w[k_max + 1];
    Ok(out)
}

const ZERO_SPECTRUM_RTOL: f64 = 1e-12;

/// Weight `f`'s spectrum by `g`, rescale it back to the original ℓ2 norm,
/// and invert.
pub fn reconstruct(f: &Signal, g: &FrequencyDistribution) -> Result<ReconstructionReport> {
    let plan = RealDft::new(f.lattice());
    let spectrum = plan.forward(f)?;
    let mut modified = weight_spectrum(&spectrum, g)?;

    let target = spectrum.norm();
    let current = l2_norm(&modified);
    // transform round-off leaves ~1e-16 residue where weights vanish
    if current <= ZERO_SPECTRUM_RTOL * target || !current.is_finite() {
        return Err(Error::Degenerate(
            "weighted spectrum has zero norm; cannot renormalize".into(),
        ));
    }
    let scale = target / current;
    modified.iter_mut().for_each(|c| *c *= scale);

    let reconstructed = plan.inverse(&Spectrum::new(modified)?)?;
    let l2_error = l2_norm(
        &f.values()
            .iter()
            .zip(reconstructed.values())
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    let argmax_position = reconstructed.argmax();
    let peak_width = half_max_width(reconstructed.values());
    Ok(ReconstructionReport {
        reference: f.clone(),
        reconstructed,
        l2_error,
        argmax_position,
        peak_width,
    })
}

/// Count of points at or above half the maximum value.
pub fn half_max_width(values: &[f64]) -> usize {
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half = peak / 2.0;
    values.iter().filter(|&&v| v >= half).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaithfulnessReport {
    pub kind: EncodingKind,
    /// True when every column inverts to its one-hot within tolerance and
    /// no two columns coincide.
    pub passed: bool,
    /// Max `|inverse(e^(s)) - δ_s|` over all positions and lattice points.
    pub max_deviation: f64,
    pub min_pairwise_distance: f64,
}

pub const FAITHFUL_TOLERANCE: f64 = 1e-9;
pub const MIN_COLUMN_SEPARATION: f64 = 1e-6;

/// Treat each of the `d` encoding columns as a spectrum, invert it, and
/// compare with the position function. For the sinusoidal encoding the same
/// diagnostics are reported but a failure is expected.
pub fn faithfulness_check(kind: EncodingKind, lattice: Lattice) -> FaithfulnessReport {
    let d = lattice.d();
    let config = PeConfig::new(d, d, DEFAULT_RHO).expect("lattice already validated");
    let enc = build_encoding_matrix(kind, config);
    let plan = RealDft::new(lattice);

    let mut max_deviation = 0.0_f64;
    for s in 0..d {
        let col = enc.columns().column(s).to_vec();
        let back = plan
            .inverse(&Spectrum::new(col).expect("finite encoder output"))
            .expect("matching lattice");
        let delta = Signal::one_hot(s, lattice).expect("s < d");
        max_deviation = max_deviation.max(max_abs_diff(back.values(), delta.values()));
    }

    let gram = enc.gram();
    let mut min_dist = f64::INFINITY;
    for i in 0..d {
        for j in (i + 1)..d {
            let sq = gram[[i, i]] + gram[[j, j]] - 2.0 * gram[[i, j]];
            min_dist = min_dist.min(sq.max(0.0).sqrt());
        }
    }

    FaithfulnessReport {
        kind,
        passed: max_deviation <= FAITHFUL_TOLERANCE && min_dist > MIN_COLUMN_SEPARATION,
        max_deviation,
        min_pairwise_distance: min_dist,
    }
}
