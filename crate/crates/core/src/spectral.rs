//! Frequency content of the encoders on the Fourier grid `ω_k = 2πk/d`,
//! `k = 0..=d/2`.

use crate::dft::Lattice;
use crate::encoders::PeConfig;
use crate::error::{Error, Result};

/// Gaussian KDE bandwidth expressed as a multiple of the grid spacing `2π/d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KdeConfig {
    sigma: f64,
}

impl KdeConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Validation(format!("sigma={sigma} must be positive")));
        }
        Ok(Self { sigma })
    }

    /// `σ = multiplier · 2π/d`.
    pub fn from_multiplier(multiplier: f64, lattice: Lattice) -> Result<Self> {
        Self::new(multiplier * lattice.omega(1))
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Nonnegative weights over the frequency grid, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyDistribution {
    weights: Vec<f64>,
    normalizer: f64,
}

impl FrequencyDistribution {
    /// Normalize raw nonnegative weights; `R` is their sum.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        if raw.len() < 3 {
            return Err(Error::Validation(
                "a frequency grid needs at least 3 points".into(),
            ));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation(
                "frequency weights must be finite and nonnegative".into(),
            ));
        }
        let normalizer: f64 = raw.iter().sum();
        if normalizer <= 0.0 {
            return Err(Error::Degenerate("all frequency weights are zero".into()));
        }
        let weights = raw.into_iter().map(|w| w / normalizer).collect();
        Ok(Self {
            weights,
            normalizer,
        })
    }

    /// Equal weight on every grid point of `lattice`.
    pub fn uniform(lattice: Lattice) -> Self {
        Self::from_raw(vec![1.0; lattice.d() / 2 + 1]).expect("nonempty positive weights")
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// The lattice whose frequency grid this distribution lives on.
    pub fn lattice(&self) -> Lattice {
        Lattice::new(2 * (self.weights.len() - 1)).expect("grid built from an even lattice")
    }
}

/// Gaussian-KDE distribution of the sinusoidal frequencies `w_l = ρ^{-l/d}`:
/// `g_k ∝ Σ_l exp(-(ω_k - w_l)² / 2σ²)`.
///
/// Fails only when the bandwidth is so narrow that every kernel underflows.
pub fn kde_distribution(config: &PeConfig, kde: &KdeConfig) -> Result<FrequencyDistribution> {
    let lattice = config.lattice();
    let freqs = config.frequencies();
    let two_var = 2.0 * kde.sigma * kde.sigma;
    let raw = lattice
        .frequency_grid()
        .into_iter()
        .map(|omega| {
            freqs
                .iter()
                .map(|w| (-(omega - w).powi(2) / two_var).exp())
                .sum()
        })
        .collect();
    FrequencyDistribution::from_raw(raw)
}

/// Per-frequency energy of the DFT encoding: `1/d` at `ω = 0` and `ω = π`,
/// `2/d` at every interior frequency.
pub fn dft_distribution(lattice: Lattice) -> FrequencyDistribution {
    let d = lattice.d() as f64;
    let n = lattice.d() / 2 + 1;
    let raw = (0..n)
        .map(|k| {
            if k == 0 || k == n - 1 {
                1.0 / d
            } else {
                2.0 / d
            }
        })
        .collect();
    FrequencyDistribution::from_raw(raw).expect("positive weights")
}

/// Continuous index `l` solving `2π/d = ρ^{-l/d}`, i.e. `l = d·log_ρ(d/2π)`.
pub fn lowpass_index(d: usize, rho: f64) -> Result<f64> {
    Lattice::new(d)?;
    if !(rho.is_finite() && rho > 0.0) || rho == 1.0 {
        return Err(Error::Domain(format!(
            "rho={rho} must be positive and != 1"
        )));
    }
    let d = d as f64;
    let ratio = d / (2.0 * std::f64::consts::PI);
    if ratio <= 1.0 {
        return Err(Error::Domain(format!(
            "d={d} <= 2π gives a nonpositive low-pass index"
        )));
    }
    Ok(d * ratio.ln() / rho.ln())
}

/// Number of sinusoidal frequencies strictly below the first nonzero grid
/// frequency `2π/d`.
pub fn lowpass_count(config: &PeConfig) -> usize {
    lowpass_count_below(config, config.lattice().omega(1))
}

/// Number of sinusoidal frequencies strictly below `threshold`.
pub fn lowpass_count_below(config: &PeConfig, threshold: f64) -> usize {
    config
        .frequencies()
        .iter()
        .filter(|&&w| w < threshold)
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn standard() -> (PeConfig, KdeConfig) {
        let c = PeConfig::new(256, 80, 10_000.0).unwrap();
        let k = KdeConfig::from_multiplier(4.0, c.lattice()).unwrap();
        (c, k)
    }

    #[test]
    fn kde_sums_to_one() {
        let (c, k) = standard();
        let g = kde_distribution(&c, &k).unwrap();
        assert_eq!(g.weights().len(), 129);
        assert_abs_diff_eq!(g.weights().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(g.normalizer() > 0.0);
    }

    #[test]
    fn kde_skewed_toward_zero() {
        let (c, k) = standard();
        let w = kde_distribution(&c, &k).unwrap().weights().to_vec();
        // One-sided data near ω = 0 puts the mode on the first interior
        // grid point, not on ω = 0 itself.
        assert_eq!(crate::dft::argmax(&w), 1);
        assert_abs_diff_eq!(w[0], 0.1069871, epsilon = 1e-7);
        assert_abs_diff_eq!(w[1], 0.10891581, epsilon = 1e-8);
        assert!(w[1..].windows(2).all(|p| p[1] <= p[0]));
        assert!(w[0] > 10.0 * w[64]);
    }

    #[test]
    fn kde_underflow_is_degenerate() {
        let c = PeConfig::new(256, 8, 10_000.0).unwrap();
        assert!(matches!(
            kde_distribution(&c, &KdeConfig::new(1e-12).unwrap()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn kde_flattens_for_wide_bandwidth() {
        let c = PeConfig::new(64, 8, 10_000.0).unwrap();
        let g = kde_distribution(&c, &KdeConfig::new(1e6).unwrap()).unwrap();
        let (lo, hi) = g
            .weights()
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
        assert!((hi - lo) / hi <= 1e-6);
    }

    #[test]
    fn kde_matches_direct_sum() {
        // unnormalized kernel sum by hand, then compare ratios
        let c = PeConfig::new(8, 4, 10_000.0).unwrap();
        let sigma = 0.3;
        let g = kde_distribution(&c, &KdeConfig::new(sigma).unwrap()).unwrap();
        let ws = [1.0, 0.1, 0.01, 0.001];
        let raw: Vec<f64> = (0..5)
            .map(|k| {
                let om = 2.0 * std::f64::consts::PI * k as f64 / 8.0;
                ws.iter()
                    .map(|w: &f64| (-(om - w) * (om - w) / (2.0 * sigma * sigma)).exp())
                    .sum()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        for (g, r) in g.weights().iter().zip(&raw) {
            assert_abs_diff_eq!(*g, r / total, epsilon = 1e-12);
        }
    }

    #[test]
    fn dft_distribution_d8() {
        let g = dft_distribution(Lattice::new(8).unwrap());
        let want = [0.125, 0.25, 0.25, 0.25, 0.125];
        for (a, b) in g.weights().iter().zip(want) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(g.normalizer(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn dft_distribution_flat_interior() {
        let l = Lattice::new(256).unwrap();
        let g = dft_distribution(l);
        let w = g.weights();
        assert_eq!(w[0], 1.0 / 256.0);
        assert_eq!(w[128], 1.0 / 256.0);
        assert!(w[1..128].iter().all(|&x| x == 2.0 / 256.0));
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dft_distribution_matches_column_energy() {
        // average per-frequency squared energy of the DFT encoding columns
        let l = Lattice::new(32).unwrap();
        let (d, k_max) = (32, l.k_max());
        let mut energy = vec![0.0; d / 2 + 1];
        for s in 0..d {
            let v = crate::encoders::dft_pe_vector(s, l);
            energy[0] += v[0] * v[0];
            for k in 1..=k_max {
                energy[k] += v[k] * v[k] + v[k_max + k] * v[k_max + k];
            }
            energy[d / 2] += v[d - 1] * v[d - 1];
        }
        let g = dft_distribution(l);
        for (e, w) in energy.iter().zip(g.weights()) {
            assert_abs_diff_eq!(e / d as f64, *w, epsilon = 1e-14);
        }
    }

    #[test]
    fn lowpass_index_values() {
        let l256 = lowpass_index(256, 10_000.0).unwrap();
        let l512 = lowpass_index(512, 10_000.0).unwrap();
        assert!((102.5..=103.5).contains(&l256), "{l256}");
        assert!((244.0..=245.5).contains(&l512), "{l512}");
        assert_abs_diff_eq!(l256, 103.043846205039, epsilon = 1e-9);
        assert_abs_diff_eq!(l512, 244.619531855068, epsilon = 1e-9);
        // the closed form used for ρ = 10000
        let d = 256.0_f64;
        assert_abs_diff_eq!(
            l256,
            d / 4.0 * (d / (2.0 * std::f64::consts::PI)).log10(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lowpass_index_domain() {
        assert!(matches!(lowpass_index(4, 10_000.0), Err(Error::Domain(_))));
        assert!(matches!(lowpass_index(6, 10_000.0), Err(Error::Domain(_))));
        assert!(lowpass_index(8, 10_000.0).is_ok());
        assert!(matches!(
            lowpass_index(7, 10_000.0),
            Err(Error::Validation(_))
        ));
        assert!(matches!(lowpass_index(64, 1.0), Err(Error::Domain(_))));
    }

    /// Brute-force count of even `l` with `ρ^{-l/d} < 2π/d`.
    fn count_oracle(d: usize, rho: f64) -> usize {
        let thr = 2.0 * std::f64::consts::PI / d as f64;
        let mut n = 0;
        let mut l = 0;
        while l < d {
            if rho.powf(-(l as f64) / d as f64) < thr {
                n += 1;
            }
            l += 2;
        }
        n
    }

    #[test]
    fn lowpass_count_values() {
        let c = PeConfig::new(256, 80, 10_000.0).unwrap();
        assert_eq!(count_oracle(256, 10_000.0), 76);
        assert_eq!(lowpass_count(&c), 76);
        // every frequency sits below 2π/4 when d = 4
        let c4 = PeConfig::new(4, 1, 10_000.0).unwrap();
        assert_eq!(count_oracle(4, 10_000.0), 2);
        assert_eq!(lowpass_count(&c4), 2);
    }

    proptest! {
        #[test]
        fn lowpass_index_solves_equation(h in 4usize..=2048, rho in 2.0f64..1e6) {
            let d = 2 * h;
            let l = lowpass_index(d, rho).unwrap();
            let lhs = rho.powf(-l / d as f64);
            let rhs = 2.0 * std::f64::consts::PI / d as f64;
            prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-12);
        }

        #[test]
        fn count_monotone_in_threshold(h in 2usize..=256, a in 0.0f64..1.5, b in 0.0f64..1.5) {
            let c = PeConfig::new(2 * h, 1, 10_000.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(lowpass_count_below(&c, lo) <= lowpass_count_below(&c, hi));
        }

        #[test]
        fn kde_is_proper(h in 2usize..=256, mult in 0.1f64..20.0, rho in 10.0f64..1e5) {
            let c = PeConfig::new(2 * h, 1, rho).unwrap();
            let g = kde_distribution(&c, &KdeConfig::from_multiplier(mult, c.lattice()).unwrap()).unwrap();
            prop_assert!(g.weights().iter().all(|&w| w >= 0.0));
            prop_assert!((g.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
