//! Real discrete Fourier transform on a `d`-point lattice.
//!
//! The orthonormal basis is indexed `l = 0..d`:
//!
//! ```text
//! φ_0(t)       = 1/√d
//! φ_l(t)       = √(2/d) cos(ω_l t)        l = 1..=K
//! φ_l(t)       = √(2/d) sin(ω_{l-K} t)    l = K+1..=2K
//! φ_{d-1}(t)   = (1/√d) cos(π t)
//! ```
//!
//! with `K = d/2 - 1` and `ω_k = 2πk/d`. Coefficient vectors use the same
//! index, so a [`Spectrum`] is laid out as `[a_0, a_1..a_K, b_1..b_K, b_0]`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// An even lattice of `d >= 4` points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lattice {
    d: usize,
}

impl Lattice {
    pub fn new(d: usize) -> Result<Self> {
        if d < 4 {
            return Err(Error::Validation(format!(
                "lattice size d={d} must be >= 4"
            )));
        }
        if !d.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "lattice size d={d} must be even"
            )));
        }
        Ok(Self { d })
    }

    /// Number of lattice points (and of basis functions).
    pub fn d(&self) -> usize {
        self.d
    }

    /// `K = d/2 - 1`, the number of interior frequencies.
    pub fn k_max(&self) -> usize {
        self.d / 2 - 1
    }

    /// Frequency `ω_k = 2πk/d`.
    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.d as f64
    }

    /// Frequency grid `ω_0..=ω_{d/2}` spanning `[0, π]`.
    pub fn frequency_grid(&self) -> Vec<f64> {
        (0..=self.d / 2).map(|k| self.omega(k)).collect()
    }

    /// Angle `ω_k t` reduced modulo 2π using exact integer arithmetic.
    fn reduced_angle(&self, k: usize, t: usize) -> f64 {
        let r = (k * t) % self.d;
        2.0 * PI * r as f64 / self.d as f64
    }

    /// Evaluate `φ_l(t)`.
    pub fn basis_value(&self, l: usize, t: usize) -> Result<f64> {
        let d = self.d;
        if l >= d {
            return Err(Error::Domain(format!("basis index l={l} outside 0..{d}")));
        }
        if t >= d {
            return Err(Error::Domain(format!("lattice point t={t} outside 0..{d}")));
        }
        Ok(self.basis_unchecked(l, t))
    }

    fn basis_unchecked(&self, l: usize, t: usize) -> f64 {
        let d = self.d as f64;
        let k_max = self.k_max();
        if l == 0 {
            1.0 / d.sqrt()
        } else if l <= k_max {
            (2.0 / d).sqrt() * self.reduced_angle(l, t).cos()
        } else if l <= 2 * k_max {
            (2.0 / d).sqrt() * self.reduced_angle(l - k_max, t).sin()
        } else {
            // cos(πt) for integer t
            let sign = if t.is_multiple_of(2) { 1.0 } else { -1.0 };
            sign / d.sqrt()
        }
    }

    /// The `d×d` matrix `Φ[l, t] = φ_l(t)`. Rows are basis functions.
    pub fn basis_matrix(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.d, self.d), |(l, t)| self.basis_unchecked(l, t))
    }

    /// Gram matrix `G[l, m] = Σ_t φ_l(t) φ_m(t)`; the identity for an orthonormal basis.
    pub fn gram_matrix(&self) -> Array2<f64> {
        let phi = self.basis_matrix();
        phi.dot(&phi.t())
    }
}

fn check_values(what: &str, values: &[f64]) -> Result<Lattice> {
    let lattice =
        Lattice::new(values.len()).map_err(|e| Error::Validation(format!("{what} length: {e}")))?;
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "{what} entry {i} is not finite ({})",
            values[i]
        )));
    }
    Ok(lattice)
}

/// A real function on the lattice, `values[t] = f(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    values: Vec<f64>,
}

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_values("signal", &values)?;
        Ok(Self { values })
    }

    /// The position function `δ_{s,t}`.
    pub fn one_hot(s: usize, lattice: Lattice) -> Result<Self> {
        if s >= lattice.d() {
            return Err(Error::Domain(format!(
                "position {s} outside lattice 0..{}",
                lattice.d()
            )));
        }
        let mut values = vec![0.0; lattice.d()];
        values[s] = 1.0;
        Ok(Self { values })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        Self {
            values: vec![0.0; lattice.d()],
        }
    }

    pub fn lattice(&self) -> Lattice {
        Lattice {
            d: self.values.len(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

/// Real DFT coefficients in canonical order `[a_0, a_1..a_K, b_1..b_K, b_0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<f64>,
}

impl Spectrum {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        check_values("spectrum", &coeffs)?;
        Ok(Self { coeffs })
    }

    pub fn lattice(&self) -> Lattice {
        Lattice {
            d: self.coeffs.len(),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Cosine coefficient `a_k` for `k = 0..=K`.
    pub fn a(&self, k: usize) -> f64 {
        assert!(k <= self.lattice().k_max(), "a_{k} out of range");
        self.coeffs[k]
    }

    /// Sine coefficient `b_k` for `k = 1..=K`; `b_0` is the π-frequency coefficient.
    pub fn b(&self, k: usize) -> f64 {
        let k_max = self.lattice().k_max();
        assert!(k <= k_max, "b_{k} out of range");
        if k == 0 {
            self.coeffs[self.coeffs.len() - 1]
        } else {
            self.coeffs[k_max + k]
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.coeffs)
    }
}

/// A forward/inverse transform pair with a cached basis matrix.
#[derive(Debug, Clone)]
pub struct RealDft {
    lattice: Lattice,
    basis: Array2<f64>,
}

impl RealDft {
    pub fn new(lattice: Lattice) -> Self {
        Self {
            lattice,
            basis: lattice.basis_matrix(),
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    fn check(&self, d: usize) -> Result<()> {
        if d != self.lattice.d() {
            return Err(crate::error::shape_err("real dft", self.lattice.d(), d));
        }
        Ok(())
    }

    /// `c_l = Σ_t f(t) φ_l(t)`.
    pub fn forward(&self, f: &Signal) -> Result<Spectrum> {
        self.check(f.values.len())?;
        let c = self.basis.dot(&ArrayView1::from(f.values()));
        Ok(Spectrum { coeffs: c.to_vec() })
    }

    /// `f(t) = Σ_l c_l φ_l(t)`.
    pub fn inverse(&self, c: &Spectrum) -> Result<Signal> {
        self.check(c.coeffs.len())?;
        let f = self.basis.t().dot(&ArrayView1::from(c.coeffs()));
        Ok(Signal { values: f.to_vec() })
    }
}

pub fn dft_forward(f: &Signal) -> Spectrum {
    RealDft::new(f.lattice())
        .forward(f)
        .expect("lattice derived from signal")
}

pub fn dft_inverse(c: &Spectrum) -> Signal {
    RealDft::new(c.lattice())
        .inverse(c)
        .expect("lattice derived from spectrum")
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Index of the largest value, ties resolved toward the smallest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Max `|G - I|` over all entries.
pub fn identity_deviation(m: &Array2<f64>) -> f64 {
    m.indexed_iter()
        .map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

impl From<Signal> for Array1<f64> {
    fn from(s: Signal) -> Self {
        Array1::from(s.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lat(d: usize) -> Lattice {
        Lattice::new(d).unwrap()
    }

    #[test]
    fn rejects_odd_and_tiny_lattices() {
        assert!(matches!(Lattice::new(7), Err(Error::Validation(_))));
        assert!(matches!(Lattice::new(2), Err(Error::Validation(_))));
        assert!(matches!(Lattice::new(0), Err(Error::Validation(_))));
        let l = lat(16);
        assert_eq!(l.k_max(), 7);
        assert_eq!(2 + 2 * l.k_max(), l.d());
    }

    #[test]
    fn basis_value_examples() {
        assert_abs_diff_eq!(lat(16).basis_value(0, 7).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(lat(4).basis_value(3, 1).unwrap(), -0.5, epsilon = 1e-15);
        // √(2/8) cos(2π·2/8) = 0.5 cos(π/2)
        assert_abs_diff_eq!(lat(8).basis_value(1, 2).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn basis_value_out_of_range() {
        assert!(matches!(lat(8).basis_value(8, 0), Err(Error::Domain(_))));
        assert!(matches!(lat(8).basis_value(0, 8), Err(Error::Domain(_))));
    }

    #[test]
    fn basis_matches_unreduced_closed_form() {
        // direct evaluation without the modular angle reduction
        let l = lat(12);
        let d = 12.0_f64;
        let k = l.k_max();
        for b in 0..12 {
            for t in 0..12 {
                let tf = t as f64;
                let expect = if b == 0 {
                    1.0 / d.sqrt()
                } else if b <= k {
                    (2.0 / d).sqrt() * (2.0 * PI * b as f64 / d * tf).cos()
                } else if b <= 2 * k {
                    (2.0 / d).sqrt() * (2.0 * PI * (b - k) as f64 / d * tf).sin()
                } else {
                    (PI * tf).cos() / d.sqrt()
                };
                assert_abs_diff_eq!(l.basis_value(b, t).unwrap(), expect, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn forward_constant_and_delta() {
        let c = dft_forward(&Signal::new(vec![1.0; 4]).unwrap());
        for (got, want) in c.coeffs().iter().zip([2.0, 0.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-14);
        }
        let c = dft_forward(&Signal::one_hot(0, lat(4)).unwrap());
        for (got, want) in c.coeffs().iter().zip([0.5, 0.5_f64.sqrt(), 0.0, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn spectrum_accessors_follow_canonical_order() {
        let c = Spectrum::new((0..8).map(|x| x as f64).collect()).unwrap();
        assert_eq!(c.a(0), 0.0);
        assert_eq!(c.a(3), 3.0);
        assert_eq!(c.b(1), 4.0);
        assert_eq!(c.b(3), 6.0);
        assert_eq!(c.b(0), 7.0);
    }

    #[test]
    fn inverse_examples() {
        let f = dft_inverse(&Spectrum::new(vec![4.0_f64.sqrt(), 0.0, 0.0, 0.0]).unwrap());
        for v in f.values() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-15);
        }
        let z = dft_inverse(&Spectrum::new(vec![0.0; 10]).unwrap());
        assert!(z.values().iter().all(|&v| v == 0.0));

        let delta = Signal::one_hot(5, lat(256)).unwrap();
        let back = dft_inverse(&dft_forward(&delta));
        assert!(max_abs_diff(back.values(), delta.values()) <= 1e-9);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            Signal::new(vec![0.0, f64::NAN, 0.0, 0.0]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            Spectrum::new(vec![0.0, 0.0, f64::INFINITY, 0.0]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            Signal::new(vec![0.0; 5]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn transform_length_mismatch() {
        let plan = RealDft::new(lat(8));
        assert!(matches!(
            plan.forward(&Signal::zeros(lat(6))),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn gram_is_identity() {
        assert!(identity_deviation(&lat(8).gram_matrix()) <= 1e-12);
        for d in [4, 64, 256] {
            let g = lat(d).gram_matrix();
            for i in 0..d {
                assert_abs_diff_eq!(g[[i, i]], 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn gram_off_diagonal_by_direct_summation() {
        // explicit triple loop, independent of the matrix product path
        let l = lat(256);
        let phi: Vec<Vec<f64>> = (0..256)
            .map(|b| (0..256).map(|t| l.basis_value(b, t).unwrap()).collect())
            .collect();
        let mut worst = 0.0_f64;
        for a in 0..256 {
            for b in (a + 1)..256 {
                let s: f64 = (0..256).map(|t| phi[a][t] * phi[b][t]).sum();
                worst = worst.max(s.abs());
            }
        }
        assert!(worst <= 1e-12, "max off-diagonal {worst}");
    }

    fn signal_strategy() -> impl Strategy<Value = Vec<f64>> {
        (2usize..=40).prop_flat_map(|h| prop::collection::vec(-1.0f64..1.0, 2 * h))
    }

    proptest! {
        #[test]
        fn round_trip(v in signal_strategy()) {
            let f = Signal::new(v).unwrap();
            let back = dft_inverse(&dft_forward(&f));
            prop_assert!(max_abs_diff(back.values(), f.values()) <= 1e-10);
        }

        #[test]
        fn parseval(v in signal_strategy()) {
            let f = Signal::new(v).unwrap();
            let c = dft_forward(&f);
            let (nf, nc) = (f.norm(), c.norm());
            prop_assert!((nf - nc).abs() <= 1e-10 * nf.max(1e-300));
        }

        #[test]
        fn linearity(
            pair in (2usize..=20).prop_flat_map(|h| (
                prop::collection::vec(-1.0f64..1.0, 2 * h),
                prop::collection::vec(-1.0f64..1.0, 2 * h),
            )),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let (x, y) = pair;
            let mixed: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
            let lhs = dft_forward(&Signal::new(mixed).unwrap());
            let cx = dft_forward(&Signal::new(x).unwrap());
            let cy = dft_forward(&Signal::new(y).unwrap());
            let rhs: Vec<f64> = cx.coeffs().iter().zip(cy.coeffs()).map(|(a, b)| alpha * a + beta * b).collect();
            prop_assert!(max_abs_diff(lhs.coeffs(), &rhs) <= 1e-10);
        }

        #[test]
        fn orthonormal_for_even_sizes(h in 2usize..=256) {
            prop_assert!(identity_deviation(&lat(2 * h).gram_matrix()) <= 1e-12);
        }
    }
}
