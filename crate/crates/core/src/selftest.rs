//! Built-in invariant suite behind `dftpe selftest`.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{attention_scores, init_heads, softmax_rows};
use crate::dft::{dft_forward, dft_inverse, identity_deviation, max_abs_diff, Lattice, Signal};
use crate::encoders::{build_encoding_matrix, dft_pe_vector, EncodingKind, PeConfig};
use crate::experiments::{f1_score, Classifier};
use crate::reconstruction::{faithfulness_check, reconstruct};
use crate::spectral::{
    dft_distribution, kde_distribution, lowpass_index, FrequencyDistribution, KdeConfig,
};

/// Central-difference step for gradient checks.
pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
pub const GRAD_REL_FLOOR: f64 = 1e-6;
pub const GRAD_REL_TOLERANCE: f64 = 1e-4;

/// `(precision, recall, F1)` triples reported for the two encoders on three datasets.
pub const REPORTED_SCORES: [(f64, f64, f64); 6] = [
    (0.977, 0.917, 0.946),
    (1.0, 0.943, 0.970),
    (0.822, 0.855, 0.838),
    (0.979, 0.955, 0.967),
    (1.0, 0.961, 0.980),
    (0.894, 0.821, 0.856),
];

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "ok" } else { "FAIL" };
            writeln!(out, "{tag} {} {}", c.name, c.detail).expect("write to string");
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        if failed == 0 {
            writeln!(out, "PASS {} checks", self.checks.len()).expect("write to string");
        } else {
            writeln!(out, "FAIL {failed} of {} checks", self.checks.len())
                .expect("write to string");
        }
        out
    }
}

fn check(name: &'static str, value: f64, bound: f64) -> CheckResult {
    CheckResult {
        name,
        passed: value <= bound,
        detail: format!("value={value:.3e} bound={bound:.0e}"),
    }
}

fn random_signal(rng: &mut ChaCha8Rng, d: usize) -> Signal {
    Signal::new((0..d).map(|_| rng.random_range(-1.0..=1.0)).collect()).expect("finite")
}

/// Relative error with an absolute floor for near-zero gradients.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_REL_FLOOR)
}

/// One random attention+readout instance (`d, D <= 4`, `S <= 5`, `H <= 2`):
/// max relative error between reverse-mode gradients of the cross-entropy
/// loss and central differences, over every parameter and input entry.
pub fn gradient_check_instance(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let head_dim = rng.random_range(1..=4);
    let input_dim = rng.random_range(1..=4);
    let seq_len = rng.random_range(1..=5);
    let heads = rng.random_range(1..=2);
    let label = rng.random_bool(0.5);
    let mut clf = Classifier::new(init_heads(heads, head_dim, input_dim, seed), seed)
        .expect("valid random model");
    // spread the readout so gradients are not all tiny
    let scale = 2.0;
    let p: Vec<f64> = clf.params_flat().iter().map(|v| v * scale).collect();
    clf.set_params_flat(&p).expect("same length");
    let x = Array2::from_shape_simple_fn((input_dim, seq_len), || rng.random_range(-1.0..=1.0));

    let (_, grads) = clf.loss_and_grad(&x, label).expect("valid shapes");
    let analytic = grads.flat();
    let base = clf.params_flat();
    let mut worst = 0.0_f64;
    let loss_at = |clf: &mut Classifier, params: &[f64]| {
        clf.set_params_flat(params).expect("same length");
        clf.loss_and_grad(&x, label).expect("valid shapes").0
    };
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + FD_STEP;
        let up = loss_at(&mut clf, &p);
        p[i] = base[i] - FD_STEP;
        let down = loss_at(&mut clf, &p);
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    clf.set_params_flat(&base).expect("same length");
    for idx in ndarray::indices(x.dim()) {
        let mut xp = x.clone();
        xp[idx] += FD_STEP;
        let up = clf.loss_and_grad(&xp, label).expect("valid shapes").0;
        xp[idx] -= 2.0 * FD_STEP;
        let down = clf.loss_and_grad(&xp, label).expect("valid shapes").0;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(grads.input[idx], numeric));
    }
    worst
}

pub fn run_all() -> SelftestReport {
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let gram = [4, 8, 64, 256]
        .iter()
        .map(|&d| identity_deviation(&Lattice::new(d).expect("even").gram_matrix()))
        .fold(0.0, f64::max);
    checks.push(check("gram_identity", gram, 1e-12));

    let l256 = Lattice::new(256).expect("even");
    let mut rt = 0.0_f64;
    let mut parseval = 0.0_f64;
    for _ in 0..20 {
        let f = random_signal(&mut rng, 256);
        let c = dft_forward(&f);
        rt = rt.max(max_abs_diff(dft_inverse(&c).values(), f.values()));
        parseval = parseval.max((c.norm() - f.norm()).abs() / f.norm());
    }
    checks.push(check("dft_round_trip", rt, 1e-10));
    checks.push(check("parseval", parseval, 1e-10));

    let faithful = faithfulness_check(EncodingKind::Dft, l256);
    checks.push(CheckResult {
        name: "dft_encoding_faithful",
        passed: faithful.passed,
        detail: format!("max_deviation={:.3e}", faithful.max_deviation),
    });

    let enc = build_encoding_matrix(
        EncodingKind::Dft,
        PeConfig::with_default_rho(256, 256).expect("valid"),
    );
    checks.push(check(
        "dft_encoder_orthonormal",
        identity_deviation(&enc.gram()),
        1e-10,
    ));

    let consistency = (0..256)
        .map(|s| {
            max_abs_diff(
                &dft_pe_vector(s, l256),
                dft_forward(&Signal::one_hot(s, l256).expect("s < d")).coeffs(),
            )
        })
        .fold(0.0, f64::max);
    checks.push(check("dft_encoder_matches_transform", consistency, 1e-12));

    let standard = PeConfig::new(256, 80, 10_000.0).expect("valid");
    let kde = kde_distribution(
        &standard,
        &KdeConfig::from_multiplier(4.0, l256).expect("positive"),
    )
    .expect("nondegenerate");
    checks.push(check(
        "kde_normalized",
        (kde.weights().iter().sum::<f64>() - 1.0).abs(),
        1e-12,
    ));
    let flat = dft_distribution(l256);
    let interior_spread = flat.weights()[1..128]
        .iter()
        .map(|w| (w - 2.0 / 256.0).abs())
        .fold(0.0, f64::max);
    checks.push(check("dft_distribution_flat", interior_spread, 0.0));

    let mut lp = 0.0_f64;
    for d in [256, 512] {
        let l = lowpass_index(d, 10_000.0).expect("d > 2π");
        let target = 2.0 * std::f64::consts::PI / d as f64;
        lp = lp.max((10_000.0_f64.powf(-l / d as f64) - target).abs() / target);
    }
    checks.push(check("lowpass_index_equation", lp, 1e-12));

    let identity = reconstruct(
        &random_signal(&mut rng, 256),
        &FrequencyDistribution::uniform(l256),
    )
    .map(|r| r.l2_error)
    .unwrap_or(f64::INFINITY);
    checks.push(check("uniform_reconstruction_identity", identity, 1e-9));

    let f1 = REPORTED_SCORES
        .iter()
        .map(|&(p, r, f)| (f1_score(p, r) - f).abs())
        .fold(0.0, f64::max);
    checks.push(check("reported_f1_identities", f1, 1e-3));

    let mut stoch = 0.0_f64;
    for seed in 0..10 {
        let head = &init_heads(1, 4, 4, seed)[0];
        let x = Array2::from_shape_simple_fn((4, 5), || rng.random_range(-3.0..=3.0));
        let a = softmax_rows(&attention_scores(&x, head).expect("shapes"));
        for row in a.rows() {
            stoch = stoch.max((row.sum() - 1.0).abs());
        }
    }
    checks.push(check("attention_row_stochastic", stoch, 1e-12));

    let grad = (0..5).map(gradient_check_instance).fold(0.0, f64::max);
    checks.push(check("gradient_check", grad, GRAD_REL_TOLERANCE));

    SelftestReport { checks }
}
