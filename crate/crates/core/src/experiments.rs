//! Synthetic position-sensitive classification comparing encoders, plus
//! metrics and position-decoding probes.
//!
//! Each window is a `D×S` matrix of Gaussian noise with one spike column.
//! The label is 1 when the spike sits inside a fixed band of positions.
//! Without a positional encoding, attention followed by mean pooling is
//! blind to where the spike is, so only an encoder can solve the task.

use std::ops::Range;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::attention::{init_heads, AttentionHeadParams, MultiHeadAttention};
use crate::encoders::{build_encoding_matrix, EncodingKind, EncodingMatrix, PeConfig, DEFAULT_RHO};
use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any ratio had a zero denominator and was reported as 0.
    pub undefined: bool,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let mut undefined = false;
        let mut ratio = |num: f64, den: f64| {
            if den == 0.0 {
                undefined = true;
                0.0
            } else {
                num / den
            }
        };
        let precision = ratio(tp as f64, (tp + fp) as f64);
        let recall = ratio(tp as f64, (tp + fn_) as f64);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        Self {
            tp,
            fp,
            fn_,
            tn,
            precision,
            recall,
            f1,
            undefined,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn compute_metrics(predicted: &[bool], truth: &[bool]) -> Result<Metrics> {
    if predicted.is_empty() {
        return Err(Error::Validation("no labels to score".into()));
    }
    if predicted.len() != truth.len() {
        return Err(shape_err("compute_metrics", truth.len(), predicted.len()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

/// Fraction of positions `s` whose best inner-product match among all
/// encoding columns is `s` itself; ties go to the smallest index.
pub fn position_decode_accuracy(enc: &EncodingMatrix) -> f64 {
    let decoded = decode_positions(enc);
    let hits = decoded.iter().enumerate().filter(|(s, &t)| *s == t).count();
    hits as f64 / decoded.len() as f64
}

/// `argmax_t ⟨e^(s), e^(t)⟩` for every position `s`.
pub fn decode_positions(enc: &EncodingMatrix) -> Vec<usize> {
    let gram = enc.gram();
    gram.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (t, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = t;
                }
            }
            best
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTaskConfig {
    pub seq_len: usize,
    pub feature_dim: usize,
    /// Spike positions labelled positive.
    pub band: Range<usize>,
    pub amplitude: f64,
    pub noise: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SyntheticTaskConfig {
    fn default() -> Self {
        Self {
            seq_len: 8,
            feature_dim: 8,
            band: 2..4,
            amplitude: 4.0,
            noise: 0.05,
            samples: 600,
            seed: 0,
        }
    }
}

impl SyntheticTaskConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seq_len == 0 || self.feature_dim == 0 {
            return Err(Error::Validation(
                "window dimensions must be nonzero".into(),
            ));
        }
        if self.band.is_empty() || self.band.end > self.seq_len {
            return Err(Error::Validation(format!(
                "anomaly band {:?} must be a nonempty range inside 0..{}",
                self.band, self.seq_len
            )));
        }
        if self.band.len() == self.seq_len {
            return Err(Error::Validation(
                "anomaly band covers every position; no negatives possible".into(),
            ));
        }
        if self.samples < 2 {
            return Err(Error::Validation("need at least 2 samples".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::Validation("noise scale must be >= 0".into()));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Validation("amplitude must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub windows: Vec<Array2<f64>>,
    pub labels: Vec<bool>,
    pub spike_positions: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn split(self, at: usize) -> (Dataset, Dataset) {
        let mut w = self.windows;
        let mut l = self.labels;
        let mut p = self.spike_positions;
        let test = Dataset {
            windows: w.split_off(at),
            labels: l.split_off(at),
            spike_positions: p.split_off(at),
        };
        (
            Dataset {
                windows: w,
                labels: l,
                spike_positions: p,
            },
            test,
        )
    }
}

/// Labels alternate (positive first); the spike adds `amplitude` to every
/// feature of its column.
pub fn generate_task(config: &SyntheticTaskConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let outside: Vec<usize> = (0..config.seq_len)
        .filter(|p| !config.band.contains(p))
        .collect();

    let mut data = Dataset {
        windows: Vec::with_capacity(config.samples),
        labels: Vec::with_capacity(config.samples),
        spike_positions: Vec::with_capacity(config.samples),
    };
    for i in 0..config.samples {
        let label = i % 2 == 0;
        let pos = if label {
            rng.random_range(config.band.clone())
        } else {
            outside[rng.random_range(0..outside.len())]
        };
        let mut w = Array2::from_shape_simple_fn((config.feature_dim, config.seq_len), || {
            config.noise * normal.sample(&mut rng)
        });
        w.column_mut(pos).mapv_inplace(|v| v + config.amplitude);
        data.windows.push(w);
        data.labels.push(label);
        data.spike_positions.push(pos);
    }
    Ok(data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub heads: usize,
    pub head_dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub train_fraction: f64,
    pub rho: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            heads: 4,
            head_dim: 8,
            learning_rate: 0.1,
            epochs: 200,
            train_fraction: 0.5,
            rho: DEFAULT_RHO,
        }
    }
}

/// Attention, mean pooling over positions, then `sigmoid(wᵀz̄ + b)`.
#[derive(Debug, Clone)]
pub struct Classifier {
    pub attention: MultiHeadAttention,
    pub weights: Array1<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierGradients {
    pub heads: Vec<crate::attention::HeadGradients>,
    pub weights: Array1<f64>,
    pub bias: f64,
    pub input: Array2<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on the logit, `log(1 + e^z) - y z`.
fn bce_with_logit(z: f64, y: bool) -> f64 {
    let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
    softplus - if y { z } else { 0.0 }
}

impl Classifier {
    pub fn new(heads: Vec<AttentionHeadParams>, seed: u64) -> Result<Self> {
        let attention = MultiHeadAttention::new(heads)?;
        let n = attention.output_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c1a5);
        let bound = 1.0 / (n as f64).sqrt();
        let weights = Array1::from_shape_simple_fn(n, || rng.random_range(-bound..=bound));
        Ok(Self {
            attention,
            weights,
            bias: 0.0,
        })
    }

    pub fn seeded(config: &ModelConfig, input_dim: usize, seed: u64) -> Result<Self> {
        if config.heads == 0 || config.head_dim == 0 {
            return Err(Error::Validation("heads and head_dim must be >= 1".into()));
        }
        Self::new(
            init_heads(config.heads, config.head_dim, input_dim, seed),
            seed,
        )
    }

    pub fn logit(&mut self, x: &Array2<f64>) -> Result<f64> {
        let z = self.attention.forward(x)?.z;
        let pooled = z.mean_axis(Axis(1)).expect("S >= 1");
        Ok(self.weights.dot(&pooled) + self.bias)
    }

    pub fn predict_proba(&mut self, x: &Array2<f64>) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    /// Cross-entropy of one window and its exact gradients.
    pub fn loss_and_grad(
        &mut self,
        x: &Array2<f64>,
        y: bool,
    ) -> Result<(f64, ClassifierGradients)> {
        let z = self.attention.forward(x)?.z;
        let s = z.ncols();
        let pooled = z.mean_axis(Axis(1)).expect("S >= 1");
        let logit = self.weights.dot(&pooled) + self.bias;
        let loss = bce_with_logit(logit, y);

        let d_logit = sigmoid(logit) - if y { 1.0 } else { 0.0 };
        let d_pooled = &self.weights * d_logit;
        let mut d_z = Array2::zeros(z.dim());
        for mut col in d_z.columns_mut() {
            col.assign(&(&d_pooled / s as f64));
        }
        let g = self.attention.backward(&d_z)?;
        Ok((
            loss,
            ClassifierGradients {
                heads: g.heads,
                weights: pooled * d_logit,
                bias: d_logit,
                input: g.x,
            },
        ))
    }

    /// Every trainable scalar in a fixed order: per head `W_Q, W_K, W_V`
    /// (row-major), then the readout weights, then the bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for h in self.attention.heads() {
            for m in [&h.w_q, &h.w_k, &h.w_v] {
                out.extend(m.iter().copied());
            }
        }
        out.extend(self.weights.iter().copied());
        out.push(self.bias);
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.params_flat().len();
        if flat.len() != expected {
            return Err(shape_err("set_params_flat", expected, flat.len()));
        }
        let mut it = flat.iter().copied();
        for h in self.attention.heads_mut() {
            for m in [&mut h.w_q, &mut h.w_k, &mut h.w_v] {
                m.iter_mut()
                    .for_each(|v| *v = it.next().expect("length checked"));
            }
        }
        self.weights
            .iter_mut()
            .for_each(|v| *v = it.next().expect("length checked"));
        self.bias = it.next().expect("length checked");
        Ok(())
    }

    fn apply(&mut self, g: &ClassifierGradients, lr: f64) {
        for (h, gh) in self.attention.heads_mut().iter_mut().zip(&g.heads) {
            h.w_q.scaled_add(-lr, &gh.w_q);
            h.w_k.scaled_add(-lr, &gh.w_k);
            h.w_v.scaled_add(-lr, &gh.w_v);
        }
        self.weights.scaled_add(-lr, &g.weights);
        self.bias -= lr * g.bias;
    }
}

impl ClassifierGradients {
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for h in &self.heads {
            for m in [&h.w_q, &h.w_k, &h.w_v] {
                out.extend(m.iter().copied());
            }
        }
        out.extend(self.weights.iter().copied());
        out.push(self.bias);
        out
    }

    fn scaled_add(&mut self, alpha: f64, other: &ClassifierGradients) {
        for (a, b) in self.heads.iter_mut().zip(&other.heads) {
            a.w_q.scaled_add(alpha, &b.w_q);
            a.w_k.scaled_add(alpha, &b.w_k);
            a.w_v.scaled_add(alpha, &b.w_v);
        }
        self.weights.scaled_add(alpha, &other.weights);
        self.bias += alpha * other.bias;
        // input gradients are per-window and not accumulated
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonResult {
    pub kind: EncodingKind,
    /// Held-out metrics.
    pub metrics: Metrics,
    /// Mean training loss before each update, followed by the final loss;
    /// `epochs + 1` entries.
    pub loss_curve: Vec<f64>,
    /// False when the final loss is not below the initial loss.
    pub converged: bool,
}

impl ComparisonResult {
    pub fn initial_loss(&self) -> f64 {
        self.loss_curve[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.loss_curve.last().expect("nonempty curve")
    }
}

fn mean_loss_and_grad(
    model: &mut Classifier,
    data: &Dataset,
    enc: &EncodingMatrix,
) -> Result<(f64, ClassifierGradients)> {
    let n = data.len() as f64;
    let mut total = 0.0;
    let mut acc: Option<ClassifierGradients> = None;
    for (w, &y) in data.windows.iter().zip(&data.labels) {
        let x = enc.inject(w)?;
        let (loss, g) = model.loss_and_grad(&x, y)?;
        total += loss;
        match acc.as_mut() {
            Some(a) => a.scaled_add(1.0, &g),
            None => acc = Some(g),
        }
    }
    let mut g = acc.expect("nonempty training split");
    for h in &mut g.heads {
        h.w_q /= n;
        h.w_k /= n;
        h.w_v /= n;
    }
    g.weights /= n;
    g.bias /= n;
    Ok((total / n, g))
}

fn evaluate(model: &mut Classifier, data: &Dataset, enc: &EncodingMatrix) -> Result<Metrics> {
    let mut predicted = Vec::with_capacity(data.len());
    for w in &data.windows {
        predicted.push(model.predict_proba(&enc.inject(w)?)? >= 0.5);
    }
    compute_metrics(&predicted, &data.labels)
}

/// Train a fresh classifier on `kind`-encoded windows and score it on the
/// held-out split. Initialization is shared across encoders for a given seed.
pub fn train_and_evaluate(
    task: &SyntheticTaskConfig,
    model: &ModelConfig,
    kind: EncodingKind,
) -> Result<ComparisonResult> {
    let data = generate_task(task)?;
    if !(model.train_fraction > 0.0 && model.train_fraction < 1.0) {
        return Err(Error::Validation(
            "train fraction must lie in (0, 1)".into(),
        ));
    }
    if !(model.learning_rate.is_finite() && model.learning_rate > 0.0) {
        return Err(Error::Validation("learning rate must be positive".into()));
    }
    let n_train = ((data.len() as f64) * model.train_fraction).round() as usize;
    if n_train == 0 || n_train >= data.len() {
        return Err(Error::Validation(
            "train/test split leaves an empty side".into(),
        ));
    }
    let pe = PeConfig::new(task.feature_dim, task.seq_len, model.rho).map_err(|e| {
        Error::Validation(format!(
            "feature dim must equal the encoding dim (even, >= 4): {e}"
        ))
    })?;
    let enc = build_encoding_matrix(kind, pe);
    let (train, test) = data.split(n_train);

    let mut clf = Classifier::seeded(model, task.feature_dim, task.seed)?;
    let mut curve = Vec::with_capacity(model.epochs + 1);
    for _ in 0..model.epochs {
        let (loss, g) = mean_loss_and_grad(&mut clf, &train, &enc)?;
        curve.push(loss);
        clf.apply(&g, model.learning_rate);
    }
    curve.push(mean_loss_and_grad(&mut clf, &train, &enc)?.0);

    let metrics = evaluate(&mut clf, &test, &enc)?;
    let converged = curve.last() < curve.first();
    Ok(ComparisonResult {
        kind,
        metrics,
        loss_curve: curve,
        converged,
    })
}

pub fn run_comparison(
    task: &SyntheticTaskConfig,
    model: &ModelConfig,
    kinds: &[EncodingKind],
) -> Result<Vec<ComparisonResult>> {
    kinds
        .iter()
        .map(|&k| train_and_evaluate(task, model, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn f1_from_reported_pairs() {
        assert_abs_diff_eq!(f1_score(1.0, 0.943), 0.970, epsilon = 1e-3);
        assert_abs_diff_eq!(f1_score(0.822, 0.855), 0.838, epsilon = 1e-3);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn metrics_counts() {
        let pred = [true, true, false, false, true];
        let truth = [true, false, true, false, true];
        let m = compute_metrics(&pred, &truth).unwrap();
        assert_eq!((m.tp, m.fp, m.fn_, m.tn), (2, 1, 1, 1));
        assert_abs_diff_eq!(m.precision, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.recall, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.f1, 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.accuracy(), 0.6, epsilon = 1e-15);
        assert!(!m.undefined);
    }

    #[test]
    fn metrics_perfect() {
        let labels = [true, false, true, true];
        let m = compute_metrics(&labels, &labels).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn metrics_zero_division() {
        let m = compute_metrics(&[false, false], &[false, false]).unwrap();
        assert!(m.undefined);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn metrics_errors() {
        assert!(matches!(
            compute_metrics(&[], &[]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            compute_metrics(&[true], &[true, false]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn decode_dft() {
        for (d, s) in [(16, 16), (256, 80)] {
            let enc =
                build_encoding_matrix(EncodingKind::Dft, PeConfig::with_default_rho(d, s).unwrap());
            assert_eq!(position_decode_accuracy(&enc), 1.0);
        }
    }

    #[test]
    fn decode_zero_encoding_collapses_to_first() {
        let enc = build_encoding_matrix(
            EncodingKind::None,
            PeConfig::with_default_rho(8, 8).unwrap(),
        );
        assert_eq!(decode_positions(&enc), vec![0; 8]);
        assert_eq!(position_decode_accuracy(&enc), 1.0 / 8.0);
    }

    #[test]
    fn task_generation() {
        let cfg = SyntheticTaskConfig::default();
        let a = generate_task(&cfg).unwrap();
        let b = generate_task(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), cfg.samples);
        let pos = a.labels.iter().filter(|&&l| l).count() as f64 / a.len() as f64;
        assert!((0.4..=0.6).contains(&pos));
        for (&l, &p) in a.labels.iter().zip(&a.spike_positions) {
            assert_eq!(l, cfg.band.contains(&p));
        }
        let other = generate_task(&SyntheticTaskConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn noiseless_windows_differ_only_by_spike_position() {
        let cfg = SyntheticTaskConfig {
            noise: 0.0,
            samples: 20,
            ..Default::default()
        };
        let data = generate_task(&cfg).unwrap();
        let neg = data.labels.iter().position(|l| !l).unwrap();
        for i in (0..data.len()).filter(|&i| data.labels[i]) {
            let (p, q) = (data.spike_positions[i], data.spike_positions[neg]);
            let moved = data.windows[neg].clone();
            let mut swapped = moved.clone();
            swapped.column_mut(p).assign(&moved.column(q));
            swapped.column_mut(q).assign(&moved.column(p));
            assert_eq!(swapped, data.windows[i]);
        }
    }

    #[test]
    fn task_validation() {
        let bad = [
            SyntheticTaskConfig {
                band: 3..3,
                ..Default::default()
            },
            SyntheticTaskConfig {
                band: 10..20,
                ..Default::default()
            },
            SyntheticTaskConfig {
                band: 0..8,
                ..Default::default()
            },
            SyntheticTaskConfig {
                samples: 1,
                ..Default::default()
            },
            SyntheticTaskConfig {
                noise: -1.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(generate_task(&cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn feature_dim_must_match_encoding() {
        let task = SyntheticTaskConfig {
            feature_dim: 5,
            samples: 8,
            ..Default::default()
        };
        assert!(train_and_evaluate(
            &task,
            &ModelConfig {
                epochs: 1,
                ..Default::default()
            },
            EncodingKind::Dft
        )
        .is_err());
    }

    #[test]
    fn flat_params_round_trip() {
        let mut clf = Classifier::seeded(&ModelConfig::default(), 4, 3).unwrap();
        let p = clf.params_flat();
        assert_eq!(p.len(), 4 * 3 * 8 * 4 + 32 + 1);
        let shifted: Vec<f64> = p.iter().map(|v| v + 1.0).collect();
        clf.set_params_flat(&shifted).unwrap();
        assert_eq!(clf.params_flat(), shifted);
        assert!(clf.set_params_flat(&p[1..]).is_err());
    }

    #[test]
    fn classifier_gradient_matches_central_differences() {
        let cfg = ModelConfig {
            heads: 2,
            head_dim: 3,
            ..Default::default()
        };
        let mut clf = Classifier::seeded(&cfg, 4, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let x = Array2::from_shape_simple_fn((4, 5), || rng.random_range(-1.0..1.0));
        let (_, g) = clf.loss_and_grad(&x, true).unwrap();
        let analytic = g.flat();
        let base = clf.params_flat();
        let h = 1e-5;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            clf.set_params_flat(&p).unwrap();
            let up = clf.loss_and_grad(&x, true).unwrap().0;
            p[i] -= 2.0 * h;
            clf.set_params_flat(&p).unwrap();
            let down = clf.loss_and_grad(&x, true).unwrap().0;
            let fd = (up - down) / (2.0 * h);
            assert_abs_diff_eq!(fd, analytic[i], epsilon = 1e-8);
        }
    }

    #[test]
    fn bce_is_stable() {
        assert!(bce_with_logit(800.0, false).is_finite());
        assert!(bce_with_logit(-800.0, true).is_finite());
        assert_abs_diff_eq!(bce_with_logit(0.0, true), 2.0_f64.ln(), epsilon = 1e-15);
    }
}
