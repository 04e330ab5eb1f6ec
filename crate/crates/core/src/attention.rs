//! Single-layer multi-head self-attention over column-major data matrices.
//!
//! For one head with `X ∈ R^{D×S}`:
//!
//! ```text
//! Q = W_Q X,  K = W_K X,  V = W_V X          (d×S each)
//! B = QᵀK / √d                               (S×S)
//! A = softmax_rows(B)
//! Z = V Aᵀ                                   (d×S)
//! ```
//!
//! Heads are stacked vertically, giving a `dH×S` output.

use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{shape_err, Error, Result};

/// Projection matrices of one head, each `d×D`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionHeadParams {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
}

impl AttentionHeadParams {
    pub fn new(w_q: Array2<f64>, w_k: Array2<f64>, w_v: Array2<f64>) -> Result<Self> {
        let p = Self { w_q, w_k, w_v };
        p.validate()?;
        Ok(p)
    }

    /// Entries drawn from `U[-1/√D, 1/√D]`.
    pub fn random<R: Rng + ?Sized>(head_dim: usize, input_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (input_dim as f64).sqrt();
        let mut draw = || {
            Array2::from_shape_simple_fn((head_dim, input_dim), || rng.random_range(-bound..=bound))
        };
        let w_q = draw();
        let w_k = draw();
        let w_v = draw();
        Self { w_q, w_k, w_v }
    }

    pub fn zeros(head_dim: usize, input_dim: usize) -> Self {
        let z = Array2::zeros((head_dim, input_dim));
        Self {
            w_q: z.clone(),
            w_k: z.clone(),
            w_v: z,
        }
    }

    fn validate(&self) -> Result<()> {
        let dim = self.w_q.dim();
        if self.w_k.dim() != dim || self.w_v.dim() != dim {
            return Err(shape_err(
                "head params",
                dim,
                (self.w_k.dim(), self.w_v.dim()),
            ));
        }
        if dim.0 == 0 || dim.1 == 0 {
            return Err(Error::Validation("head dimensions must be nonzero".into()));
        }
        let finite = [&self.w_q, &self.w_k, &self.w_v]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::Validation("head parameters must be finite".into()));
        }
        Ok(())
    }

    /// Output dimension `d`.
    pub fn head_dim(&self) -> usize {
        self.w_q.nrows()
    }

    /// Input dimension `D`.
    pub fn input_dim(&self) -> usize {
        self.w_q.ncols()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.nrows() != self.input_dim() || x.ncols() == 0 {
            return Err(shape_err(
                "attention input",
                format!("{}×S with S >= 1", self.input_dim()),
                x.dim(),
            ));
        }
        Ok(())
    }
}

/// `H` heads initialized from one seed, in head order.
pub fn init_heads(
    heads: usize,
    head_dim: usize,
    input_dim: usize,
    seed: u64,
) -> Vec<AttentionHeadParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..heads)
        .map(|_| AttentionHeadParams::random(head_dim, input_dim, &mut rng))
        .collect()
}

/// `B = (W_Q X)ᵀ (W_K X) / √d`.
pub fn attention_scores(x: &Array2<f64>, params: &AttentionHeadParams) -> Result<Array2<f64>> {
    params.check_input(x)?;
    let q = params.w_q.dot(x);
    let k = params.w_k.dot(x);
    Ok(scores_from(&q, &k))
}

fn scores_from(q: &Array2<f64>, k: &Array2<f64>) -> Array2<f64> {
    let scale = 1.0 / (q.nrows() as f64).sqrt();
    q.t().dot(k) * scale
}

/// Row-wise softmax with row-max subtraction.
pub fn softmax_rows(b: &Array2<f64>) -> Array2<f64> {
    let mut a = b.clone();
    for mut row in a.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    a
}

/// Vector-Jacobian product of the row softmax:
/// `dB_ij = A_ij (dA_ij - Σ_m dA_im A_im)`.
pub fn softmax_rows_backward(a: &Array2<f64>, d_a: &Array2<f64>) -> Array2<f64> {
    let mut d_b = Array2::zeros(a.dim());
    for ((a_row, da_row), mut db_row) in a.rows().into_iter().zip(d_a.rows()).zip(d_b.rows_mut()) {
        let dot: f64 = a_row.iter().zip(da_row.iter()).map(|(x, y)| x * y).sum();
        for ((db, &av), &dav) in db_row.iter_mut().zip(a_row.iter()).zip(da_row.iter()) {
            *db = av * (dav - dot);
        }
    }
    d_b
}

/// `Z = V Aᵀ`: column `s` is the `A[s, :]`-weighted mix of value columns.
pub fn filter(v: &Array2<f64>, a: &Array2<f64>) -> Result<Array2<f64>> {
    let s = v.ncols();
    if a.dim() != (s, s) {
        return Err(shape_err("filter", (s, s), a.dim()));
    }
    Ok(v.dot(&a.t()))
}

/// Concatenated output of every head, `dH×S`.
pub fn multi_head(x: &Array2<f64>, heads: &[AttentionHeadParams]) -> Result<Array2<f64>> {
    let mut layer = MultiHeadAttention::new(heads.to_vec())?;
    Ok(layer.forward(x)?.z)
}

#[derive(Debug, Clone)]
struct HeadCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    a: Array2<f64>,
}

fn head_forward(x: &Array2<f64>, p: &AttentionHeadParams) -> Result<(Array2<f64>, HeadCache)> {
    p.check_input(x)?;
    let q = p.w_q.dot(x);
    let k = p.w_k.dot(x);
    let v = p.w_v.dot(x);
    let a = softmax_rows(&scores_from(&q, &k));
    let z = v.dot(&a.t());
    Ok((
        z,
        HeadCache {
            x: x.clone(),
            q,
            k,
            v,
            a,
        },
    ))
}

/// Gradients of one head's projections.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
}

fn head_backward(
    p: &AttentionHeadParams,
    c: &HeadCache,
    d_z: &Array2<f64>,
) -> (HeadGradients, Array2<f64>) {
    let scale = 1.0 / (p.head_dim() as f64).sqrt();
    // Z = V Aᵀ
    let d_v = d_z.dot(&c.a);
    let d_a = d_z.t().dot(&c.v);
    let d_b = softmax_rows_backward(&c.a, &d_a);
    // B = QᵀK · scale
    let d_q = c.k.dot(&d_b.t()) * scale;
    let d_k = c.q.dot(&d_b) * scale;

    let xt = c.x.t();
    let grads = HeadGradients {
        w_q: d_q.dot(&xt),
        w_k: d_k.dot(&xt),
        w_v: d_v.dot(&xt),
    };
    let d_x = p.w_q.t().dot(&d_q) + p.w_k.t().dot(&d_k) + p.w_v.t().dot(&d_v);
    (grads, d_x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// One `S×S` attention matrix per head.
    pub attention: Vec<Array2<f64>>,
    /// Concatenated representation, `dH×S`.
    pub z: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGradients {
    pub heads: Vec<HeadGradients>,
    pub x: Array2<f64>,
}

/// A multi-head layer that records its last forward pass for `backward`.
#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    heads: Vec<AttentionHeadParams>,
    cache: Option<Vec<HeadCache>>,
}

impl MultiHeadAttention {
    pub fn new(heads: Vec<AttentionHeadParams>) -> Result<Self> {
        let first = heads
            .first()
            .ok_or_else(|| Error::Validation("at least one head required".into()))?;
        let dim = first.w_q.dim();
        for h in &heads {
            h.validate()?;
            if h.w_q.dim() != dim {
                return Err(shape_err("multi-head params", dim, h.w_q.dim()));
            }
        }
        Ok(Self { heads, cache: None })
    }

    pub fn heads(&self) -> &[AttentionHeadParams] {
        &self.heads
    }

    /// Mutable access to the parameters; clears any recorded forward pass.
    pub fn heads_mut(&mut self) -> &mut [AttentionHeadParams] {
        self.cache = None;
        &mut self.heads
    }

    pub fn head_dim(&self) -> usize {
        self.heads[0].head_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.heads[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.head_dim() * self.heads.len()
    }

    pub fn forward(&mut self, x: &Array2<f64>) -> Result<AttentionOutput> {
        let mut zs = Vec::with_capacity(self.heads.len());
        let mut caches = Vec::with_capacity(self.heads.len());
        for p in &self.heads {
            let (z, c) = head_forward(x, p)?;
            zs.push(z);
            caches.push(c);
        }
        let views: Vec<_> = zs.iter().map(|z| z.view()).collect();
        let z = concatenate(Axis(0), &views).expect("heads share shapes");
        let attention = caches.iter().map(|c| c.a.clone()).collect();
        self.cache = Some(caches);
        Ok(AttentionOutput { attention, z })
    }

    /// Reverse-mode gradients of the last forward pass given `∂L/∂Z`.
    pub fn backward(&self, d_z: &Array2<f64>) -> Result<AttentionGradients> {
        let caches = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let hd = self.head_dim();
        let s = caches[0].x.ncols();
        if d_z.dim() != (self.output_dim(), s) {
            return Err(shape_err(
                "attention backward",
                (self.output_dim(), s),
                d_z.dim(),
            ));
        }
        let mut heads = Vec::with_capacity(self.heads.len());
        let mut d_x = Array2::zeros(caches[0].x.dim());
        for (h, (p, c)) in self.heads.iter().zip(caches).enumerate() {
            let block = d_z.slice(ndarray::s![h * hd..(h + 1) * hd, ..]).to_owned();
            let (g, dx) = head_backward(p, c, &block);
            d_x += &dx;
            heads.push(g);
        }
        Ok(AttentionGradients { heads, x: d_x })
    }
}
