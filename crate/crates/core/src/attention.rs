//! Single-layer dense self-attention regressor used as a comparison baseline.
//!
//! Each scalar token is embedded into `d_model` dimensions, passed through
//! multi-head softmax attention (`d_k = d_model / heads`, scale `1/sqrt(d_k)`),
//! an output projection, a residual add with layer norm, a ReLU feed-forward
//! sublayer with a second residual add and layer norm, and read out from the
//! last token. There is no positional encoding; order enters only through the
//! readout position.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::ops::matmul_raw;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Shape;

/// Layer-norm variance floor.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttnConfig {
    pub context_len: usize,
    pub d_model: usize,
    pub heads: usize,
    pub d_ff: usize,
}

impl AttnConfig {
    /// `d_model = 16`, four heads, `d_ff = 64`.
    pub fn new(context_len: usize) -> Self {
        AttnConfig {
            context_len,
            d_model: 16,
            heads: 4,
            d_ff: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.context_len == 0 || self.d_model == 0 || self.heads == 0 || self.d_ff == 0 {
            return Err(Error::InvalidConfig("attention sizes must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::InvalidConfig(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn num_params(&self) -> usize {
        count_params(self)
    }

    /// `(name, rows, cols)` of every parameter segment, in storage order.
    pub fn segment_shapes(&self) -> Vec<(&'static str, usize, usize)> {
        let (d, f) = (self.d_model, self.d_ff);
        vec![
            ("embed.weight", 1, d),
            ("embed.bias", 1, d),
            ("qkv.weight", d, 3 * d),
            ("qkv.bias", 1, 3 * d),
            ("out.weight", d, d),
            ("out.bias", 1, d),
            ("norm1.gamma", 1, d),
            ("norm1.beta", 1, d),
            ("ffn.weight1", d, f),
            ("ffn.bias1", 1, f),
            ("ffn.weight2", f, d),
            ("ffn.bias2", 1, d),
            ("norm2.gamma", 1, d),
            ("norm2.beta", 1, d),
            ("readout.weight", d, 1),
            ("readout.bias", 1, 1),
        ]
    }
}

/// Trainable floats; independent of `context_len`.
pub fn count_params(config: &AttnConfig) -> usize {
    config.segment_shapes().iter().map(|&(_, r, c)| r * c).sum()
}

/// Weights of the query, key, value and output projections, without biases: `4 d^2`.
pub fn mixing_weight_count(config: &AttnConfig) -> usize {
    4 * config.d_model * config.d_model
}

/// Weights of the two feed-forward layers, without biases: `2 d d_ff`.
pub fn ffn_weight_count(config: &AttnConfig) -> usize {
    2 * config.d_model * config.d_ff
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Segment {
    pub fn shape(&self) -> Shape {
        Shape::new(self.rows, self.cols)
    }
}

const EMBED_W: usize = 0;
const EMBED_B: usize = 1;
const QKV_W: usize = 2;
const QKV_B: usize = 3;
const OUT_W: usize = 4;
const OUT_B: usize = 5;
const NORM1_G: usize = 6;
const NORM1_B: usize = 7;
const FFN_W1: usize = 8;
const FFN_B1: usize = 9;
const FFN_W2: usize = 10;
const FFN_B2: usize = 11;
const NORM2_G: usize = 12;
const NORM2_B: usize = 13;
const READ_W: usize = 14;
const READ_B: usize = 15;

/// Named parameter segments in [`AttnConfig::segment_shapes`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnParams {
    pub segments: Vec<Segment>,
}

impl AttnParams {
    /// Weights and biases `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`; norm scales one, offsets zero.
    pub fn init<R: Rng + ?Sized>(config: &AttnConfig, rng: &mut R) -> Self {
        let fan_in = |name: &str| -> usize {
            match name.split('.').next().unwrap_or("") {
                "embed" => 1,
                "ffn" if name.ends_with('2') => config.d_ff,
                _ => config.d_model,
            }
        };
        let segments = config
            .segment_shapes()
            .into_iter()
            .map(|(name, rows, cols)| {
                let n = rows * cols;
                let data = if name.ends_with("gamma") {
                    vec![1.0; n]
                } else if name.ends_with("beta") {
                    vec![0.0; n]
                } else {
                    let bound = 1.0 / math::sqrt(fan_in(name) as f64);
                    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
                };
                Segment {
                    name: name.to_string(),
                    rows,
                    cols,
                    data,
                }
            })
            .collect();
        AttnParams { segments }
    }

    pub fn from_groups(config: &AttnConfig, groups: &[Vec<f64>]) -> Result<Self> {
        let shapes = config.segment_shapes();
        if groups.len() != shapes.len() {
            return Err(Error::LengthMismatch {
                expected: shapes.len(),
                got: groups.len(),
            });
        }
        let segments = shapes
            .into_iter()
            .zip(groups)
            .map(|((name, rows, cols), g)| {
                if g.len() != rows * cols {
                    return Err(Error::LengthMismatch {
                        expected: rows * cols,
                        got: g.len(),
                    });
                }
                Ok(Segment {
                    name: name.to_string(),
                    rows,
                    cols,
                    data: g.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(AttnParams { segments })
    }

    pub fn groups(&self) -> Vec<Vec<f64>> {
        self.segments.iter().map(|s| s.data.clone()).collect()
    }

    pub fn group_names(&self) -> Vec<String> {
        self.segments.iter().map(|s| s.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.segments.iter().flat_map(|s| s.data.iter().copied()).collect()
    }

    pub fn check(&self, config: &AttnConfig) -> Result<()> {
        let shapes = config.segment_shapes();
        if self.segments.len() != shapes.len() {
            return Err(Error::LengthMismatch {
                expected: shapes.len(),
                got: self.segments.len(),
            });
        }
        for (s, (name, rows, cols)) in self.segments.iter().zip(shapes) {
            if s.name != name || s.rows != rows || s.cols != cols || s.data.len() != rows * cols {
                return Err(Error::InvalidConfig(format!(
                    "segment {} ({}x{}, {} values) does not match {name} ({rows}x{cols})",
                    s.name,
                    s.rows,
                    s.cols,
                    s.data.len()
                )));
            }
        }
        if self.segments.iter().any(|s| s.data.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite { op: "attention params" });
        }
        Ok(())
    }

    fn seg(&self, i: usize) -> &[f64] {
        &self.segments[i].data
    }
}

fn add_row_raw(x: &mut [f64], row: &[f64]) {
    for chunk in x.chunks_mut(row.len()) {
        for (v, b) in chunk.iter_mut().zip(row) {
            *v += b;
        }
    }
}

fn layer_norm_raw(x: &mut [f64], cols: usize, gamma: &[f64], beta: &[f64]) {
    let n = cols as f64;
    for row in x.chunks_mut(cols) {
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let inv = 1.0 / math::sqrt(var + LAYER_NORM_EPS);
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean) * inv * gamma[j] + beta[j];
        }
    }
}

fn softmax_raw(row: &mut [f64]) {
    let m = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = math::exp(*v - m);
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Attention probabilities of every head, each `N x N` row-major.
fn head_weights(qkv: &[f64], n: usize, config: &AttnConfig) -> Vec<Vec<f64>> {
    let (d, dk) = (config.d_model, config.head_dim());
    let scale = 1.0 / math::sqrt(dk as f64);
    (0..config.heads)
        .map(|h| {
            let mut w = vec![0.0; n * n];
            for i in 0..n {
                let q = &qkv[i * 3 * d + h * dk..i * 3 * d + (h + 1) * dk];
                for j in 0..n {
                    let k = &qkv[j * 3 * d + d + h * dk..j * 3 * d + d + (h + 1) * dk];
                    w[i * n + j] = q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() * scale;
                }
                softmax_raw(&mut w[i * n..(i + 1) * n]);
            }
            w
        })
        .collect()
}

/// Multi-head self-attention over `n` tokens of width `d_model`, including the
/// query/key/value and output projections.
pub fn attention_mix(tokens: &[f64], n: usize, config: &AttnConfig, params: &AttnParams) -> Vec<f64> {
    let d = config.d_model;
    let mut qkv = matmul_raw(tokens, params.seg(QKV_W), n, d, 3 * d);
    add_row_raw(&mut qkv, params.seg(QKV_B));
    let heads = mix_heads(&qkv, n, config);
    let mut out = matmul_raw(&heads, params.seg(OUT_W), n, d, d);
    add_row_raw(&mut out, params.seg(OUT_B));
    out
}

/// `softmax(Q K^T / sqrt(d_k)) V` for every head, concatenated per token.
///
/// `qkv` holds `n` rows of `[Q | K | V]`, each `d_model` wide; this is the
/// part of the layer whose cost grows with `n^2`.
pub fn mix_heads(qkv: &[f64], n: usize, config: &AttnConfig) -> Vec<f64> {
    let (d, dk) = (config.d_model, config.head_dim());
    let weights = head_weights(qkv, n, config);
    let mut heads = vec![0.0; n * d];
    for (h, w) in weights.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                let a = w[i * n + j];
                let v = &qkv[j * 3 * d + 2 * d + h * dk..j * 3 * d + 2 * d + (h + 1) * dk];
                for (o, vv) in heads[i * d + h * dk..i * d + (h + 1) * dk].iter_mut().zip(v) {
                    *o += a * vv;
                }
            }
        }
    }
    heads
}

fn embed(x: &[f64], config: &AttnConfig, params: &AttnParams) -> Vec<f64> {
    let d = config.d_model;
    let mut e = matmul_raw(x, params.seg(EMBED_W), x.len(), 1, d);
    add_row_raw(&mut e, params.seg(EMBED_B));
    e
}

/// Dense self-attention regressor.
#[derive(Debug, Clone)]
pub struct AttentionModel {
    config: AttnConfig,
}

impl AttentionModel {
    pub fn new(config: AttnConfig) -> Result<Self> {
        config.validate()?;
        Ok(AttentionModel { config })
    }

    pub fn config(&self) -> &AttnConfig {
        &self.config
    }

    fn check_input(&self, x: &[f64], params: &AttnParams) -> Result<()> {
        params.check(&self.config)?;
        if x.len() != self.config.context_len {
            return Err(Error::LengthMismatch {
                expected: self.config.context_len,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Prediction for one window.
    pub fn forward(&self, x: &[f64], params: &AttnParams) -> Result<f64> {
        self.check_input(x, params)?;
        let cfg = &self.config;
        let (n, d, f) = (x.len(), cfg.d_model, cfg.d_ff);
        let mut h = embed(x, cfg, params);
        let mixed = attention_mix(&h, n, cfg, params);
        for (a, b) in h.iter_mut().zip(&mixed) {
            *a += b;
        }
        layer_norm_raw(&mut h, d, params.seg(NORM1_G), params.seg(NORM1_B));
        let mut hidden = matmul_raw(&h, params.seg(FFN_W1), n, d, f);
        add_row_raw(&mut hidden, params.seg(FFN_B1));
        hidden.iter_mut().for_each(|v| *v = v.max(0.0));
        let mut ff = matmul_raw(&hidden, params.seg(FFN_W2), n, f, d);
        add_row_raw(&mut ff, params.seg(FFN_B2));
        for (a, b) in h.iter_mut().zip(&ff) {
            *a += b;
        }
        layer_norm_raw(&mut h, d, params.seg(NORM2_G), params.seg(NORM2_B));
        let last = &h[(n - 1) * d..];
        let y = last
            .iter()
            .zip(params.seg(READ_W))
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + params.seg(READ_B)[0];
        if !y.is_finite() {
            return Err(Error::NonFinite { op: "attention forward" });
        }
        Ok(y)
    }

    /// Per-head attention probabilities for one window.
    pub fn attention_weights(&self, x: &[f64], params: &AttnParams) -> Result<Vec<Vec<f64>>> {
        self.check_input(x, params)?;
        let cfg = &self.config;
        let e = embed(x, cfg, params);
        let mut qkv = matmul_raw(&e, params.seg(QKV_W), x.len(), cfg.d_model, 3 * cfg.d_model);
        add_row_raw(&mut qkv, params.seg(QKV_B));
        Ok(head_weights(&qkv, x.len(), cfg))
    }
}

/// Parameter leaves registered on a tape, one per segment.
#[derive(Debug, Clone)]
pub struct AttnGraph<'m> {
    model: &'m AttentionModel,
    pub vars: Vec<Var>,
}

impl<'m> AttnGraph<'m> {
    pub fn new(model: &'m AttentionModel, tape: &mut Tape, params: &AttnParams) -> Result<Self> {
        params.check(model.config())?;
        let vars = params
            .segments
            .iter()
            .map(|s| tape.param(&s.data, s.shape()))
            .collect::<Result<_>>()?;
        Ok(AttnGraph { model, vars })
    }

    /// Records one window and returns its `1 x 1` prediction node.
    pub fn predict(&self, tape: &mut Tape, x: &[f64]) -> Result<Var> {
        let cfg = self.model.config();
        if x.len() != cfg.context_len {
            return Err(Error::LengthMismatch {
                expected: cfg.context_len,
                got: x.len(),
            });
        }
        let p = &self.vars;
        let (d, dk) = (cfg.d_model, cfg.head_dim());
        let n = x.len();
        let input = tape.constant(x, Shape::new(n, 1))?;
        let e = tape.matmul(input, p[EMBED_W])?;
        let e = tape.add_row(e, p[EMBED_B])?;
        let qkv = tape.matmul(e, p[QKV_W])?;
        let qkv = tape.add_row(qkv, p[QKV_B])?;
        let scale = 1.0 / math::sqrt(dk as f64);
        let mut heads = Vec::with_capacity(cfg.heads);
        for h in 0..cfg.heads {
            let q = tape.slice_cols(qkv, h * dk, (h + 1) * dk)?;
            let k = tape.slice_cols(qkv, d + h * dk, d + (h + 1) * dk)?;
            let v = tape.slice_cols(qkv, 2 * d + h * dk, 2 * d + (h + 1) * dk)?;
            let kt = tape.transpose(k)?;
            let logits = tape.matmul(q, kt)?;
            let logits = tape.scale(logits, scale)?;
            let w = tape.softmax_rows(logits)?;
            heads.push(tape.matmul(w, v)?);
        }
        let cat = tape.concat_cols(&heads)?;
        let mixed = tape.matmul(cat, p[OUT_W])?;
        let mixed = tape.add_row(mixed, p[OUT_B])?;
        let h1 = tape.add(e, mixed)?;
        let h1 = self.norm(tape, h1, NORM1_G, NORM1_B)?;
        let hidden = tape.matmul(h1, p[FFN_W1])?;
        let hidden = tape.add_row(hidden, p[FFN_B1])?;
        let hidden = tape.relu(hidden)?;
        let ff = tape.matmul(hidden, p[FFN_W2])?;
        let ff = tape.add_row(ff, p[FFN_B2])?;
        let h2 = tape.add(h1, ff)?;
        let h2 = self.norm(tape, h2, NORM2_G, NORM2_B)?;
        let last = tape.row(h2, n - 1)?;
        let y = tape.matmul(last, p[READ_W])?;
        tape.add_row(y, p[READ_B])
    }

    fn norm(&self, tape: &mut Tape, x: Var, gamma: usize, beta: usize) -> Result<Var> {
        let y = tape.layer_norm_rows(x, LAYER_NORM_EPS)?;
        let y = tape.mul_row(y, self.vars[gamma])?;
        tape.add_row(y, self.vars[beta])
    }

    /// Records every window and stacks the predictions into a vector.
    pub fn predict_batch<'a, I>(&self, tape: &mut Tape, windows: I) -> Result<Var>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let preds = windows
            .into_iter()
            .map(|x| self.predict(tape, x))
            .collect::<Result<Vec<_>>>()?;
        tape.stack(&preds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::gradcheck::{central_difference, max_relative_errors};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(n: usize, seed: u64) -> (AttentionModel, AttnParams, Vec<f64>) {
        let cfg = AttnConfig::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = AttnParams::init(&cfg, &mut rng);
        let x = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        (AttentionModel::new(cfg).unwrap(), params, x)
    }

    #[test]
    fn parameter_count_is_3329_for_any_context() {
        for n in [1, 8, 32, 512] {
            assert_eq!(count_params(&AttnConfig::new(n)), 3329);
        }
        let (_, p, _) = setup(8, 0);
        assert_eq!(p.len(), 3329);
        let cfg = AttnConfig::new(32);
        let d = 16;
        assert_eq!(
            count_params(&cfg),
            (d + d) + (3 * d * d + 3 * d) + (d * d + d) + 4 * d + (2 * d * 64 + 64 + d) + (d + 1)
        );
    }

    #[test]
    fn only_ffn_width_64_reaches_3329() {
        let hits: Vec<usize> = [16, 32, 64, 128]
            .into_iter()
            .filter(|&f| count_params(&AttnConfig { d_ff: f, ..AttnConfig::new(32) }) == 3329)
            .collect();
        assert_eq!(hits, vec![64]);
    }

    #[test]
    fn weight_scaling_orders() {
        let cfg = AttnConfig::new(32);
        assert_eq!(mixing_weight_count(&cfg), 1024);
        assert_eq!(ffn_weight_count(&cfg), 8 * 16 * 16);
    }

    #[test]
    fn invalid_head_split() {
        let cfg = AttnConfig { heads: 3, ..AttnConfig::new(8) };
        assert!(matches!(AttentionModel::new(cfg), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn attention_rows_are_distributions() {
        let (model, params, x) = setup(12, 1);
        for w in model.attention_weights(&x, &params).unwrap() {
            for row in w.chunks(12) {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn zero_queries_and_keys_attend_uniformly() {
        let (model, mut params, x) = setup(10, 2);
        let d = 16;
        for r in 0..d {
            params.segments[QKV_W].data[r * 3 * d..r * 3 * d + 2 * d].fill(0.0);
        }
        params.segments[QKV_B].data[..2 * d].fill(0.0);
        for w in model.attention_weights(&x, &params).unwrap() {
            assert!(w.iter().all(|&v| (v - 0.1).abs() < 1e-15));
        }
    }

    #[test]
    fn tape_forward_matches_direct_forward() {
        let (model, params, _) = setup(9, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..5 {
            let x: Vec<f64> = (0..9).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut tape = Tape::new();
            let g = AttnGraph::new(&model, &mut tape, &params).unwrap();
            let y = g.predict(&mut tape, &x).unwrap();
            let direct = model.forward(&x, &params).unwrap();
            assert!((tape.scalar(y) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn permuting_tokens_changes_the_output() {
        let (model, params, x) = setup(8, 4);
        let mut y = x.clone();
        y.swap(0, 7);
        let a = model.forward(&x, &params).unwrap();
        let b = model.forward(&y, &params).unwrap();
        assert!((a - b).abs() > 1e-6);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (model, params, _) = setup(8, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let windows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..8).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let targets: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let loss_of = |groups: &[Vec<f64>]| {
            let p = AttnParams::from_groups(model.config(), groups).unwrap();
            let preds: Vec<f64> = windows.iter().map(|w| model.forward(w, &p).unwrap()).collect();
            preds.iter().zip(&targets).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 3.0
        };
        let mut tape = Tape::new();
        let g = AttnGraph::new(&model, &mut tape, &params).unwrap();
        let preds = g.predict_batch(&mut tape, windows.iter().map(Vec::as_slice)).unwrap();
        let loss = tape.mse(preds, &targets).unwrap();
        assert!((tape.scalar(loss) - loss_of(&params.groups())).abs() < 1e-12);
        let grad = tape.backward(loss).unwrap();
        let numeric = central_difference(loss_of, &params.groups(), 1e-5);
        let worst = max_relative_errors(&grad, &numeric)
            .into_iter()
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn mismatched_segments_are_rejected() {
        let (model, mut params, x) = setup(8, 6);
        params.segments[OUT_B].data.pop();
        assert!(model.forward(&x, &params).is_err());
        assert!(model.forward(&x[..7], &setup(8, 6).1).is_err());
    }
}
