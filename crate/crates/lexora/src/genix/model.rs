//! Encoder–decoder transformer over characters, written out by hand in
//! f64 so every gradient can be verified numerically.
//!
//! Layout conventions: activations are `[seq, d_model]`, weights are
//! `[out, in]`, layers are pre-norm with a parameter-free RMS norm and a
//! final norm after the last layer of each stack. Positions enter through
//! rotary rotations of the query and key vectors inside every attention
//! block (cross-attention included, so alignment between source and
//! target positions is directly visible to the score function); the
//! embeddings themselves carry no position signal. Task conditioning is a
//! block of learned soft-prompt rows prepended to the encoder input;
//! everything else is shared across tasks.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{
    gelu, gelu_grad, matmul_nn, matmul_nt, matmul_tn, rmsnorm, rmsnorm_backward, softmax_backward,
    softmax_rows, softmax_slice, Tensor,
};
use super::vocab::{Vocab, BOS, EOS};
use crate::taskschema::{builtin_task, Task};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hyper {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_enc_layers: usize,
    pub n_dec_layers: usize,
    pub d_ff: usize,
    /// Soft-prompt rows prepended to the encoder input per task.
    pub n_prompt: usize,
    pub max_src: usize,
    pub max_tgt: usize,
    pub vocab_size: usize,
}

impl Hyper {
    /// The configuration used by the command-line tools.
    pub fn toy() -> Hyper {
        Hyper {
            d_model: 64,
            n_heads: 4,
            n_enc_layers: 2,
            n_dec_layers: 2,
            d_ff: 128,
            n_prompt: 20,
            max_src: 512,
            max_tgt: 128,
            vocab_size: Vocab::new().size(),
        }
    }

    /// A miniature configuration for numeric gradient checks.
    pub fn tiny() -> Hyper {
        Hyper {
            d_model: 8,
            n_heads: 2,
            n_enc_layers: 1,
            n_dec_layers: 1,
            d_ff: 16,
            n_prompt: 2,
            max_src: 64,
            max_tgt: 32,
            vocab_size: Vocab::new().size(),
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(format!("d_model {} must be a positive multiple of n_heads {}", self.d_model, self.n_heads));
        }
        if self.vocab_size != Vocab::new().size() {
            return Err(format!("vocab size {} does not match the built-in vocabulary", self.vocab_size));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttnWeights {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
}

impl AttnWeights {
    fn zeros(d: usize) -> AttnWeights {
        AttnWeights {
            wq: Tensor::zeros(d, d),
            wk: Tensor::zeros(d, d),
            wv: Tensor::zeros(d, d),
            wo: Tensor::zeros(d, d),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeedForward {
    pub w1: Tensor, // [d_ff, d]
    pub w2: Tensor, // [d, d_ff]
}

impl FeedForward {
    fn zeros(d: usize, d_ff: usize) -> FeedForward {
        FeedForward { w1: Tensor::zeros(d_ff, d), w2: Tensor::zeros(d, d_ff) }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EncLayer {
    pub attn: AttnWeights,
    pub ff: FeedForward,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecLayer {
    pub self_attn: AttnWeights,
    pub cross_attn: AttnWeights,
    pub ff: FeedForward,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BaseParams {
    pub embed: Tensor,    // [vocab, d]
    pub out_proj: Tensor, // [vocab, d]; logits = h · out_projᵀ (untied)
    pub enc: Vec<EncLayer>,
    pub dec: Vec<DecLayer>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelParams {
    pub hyper: Hyper,
    pub base: BaseParams,
    pub prompts: BTreeMap<Task, Tensor>, // each [n_prompt, d]
}

impl ModelParams {
    /// Build and initialize a model. Weights draw Glorot-uniform values
    /// in a fixed tensor order from a seeded stream; the prompt rows are
    /// then overwritten with embedding rows of the task's prompt text
    /// (cycled to length), so prompts start inside the embedding
    /// distribution.
    pub fn new(hyper: Hyper, seed: u64) -> ModelParams {
        hyper.validate().expect("valid hyperparameters");
        let d = hyper.d_model;
        let base = BaseParams {
            embed: Tensor::zeros(hyper.vocab_size, d),
            out_proj: Tensor::zeros(hyper.vocab_size, d),
            enc: (0..hyper.n_enc_layers)
                .map(|_| EncLayer { attn: AttnWeights::zeros(d), ff: FeedForward::zeros(d, hyper.d_ff) })
                .collect(),
            dec: (0..hyper.n_dec_layers)
                .map(|_| DecLayer {
                    self_attn: AttnWeights::zeros(d),
                    cross_attn: AttnWeights::zeros(d),
                    ff: FeedForward::zeros(d, hyper.d_ff),
                })
                .collect(),
        };
        let prompts = Task::ALL
            .iter()
            .map(|&t| (t, Tensor::zeros(hyper.n_prompt, d)))
            .collect();
        let mut params = ModelParams { hyper, base, prompts };

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (_, t) in params.tensors_mut() {
            let limit = (6.0 / (t.rows + t.cols) as f64).sqrt();
            for v in t.data.iter_mut() {
                *v = rng.gen_range(-limit..limit);
            }
        }

        let vocab = Vocab::new();
        for &task in Task::ALL.iter() {
            let text = &builtin_task(task).prompt_text;
            let ids = vocab.encode(text).expect("built-in prompt text is ASCII");
            let rows: Vec<Vec<f64>> = ids
                .iter()
                .cycle()
                .take(params.hyper.n_prompt)
                .map(|&id| params.base.embed.row(id as usize).to_vec())
                .collect();
            let prompt = params.prompts.get_mut(&task).unwrap();
            for (i, row) in rows.into_iter().enumerate() {
                prompt.row_mut(i).copy_from_slice(&row);
            }
        }
        params
    }

    /// Same shapes, all zeros. Used for gradients and optimizer state.
    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill_zero();
        }
        z
    }

    /// All tensors in their fixed canonical order: embeddings, output
    /// projection, encoder layers, decoder layers, then per-task prompts.
    pub fn tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = vec![
            ("embed".into(), &self.base.embed),
            ("out_proj".into(), &self.base.out_proj),
        ];
        for (i, l) in self.base.enc.iter().enumerate() {
            out.push((format!("enc{i}.attn.wq"), &l.attn.wq));
            out.push((format!("enc{i}.attn.wk"), &l.attn.wk));
            out.push((format!("enc{i}.attn.wv"), &l.attn.wv));
            out.push((format!("enc{i}.attn.wo"), &l.attn.wo));
            out.push((format!("enc{i}.ff.w1"), &l.ff.w1));
            out.push((format!("enc{i}.ff.w2"), &l.ff.w2));
        }
        for (i, l) in self.base.dec.iter().enumerate() {
            out.push((format!("dec{i}.self.wq"), &l.self_attn.wq));
            out.push((format!("dec{i}.self.wk"), &l.self_attn.wk));
            out.push((format!("dec{i}.self.wv"), &l.self_attn.wv));
            out.push((format!("dec{i}.self.wo"), &l.self_attn.wo));
            out.push((format!("dec{i}.cross.wq"), &l.cross_attn.wq));
            out.push((format!("dec{i}.cross.wk"), &l.cross_attn.wk));
            out.push((format!("dec{i}.cross.wv"), &l.cross_attn.wv));
            out.push((format!("dec{i}.cross.wo"), &l.cross_attn.wo));
            out.push((format!("dec{i}.ff.w1"), &l.ff.w1));
            out.push((format!("dec{i}.ff.w2"), &l.ff.w2));
        }
        for (task, t) in &self.prompts {
            out.push((format!("prompt.{task}"), t));
        }
        out
    }

    /// Mutable view in the same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = vec![
            ("embed".into(), &mut self.base.embed),
            ("out_proj".into(), &mut self.base.out_proj),
        ];
        for (i, l) in self.base.enc.iter_mut().enumerate() {
            out.push((format!("enc{i}.attn.wq"), &mut l.attn.wq));
            out.push((format!("enc{i}.attn.wk"), &mut l.attn.wk));
            out.push((format!("enc{i}.attn.wv"), &mut l.attn.wv));
            out.push((format!("enc{i}.attn.wo"), &mut l.attn.wo));
            out.push((format!("enc{i}.ff.w1"), &mut l.ff.w1));
            out.push((format!("enc{i}.ff.w2"), &mut l.ff.w2));
        }
        for (i, l) in self.base.dec.iter_mut().enumerate() {
            out.push((format!("dec{i}.self.wq"), &mut l.self_attn.wq));
            out.push((format!("dec{i}.self.wk"), &mut l.self_attn.wk));
            out.push((format!("dec{i}.self.wv"), &mut l.self_attn.wv));
            out.push((format!("dec{i}.self.wo"), &mut l.self_attn.wo));
            out.push((format!("dec{i}.cross.wq"), &mut l.cross_attn.wq));
            out.push((format!("dec{i}.cross.wk"), &mut l.cross_attn.wk));
            out.push((format!("dec{i}.cross.wv"), &mut l.cross_attn.wv));
            out.push((format!("dec{i}.cross.wo"), &mut l.cross_attn.wo));
            out.push((format!("dec{i}.ff.w1"), &mut l.ff.w1));
            out.push((format!("dec{i}.ff.w2"), &mut l.ff.w2));
        }
        for (task, t) in self.prompts.iter_mut() {
            out.push((format!("prompt.{task}"), t));
        }
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Byte-exact snapshot of everything except the prompts, for checking
    /// that prompt tuning leaves the shared weights untouched.
    pub fn base_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (name, t) in self.tensors() {
            if !name.starts_with("prompt.") {
                for v in &t.data {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }
}

fn add_inplace(dst: &mut Tensor, src: &Tensor) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, s) in dst.data.iter_mut().zip(&src.data) {
        *d += *s;
    }
}

fn add_row(dst: &mut Tensor, idx: usize, src: &[f64]) {
    for (d, s) in dst.row_mut(idx).iter_mut().zip(src) {
        *d += *s;
    }
}

const ROPE_BASE: f64 = 10000.0;

/// Rotate adjacent channel pairs of each head slice by an angle
/// proportional to the row's sequence position (row `i` sits at position
/// `first_pos + i`). Applied to queries and keys after their projections,
/// this makes every attention score a function of the query/key position
/// difference. The rotation is orthogonal, so the backward pass is the
/// same rotation with `inverse` set.
pub(crate) fn rope_rotate(x: &mut Tensor, dh: usize, first_pos: usize, inverse: bool) {
    let n_heads = x.cols / dh;
    for i in 0..x.rows {
        let pos = (first_pos + i) as f64;
        let row = x.row_mut(i);
        for h in 0..n_heads {
            let head = &mut row[h * dh..(h + 1) * dh];
            for p in 0..dh / 2 {
                let freq = ROPE_BASE.powf(-(2.0 * p as f64) / dh as f64);
                let mut angle = pos * freq;
                if inverse {
                    angle = -angle;
                }
                let (sin, cos) = angle.sin_cos();
                let a = head[2 * p];
                let b = head[2 * p + 1];
                head[2 * p] = a * cos - b * sin;
                head[2 * p + 1] = a * sin + b * cos;
            }
        }
    }
}

fn take_head(x: &Tensor, h: usize, dh: usize) -> Tensor {
    let mut out = Tensor::zeros(x.rows, dh);
    for i in 0..x.rows {
        out.row_mut(i).copy_from_slice(&x.row(i)[h * dh..(h + 1) * dh]);
    }
    out
}

fn put_head(src: &Tensor, h: usize, dh: usize, dst: &mut Tensor) {
    for i in 0..src.rows {
        dst.row_mut(i)[h * dh..(h + 1) * dh].copy_from_slice(src.row(i));
    }
}

pub(crate) struct AttnTrace {
    /// Queries and keys are stored position-rotated, as the score matmul
    /// consumed them.
    pub q: Tensor,
    pub k: Tensor,
    pub v: Tensor,
    pub probs: Vec<Tensor>,
    pub ctx: Tensor,
}

pub(crate) fn attn_forward(
    w: &AttnWeights,
    q_in: &Tensor,
    kv_in: &Tensor,
    n_heads: usize,
    causal: bool,
) -> (Tensor, AttnTrace) {
    let d = q_in.cols;
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut q = Tensor::zeros(q_in.rows, d);
    matmul_nt(q_in, &w.wq, &mut q);
    let mut k = Tensor::zeros(kv_in.rows, d);
    matmul_nt(kv_in, &w.wk, &mut k);
    let mut v = Tensor::zeros(kv_in.rows, d);
    matmul_nt(kv_in, &w.wv, &mut v);
    rope_rotate(&mut q, dh, 0, false);
    rope_rotate(&mut k, dh, 0, false);

    let mut ctx = Tensor::zeros(q_in.rows, d);
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let qh = take_head(&q, h, dh);
        let kh = take_head(&k, h, dh);
        let vh = take_head(&v, h, dh);
        let mut scores = Tensor::zeros(qh.rows, kh.rows);
        matmul_nt(&qh, &kh, &mut scores);
        for s in scores.data.iter_mut() {
            *s *= scale;
        }
        if causal {
            for i in 0..scores.rows {
                for s in &mut scores.row_mut(i)[i + 1..] {
                    *s = f64::NEG_INFINITY;
                }
            }
        }
        softmax_rows(&mut scores);
        let mut ctxh = Tensor::zeros(qh.rows, dh);
        matmul_nn(&scores, &vh, &mut ctxh);
        put_head(&ctxh, h, dh, &mut ctx);
        probs.push(scores);
    }
    let mut out = Tensor::zeros(q_in.rows, d);
    matmul_nt(&ctx, &w.wo, &mut out);
    (out, AttnTrace { q, k, v, probs, ctx })
}

/// Backward through one attention block. `dq_in` receives the gradient of
/// the query-side input; the key/value-side gradient goes to `dkv_in`, or
/// into `dq_in` as well when they are the same tensor (self-attention).
#[allow(clippy::too_many_arguments)]
fn attn_backward(
    w: &AttnWeights,
    gw: &mut AttnWeights,
    tr: &AttnTrace,
    q_in: &Tensor,
    kv_in: &Tensor,
    d_out: &Tensor,
    n_heads: usize,
    dq_in: &mut Tensor,
    dkv_in: Option<&mut Tensor>,
) {
    let d = q_in.cols;
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    matmul_tn(d_out, &tr.ctx, &mut gw.wo);
    let mut d_ctx = Tensor::zeros(q_in.rows, d);
    matmul_nn(d_out, &w.wo, &mut d_ctx);

    let mut dq = Tensor::zeros(q_in.rows, d);
    let mut dk = Tensor::zeros(kv_in.rows, d);
    let mut dv = Tensor::zeros(kv_in.rows, d);
    for h in 0..n_heads {
        let d_ctxh = take_head(&d_ctx, h, dh);
        let qh = take_head(&tr.q, h, dh);
        let kh = take_head(&tr.k, h, dh);
        let vh = take_head(&tr.v, h, dh);
        let p = &tr.probs[h];

        let mut dp = Tensor::zeros(q_in.rows, kv_in.rows);
        matmul_nt(&d_ctxh, &vh, &mut dp);
        let mut dvh = Tensor::zeros(kv_in.rows, dh);
        matmul_tn(p, &d_ctxh, &mut dvh);

        let mut ds = softmax_backward(p, &dp);
        for s in ds.data.iter_mut() {
            *s *= scale;
        }
        let mut dqh = Tensor::zeros(q_in.rows, dh);
        matmul_nn(&ds, &kh, &mut dqh);
        let mut dkh = Tensor::zeros(kv_in.rows, dh);
        matmul_tn(&ds, &qh, &mut dkh);

        put_head(&dqh, h, dh, &mut dq);
        put_head(&dkh, h, dh, &mut dk);
        put_head(&dvh, h, dh, &mut dv);
    }

    // dq/dk are gradients of the rotated projections; undo the rotation
    // (its transpose) before propagating into weights and inputs.
    rope_rotate(&mut dq, dh, 0, true);
    rope_rotate(&mut dk, dh, 0, true);

    matmul_tn(&dq, q_in, &mut gw.wq);
    matmul_tn(&dk, kv_in, &mut gw.wk);
    matmul_tn(&dv, kv_in, &mut gw.wv);
    matmul_nn(&dq, &w.wq, dq_in);
    match dkv_in {
        Some(buf) => {
            matmul_nn(&dk, &w.wk, buf);
            matmul_nn(&dv, &w.wv, buf);
        }
        None => {
            matmul_nn(&dk, &w.wk, dq_in);
            matmul_nn(&dv, &w.wv, dq_in);
        }
    }
}

pub(crate) struct Norm {
    pub y: Tensor,
    pub r: Vec<f64>,
}

fn norm(x: &Tensor) -> Norm {
    let (y, r) = rmsnorm(x);
    Norm { y, r }
}

struct FfTrace {
    pre: Tensor,
    act: Tensor,
}

fn ff_forward(ff: &FeedForward, x: &Tensor) -> (Tensor, FfTrace) {
    let mut pre = Tensor::zeros(x.rows, ff.w1.rows);
    matmul_nt(x, &ff.w1, &mut pre);
    let mut act = pre.clone();
    for v in act.data.iter_mut() {
        *v = gelu(*v);
    }
    let mut out = Tensor::zeros(x.rows, ff.w2.rows);
    matmul_nt(&act, &ff.w2, &mut out);
    (out, FfTrace { pre, act })
}

fn ff_backward(
    ff: &FeedForward,
    gff: &mut FeedForward,
    tr: &FfTrace,
    x_in: &Tensor,
    d_out: &Tensor,
    dx_in: &mut Tensor,
) {
    matmul_tn(d_out, &tr.act, &mut gff.w2);
    let mut d_act = Tensor::zeros(d_out.rows, ff.w1.rows);
    matmul_nn(d_out, &ff.w2, &mut d_act);
    for (da, &p) in d_act.data.iter_mut().zip(&tr.pre.data) {
        *da *= gelu_grad(p);
    }
    matmul_tn(&d_act, x_in, &mut gff.w1);
    matmul_nn(&d_act, &ff.w1, dx_in);
}

struct EncLayerTrace {
    x_in: Tensor,
    n1: Norm,
    attn: AttnTrace,
    a: Tensor,
    n2: Norm,
    ff: FfTrace,
}

pub(crate) struct EncForward {
    layers: Vec<EncLayerTrace>,
    x_last: Tensor,
    pub fin: Norm,
}

fn encoder_input(params: &ModelParams, task: Option<Task>, src: &[u32]) -> Tensor {
    let h = &params.hyper;
    assert!(src.len() <= h.max_src, "source length {} exceeds max {}", src.len(), h.max_src);
    let p = if task.is_some() { h.n_prompt } else { 0 };
    let mut x = Tensor::zeros(p + src.len(), h.d_model);
    if let Some(t) = task {
        let prompt = &params.prompts[&t];
        for i in 0..p {
            x.row_mut(i).copy_from_slice(prompt.row(i));
        }
    }
    for (i, &id) in src.iter().enumerate() {
        x.row_mut(p + i).copy_from_slice(params.base.embed.row(id as usize));
    }
    x
}

pub(crate) fn encoder_forward(params: &ModelParams, task: Option<Task>, src: &[u32]) -> EncForward {
    let heads = params.hyper.n_heads;
    let mut x = encoder_input(params, task, src);
    let mut layers = Vec::with_capacity(params.base.enc.len());
    for lw in &params.base.enc {
        let n1 = norm(&x);
        let (attn_out, attn) = attn_forward(&lw.attn, &n1.y, &n1.y, heads, false);
        let mut a = x.clone();
        add_inplace(&mut a, &attn_out);
        let n2 = norm(&a);
        let (ff_out, ff) = ff_forward(&lw.ff, &n2.y);
        let mut x_out = a.clone();
        add_inplace(&mut x_out, &ff_out);
        layers.push(EncLayerTrace { x_in: x, n1, attn, a, n2, ff });
        x = x_out;
    }
    let fin = norm(&x);
    EncForward { layers, x_last: x, fin }
}

struct DecLayerTrace {
    x_in: Tensor,
    n1: Norm,
    self_attn: AttnTrace,
    a: Tensor,
    n2: Norm,
    cross: AttnTrace,
    b: Tensor,
    n3: Norm,
    ff: FfTrace,
}

pub(crate) struct DecForward {
    layers: Vec<DecLayerTrace>,
    x_last: Tensor,
    pub fin: Norm,
}

pub(crate) fn decoder_forward(params: &ModelParams, enc_out: &Tensor, dec_in: &[u32]) -> DecForward {
    let h = &params.hyper;
    assert!(dec_in.len() <= h.max_tgt, "target length {} exceeds max {}", dec_in.len(), h.max_tgt);
    let heads = h.n_heads;
    let mut x = Tensor::zeros(dec_in.len(), h.d_model);
    for (i, &id) in dec_in.iter().enumerate() {
        x.row_mut(i).copy_from_slice(params.base.embed.row(id as usize));
    }

    let mut layers = Vec::with_capacity(params.base.dec.len());
    for lw in &params.base.dec {
        let n1 = norm(&x);
        let (self_out, self_attn) = attn_forward(&lw.self_attn, &n1.y, &n1.y, heads, true);
        let mut a = x.clone();
        add_inplace(&mut a, &self_out);
        let n2 = norm(&a);
        let (cross_out, cross) = attn_forward(&lw.cross_attn, &n2.y, enc_out, heads, false);
        let mut b = a.clone();
        add_inplace(&mut b, &cross_out);
        let n3 = norm(&b);
        let (ff_out, ff) = ff_forward(&lw.ff, &n3.y);
        let mut x_out = b.clone();
        add_inplace(&mut x_out, &ff_out);
        layers.push(DecLayerTrace { x_in: x, n1, self_attn, a, n2, cross, b, n3, ff });
        x = x_out;
    }
    let fin = norm(&x);
    DecForward { layers, x_last: x, fin }
}

fn output_logits(params: &ModelParams, h: &Tensor) -> Tensor {
    let mut lg = Tensor::zeros(h.rows, params.hyper.vocab_size);
    matmul_nt(h, &params.base.out_proj, &mut lg);
    lg
}

fn teacher_io(tgt: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let mut dec_in = Vec::with_capacity(tgt.len() + 1);
    dec_in.push(BOS);
    dec_in.extend_from_slice(tgt);
    let labels: Vec<u32> = tgt.iter().copied().chain([EOS]).collect();
    (dec_in, labels)
}

/// Teacher-forced mean cross-entropy of `tgt` given `src`, in nats per
/// token (the EOS step included).
pub fn sequence_loss(params: &ModelParams, task: Option<Task>, src: &[u32], tgt: &[u32]) -> f64 {
    let enc = encoder_forward(params, task, src);
    let (dec_in, labels) = teacher_io(tgt);
    let dec = decoder_forward(params, &enc.fin.y, &dec_in);
    let mut lg = output_logits(params, &dec.fin.y);
    let mut loss = 0.0;
    for (i, &lab) in labels.iter().enumerate() {
        let row = lg.row_mut(i);
        softmax_slice(row);
        loss -= row[lab as usize].max(1e-300).ln();
    }
    loss / labels.len() as f64
}

/// One forward/backward pass. Gradients (of the mean-per-token loss) are
/// accumulated into `grads`, which must share the model's shapes; the
/// return value is the loss.
pub fn train_step(
    params: &ModelParams,
    task: Option<Task>,
    src: &[u32],
    tgt: &[u32],
    grads: &mut ModelParams,
) -> f64 {
    let heads = params.hyper.n_heads;
    let d = params.hyper.d_model;

    let enc = encoder_forward(params, task, src);
    let (dec_in, labels) = teacher_io(tgt);
    let dec = decoder_forward(params, &enc.fin.y, &dec_in);
    let mut lg = output_logits(params, &dec.fin.y);

    // Cross-entropy: convert the logits tensor into dloss/dlogits in
    // place (softmax minus one-hot, scaled by 1/T).
    let t_n = labels.len() as f64;
    let mut loss = 0.0;
    for (i, &lab) in labels.iter().enumerate() {
        let row = lg.row_mut(i);
        softmax_slice(row);
        loss -= row[lab as usize].max(1e-300).ln();
        row[lab as usize] -= 1.0;
        for v in row.iter_mut() {
            *v /= t_n;
        }
    }
    loss /= t_n;

    // Output projection and final decoder norm.
    matmul_tn(&lg, &dec.fin.y, &mut grads.base.out_proj);
    let mut dh = Tensor::zeros(dec.fin.y.rows, d);
    matmul_nn(&lg, &params.base.out_proj, &mut dh);
    let mut dx = Tensor::zeros(dec.x_last.rows, d);
    rmsnorm_backward(&dec.x_last, &dec.fin.r, &dh, &mut dx);

    // Decoder layers, reversed. Cross-attention key/value gradients all
    // land in the encoder output.
    let mut d_enc_out = Tensor::zeros(enc.fin.y.rows, d);
    for (li, ltr) in dec.layers.iter().enumerate().rev() {
        let lw = &params.base.dec[li];
        let gw = &mut grads.base.dec[li];

        let d_xout = dx;
        let mut dn3 = Tensor::zeros(ltr.n3.y.rows, d);
        ff_backward(&lw.ff, &mut gw.ff, &ltr.ff, &ltr.n3.y, &d_xout, &mut dn3);
        let mut db = d_xout.clone();
        rmsnorm_backward(&ltr.b, &ltr.n3.r, &dn3, &mut db);

        let mut dn2 = Tensor::zeros(ltr.n2.y.rows, d);
        attn_backward(
            &lw.cross_attn,
            &mut gw.cross_attn,
            &ltr.cross,
            &ltr.n2.y,
            &enc.fin.y,
            &db,
            heads,
            &mut dn2,
            Some(&mut d_enc_out),
        );
        let mut da = db.clone();
        rmsnorm_backward(&ltr.a, &ltr.n2.r, &dn2, &mut da);

        let mut dn1 = Tensor::zeros(ltr.n1.y.rows, d);
        attn_backward(
            &lw.self_attn,
            &mut gw.self_attn,
            &ltr.self_attn,
            &ltr.n1.y,
            &ltr.n1.y,
            &da,
            heads,
            &mut dn1,
            None,
        );
        let mut dx_in = da.clone();
        rmsnorm_backward(&ltr.x_in, &ltr.n1.r, &dn1, &mut dx_in);
        dx = dx_in;
    }
    for (i, &id) in dec_in.iter().enumerate() {
        add_row(&mut grads.base.embed, id as usize, dx.row(i));
    }

    // Encoder, reversed, fed by the accumulated cross-attention gradient.
    let mut dxe = Tensor::zeros(enc.x_last.rows, d);
    rmsnorm_backward(&enc.x_last, &enc.fin.r, &d_enc_out, &mut dxe);
    for (li, ltr) in enc.layers.iter().enumerate().rev() {
        let lw = &params.base.enc[li];
        let gw = &mut grads.base.enc[li];

        let d_xout = dxe;
        let mut dn2 = Tensor::zeros(ltr.n2.y.rows, d);
        ff_backward(&lw.ff, &mut gw.ff, &ltr.ff, &ltr.n2.y, &d_xout, &mut dn2);
        let mut da = d_xout.clone();
        rmsnorm_backward(&ltr.a, &ltr.n2.r, &dn2, &mut da);

        let mut dn1 = Tensor::zeros(ltr.n1.y.rows, d);
        attn_backward(&lw.attn, &mut gw.attn, &ltr.attn, &ltr.n1.y, &ltr.n1.y, &da, heads, &mut dn1, None);
        let mut dx_in = da.clone();
        rmsnorm_backward(&ltr.x_in, &ltr.n1.r, &dn1, &mut dx_in);
        dxe = dx_in;
    }

    // Route the encoder input gradient into prompt rows and embeddings.
    let p = if task.is_some() { params.hyper.n_prompt } else { 0 };
    if let Some(t) = task {
        let gp = grads.prompts.get_mut(&t).unwrap();
        for i in 0..p {
            add_row(gp, i, dxe.row(i));
        }
    }
    for (i, &id) in src.iter().enumerate() {
        add_row(&mut grads.base.embed, id as usize, dxe.row(p + i));
    }

    loss
}
