//! Greedy decoding with per-layer key/value caches, plus the glue that
//! turns a document into a model extraction.

use serde::Serialize;

use super::linalg::{matmul_nt, rmsnorm, softmax_slice, Tensor};
use super::model::{encoder_forward, rope_rotate, ModelParams};
use super::vocab::{Vocab, BOS, EOS};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::extraction::{Extraction, Provenance};
use crate::taskschema::{delinearize, Task, TaskSpec};

#[derive(Clone, Debug, Serialize)]
pub struct GenOutput {
    /// Generated content tokens (specials excluded).
    pub ids: Vec<u32>,
    pub text: String,
    /// Softmax probability of each emitted token, the final EOS included
    /// when the model chose to stop on its own.
    pub token_probs: Vec<f64>,
    /// Arithmetic mean of `token_probs`.
    pub confidence: f64,
}

struct LayerCache {
    k_self: Tensor,
    v_self: Tensor,
    k_cross: Tensor,
    v_cross: Tensor,
}

fn project_row(x: &Tensor, w: &Tensor) -> Tensor {
    let mut y = Tensor::zeros(x.rows, w.rows);
    matmul_nt(x, w, &mut y);
    y
}

fn norm_row(x: &Tensor) -> Tensor {
    rmsnorm(x).0
}

/// Single-query attention over cached keys/values.
fn attend_row(q: &Tensor, ks: &Tensor, vs: &Tensor, n_heads: usize) -> Tensor {
    let d = q.cols;
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut ctx = Tensor::zeros(1, d);
    for h in 0..n_heads {
        let qh = &q.row(0)[h * dh..(h + 1) * dh];
        let mut scores: Vec<f64> = (0..ks.rows)
            .map(|j| {
                let kh = &ks.row(j)[h * dh..(h + 1) * dh];
                qh.iter().zip(kh).map(|(a, b)| a * b).sum::<f64>() * scale
            })
            .collect();
        softmax_slice(&mut scores);
        let out = &mut ctx.row_mut(0)[h * dh..(h + 1) * dh];
        for (j, &pj) in scores.iter().enumerate() {
            let vh = &vs.row(j)[h * dh..(h + 1) * dh];
            for (o, &vv) in out.iter_mut().zip(vh) {
                *o += pj * vv;
            }
        }
    }
    ctx
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Greedy generation. Matches the teacher-forced forward pass token for
/// token; stops at EOS or when the target-length budget is spent.
pub fn generate(params: &ModelParams, task: Option<Task>, src: &[u32]) -> GenOutput {
    let h = &params.hyper;
    let heads = h.n_heads;
    let enc = encoder_forward(params, task, src);
    let enc_out = &enc.fin.y;

    let dh = h.head_dim();
    let mut caches: Vec<LayerCache> = params
        .base
        .dec
        .iter()
        .map(|lw| {
            let mut k_cross = project_row(enc_out, &lw.cross_attn.wk);
            rope_rotate(&mut k_cross, dh, 0, false);
            LayerCache {
                k_self: Tensor::zeros(0, h.d_model),
                v_self: Tensor::zeros(0, h.d_model),
                k_cross,
                v_cross: project_row(enc_out, &lw.cross_attn.wv),
            }
        })
        .collect();

    let mut ids = Vec::new();
    let mut token_probs = Vec::new();
    let mut prev = BOS;
    for t in 0..h.max_tgt {
        let mut x = Tensor::zeros(1, h.d_model);
        x.row_mut(0).copy_from_slice(params.base.embed.row(prev as usize));

        for (lw, cache) in params.base.dec.iter().zip(caches.iter_mut()) {
            let n1 = norm_row(&x);
            let mut q = project_row(&n1, &lw.self_attn.wq);
            rope_rotate(&mut q, dh, t, false);
            let mut k_new = project_row(&n1, &lw.self_attn.wk);
            rope_rotate(&mut k_new, dh, t, false);
            cache.k_self.push_row(k_new.row(0));
            cache.v_self.push_row(project_row(&n1, &lw.self_attn.wv).row(0));
            let ctx = attend_row(&q, &cache.k_self, &cache.v_self, heads);
            let self_out = project_row(&ctx, &lw.self_attn.wo);
            let mut a = x.clone();
            for (av, sv) in a.data.iter_mut().zip(&self_out.data) {
                *av += *sv;
            }

            let n2 = norm_row(&a);
            let mut q2 = project_row(&n2, &lw.cross_attn.wq);
            rope_rotate(&mut q2, dh, t, false);
            let ctx2 = attend_row(&q2, &cache.k_cross, &cache.v_cross, heads);
            let cross_out = project_row(&ctx2, &lw.cross_attn.wo);
            let mut b = a;
            for (bv, cv) in b.data.iter_mut().zip(&cross_out.data) {
                *bv += *cv;
            }

            let n3 = norm_row(&b);
            let pre = project_row(&n3, &lw.ff.w1);
            let mut act = pre;
            for v in act.data.iter_mut() {
                *v = super::linalg::gelu(*v);
            }
            let ff_out = project_row(&act, &lw.ff.w2);
            x = b;
            for (xv, fv) in x.data.iter_mut().zip(&ff_out.data) {
                *xv += *fv;
            }
        }

        let hrow = norm_row(&x);
        let mut logits = project_row(&hrow, &params.base.out_proj);
        softmax_slice(logits.row_mut(0));
        let chosen = argmax(logits.row(0)) as u32;
        token_probs.push(logits.row(0)[chosen as usize]);
        if chosen == EOS {
            break;
        }
        ids.push(chosen);
        prev = chosen;
        if ids.len() == h.max_tgt - 1 {
            break;
        }
    }

    let confidence = if token_probs.is_empty() {
        0.0
    } else {
        token_probs.iter().sum::<f64>() / token_probs.len() as f64
    };
    GenOutput { text: Vocab::new().decode(&ids), ids, token_probs, confidence }
}

/// Run the model on one document and parse the generation back into
/// fields. Parse failures are recorded on the extraction, never raised.
pub fn extract_with_model(params: &ModelParams, spec: &TaskSpec, doc: &Document) -> Result<Extraction> {
    if !spec.task.applies_to(doc.category) {
        return Err(Error::TaskMismatch {
            task: spec.task.to_string(),
            category: doc.category.to_string(),
        });
    }
    let mut src = Vocab::new().encode(doc.source_for(spec.task))?;
    src.truncate(params.hyper.max_src);
    let gen = generate(params, Some(spec.task), &src);
    let parsed = delinearize(spec, &gen.text);
    Ok(Extraction {
        id: doc.id.clone(),
        task: spec.task,
        fields: parsed.fields,
        confidence: gen.confidence,
        provenance: Provenance::Model,
        malformed: parsed.malformed,
    })
}
