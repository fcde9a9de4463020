//! Optimization: Adam over the full model or selected parameter groups,
//! supervised training with equal-task sampling and early stopping, and
//! span-corruption pretraining of the shared weights.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decode::extract_with_model;
use super::model::{sequence_loss, train_step, Hyper, ModelParams};
use super::vocab::{Vocab, N_SENTINELS};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::evalkit::match_fields;
use crate::taskschema::{builtin_task, linearize, Task};

/// Which parameters an optimization step may move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    /// Everything: embeddings, both stacks, and the prompts.
    Full,
    /// Only the soft-prompt rows; the shared weights stay frozen.
    PromptOnly,
    /// Everything except the prompts (pretraining).
    BaseOnly,
}

impl TuneMode {
    fn updates(self, tensor_name: &str) -> bool {
        match self {
            TuneMode::Full => true,
            TuneMode::PromptOnly => tensor_name.starts_with("prompt."),
            TuneMode::BaseOnly => !tensor_name.starts_with("prompt."),
        }
    }
}

/// Learning rate that works for the mode: frozen-base prompt tuning
/// tolerates (and needs) much larger steps than full updates.
pub fn default_lr(mode: TuneMode) -> f64 {
    match mode {
        TuneMode::PromptOnly => 1.0,
        TuneMode::Full | TuneMode::BaseOnly => 1e-4,
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Optimizer steps over which the learning rate ramps linearly from zero
/// when the backbone is being updated. Adam's second-moment estimates are
/// cold at the start of a run, and the resulting oversized early steps
/// destabilize training at the rates the small-corpus regime needs; a
/// short ramp removes that failure mode. Prompt-only tuning skips the
/// ramp: with the backbone frozen it is stable even at its much larger
/// default rate.
const WARMUP_STEPS: f64 = 200.0;

fn warmed_lr(lr: f64, step: u64, mode: TuneMode) -> f64 {
    match mode {
        TuneMode::PromptOnly => lr,
        TuneMode::Full | TuneMode::BaseOnly => {
            lr * ((step as f64 + 1.0) / WARMUP_STEPS).min(1.0)
        }
    }
}

/// Adam with bias correction. Moment buffers mirror the model layout.
pub struct Adam {
    m: ModelParams,
    v: ModelParams,
    t: u64,
    pub lr: f64,
}

impl Adam {
    pub fn new(params: &ModelParams, lr: f64) -> Adam {
        Adam { m: params.zeros_like(), v: params.zeros_like(), t: 0, lr }
    }

    /// Apply one update from accumulated gradients (multiplied by
    /// `scale`, typically 1/batch) and zero the gradient buffers.
    pub fn step(&mut self, params: &mut ModelParams, grads: &mut ModelParams, scale: f64, mode: TuneMode) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);
        let mut ps = params.tensors_mut();
        let mut gs = grads.tensors_mut();
        let mut ms = self.m.tensors_mut();
        let mut vs = self.v.tensors_mut();
        for (((p, g), m), v) in ps.iter_mut().zip(&mut gs).zip(&mut ms).zip(&mut vs) {
            debug_assert_eq!(p.0, g.0);
            if mode.updates(&p.0) {
                for i in 0..p.1.len() {
                    let gi = g.1.data[i] * scale;
                    m.1.data[i] = BETA1 * m.1.data[i] + (1.0 - BETA1) * gi;
                    v.1.data[i] = BETA2 * v.1.data[i] + (1.0 - BETA2) * gi * gi;
                    let mhat = m.1.data[i] / bc1;
                    let vhat = v.1.data[i] / bc2;
                    p.1.data[i] -= self.lr * mhat / (vhat.sqrt() + ADAM_EPS);
                }
            }
            g.1.fill_zero();
        }
    }
}

/// One supervised example: encoded source and linearized-label target.
pub struct Example {
    pub id: String,
    pub task: Task,
    pub src: Vec<u32>,
    pub tgt: Vec<u32>,
}

/// Encode documents into training examples. Sources are truncated to the
/// model budget; a target that does not fit is an error, since truncating
/// labels would teach the model wrong answers.
pub fn build_examples(docs: &[Document], hyper: &Hyper) -> Result<Vec<Example>> {
    let vocab = Vocab::new();
    docs.iter()
        .map(|d| {
            let spec = builtin_task(d.category);
            let mut src = vocab.encode(d.source_for(d.category))?;
            src.truncate(hyper.max_src);
            let tgt = vocab.encode(&linearize(&spec, &d.labels)?)?;
            if tgt.len() + 1 > hyper.max_tgt {
                return Err(Error::Invalid(format!(
                    "target for {} is {} tokens, over the {}-token budget",
                    d.id,
                    tgt.len(),
                    hyper.max_tgt - 1
                )));
            }
            Ok(Example { id: d.id.clone(), task: d.category, src, tgt })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainOpts {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Examples per optimizer step (gradient accumulation).
    pub batch: usize,
    pub mode: TuneMode,
    /// Stop early once validation field accuracy reaches this value.
    pub target_field_acc: Option<f64>,
    /// Epochs between field-accuracy evaluations; 0 disables them.
    pub eval_every: usize,
}

impl Default for TrainOpts {
    fn default() -> Self {
        TrainOpts {
            epochs: 10,
            lr: default_lr(TuneMode::Full),
            seed: 42,
            batch: 8,
            mode: TuneMode::Full,
            target_field_acc: None,
            eval_every: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub field_acc: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainResult {
    pub epochs_run: usize,
    pub history: Vec<EpochStats>,
    pub final_field_acc: Option<f64>,
    pub reached_target: bool,
}

/// Fraction of (document, field) slots the model gets exactly right,
/// averaged per document. Both-absent counts as right.
pub fn field_accuracy(params: &ModelParams, docs: &[Document]) -> Result<f64> {
    if docs.is_empty() {
        return Err(Error::Invalid("field accuracy over zero documents".into()));
    }
    let mut total = 0.0;
    for d in docs {
        let spec = builtin_task(d.category);
        let ex = extract_with_model(params, &spec, d)?;
        let per_field = match_fields(&spec, &d.labels, &ex.fields, true);
        let correct = per_field.values().filter(|c| c.fp == 0 && c.r#fn == 0).count();
        total += correct as f64 / spec.fields.len() as f64;
    }
    Ok(total / docs.len() as f64)
}

/// Epoch ordering with equal-task sampling: every task contributes the
/// same number of examples (the largest task's count), smaller tasks
/// cycling through reshuffles of their pool.
fn epoch_order(by_task: &BTreeMap<Task, Vec<usize>>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let quota = by_task.values().map(Vec::len).max().unwrap_or(0);
    let mut order = Vec::new();
    for idxs in by_task.values() {
        let mut pool = Vec::with_capacity(quota);
        while pool.len() < quota {
            let mut copy = idxs.clone();
            copy.shuffle(rng);
            let take = (quota - pool.len()).min(copy.len());
            pool.extend(copy.into_iter().take(take));
        }
        order.extend(pool);
    }
    order.shuffle(rng);
    order
}

/// Supervised training on labeled documents. Validation documents drive
/// the per-epoch loss and (optionally) field-accuracy early stopping.
pub fn train(
    params: &mut ModelParams,
    train_docs: &[Document],
    valid_docs: &[Document],
    opts: &TrainOpts,
) -> Result<TrainResult> {
    if train_docs.is_empty() {
        return Err(Error::Invalid("no training documents".into()));
    }
    let train_ex = build_examples(train_docs, &params.hyper)?;
    let valid_ex = build_examples(valid_docs, &params.hyper)?;
    let mut by_task: BTreeMap<Task, Vec<usize>> = BTreeMap::new();
    for (i, ex) in train_ex.iter().enumerate() {
        by_task.entry(ex.task).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = Adam::new(params, opts.lr);
    let mut grads = params.zeros_like();
    let mut history = Vec::new();
    let mut reached_target = false;

    for epoch in 1..=opts.epochs {
        let order = epoch_order(&by_task, &mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(opts.batch.max(1)) {
            for &i in chunk {
                let ex = &train_ex[i];
                total += train_step(params, Some(ex.task), &ex.src, &ex.tgt, &mut grads);
            }
            adam.lr = warmed_lr(opts.lr, adam.t, opts.mode);
            adam.step(params, &mut grads, 1.0 / chunk.len() as f64, opts.mode);
        }
        let train_loss = total / order.len() as f64;

        // Validation passes are a large share of the wall time on a
        // single core, so they run on the evaluation cadence only.
        let eval_now = opts.eval_every > 0
            && !valid_docs.is_empty()
            && (epoch % opts.eval_every == 0 || epoch == opts.epochs);
        let valid_loss = if valid_ex.is_empty() || !eval_now {
            None
        } else {
            Some(
                valid_ex
                    .iter()
                    .map(|e| sequence_loss(params, Some(e.task), &e.src, &e.tgt))
                    .sum::<f64>()
                    / valid_ex.len() as f64,
            )
        };
        let field_acc = if eval_now { Some(field_accuracy(params, valid_docs)?) } else { None };

        log::info!(
            "epoch {epoch}: train loss {train_loss:.4}, valid loss {:?}, field acc {:?}",
            valid_loss,
            field_acc
        );
        history.push(EpochStats { epoch, train_loss, valid_loss, field_acc });

        if let (Some(target), Some(acc)) = (opts.target_field_acc, field_acc) {
            if acc >= target {
                reached_target = true;
                break;
            }
        }
    }

    Ok(TrainResult {
        epochs_run: history.len(),
        final_field_acc: history.iter().rev().find_map(|h| h.field_acc),
        history,
        reached_target,
    })
}

/// Replace the words covered by `spans` with numbered sentinels; the
/// target spells each sentinel's words back out and closes with the next
/// unused sentinel. Spans must be sorted, disjoint, and fewer than the
/// sentinel budget.
pub fn apply_spans(words: &[&str], spans: &[(usize, usize)]) -> Result<(Vec<u32>, Vec<u32>)> {
    assert!(spans.len() < N_SENTINELS, "too many spans");
    let vocab = Vocab::new();
    let space = vocab.encode(" ")?[0];
    let join = |pieces: Vec<Vec<u32>>| {
        let mut out = Vec::new();
        for (i, p) in pieces.into_iter().enumerate() {
            if i > 0 {
                out.push(space);
            }
            out.extend(p);
        }
        out
    };

    let mut src_pieces = Vec::new();
    let mut tgt_pieces = Vec::new();
    let mut i = 0;
    let mut span_iter = spans.iter().peekable();
    while i < words.len() {
        if let Some(&&(start, len)) = span_iter.peek() {
            if start == i {
                let k = spans.len() - span_iter.len();
                src_pieces.push(vec![vocab.sentinel(k)]);
                tgt_pieces.push(vec![vocab.sentinel(k)]);
                for w in &words[start..start + len] {
                    tgt_pieces.push(vocab.encode(w)?);
                }
                i = start + len;
                span_iter.next();
                continue;
            }
        }
        src_pieces.push(vocab.encode(words[i])?);
        i += 1;
    }
    tgt_pieces.push(vec![vocab.sentinel(spans.len())]);
    Ok((join(src_pieces), join(tgt_pieces)))
}

/// Sample corruption spans: each word position starts a span with
/// probability 0.05, spans run 1–5 words, and at least one span is always
/// produced so every example trains the decoder.
fn sample_spans(n_words: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < n_words && spans.len() < N_SENTINELS - 1 {
        if rng.gen_bool(0.05) {
            let len = rng.gen_range(1..=5usize).min(n_words - i);
            spans.push((i, len));
            i += len;
        } else {
            i += 1;
        }
    }
    if spans.is_empty() && n_words > 0 {
        let start = rng.gen_range(0..n_words);
        let len = rng.gen_range(1..=5usize).min(n_words - start);
        spans.push((start, len));
    }
    spans
}

#[derive(Clone, Debug)]
pub struct PretrainOpts {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub batch: usize,
}

impl Default for PretrainOpts {
    fn default() -> Self {
        PretrainOpts { epochs: 3, lr: default_lr(TuneMode::BaseOnly), seed: 42, batch: 8 }
    }
}

/// Denoising pretraining on raw document text (facts plus ruling). Only
/// the shared weights move; the prompts stay untouched, and no prompt is
/// prepended since the objective is task-free.
pub fn pretrain_span_corruption(
    params: &mut ModelParams,
    docs: &[Document],
    opts: &PretrainOpts,
) -> Result<TrainResult> {
    let texts: Vec<String> = docs
        .iter()
        .map(|d| {
            let mut s = d.facts.trim().to_string();
            if !d.ruling.trim().is_empty() {
                if !s.is_empty() {
                    s.push(' ');
                }
                s.push_str(d.ruling.trim());
            }
            s
        })
        .filter(|s| !s.is_empty())
        .collect();
    if texts.is_empty() {
        return Err(Error::Invalid("no text to pretrain on".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = Adam::new(params, opts.lr);
    let mut grads = params.zeros_like();
    let mut history = Vec::new();
    let max_tgt = params.hyper.max_tgt;
    let max_src = params.hyper.max_src;

    for epoch in 1..=opts.epochs {
        let mut order: Vec<usize> = (0..texts.len()).collect();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for chunk in order.chunks(opts.batch.max(1)) {
            let mut in_batch = 0usize;
            for &ti in chunk {
                let words: Vec<&str> = texts[ti].split_whitespace().collect();
                if words.is_empty() {
                    continue;
                }
                let spans = sample_spans(words.len(), &mut rng);
                let (mut src, mut tgt) = apply_spans(&words, &spans)?;
                src.truncate(max_src);
                tgt.truncate(max_tgt - 1);
                total += train_step(params, None, &src, &tgt, &mut grads);
                in_batch += 1;
            }
            if in_batch > 0 {
                adam.lr = warmed_lr(opts.lr, adam.t, TuneMode::BaseOnly);
                adam.step(params, &mut grads, 1.0 / in_batch as f64, TuneMode::BaseOnly);
                count += in_batch;
            }
        }
        let train_loss = total / count.max(1) as f64;
        log::info!("pretrain epoch {epoch}: loss {train_loss:.4}");
        history.push(EpochStats { epoch, train_loss, valid_loss: None, field_acc: None });
    }

    Ok(TrainResult {
        epochs_run: history.len(),
        history,
        final_field_acc: None,
        reached_target: false,
    })
}
