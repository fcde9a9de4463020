//! Generative extraction: a small character-level encoder–decoder with
//! per-task soft prompts, trained from scratch in pure Rust.
//!
//! The pieces: [`vocab`] fixes the token space, [`linalg`] holds the f64
//! kernels, [`model`] the forward/backward passes, [`train`] the
//! optimizers and objectives (supervised and span-corruption), [`decode`]
//! greedy generation with KV caches, [`gradcheck`] the numeric oracle for
//! the backward pass, and [`checkpoint`] durable model files.

pub mod checkpoint;
pub mod decode;
pub mod gradcheck;
pub mod linalg;
pub mod model;
pub mod train;
pub mod vocab;

pub use checkpoint::{load_model, save_model};
pub use decode::{extract_with_model, generate, GenOutput};
pub use gradcheck::{grad_check, GradCheckReport};
pub use model::{Hyper, ModelParams};
pub use train::{
    build_examples, default_lr, field_accuracy, pretrain_span_corruption, train, PretrainOpts,
    TrainOpts, TrainResult, TuneMode,
};
pub use vocab::Vocab;
